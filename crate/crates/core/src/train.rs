//! Loss assembly, RMSprop, metrics and the training loop.

use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{AdError, Array, Tape, Var};
use crate::error::{NutmError, Result};
use crate::machine::{Machine, SequenceTrace};
use crate::rng::{stream, Stream};
use crate::tasks::{generate_sequenced, generate_task, TaskInstance, TaskSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Squared-gradient smoothing.
    pub alpha: f64,
    pub epsilon: f64,
    pub clip: f64,
    pub batch: usize,
    pub iterations: usize,
    pub eta0: f64,
    pub eta_decay: f64,
    pub decay_interval: usize,
    pub seed: u64,
    pub log_every: usize,
    /// 0 disables periodic checkpoints (the initial and final ones remain).
    pub checkpoint_every: usize,
    /// Record elapsed seconds in the metrics. Off by default so that reruns
    /// produce identical files.
    pub wallclock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            momentum: 0.9,
            alpha: 0.95,
            epsilon: 1e-8,
            clip: 10.0,
            batch: 16,
            iterations: 100_000,
            eta0: 0.1,
            eta_decay: 0.9,
            decay_interval: 1000,
            seed: 0,
            log_every: 100,
            checkpoint_every: 0,
            wallclock: false,
        }
    }
}

const TRAIN_KEYS: [&str; 14] = [
    "learning_rate",
    "momentum",
    "alpha",
    "epsilon",
    "clip",
    "batch",
    "iterations",
    "eta0",
    "eta_decay",
    "decay_interval",
    "seed",
    "log_every",
    "checkpoint_every",
    "wallclock",
];

impl TrainConfig {
    pub fn keys() -> &'static [&'static str] {
        &TRAIN_KEYS
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse()
                .map_err(|_| format!("{key}: cannot parse {v:?} as a number"))
        }
        match key {
            "learning_rate" => self.learning_rate = num(key, value)?,
            "momentum" => self.momentum = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "clip" => self.clip = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "eta0" => self.eta0 = num(key, value)?,
            "eta_decay" => self.eta_decay = num(key, value)?,
            "decay_interval" => self.decay_interval = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "log_every" => self.log_every = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            "wallclock" => {
                self.wallclock = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(format!("wallclock: expected true|false, got {value:?}")),
                }
            }
            _ => return Err(format!("unknown train key {key:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(NutmError::Config(m.into()));
        if !(self.learning_rate > 0.0) {
            return err("learning_rate must be positive");
        }
        if !(self.clip > 0.0) {
            return err("clip must be positive");
        }
        if !(self.eta_decay > 0.0 && self.eta_decay <= 1.0) {
            return err("eta_decay must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.alpha) || !(0.0..1.0).contains(&self.momentum) {
            return err("alpha and momentum must be in [0, 1)");
        }
        if !(self.epsilon > 0.0) || self.eta0 < 0.0 {
            return err("epsilon must be positive and eta0 non-negative");
        }
        if self.batch == 0 || self.decay_interval == 0 || self.log_every == 0 {
            return err("batch, decay_interval and log_every must be at least 1");
        }
        Ok(())
    }
}

/// Regularizer weight at `iteration`: `eta0 * decay^floor(iteration / interval)`.
pub fn anneal_eta(iteration: usize, cfg: &TrainConfig) -> f64 {
    let steps = (iteration / cfg.decay_interval) as i32;
    cfg.eta0 * cfg.eta_decay.powi(steps)
}

/// Masked binary cross-entropy summed over bits and scored timesteps,
/// divided by `batch`.
pub fn prediction_loss(
    tape: &mut Tape,
    logits: &[Var],
    targets: &[Array],
    mask: &[bool],
    batch: usize,
) -> Result<Var, AdError> {
    if logits.len() != targets.len() || logits.len() != mask.len() {
        return Err(AdError::InvalidArgument(format!(
            "prediction_loss: {} logits, {} targets, {} mask entries",
            logits.len(),
            targets.len(),
            mask.len()
        )));
    }
    let mut terms = Vec::new();
    for t in (0..logits.len()).filter(|&t| mask[t]) {
        terms.push(tape.bce_with_logits(logits[t], targets[t].data())?);
    }
    if terms.is_empty() {
        return Err(AdError::InvalidArgument(
            "prediction_loss: mask selects no timestep".into(),
        ));
    }
    let all = tape.concat(&terms)?;
    let total = tape.sum(all);
    Ok(tape.affine(total, 1.0 / batch as f64, 0.0))
}

/// Error tally over scored bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BitScore {
    pub sequences: usize,
    pub errors: usize,
    pub bits: usize,
}

impl BitScore {
    /// Compares `sigmoid(logit) > 0.5` against the targets on masked steps.
    pub fn of_sequence(logits: &[Array], targets: &[Array], mask: &[bool]) -> Self {
        let mut s = BitScore {
            sequences: 1,
            ..Self::default()
        };
        for t in (0..mask.len()).filter(|&t| mask[t]) {
            for (&z, &y) in logits[t].data().iter().zip(targets[t].data()) {
                let bit = if z > 0.0 { 1.0 } else { 0.0 };
                s.errors += usize::from(bit != y);
                s.bits += 1;
            }
        }
        s
    }

    pub fn merge(&mut self, other: BitScore) {
        self.sequences += other.sequences;
        self.errors += other.errors;
        self.bits += other.bits;
    }

    /// Mean wrong bits per sequence.
    pub fn bit_error_per_sequence(&self) -> f64 {
        self.errors as f64 / self.sequences.max(1) as f64
    }

    pub fn bits_per_sequence(&self) -> f64 {
        self.bits as f64 / self.sequences.max(1) as f64
    }

    /// `1 - errors / bits`, i.e. one minus bit error over total masked
    /// bits.
    pub fn bit_accuracy(&self) -> f64 {
        if self.bits == 0 {
            return 1.0;
        }
        1.0 - self.errors as f64 / self.bits as f64
    }

    /// Fraction of scored bits that are wrong.
    pub fn error_rate(&self) -> f64 {
        1.0 - self.bit_accuracy()
    }
}

/// RMSprop with momentum, in the `v <- a v + (1-a) g^2`,
/// `b <- m b + g / (sqrt(v) + eps)`, `p <- p - lr b` form. Gradients are
/// clipped elementwise first.
#[derive(Clone, Debug, PartialEq)]
pub struct RmsProp {
    square: Vec<Vec<f64>>,
    velocity: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(params: &[Array]) -> Self {
        let zeros = || params.iter().map(|p| vec![0.0; p.len()]).collect();
        Self {
            square: zeros(),
            velocity: zeros(),
        }
    }

    pub fn step(&mut self, params: &mut [Array], grads: &[Array], cfg: &TrainConfig) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            assert_eq!(p.shape(), g.shape(), "gradient shape");
            let (sq, vel) = (&mut self.square[i], &mut self.velocity[i]);
            for (j, (w, &raw)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                let g = raw.clamp(-cfg.clip, cfg.clip);
                sq[j] = cfg.alpha * sq[j] + (1.0 - cfg.alpha) * g * g;
                vel[j] = cfg.momentum * vel[j] + g / (sq[j].sqrt() + cfg.epsilon);
                *w -= cfg.learning_rate * vel[j];
            }
        }
    }
}

/// Where training sequences come from.
#[derive(Clone, Debug, PartialEq)]
pub enum TaskSource {
    /// One task, optionally zero-padded to wider `(input, output)` rows.
    Single {
        spec: TaskSpec,
        pad: Option<(usize, usize)>,
    },
    Sequenced(Vec<TaskSpec>),
}

impl TaskSource {
    pub fn single(spec: TaskSpec) -> Self {
        TaskSource::Single { spec, pad: None }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TaskInstance> {
        match self {
            TaskSource::Single { spec, pad } => {
                let inst = generate_task(spec, rng)?;
                match pad {
                    Some((i, o)) => inst.padded(*i, *o),
                    None => Ok(inst),
                }
            }
            TaskSource::Sequenced(specs) => generate_sequenced(specs, rng),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TaskSource::Single { spec, .. } => spec.validate(),
            TaskSource::Sequenced(specs) => specs.iter().try_for_each(TaskSpec::validate),
        }
    }
}

/// Outcome of one optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub prediction: f64,
    pub regularizer: f64,
    pub eta: f64,
    pub score: BitScore,
}

/// Loss value and gradient of one batch.
pub struct BatchGradient {
    pub stats: StepStats,
    pub grads: Vec<Array>,
}

/// Prediction loss plus `eta` times the key regularizer, with gradients
/// summed over the batch in order.
pub fn total_loss_gradient<R: Rng + ?Sized>(
    machine: &Machine,
    batch: &[TaskInstance],
    eta: f64,
    gumbel: &mut R,
) -> Result<BatchGradient> {
    let mut grads: Vec<Array> = machine
        .params()
        .values()
        .iter()
        .map(|p| Array::zeros(p.shape()))
        .collect();
    let mut add = |g: &crate::autodiff::Gradients, vars: &[Var]| {
        for (acc, &v) in grads.iter_mut().zip(vars) {
            for (a, b) in acc.data_mut().iter_mut().zip(g.wrt(v).data()) {
                *a += b;
            }
        }
    };
    let mut score = BitScore::default();
    let mut prediction = 0.0;
    for inst in batch {
        let mut tape = Tape::new();
        let bound = machine.bind(&mut tape, true);
        let (logits, _) = machine.run_sequence(&mut tape, &bound, &inst.inputs, gumbel)?;
        let loss = prediction_loss(&mut tape, &logits, &inst.targets, &inst.mask, batch.len())?;
        prediction += tape.scalar(loss);
        let values: Vec<Array> = logits.iter().map(|&v| tape.value(v).clone()).collect();
        score.merge(BitScore::of_sequence(&values, &inst.targets, &inst.mask));
        add(&tape.backward(loss)?, bound.vars());
    }
    let mut regularizer = 0.0;
    if eta != 0.0 {
        let mut tape = Tape::new();
        let bound = machine.bind(&mut tape, true);
        if let Some(reg) = machine.regularizer(&mut tape, &bound)? {
            regularizer = tape.scalar(reg);
            let scaled = tape.affine(reg, eta, 0.0);
            add(&tape.backward(scaled)?, bound.vars());
        }
    } else {
        let mut tape = Tape::new();
        let bound = machine.bind(&mut tape, false);
        if let Some(reg) = machine.regularizer(&mut tape, &bound)? {
            regularizer = tape.scalar(reg);
        }
    }
    Ok(BatchGradient {
        stats: StepStats {
            loss: prediction + eta * regularizer,
            prediction,
            regularizer,
            eta,
            score,
        },
        grads,
    })
}

/// One row of the metrics file.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub iteration: usize,
    pub loss: f64,
    pub bit_err: f64,
    pub bit_acc: f64,
    pub eta: f64,
    pub seconds: f64,
}

pub const METRICS_HEADER: &str = "iter,loss,bit_err,bit_acc,eta,seconds";

impl MetricRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.iteration, self.loss, self.bit_err, self.bit_acc, self.eta, self.seconds
        )
    }
}

pub enum Event<'a> {
    Metric(&'a MetricRecord),
    /// Snapshot point; the iteration count is the number of completed steps.
    Checkpoint(usize, &'a Machine),
}

/// Machine, optimizer state and random streams of one run.
pub struct Trainer {
    pub machine: Machine,
    pub cfg: TrainConfig,
    optimizer: RmsProp,
    iteration: usize,
    task_rng: ChaCha8Rng,
    gumbel_rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(machine: Machine, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let optimizer = RmsProp::new(machine.params().values());
        Ok(Self {
            task_rng: stream(cfg.seed, Stream::Task),
            gumbel_rng: stream(cfg.seed, Stream::Gumbel),
            machine,
            cfg,
            optimizer,
            iteration: 0,
        })
    }

    /// Completed optimizer steps.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Draws a batch, computes the total loss and applies one update.
    pub fn step(&mut self, source: &TaskSource) -> Result<StepStats> {
        let batch = (0..self.cfg.batch)
            .map(|_| source.sample(&mut self.task_rng))
            .collect::<Result<Vec<_>>>()?;
        let eta = anneal_eta(self.iteration, &self.cfg);
        let BatchGradient { stats, grads } =
            total_loss_gradient(&self.machine, &batch, eta, &mut self.gumbel_rng)?;
        if !stats.loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
            return Err(NutmError::Diverged {
                iteration: self.iteration,
                loss: stats.loss,
            });
        }
        self.optimizer
            .step(self.machine.params_mut().values_mut(), &grads, &self.cfg);
        self.iteration += 1;
        Ok(stats)
    }

    /// Runs `iterations` steps. Emits a metric every `log_every` steps
    /// (averaged over the steps since the previous one), a checkpoint before
    /// the first step, every `checkpoint_every` steps, and at the end. The
    /// callback may stop the run early; the final checkpoint is still
    /// emitted.
    pub fn run(
        &mut self,
        source: &TaskSource,
        iterations: usize,
        on_event: &mut dyn FnMut(Event<'_>) -> ControlFlow<()>,
    ) -> Result<Vec<MetricRecord>> {
        source.validate()?;
        let start = Instant::now();
        let mut records = Vec::new();
        let mut stop = on_event(Event::Checkpoint(self.iteration, &self.machine)).is_break();
        let (mut loss_sum, mut score, mut steps) = (0.0, BitScore::default(), 0usize);
        let mut last_checkpoint = self.iteration;
        let end = self.iteration + iterations;
        while !stop && self.iteration < end {
            let stats = self.step(source)?;
            loss_sum += stats.loss;
            score.merge(stats.score);
            steps += 1;
            if self.iteration.is_multiple_of(self.cfg.log_every) || self.iteration == end {
                let rec = MetricRecord {
                    iteration: self.iteration,
                    loss: loss_sum / steps as f64,
                    bit_err: score.bit_error_per_sequence(),
                    bit_acc: score.bit_accuracy(),
                    eta: stats.eta,
                    seconds: if self.cfg.wallclock {
                        start.elapsed().as_secs_f64()
                    } else {
                        0.0
                    },
                };
                (loss_sum, score, steps) = (0.0, BitScore::default(), 0);
                stop |= on_event(Event::Metric(&rec)).is_break();
                records.push(rec);
            }
            if self.cfg.checkpoint_every > 0
                && self.iteration.is_multiple_of(self.cfg.checkpoint_every)
            {
                last_checkpoint = self.iteration;
                stop |= on_event(Event::Checkpoint(self.iteration, &self.machine)).is_break();
            }
        }
        if last_checkpoint != self.iteration {
            let _ = on_event(Event::Checkpoint(self.iteration, &self.machine));
        }
        Ok(records)
    }
}

/// Bit-error tally of `machine` on `count` sequences from the `eval`
/// stream of `seed`.
pub fn evaluate(
    machine: &Machine,
    source: &TaskSource,
    count: usize,
    seed: u64,
) -> Result<BitScore> {
    source.validate()?;
    let mut task_rng = stream(seed, Stream::Eval);
    let mut gumbel = stream(seed, Stream::Gumbel);
    let mut score = BitScore::default();
    for _ in 0..count {
        let inst = source.sample(&mut task_rng)?;
        let (logits, _) = machine.infer(&inst.inputs, &mut gumbel)?;
        score.merge(BitScore::of_sequence(&logits, &inst.targets, &inst.mask));
    }
    Ok(score)
}

/// Trace CSV: a header, then `step,head,kind,address...,program...` per
/// head per step.
pub fn trace_lines(trace: &SequenceTrace) -> String {
    let mut s = String::from("step,head,kind");
    if let Some(h) = trace.steps.first().and_then(|st| st.heads.first()) {
        for i in 0..h.address.len() {
            let _ = write!(s, ",address{i}");
        }
        for i in 0..h.program.len() {
            let _ = write!(s, ",program{i}");
        }
    }
    s.push('\n');
    for (t, step) in trace.steps.iter().enumerate() {
        for (n, h) in step.heads.iter().enumerate() {
            let _ = write!(s, "{t},{n},{}", h.kind.name());
            for v in h.address.iter().chain(&h.program) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
    }
    s
}

/// One comma-separated controller feature vector per step.
pub fn state_lines(trace: &SequenceTrace) -> String {
    let mut s = String::new();
    for step in &trace.steps {
        let row: Vec<String> = step.features.iter().map(f64::to_string).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::MachineConfig;
    use crate::tasks::Span;

    #[test]
    fn eta_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(anneal_eta(0, &cfg), 0.1);
        assert!((anneal_eta(1000, &cfg) - 0.09).abs() < 1e-15);
        assert_eq!(anneal_eta(999, &cfg), 0.1);
        let mut prev = f64::INFINITY;
        for it in (0..50_000).step_by(250) {
            let e = anneal_eta(it, &cfg);
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn zero_logits_cost_ln2_per_bit() {
        let mut tape = Tape::new();
        let logits: Vec<Var> = (0..3).map(|_| tape.constant(Array::zeros(&[4]))).collect();
        let targets = vec![Array::vector(vec![1.0, 0.0, 1.0, 1.0]); 3];
        let mask = [false, true, true];
        let loss = prediction_loss(&mut tape, &logits, &targets, &mask, 2).unwrap();
        assert!((tape.scalar(loss) - 8.0 * 2f64.ln() / 2.0).abs() < 1e-12);
        assert!(prediction_loss(&mut tape, &logits, &targets, &[false; 3], 1).is_err());
    }

    #[test]
    fn saturated_logits_cost_nothing() {
        let mut tape = Tape::new();
        let z = tape.constant(Array::vector(vec![40.0, -40.0]));
        let loss = prediction_loss(
            &mut tape,
            &[z],
            &[Array::vector(vec![1.0, 0.0])],
            &[true],
            1,
        )
        .unwrap();
        assert!(tape.scalar(loss) < 1e-15);
    }

    #[test]
    fn bit_errors() {
        let targets = vec![Array::vector(vec![1.0; 8]); 10];
        let mask = vec![true; 10];
        let wrong = vec![Array::vector(vec![-1.0; 8]); 10];
        assert_eq!(BitScore::of_sequence(&wrong, &targets, &mask).errors, 80);
        let mut one = vec![Array::vector(vec![1.0; 8]); 10];
        assert_eq!(BitScore::of_sequence(&one, &targets, &mask).errors, 0);
        one[3].data_mut()[5] = -2.0;
        let s = BitScore::of_sequence(&one, &targets, &mask);
        assert_eq!(s.errors, 1);
        assert_eq!(s.bit_accuracy(), 1.0 - 1.0 / 80.0);
    }

    #[test]
    fn rmsprop_basics() {
        let cfg = TrainConfig::default();
        let mut p = vec![Array::vector(vec![1.0, 2.0])];
        let mut opt = RmsProp::new(&p);
        opt.step(&mut p, &[Array::zeros(&[2])], &cfg);
        assert_eq!(p[0].data(), &[1.0, 2.0]);

        // A clipped gradient of 100 moves the weight exactly as one of 10.
        let mut a = vec![Array::vector(vec![0.0])];
        let mut b = a.clone();
        let (mut oa, mut ob) = (RmsProp::new(&a), RmsProp::new(&b));
        oa.step(&mut a, &[Array::vector(vec![100.0])], &cfg);
        ob.step(&mut b, &[Array::vector(vec![10.0])], &cfg);
        assert_eq!(a, b);

        let mut c = vec![Array::vector(vec![0.5])];
        let mut oc = RmsProp::new(&c);
        let (mut d, mut od) = (c.clone(), oc.clone());
        oc.step(&mut c, &[Array::vector(vec![0.3])], &cfg);
        od.step(&mut d, &[Array::vector(vec![0.3])], &cfg);
        assert_eq!(c, d);
        assert_eq!(oc, od);
    }

    fn tiny_machine() -> Machine {
        Machine::build(
            MachineConfig {
                hidden: 6,
                ..MachineConfig::nutm(5, 3, 6, 6, 3, 2)
            },
            3,
        )
        .unwrap()
    }

    #[test]
    fn loss_gradient_is_linear_in_eta() {
        let m = tiny_machine();
        let spec = TaskSpec::copy(3, Span::new(1, 3));
        let mut rng = stream(1, Stream::Task);
        let batch: Vec<TaskInstance> = (0..2)
            .map(|_| generate_task(&spec, &mut rng).unwrap())
            .collect();
        let g = |eta| {
            total_loss_gradient(&m, &batch, eta, &mut stream(0, Stream::Gumbel))
                .unwrap()
                .grads
        };
        let (g0, g1, g2) = (g(0.0), g(0.1), g(0.3));
        for ((a, b), c) in g0.iter().zip(&g1).zip(&g2) {
            for ((x, y), z) in a.data().iter().zip(b.data()).zip(c.data()) {
                // reg gradient estimated from eta = 0.1 must predict eta = 0.3.
                let reg = (y - x) / 0.1;
                assert!((x + 0.3 * reg - z).abs() < 1e-10);
            }
        }
        let keys = m.params().find("read0.keys").unwrap();
        assert!(g1[keys.index()].max_abs_diff(&g0[keys.index()]) > 0.0);
    }

    #[test]
    fn zero_iterations_emit_only_initial_checkpoint() {
        let mut t = Trainer::new(tiny_machine(), TrainConfig::default()).unwrap();
        let mut seen = Vec::new();
        let recs = t
            .run(
                &TaskSource::single(TaskSpec::copy(3, Span::new(1, 2))),
                0,
                &mut |e| {
                    if let Event::Checkpoint(i, _) = e {
                        seen.push(i);
                    }
                    ControlFlow::Continue(())
                },
            )
            .unwrap();
        assert!(recs.is_empty());
        assert_eq!(seen, vec![0]);
    }

    #[test]
    fn training_is_reproducible() {
        let cfg = TrainConfig {
            batch: 2,
            log_every: 2,
            seed: 5,
            ..TrainConfig::default()
        };
        let source = TaskSource::single(TaskSpec::copy(3, Span::new(1, 3)));
        let run = || {
            let mut t = Trainer::new(tiny_machine(), cfg.clone()).unwrap();
            let recs = t
                .run(&source, 6, &mut |_| ControlFlow::Continue(()))
                .unwrap();
            (recs, t.machine.params().clone())
        };
        let (a, pa) = run();
        let (b, pb) = run();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        assert_eq!(a.len(), 3);
        assert_ne!(&pa, tiny_machine().params());
    }

    #[test]
    fn trace_rows_per_step() {
        let m = tiny_machine();
        let inst = generate_task(
            &TaskSpec::copy(3, Span::exactly(2)),
            &mut stream(0, Stream::Task),
        )
        .unwrap();
        let (_, trace) = m
            .infer(&inst.inputs, &mut stream(0, Stream::Gumbel))
            .unwrap();
        let lines = trace_lines(&trace);
        assert_eq!(lines.lines().count(), 1 + inst.len() * 2);
        for line in lines.lines().skip(1) {
            let cols: Vec<f64> = line
                .split(',')
                .skip(3)
                .map(|v| v.parse().unwrap())
                .collect();
            let program: f64 = cols[6..].iter().sum();
            assert!((program - 1.0).abs() < 1e-12);
        }
        assert_eq!(state_lines(&trace).lines().count(), inst.len());
    }
}
