use std::fs;
use std::io::{BufWriter, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use nutm_core::autodiff::Primitive;
use nutm_core::checkpoint;
use nutm_core::error::NutmError;
use nutm_core::machine::{Machine, MachineConfig};
use nutm_core::pca::pca_project;
use nutm_core::rng::{stream, Stream};
use nutm_core::tasks::{TaskKind, TaskSpec};
use nutm_core::train::{
    evaluate, state_lines, trace_lines, BitScore, Event, TaskSource, Trainer, METRICS_HEADER,
};
use nutm_core::verify::{gradcheck_suite, THRESHOLD};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig, Split, TaskSetup};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] NutmError),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for verification or run failures, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Core(
                NutmError::Config(_) | NutmError::Task(_) | NutmError::Checkpoint(_),
            ) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn load_config(path: &Path, task_overrides: Option<&str>) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    RunConfig::parse(&text, task_overrides)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_checkpoint(path: &Path, cfg: &RunConfig) -> CliResult<Machine> {
    let (machine, _) = checkpoint::load(path).map_err(|e| match e {
        NutmError::Io(io) => {
            CliError::Usage(format!("cannot read checkpoint {}: {io}", path.display()))
        }
        other => CliError::Usage(format!("{}: {other}", path.display())),
    })?;
    let (iw, ow) = cfg.task.widths();
    let mc = machine.config();
    if (mc.input_width, mc.output_width) != (iw, ow) {
        return Err(CliError::Usage(format!(
            "checkpoint expects {}-wide inputs and {}-wide outputs, the task uses {iw} and {ow}",
            mc.input_width, mc.output_width
        )));
    }
    Ok(machine)
}

/// Writes metrics rows and checkpoints as training reports them.
struct Sink {
    metrics: BufWriter<fs::File>,
    out: PathBuf,
    best: f64,
    error: Option<NutmError>,
}

impl Sink {
    fn handle(&mut self, e: Event<'_>) -> ControlFlow<()> {
        let res = match e {
            Event::Metric(r) => {
                self.best = self.best.min(r.bit_err);
                writeln!(self.metrics, "{}", r.csv_line()).map_err(NutmError::from)
            }
            Event::Checkpoint(i, m) => {
                checkpoint::save(&self.out.join(format!("ckpt-{i:08}.bin")), m, i)
            }
        };
        match res {
            Ok(()) => ControlFlow::Continue(()),
            Err(err) => {
                self.error = Some(err);
                ControlFlow::Break(())
            }
        }
    }
}

pub struct TrainArgs<'a> {
    pub config: &'a Path,
    pub out: &'a Path,
    pub seed: Option<u64>,
    pub iters: Option<usize>,
    pub task: Option<&'a str>,
}

/// Trains and writes `metrics.csv`, `ckpt-<iter>.bin` snapshots,
/// `final.ckpt` and `summary.txt` into the output directory.
pub fn train(args: TrainArgs<'_>) -> CliResult {
    let mut cfg = load_config(args.config, args.task)?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(n) = args.iters {
        match &mut cfg.task {
            TaskSetup::Continual { phases } => phases.iter_mut().for_each(|p| p.iterations = n),
            _ => cfg.train.iterations = n,
        }
    }
    fs::create_dir_all(args.out)?;
    let machine = Machine::build(cfg.machine.clone(), cfg.train.seed)?;
    let params = machine.count_parameters();
    let mut trainer = Trainer::new(machine, cfg.train.clone())?;

    let mut sink = Sink {
        metrics: BufWriter::new(fs::File::create(args.out.join("metrics.csv"))?),
        out: args.out.to_path_buf(),
        best: f64::INFINITY,
        error: None,
    };
    writeln!(sink.metrics, "{METRICS_HEADER}")?;
    let phases: Vec<(String, TaskSource, usize)> = match &cfg.task {
        TaskSetup::Continual { phases } => cfg
            .task
            .sources(Split::Train)
            .into_iter()
            .zip(phases)
            .map(|((name, src), p)| (name, src, p.iterations))
            .collect(),
        _ => cfg
            .task
            .sources(Split::Train)
            .into_iter()
            .map(|(name, src)| (name, src, cfg.train.iterations))
            .collect(),
    };
    let mut boundaries = Vec::new();
    for (name, source, iters) in &phases {
        let result = trainer.run(source, *iters, &mut |e| sink.handle(e));
        if let Some(e) = sink.error.take() {
            return Err(e.into());
        }
        result?;
        boundaries.push((name.clone(), trainer.iteration()));
    }
    sink.metrics.flush()?;
    let best = sink.best;
    checkpoint::save(
        &args.out.join("final.ckpt"),
        &trainer.machine,
        trainer.iteration(),
    )?;

    let mut summary = String::new();
    summary.push_str(&format!("iterations = {}\n", trainer.iteration()));
    summary.push_str(&format!("parameters = {params}\n"));
    summary.push_str(&format!("best_bit_err = {best}\n"));
    for (name, end) in &boundaries {
        summary.push_str(&format!("phase {name} ends at {end}\n"));
    }
    fs::write(args.out.join("summary.txt"), &summary)?;
    println!(
        "trained {} iterations; best bit error per sequence {best}; outputs in {}",
        trainer.iteration(),
        args.out.display()
    );
    Ok(())
}

pub struct EvalArgs<'a> {
    pub config: &'a Path,
    pub checkpoint: &'a Path,
    pub seed: u64,
    pub task: Option<&'a str>,
    pub split: Split,
    pub count: usize,
}

/// Scores a checkpoint; prints one line per task and returns the scores.
pub fn eval(args: EvalArgs<'_>) -> CliResult<Vec<(String, BitScore)>> {
    let cfg = load_config(args.config, args.task)?;
    let machine = load_checkpoint(args.checkpoint, &cfg)?;
    let mut out = Vec::new();
    for (name, source) in cfg.task.sources(args.split) {
        let score = evaluate(&machine, &source, args.count, args.seed)?;
        println!(
            "{name}: bit_error_per_sequence {:.4} bit_accuracy {:.6} over {} sequences",
            score.bit_error_per_sequence(),
            score.bit_accuracy(),
            score.sequences
        );
        out.push((name, score));
    }
    Ok(out)
}

/// Runs the finite-difference suite; fails if any component exceeds the
/// threshold.
pub fn gradcheck(fault: Option<&str>) -> CliResult {
    let fault = fault
        .map(|name| {
            Primitive::from_name(name)
                .ok_or_else(|| CliError::Usage(format!("unknown primitive {name:?}")))
        })
        .transpose()?;
    let reports = gradcheck_suite(fault)?;
    let mut failed = Vec::new();
    for r in &reports {
        let status = if r.passed() { "ok" } else { "FAIL" };
        println!(
            "{:<16} max_rel_error {:.3e} over {:>4} entries  {status}",
            r.name, r.max_rel_error, r.entries
        );
        if !r.passed() {
            failed.push(r.name.clone());
        }
    }
    if failed.is_empty() {
        println!("all {} components within {THRESHOLD:e}", reports.len());
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "gradient check failed for: {}",
            failed.join(", ")
        )))
    }
}

pub struct TraceArgs<'a> {
    pub config: &'a Path,
    pub checkpoint: &'a Path,
    pub seed: u64,
    pub task: Option<&'a str>,
    pub split: Split,
    pub out: &'a Path,
}

/// Runs one sequence and writes `trace.csv`, `states.csv`, `pca.csv` and
/// `instance.txt`. Continual setups trace the first phase's task.
pub fn trace(args: TraceArgs<'_>) -> CliResult<PathBuf> {
    let cfg = load_config(args.config, args.task)?;
    let machine = load_checkpoint(args.checkpoint, &cfg)?;
    let (_, source) = cfg
        .task
        .sources(args.split)
        .into_iter()
        .next()
        .expect("every setup has a task");
    let inst = source.sample(&mut stream(args.seed, Stream::Task))?;
    let (logits, trace) = machine
        .infer(&inst.inputs, &mut stream(args.seed, Stream::Gumbel))
        .map_err(NutmError::from)?;
    fs::create_dir_all(args.out)?;
    fs::write(args.out.join("trace.csv"), trace_lines(&trace))?;
    fs::write(args.out.join("states.csv"), state_lines(&trace))?;
    fs::write(args.out.join("instance.txt"), inst.to_text())?;
    let states: Vec<Vec<f64>> = trace.steps.iter().map(|s| s.features.clone()).collect();
    let mut pca_text = String::new();
    if states.len() >= 2 {
        let pca = pca_project(&states)?;
        for p in &pca.projections {
            pca_text.push_str(&format!("{},{}\n", p[0], p[1]));
        }
        if pca.rank_deficient {
            eprintln!("note: controller states span a single direction; second component zeroed");
        }
    }
    fs::write(args.out.join("pca.csv"), pca_text)?;
    let score = BitScore::of_sequence(&logits, &inst.targets, &inst.mask);
    println!(
        "traced {} steps x {} heads; {} wrong bits; files in {}",
        inst.len(),
        machine.config().heads(),
        score.errors,
        args.out.display()
    );
    Ok(args.out.to_path_buf())
}

/// Reference sizes of the copy-task models.
pub fn reference_models() -> [(&'static str, MachineConfig, usize); 2] {
    let copy = TaskSpec::train(TaskKind::Copy);
    let (iw, ow) = (copy.input_width(), copy.output_width());
    [
        ("ntm_copy", MachineConfig::ntm(iw, ow, 100, 128, 20), 63_260),
        (
            "nutm_copy",
            MachineConfig::nutm(iw, ow, 80, 128, 20, 2),
            52_206,
        ),
    ]
}

/// Prints parameter counts of the reference models (and of `config` if
/// given); fails if a reference count is off target.
pub fn params(config: Option<&Path>) -> CliResult {
    let mut mismatched = Vec::new();
    for (name, cfg, target) in reference_models() {
        let count = Machine::build(cfg, 0)?.count_parameters();
        let status = if count == target { "ok" } else { "MISMATCH" };
        println!("{name:<10} {count:>8} target {target:>8}  {status}");
        if count != target {
            mismatched.push(name);
        }
    }
    if let Some(path) = config {
        let cfg = load_config(path, None)?;
        let machine = Machine::build(cfg.machine, 0)?;
        println!("{:<10} {:>8}", path.display(), machine.count_parameters());
        for (name, value) in machine.params().iter() {
            println!("  {name:<24} {:>8} {:?}", value.len(), value.shape());
        }
    }
    if mismatched.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "parameter count mismatch: {}",
            mismatched.join(", ")
        )))
    }
}
