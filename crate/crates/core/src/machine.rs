//! The Neural Universal Turing Machine: controller, data memory, and one
//! program memory per control head, stepped through time.
//!
//! A plain NTM is the special case of one program per head with uniform
//! attention and no meta network; the ablations (direct attention, uniform
//! programs, multi-head NTM) are configurations of the same machine.

use std::fmt::Write as _;

use rand::Rng;

use crate::autodiff::{AdError, Array, Tape, Var};
use crate::controller::{
    fan_in_uniform, interface_project, Controller, ControllerConfig, ControllerKind,
    ControllerState, MetaNetwork,
};
use crate::error::{NutmError, Result};
use crate::memory::{self, DataMemory, HeadKind, HeadState};
use crate::params::{Bound, ParamId, ParamSet};
use crate::program::{
    self, gumbel_program_attention, init_keys, key_collapse_loss, orthogonal_key_loss,
    AttentionMode, ProgramMemory,
};
use crate::rng::{stream, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regularizer {
    /// Pairwise key cosine sum.
    Collapse,
    /// `|| K K^T - I ||_F`.
    Orthogonal,
    None,
}

impl Regularizer {
    pub fn name(self) -> &'static str {
        match self {
            Regularizer::Collapse => "collapse",
            Regularizer::Orthogonal => "orthogonal",
            Regularizer::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "collapse" => Some(Regularizer::Collapse),
            "orthogonal" => Some(Regularizer::Orthogonal),
            "none" => Some(Regularizer::None),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MachineConfig {
    pub controller: ControllerKind,
    pub input_width: usize,
    pub output_width: usize,
    pub hidden: usize,
    pub memory_rows: usize,
    pub memory_width: usize,
    pub read_heads: usize,
    pub write_heads: usize,
    pub programs: usize,
    pub key_dim: usize,
    pub attention: AttentionMode,
    pub regularizer: Regularizer,
    /// Adds a bias row to every interface matrix (and program).
    pub interface_bias: bool,
    pub gumbel_temperature: f64,
}

const CONFIG_KEYS: [&str; 14] = [
    "controller",
    "input_width",
    "output_width",
    "hidden",
    "memory_rows",
    "memory_width",
    "read_heads",
    "write_heads",
    "programs",
    "key_dim",
    "attention",
    "regularizer",
    "interface_bias",
    "gumbel_temperature",
];

impl MachineConfig {
    /// Plain NTM: one fixed interface matrix per head.
    pub fn ntm(
        input_width: usize,
        output_width: usize,
        hidden: usize,
        rows: usize,
        width: usize,
    ) -> Self {
        Self {
            controller: ControllerKind::Lstm,
            input_width,
            output_width,
            hidden,
            memory_rows: rows,
            memory_width: width,
            read_heads: 1,
            write_heads: 1,
            programs: 1,
            key_dim: 1,
            attention: AttentionMode::Uniform,
            regularizer: Regularizer::None,
            interface_bias: true,
            gumbel_temperature: 1.0,
        }
    }

    /// NUTM with key-value program attention and the collapse regularizer.
    pub fn nutm(
        input_width: usize,
        output_width: usize,
        hidden: usize,
        rows: usize,
        width: usize,
        programs: usize,
    ) -> Self {
        Self {
            programs,
            key_dim: programs,
            attention: AttentionMode::KeyValue,
            regularizer: Regularizer::Collapse,
            ..Self::ntm(input_width, output_width, hidden, rows, width)
        }
    }

    pub fn heads(&self) -> usize {
        self.read_heads + self.write_heads
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(NutmError::Config(m));
        for (name, v) in [
            ("input_width", self.input_width),
            ("output_width", self.output_width),
            ("hidden", self.hidden),
            ("memory_rows", self.memory_rows),
            ("memory_width", self.memory_width),
            ("read_heads", self.read_heads),
            ("write_heads", self.write_heads),
            ("programs", self.programs),
            ("key_dim", self.key_dim),
        ] {
            if v == 0 {
                return err(format!("{name} must be at least 1"));
            }
        }
        if !(self.gumbel_temperature > 0.0) {
            return err(format!(
                "gumbel_temperature must be positive, got {}",
                self.gumbel_temperature
            ));
        }
        if self.regularizer != Regularizer::None && !self.attention.uses_keys() {
            return err(format!(
                "regularizer {} needs program keys, but {} attention has none",
                self.regularizer.name(),
                self.attention.name()
            ));
        }
        if self.regularizer == Regularizer::Orthogonal && self.key_dim != self.programs {
            return err(format!(
                "orthogonal regularizer needs key_dim == programs (K={}, P={})",
                self.key_dim, self.programs
            ));
        }
        Ok(())
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse()
                .map_err(|_| format!("{key}: cannot parse {v:?} as a number"))
        }
        match key {
            "controller" => {
                self.controller = ControllerKind::parse(value).ok_or_else(|| {
                    format!("controller: expected lstm|feedforward, got {value:?}")
                })?
            }
            "input_width" => self.input_width = num(key, value)?,
            "output_width" => self.output_width = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            "memory_rows" => self.memory_rows = num(key, value)?,
            "memory_width" => self.memory_width = num(key, value)?,
            "read_heads" => self.read_heads = num(key, value)?,
            "write_heads" => self.write_heads = num(key, value)?,
            "programs" => self.programs = num(key, value)?,
            "key_dim" => self.key_dim = num(key, value)?,
            "attention" => {
                self.attention = AttentionMode::parse(value).ok_or_else(|| {
                    format!(
                        "attention: expected key_value|direct|uniform|gumbel_hard, got {value:?}"
                    )
                })?
            }
            "regularizer" => {
                self.regularizer = Regularizer::parse(value).ok_or_else(|| {
                    format!("regularizer: expected collapse|orthogonal|none, got {value:?}")
                })?
            }
            "interface_bias" => {
                self.interface_bias = match value {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(format!(
                            "interface_bias: expected true|false, got {value:?}"
                        ))
                    }
                }
            }
            "gumbel_temperature" => self.gumbel_temperature = num(key, value)?,
            _ => return Err(format!("unknown machine key {key:?}")),
        }
        Ok(())
    }

    pub fn keys() -> &'static [&'static str] {
        &CONFIG_KEYS
    }

    /// `key = value` lines, one per field, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let values = [
            self.controller.name().to_string(),
            self.input_width.to_string(),
            self.output_width.to_string(),
            self.hidden.to_string(),
            self.memory_rows.to_string(),
            self.memory_width.to_string(),
            self.read_heads.to_string(),
            self.write_heads.to_string(),
            self.programs.to_string(),
            self.key_dim.to_string(),
            self.attention.name().to_string(),
            self.regularizer.name().to_string(),
            self.interface_bias.to_string(),
            format!("{:?}", self.gumbel_temperature),
        ];
        for (k, v) in CONFIG_KEYS.iter().zip(values) {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::ntm(1, 1, 1, 1, 1);
        let mut seen = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                NutmError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let k = k.trim();
            cfg.set(k, v.trim())
                .map_err(|m| NutmError::Config(format!("line {}: {m}", lineno + 1)))?;
            seen.push(k.to_string());
        }
        if let Some(missing) = CONFIG_KEYS.iter().find(|k| !seen.iter().any(|s| s == *k)) {
            return Err(NutmError::Config(format!(
                "missing machine key {missing:?}"
            )));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug)]
struct Head {
    kind: HeadKind,
    layout: usize,
    meta: Option<MetaNetwork>,
    keys: Option<ParamId>,
    values: ParamId,
}

#[derive(Clone, Debug)]
pub struct Machine {
    config: MachineConfig,
    params: ParamSet,
    controller: Controller,
    heads: Vec<Head>,
}

/// Per-head record of one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadTrace {
    pub kind: HeadKind,
    pub address: Vec<f64>,
    pub program: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepTrace {
    /// Controller features `c_t`.
    pub features: Vec<f64>,
    pub heads: Vec<HeadTrace>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SequenceTrace {
    pub steps: Vec<StepTrace>,
}

/// Everything carried from one timestep to the next.
#[derive(Clone, Debug)]
pub struct MachineState {
    pub controller: ControllerState,
    pub memory: DataMemory,
    /// Read heads first, then write heads.
    pub heads: Vec<HeadState>,
    /// Program distribution used by each head at the last step.
    pub programs: Vec<Option<Var>>,
    /// Concatenated read vectors `r_{t-1}`.
    pub reads: Var,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub logits: Var,
    pub state: MachineState,
    pub trace: StepTrace,
}

impl Machine {
    /// Builds a machine with every parameter drawn from the `init` stream of
    /// `seed`.
    pub fn build(config: MachineConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(seed, Stream::Init);
        let mut params = ParamSet::new();
        let h = config.hidden;
        let m = config.memory_width;
        let controller = Controller::new(
            ControllerConfig {
                kind: config.controller,
                input_width: config.input_width,
                hidden: h,
                read_width: config.read_heads * m,
                output_width: config.output_width,
            },
            &mut params,
            &mut rng,
        );
        let rows = h + usize::from(config.interface_bias);
        let mut heads = Vec::with_capacity(config.heads());
        let kinds = std::iter::repeat_n(HeadKind::Read, config.read_heads)
            .chain(std::iter::repeat_n(HeadKind::Write, config.write_heads));
        let mut counts = [0usize; 2];
        for kind in kinds {
            let slot = &mut counts[usize::from(kind == HeadKind::Write)];
            let prefix = format!("{}{}", kind.name(), *slot);
            *slot += 1;
            let layout = kind.layout_len(m);
            let meta = match config.attention {
                AttentionMode::KeyValue | AttentionMode::GumbelHard => Some(MetaNetwork::new(
                    &prefix,
                    h,
                    config.key_dim + 1,
                    &mut params,
                    &mut rng,
                )),
                AttentionMode::Direct => Some(MetaNetwork::new(
                    &prefix,
                    h,
                    config.programs,
                    &mut params,
                    &mut rng,
                )),
                AttentionMode::Uniform => None,
            };
            let keys = config.attention.uses_keys().then(|| {
                params.add(
                    format!("{prefix}.keys"),
                    init_keys(&mut rng, config.programs, config.key_dim),
                )
            });
            let values = params.add(
                format!("{prefix}.values"),
                fan_in_uniform(&mut rng, &[config.programs, rows * layout], rows),
            );
            heads.push(Head {
                kind,
                layout,
                meta,
                keys,
                values,
            });
        }
        Ok(Self {
            config,
            params,
            controller,
            heads,
        })
    }

    pub fn config(&self) -> &MachineConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Exact number of learnable scalars.
    pub fn count_parameters(&self) -> usize {
        self.params.scalar_count()
    }

    /// Flattened interface-matrix size `S` of head `n`.
    pub fn program_size(&self, head: usize) -> usize {
        (self.config.hidden + usize::from(self.config.interface_bias)) * self.heads[head].layout
    }

    /// Program-key matrices, one per head that has keys.
    pub fn head_keys(&self) -> Vec<&Array> {
        self.heads
            .iter()
            .filter_map(|h| h.keys.map(|k| self.params.get(k)))
            .collect()
    }

    /// Copies every parameter of `other` whose name and shape match one of
    /// ours. Returns how many were copied.
    pub fn copy_matching(&mut self, other: &ParamSet) -> usize {
        let mut copied = 0;
        for (name, value) in other.iter() {
            if let Some(id) = self.params.find(name) {
                if self.params.get(id).shape() == value.shape() {
                    *self.params.get_mut(id) = value.clone();
                    copied += 1;
                }
            }
        }
        copied
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Bound {
        self.params.bind(tape, trainable)
    }

    pub fn initial_state(&self, tape: &mut Tape, bound: &Bound) -> MachineState {
        let (n, m) = (self.config.memory_rows, self.config.memory_width);
        let memory = DataMemory::init(tape, n, m);
        let heads = self
            .heads
            .iter()
            .map(|h| HeadState {
                weights: tape.constant(Array::one_hot(n, 0)),
                read: (h.kind == HeadKind::Read).then(|| tape.constant(Array::zeros(&[m]))),
            })
            .collect();
        let reads = tape.constant(Array::zeros(&[self.config.read_heads * m]));
        MachineState {
            controller: self.controller.initial_state(bound),
            memory,
            heads,
            programs: vec![None; self.heads.len()],
            reads,
        }
    }

    fn program_memory(&self, bound: &Bound, head: usize) -> ProgramMemory {
        let h = &self.heads[head];
        ProgramMemory {
            programs: self.config.programs,
            key_dim: self.config.key_dim,
            program_size: self.program_size(head),
            keys: h.keys.map(|k| bound.var(k)),
            values: bound.var(h.values),
        }
    }

    /// Program distribution of head `n` given controller features.
    fn attend<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        head: usize,
        features: Var,
        mem: &ProgramMemory,
        rng: &mut R,
    ) -> Result<Var, AdError> {
        let h = &self.heads[head];
        let mode = self.config.attention;
        match (mode, &h.meta) {
            (AttentionMode::Uniform, _) => program::program_attention(tape, mode, None, None, mem),
            (AttentionMode::Direct, Some(meta)) => {
                let logits = meta.raw(tape, bound, features)?;
                program::program_attention(tape, mode, None, Some(logits), mem)
            }
            (AttentionMode::KeyValue, Some(meta)) => {
                let q = meta.query(tape, bound, features)?;
                program::program_attention(tape, mode, Some(&q), None, mem)
            }
            (AttentionMode::GumbelHard, Some(meta)) => {
                let q = meta.query(tape, bound, features)?;
                gumbel_program_attention(tape, &q, mem, self.config.gumbel_temperature, true, rng)
            }
            _ => Err(AdError::InvalidArgument(format!(
                "{} attention without a meta network",
                mode.name()
            ))),
        }
    }

    /// One timestep. Reads see the memory left by the previous step; all
    /// writes land after every read of this step.
    pub fn step<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        x: Var,
        state: &MachineState,
        rng: &mut R,
    ) -> Result<StepOutput, AdError> {
        let ctrl = self
            .controller
            .state_step(tape, bound, x, state.reads, &state.controller)?;
        let features = ctrl.features.expect("state_step always sets features");
        let m = self.config.memory_width;
        let rows = self.config.hidden + usize::from(self.config.interface_bias);

        let mut heads = Vec::with_capacity(self.heads.len());
        let mut programs = Vec::with_capacity(self.heads.len());
        let mut traces = Vec::with_capacity(self.heads.len());
        let mut reads = Vec::with_capacity(self.config.read_heads);
        let mut writes = Vec::with_capacity(self.config.write_heads);
        for (n, head) in self.heads.iter().enumerate() {
            let pmem = self.program_memory(bound, n);
            let w_p = self.attend(tape, bound, n, features, &pmem, rng)?;
            let flat = program::compose_program(tape, w_p, &pmem)?;
            let w_c = tape.reshape(flat, &[rows, head.layout])?;
            let raw = interface_project(tape, features, w_c)?;
            let controls = memory::parse_interface(tape, raw, head.kind, m)?;
            let w = memory::address(tape, &controls, state.heads[n].weights, &state.memory)?;
            let read = match head.kind {
                HeadKind::Read => {
                    let r = memory::read_memory(tape, &state.memory, w)?;
                    reads.push(r);
                    Some(r)
                }
                HeadKind::Write => {
                    writes.push((
                        w,
                        controls.erase.expect("write head has erase"),
                        controls.add.expect("write head has add"),
                    ));
                    None
                }
            };
            traces.push(HeadTrace {
                kind: head.kind,
                address: tape.value(w).data().to_vec(),
                program: tape.value(w_p).data().to_vec(),
            });
            heads.push(HeadState { weights: w, read });
            programs.push(Some(w_p));
        }
        let memory = memory::write_memory_multi(tape, &state.memory, &writes)?;
        let reads = tape.concat(&reads)?;
        let logits = self
            .controller
            .output_project(tape, bound, features, reads)?;
        let trace = StepTrace {
            features: tape.value(features).data().to_vec(),
            heads: traces,
        };
        Ok(StepOutput {
            logits,
            state: MachineState {
                controller: ctrl,
                memory,
                heads,
                programs,
                reads,
            },
            trace,
        })
    }

    /// Folds [`Machine::step`] over `inputs` from the initial state.
    pub fn run_sequence<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        inputs: &[Array],
        rng: &mut R,
    ) -> Result<(Vec<Var>, SequenceTrace), AdError> {
        let state = self.initial_state(tape, bound);
        self.run_from(tape, bound, state, inputs, rng)
    }

    /// Folds [`Machine::step`] over `inputs` from a given state.
    pub fn run_from<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        mut state: MachineState,
        inputs: &[Array],
        rng: &mut R,
    ) -> Result<(Vec<Var>, SequenceTrace), AdError> {
        if inputs.is_empty() {
            return Err(AdError::InvalidArgument("empty input sequence".into()));
        }
        let mut logits = Vec::with_capacity(inputs.len());
        let mut trace = SequenceTrace::default();
        for x in inputs {
            let xv = tape.constant(x.clone());
            let out = self.step(tape, bound, xv, &state, rng)?;
            logits.push(out.logits);
            trace.steps.push(out.trace);
            state = out.state;
        }
        Ok((logits, trace))
    }

    /// Forward pass without gradient bookkeeping; returns logit values.
    pub fn infer<R: Rng + ?Sized>(
        &self,
        inputs: &[Array],
        rng: &mut R,
    ) -> Result<(Vec<Array>, SequenceTrace), AdError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, false);
        let (logits, trace) = self.run_sequence(&mut tape, &bound, inputs, rng)?;
        Ok((
            logits.iter().map(|v| tape.value(*v).clone()).collect(),
            trace,
        ))
    }

    /// Sum over heads of the configured key regularizer, or `None` when the
    /// machine has nothing to regularize.
    pub fn regularizer(&self, tape: &mut Tape, bound: &Bound) -> Result<Option<Var>, AdError> {
        if self.config.regularizer == Regularizer::None || self.config.programs < 2 {
            return Ok(None);
        }
        let mut terms = Vec::new();
        for h in &self.heads {
            let Some(k) = h.keys else { continue };
            let keys = bound.var(k);
            terms.push(match self.config.regularizer {
                Regularizer::Collapse => key_collapse_loss(tape, keys)?,
                Regularizer::Orthogonal => orthogonal_key_loss(tape, keys)?,
                Regularizer::None => unreachable!(),
            });
        }
        if terms.is_empty() {
            return Ok(None);
        }
        let all = tape.concat(&terms)?;
        Ok(Some(tape.sum(all)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn tiny(programs: usize) -> MachineConfig {
        MachineConfig {
            read_heads: 1,
            write_heads: 1,
            ..MachineConfig::nutm(3, 2, 5, 6, 4, programs)
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = Machine::build(tiny(2), 9).unwrap();
        let b = Machine::build(tiny(2), 9).unwrap();
        assert_eq!(a.params(), b.params());
        let c = Machine::build(tiny(2), 10).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn rejects_zero_programs() {
        let mut cfg = tiny(2);
        cfg.programs = 0;
        assert!(matches!(Machine::build(cfg, 0), Err(NutmError::Config(_))));
    }

    #[test]
    fn single_program_memory() {
        let m = Machine::build(tiny(1), 0).unwrap();
        let id = m.params().find("read0.values").unwrap();
        assert_eq!(m.params().get(id).shape()[0], 1);
    }

    #[test]
    fn ntm_is_one_uniform_program() {
        let cfg = MachineConfig::ntm(3, 2, 5, 6, 4);
        assert_eq!(cfg.programs, 1);
        assert_eq!(cfg.attention, AttentionMode::Uniform);
        let m = Machine::build(cfg, 0).unwrap();
        assert!(m.params().find("read0.meta.weight").is_none());
        assert!(m.params().find("read0.keys").is_none());
    }

    #[test]
    fn doubling_programs_with_fixed_key_dim() {
        let mut a = tiny(2);
        a.key_dim = 3;
        let mut b = tiny(4);
        b.key_dim = 3;
        let (ma, mb) = (Machine::build(a, 0).unwrap(), Machine::build(b, 0).unwrap());
        let s: usize = (0..2).map(|h| ma.program_size(h)).sum();
        assert_eq!(
            mb.count_parameters() - ma.count_parameters(),
            2 * 3 * 2 + 2 * s
        );
    }

    #[test]
    fn config_text_round_trip() {
        let mut cfg = tiny(3);
        cfg.gumbel_temperature = 0.3;
        cfg.attention = AttentionMode::GumbelHard;
        let back = MachineConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        let mut broken = cfg.to_text();
        broken.push_str("colour = blue\n");
        assert!(MachineConfig::from_text(&broken).is_err());
    }

    #[test]
    fn program_rows_sum_to_one_and_outputs_match_length() {
        let m = Machine::build(tiny(3), 4).unwrap();
        let inputs: Vec<Array> = (0..5)
            .map(|t| Array::vector(vec![t as f64 * 0.1, 1.0, -0.5]))
            .collect();
        let mut rng = stream(0, Stream::Gumbel);
        let (logits, trace) = m.infer(&inputs, &mut rng).unwrap();
        assert_eq!(logits.len(), 5);
        assert_eq!(trace.steps.len(), 5);
        for step in &trace.steps {
            assert_eq!(step.heads.len(), 2);
            for h in &step.heads {
                assert!((h.program.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!((h.address.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reads_depend_on_memory_contents() {
        let m = Machine::build(tiny(2), 5).unwrap();
        let mut tape = Tape::new();
        let bound = m.bind(&mut tape, false);
        let mut rng = stream(0, Stream::Gumbel);
        let s0 = m.initial_state(&mut tape, &bound);
        let x = tape.constant(Array::vector(vec![1.0, 0.0, 1.0]));
        let a = m.step(&mut tape, &bound, x, &s0, &mut rng).unwrap();
        // Same controller state and input, but memory changed by a write.
        let mut s1 = s0.clone();
        s1.memory = a.state.memory;
        let b = m.step(&mut tape, &bound, x, &s1, &mut rng).unwrap();
        let ra = tape.value(a.state.reads).clone();
        let rb = tape.value(b.state.reads).clone();
        assert!(ra.max_abs_diff(&rb) > 1e-9);
    }

    #[test]
    fn single_step_sequence_equals_one_step() {
        let m = Machine::build(tiny(2), 6).unwrap();
        let x = Array::vector(vec![0.3, -0.2, 0.9]);
        let mut rng = stream(0, Stream::Gumbel);
        let (seq, _) = m.infer(std::slice::from_ref(&x), &mut rng).unwrap();
        let mut tape = Tape::new();
        let bound = m.bind(&mut tape, false);
        let s0 = m.initial_state(&mut tape, &bound);
        let xv = tape.constant(x);
        let out = m.step(&mut tape, &bound, xv, &s0, &mut rng).unwrap();
        assert_eq!(tape.value(out.logits), &seq[0]);
    }

    #[test]
    fn regularizer_absent_for_single_program() {
        let m = Machine::build(tiny(1), 0).unwrap();
        let mut tape = Tape::new();
        let bound = m.bind(&mut tape, true);
        assert!(m.regularizer(&mut tape, &bound).unwrap().is_none());
    }

    #[test]
    fn published_model_sizes() {
        let ntm = Machine::build(MachineConfig::ntm(10, 8, 100, 128, 20), 0).unwrap();
        assert_eq!(ntm.count_parameters(), 63_260);
        let nutm = Machine::build(MachineConfig::nutm(10, 8, 80, 128, 20, 2), 0).unwrap();
        assert_eq!(nutm.count_parameters(), 52_206);
    }

    #[test]
    fn validation_messages() {
        let mut cfg = tiny(2);
        cfg.attention = AttentionMode::Direct;
        assert!(cfg.validate().is_err());
        cfg.regularizer = Regularizer::None;
        assert!(cfg.validate().is_ok());
        let mut cfg = tiny(2);
        cfg.key_dim = 3;
        cfg.regularizer = Regularizer::Orthogonal;
        assert!(cfg.validate().unwrap_err().to_string().contains("K=3, P=2"));
    }
}
