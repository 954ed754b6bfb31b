//! Run configuration: flat `key = value` text in `[task]`, `[machine]` and
//! `[train]` sections.
//!
//! ```text
//! [task]
//! kind = copy
//! length = 1..10
//!
//! [machine]
//! hidden = 32
//! programs = 2
//!
//! [train]
//! iterations = 20000
//! ```
//!
//! Machine widths default to the task's channel layout. Unknown sections and
//! keys are rejected with their line number.

use std::collections::BTreeMap;

use nutm_core::machine::{MachineConfig, Regularizer};
use nutm_core::tasks::{
    continual_frame, continual_schedule, parse_combo, sequence_frame, sequencing_specs, Phase,
    Span, TaskKind, TaskSpec,
};
use nutm_core::train::{TaskSource, TrainConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("{0}")]
    Invalid(String),
}

const TASK_KEYS: [&str; 13] = [
    "kind",
    "bits",
    "length",
    "repeats",
    "repeat_scale",
    "items",
    "item_length",
    "sorted",
    "test_length",
    "test_repeats",
    "test_items",
    "test_sorted",
    "phase_iterations",
];

/// Where a value came from: a config line, or 0 for command-line overrides.
#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
}

type Section = BTreeMap<String, Entry>;

fn at(line: usize, msg: impl Into<String>) -> ConfigError {
    let msg = msg.into();
    if line == 0 {
        ConfigError::Invalid(format!("--task: {msg}"))
    } else {
        ConfigError::Line { line, msg }
    }
}

fn parse_sections(text: &str) -> Result<[Section; 3], ConfigError> {
    let mut sections: [Section; 3] = Default::default();
    let mut current: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = Some(match name.trim() {
                "task" => 0,
                "machine" => 1,
                "train" => 2,
                other => return Err(at(line, format!("unknown section [{other}]"))),
            });
            continue;
        }
        let Some(sec) = current else {
            return Err(at(
                line,
                "key outside of a [task], [machine] or [train] section",
            ));
        };
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| at(line, format!("expected `key = value`, got {s:?}")))?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        let allowed: &[&str] = match sec {
            0 => &TASK_KEYS,
            1 => MachineConfig::keys(),
            _ => TrainConfig::keys(),
        };
        if !allowed.contains(&k.as_str()) {
            let name = ["task", "machine", "train"][sec];
            return Err(at(line, format!("unknown {name} key `{k}`")));
        }
        if sections[sec].contains_key(&k) {
            return Err(at(line, format!("duplicate key `{k}`")));
        }
        sections[sec].insert(k, Entry { value: v, line });
    }
    Ok(sections)
}

fn parse_span(e: &Entry) -> Result<Span, ConfigError> {
    let bad = || {
        at(
            e.line,
            format!("expected `n` or `lo..hi`, got {:?}", e.value),
        )
    };
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    match e.value.split_once("..") {
        Some((lo, hi)) => Ok(Span::new(num(lo)?, num(hi)?)),
        None => Ok(Span::exactly(num(&e.value)?)),
    }
}

fn parse_usize(e: &Entry) -> Result<usize, ConfigError> {
    e.value.parse().map_err(|_| {
        at(
            e.line,
            format!("expected a non-negative integer, got {:?}", e.value),
        )
    })
}

/// Training and evaluation tasks of a run.
#[derive(Clone, Debug, PartialEq)]
pub enum TaskSetup {
    Single {
        train: TaskSpec,
        test: TaskSpec,
    },
    Sequenced {
        train: Vec<TaskSpec>,
        test: Vec<TaskSpec>,
    },
    Continual {
        phases: Vec<Phase>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl TaskSetup {
    /// Input and output row widths the machine must have.
    pub fn widths(&self) -> (usize, usize) {
        match self {
            TaskSetup::Single { train, .. } => (train.input_width(), train.output_width()),
            TaskSetup::Sequenced { train, .. } => {
                let f = sequence_frame(train[0].bits);
                (f.input_width(), f.output_width())
            }
            TaskSetup::Continual { .. } => {
                let f = continual_frame();
                (f.input_width(), f.output_width())
            }
        }
    }

    /// Named task sources for a split; continual runs have one per phase.
    pub fn sources(&self, split: Split) -> Vec<(String, TaskSource)> {
        match self {
            TaskSetup::Single { train, test } => {
                let spec = if split == Split::Train { train } else { test };
                vec![(
                    spec.kind.name().to_string(),
                    TaskSource::single(spec.clone()),
                )]
            }
            TaskSetup::Sequenced { train, test } => {
                let specs = if split == Split::Train { train } else { test };
                let name: Vec<&str> = specs.iter().map(|s| s.kind.tag()).collect();
                vec![(name.join("+"), TaskSource::Sequenced(specs.clone()))]
            }
            TaskSetup::Continual { phases } => {
                let pad = Some(self.widths());
                phases
                    .iter()
                    .map(|p| {
                        (
                            p.spec.kind.name().to_string(),
                            TaskSource::Single {
                                spec: p.spec.clone(),
                                pad,
                            },
                        )
                    })
                    .collect()
            }
        }
    }
}

fn build_task(sec: &Section) -> Result<TaskSetup, ConfigError> {
    let kind = sec
        .get("kind")
        .ok_or_else(|| ConfigError::Missing("task.kind".into()))?;
    let only = |allowed: &[&str]| -> Result<(), ConfigError> {
        match sec.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, e)) => Err(at(
                e.line,
                format!("key `{k}` does not apply to task {}", kind.value),
            )),
            None => Ok(()),
        }
    };
    if kind.value == "continual" {
        only(&["kind", "phase_iterations"])?;
        let mut phases = continual_schedule();
        if let Some(e) = sec.get("phase_iterations") {
            let n = parse_usize(e)?;
            phases.iter_mut().for_each(|p| p.iterations = n);
        }
        return Ok(TaskSetup::Continual { phases });
    }
    if kind.value.contains('+') {
        only(&["kind"])?;
        let kinds = parse_combo(&kind.value).ok_or_else(|| {
            at(
                kind.line,
                format!(
                    "unsupported combination {:?}; use C+RC, C+AR, C+PS or C+RC+AR+PS",
                    kind.value
                ),
            )
        })?;
        let (train, test) = sequencing_specs(&kinds).map_err(|e| at(kind.line, e.to_string()))?;
        return Ok(TaskSetup::Sequenced { train, test });
    }
    let k = TaskKind::parse(&kind.value).ok_or_else(|| {
        at(
            kind.line,
            format!(
                "unknown task kind {:?}; expected copy, repeat_copy, assoc_recall, dynamic_ngrams, priority_sort, long_copy, a combination like C+RC, or continual",
                kind.value
            ),
        )
    })?;
    if let Some(e) = sec.get("phase_iterations") {
        return Err(at(
            e.line,
            "phase_iterations only applies to the continual task",
        ));
    }
    let mut train = TaskSpec::train(k);
    let mut test = TaskSpec::test(k);
    for (key, e) in sec {
        match key.as_str() {
            "kind" | "phase_iterations" => {}
            "bits" => {
                train.bits = parse_usize(e)?;
                test.bits = train.bits;
            }
            "length" => train.length = parse_span(e)?,
            "repeats" => train.repeats = parse_span(e)?,
            "repeat_scale" => {
                train.repeat_scale = parse_usize(e)?;
                test.repeat_scale = train.repeat_scale;
            }
            "items" => train.items = parse_span(e)?,
            "item_length" => {
                train.item_length = parse_usize(e)?;
                test.item_length = train.item_length;
            }
            "sorted" => train.sorted = parse_usize(e)?,
            "test_length" => test.length = parse_span(e)?,
            "test_repeats" => test.repeats = parse_span(e)?,
            "test_items" => test.items = parse_span(e)?,
            "test_sorted" => test.sorted = parse_usize(e)?,
            _ => unreachable!("keys are checked while parsing"),
        }
    }
    for (name, spec) in [("training", &train), ("test", &test)] {
        spec.validate()
            .map_err(|e| ConfigError::Invalid(format!("{name} task: {e}")))?;
    }
    Ok(TaskSetup::Single { train, test })
}

fn build_machine(sec: &Section, task: &TaskSetup) -> Result<MachineConfig, ConfigError> {
    let (iw, ow) = task.widths();
    let mut cfg = MachineConfig::nutm(iw, ow, 100, 128, 20, 2);
    for (k, e) in sec {
        cfg.set(k, &e.value).map_err(|m| at(e.line, m))?;
    }
    if !sec.contains_key("key_dim") {
        cfg.key_dim = cfg.programs;
    }
    if !sec.contains_key("regularizer") && (!cfg.attention.uses_keys() || cfg.programs < 2) {
        cfg.regularizer = Regularizer::None;
    }
    for (key, have, want) in [
        ("input_width", cfg.input_width, iw),
        ("output_width", cfg.output_width, ow),
    ] {
        if have != want {
            let line = sec.get(key).map_or(0, |e| e.line);
            return Err(at(
                line,
                format!("{key} = {have} does not match the task's {want}"),
            ));
        }
    }
    cfg.validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(cfg)
}

fn build_train(sec: &Section) -> Result<TrainConfig, ConfigError> {
    let mut cfg = TrainConfig::default();
    for (k, e) in sec {
        cfg.set(k, &e.value).map_err(|m| at(e.line, m))?;
    }
    cfg.validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: TaskSetup,
    pub machine: MachineConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    /// Parses config text; `task_overrides` is a comma-separated list of
    /// `key=value` pairs replacing `[task]` entries.
    pub fn parse(text: &str, task_overrides: Option<&str>) -> Result<Self, ConfigError> {
        let [mut task, machine, train] = parse_sections(text)?;
        if let Some(over) = task_overrides {
            for pair in over.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| at(0, format!("expected key=value, got {pair:?}")))?;
                let k = k.trim();
                if !TASK_KEYS.contains(&k) {
                    return Err(at(0, format!("unknown task key `{k}`")));
                }
                task.insert(
                    k.to_string(),
                    Entry {
                        value: v.trim().to_string(),
                        line: 0,
                    },
                );
            }
        }
        let task = build_task(&task)?;
        let machine = build_machine(&machine, &task)?;
        let train = build_train(&train)?;
        Ok(Self {
            task,
            machine,
            train,
        })
    }

    /// Total optimizer steps of a training run.
    pub fn total_iterations(&self) -> usize {
        match &self.task {
            TaskSetup::Continual { phases } => phases.iter().map(|p| p.iterations).sum(),
            _ => self.train.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nutm_core::program::AttentionMode;

    const BASIC: &str = "\
# desk copy
[task]
kind = copy
length = 1..10

[machine]
hidden = 32   # small controller
memory_rows = 16
memory_width = 8

[train]
iterations = 500
";

    #[test]
    fn parses_basic_config() {
        let cfg = RunConfig::parse(BASIC, None).unwrap();
        let TaskSetup::Single { train, test } = &cfg.task else {
            panic!("expected a single task")
        };
        assert_eq!(train.length, Span::new(1, 10));
        assert_eq!(test.length, Span::exactly(120));
        assert_eq!((cfg.machine.input_width, cfg.machine.output_width), (10, 8));
        assert_eq!(cfg.machine.hidden, 32);
        assert_eq!(cfg.machine.programs, 2);
        assert_eq!(cfg.train.iterations, 500);
        assert_eq!(cfg.train.learning_rate, 1e-4);
    }

    #[test]
    fn unknown_key_names_line() {
        let text = BASIC.replace("hidden = 32", "hiden = 32");
        let err = RunConfig::parse(&text, None).unwrap_err().to_string();
        assert!(err.starts_with("line 7:"), "{err}");
        assert!(err.contains("hiden"));
    }

    #[test]
    fn missing_kind_is_named() {
        let err = RunConfig::parse("[task]\nlength = 3\n", None).unwrap_err();
        assert!(matches!(err, ConfigError::Missing(ref k) if k == "task.kind"));
    }

    #[test]
    fn overrides_replace_task_keys() {
        let cfg = RunConfig::parse(BASIC, Some("length=2..4,test_length=7")).unwrap();
        let TaskSetup::Single { train, test } = &cfg.task else {
            panic!()
        };
        assert_eq!(train.length, Span::new(2, 4));
        assert_eq!(test.length, Span::exactly(7));
        assert!(RunConfig::parse(BASIC, Some("colour=red")).is_err());
    }

    #[test]
    fn ablation_defaults() {
        let text = "[task]\nkind = assoc_recall\n[machine]\nattention = direct\n";
        let cfg = RunConfig::parse(text, None).unwrap();
        assert_eq!(cfg.machine.attention, AttentionMode::Direct);
        assert_eq!(cfg.machine.regularizer, Regularizer::None);
        let text = "[task]\nkind = copy\n[machine]\nprograms = 4\n";
        assert_eq!(RunConfig::parse(text, None).unwrap().machine.key_dim, 4);
    }

    #[test]
    fn sequenced_and_continual() {
        let cfg = RunConfig::parse("[task]\nkind = C+RC\n", None).unwrap();
        assert_eq!(cfg.machine.input_width, 15);
        assert!(RunConfig::parse("[task]\nkind = RC+C\n", None).is_err());
        let cfg =
            RunConfig::parse("[task]\nkind = continual\nphase_iterations = 10\n", None).unwrap();
        assert_eq!(cfg.total_iterations(), 40);
        assert_eq!(cfg.task.sources(Split::Train).len(), 4);
    }

    #[test]
    fn width_mismatch_rejected() {
        let text = "[task]\nkind = copy\n[machine]\ninput_width = 4\n";
        let err = RunConfig::parse(text, None).unwrap_err().to_string();
        assert!(
            err.contains("line 4") && err.contains("input_width"),
            "{err}"
        );
    }

    #[test]
    fn bad_values_are_reported() {
        for (text, needle) in [
            ("[task]\nkind = copy\nlength = 5..2\n", "length range"),
            ("[task]\nkind = copy\nlength = a\n", "line 3"),
            ("[task]\nkind = spin\n", "unknown task kind"),
            ("[task]\nkind = copy\n[train]\nclip = 0\n", "clip"),
            ("[tasks]\n", "unknown section"),
            ("kind = copy\n", "outside"),
        ] {
            let err = RunConfig::parse(text, None).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?}: {err}");
        }
    }
}
