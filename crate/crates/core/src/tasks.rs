//! Seeded generators for the synthetic algorithmic tasks.
//!
//! Every task uses a prefix of one channel frame, so instances of different
//! kinds can be fed to the same machine by zero-padding:
//!
//! * input: `B` data bits, start marker, end marker, scalar (repeat count or
//!   priority), then one indicator channel per sequencing kind;
//! * output: `B` data bits, then an end-of-output flag.
//!
//! Copy and associative recall use `B + 2` inputs and `B` outputs, repeat
//! copy `B + 3` / `B + 1`, priority sort `B + 3` / `B`. Dynamic n-grams is a
//! one-bit stream in and out.

use std::fmt::{self, Write as _};

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::autodiff::Array;
use crate::error::{NutmError, Result};

/// History length of the n-gram task (6-grams, so 32 contexts).
pub const NGRAM_HISTORY: usize = 5;

/// Kinds that may appear in a sequenced instance, in indicator-channel order.
pub const SEQUENCE_KINDS: [TaskKind; 4] = [
    TaskKind::Copy,
    TaskKind::RepeatCopy,
    TaskKind::AssocRecall,
    TaskKind::PrioritySort,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Copy,
    RepeatCopy,
    AssocRecall,
    DynamicNgrams,
    PrioritySort,
    LongCopy,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Copy,
        TaskKind::RepeatCopy,
        TaskKind::AssocRecall,
        TaskKind::DynamicNgrams,
        TaskKind::PrioritySort,
        TaskKind::LongCopy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Copy => "copy",
            TaskKind::RepeatCopy => "repeat_copy",
            TaskKind::AssocRecall => "assoc_recall",
            TaskKind::DynamicNgrams => "dynamic_ngrams",
            TaskKind::PrioritySort => "priority_sort",
            TaskKind::LongCopy => "long_copy",
        }
    }

    /// Short tag used in sequencing combinations (`C`, `RC`, `AR`, `PS`).
    pub fn tag(self) -> &'static str {
        match self {
            TaskKind::Copy => "C",
            TaskKind::RepeatCopy => "RC",
            TaskKind::AssocRecall => "AR",
            TaskKind::DynamicNgrams => "NG",
            TaskKind::PrioritySort => "PS",
            TaskKind::LongCopy => "LC",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s || k.tag() == s)
    }

    fn indicator(self) -> Option<usize> {
        SEQUENCE_KINDS.iter().position(|&k| k == self)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Inclusive integer range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub lo: usize,
    pub hi: usize,
}

impl Span {
    pub const fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    pub const fn exactly(n: usize) -> Self {
        Self { lo: n, hi: n }
    }

    fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> usize {
        rng.gen_range(self.lo..=self.hi)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Parameter ranges of one task. Fields a kind does not use are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    /// Data bits per item row.
    pub bits: usize,
    /// Sequence length (copy family), stream length (n-grams) or item count
    /// (priority sort).
    pub length: Span,
    pub repeats: Span,
    /// Repeat counts are shown divided by this (the training maximum).
    pub repeat_scale: usize,
    /// Number of items (associative recall).
    pub items: Span,
    /// Rows per item (associative recall).
    pub item_length: usize,
    /// How many of the highest-priority items to emit (priority sort).
    pub sorted: usize,
}

impl TaskSpec {
    fn base(kind: TaskKind, bits: usize) -> Self {
        Self {
            kind,
            bits,
            length: Span::exactly(1),
            repeats: Span::exactly(1),
            repeat_scale: 1,
            items: Span::exactly(2),
            item_length: 1,
            sorted: 1,
        }
    }

    pub fn copy(bits: usize, length: Span) -> Self {
        Self {
            length,
            ..Self::base(TaskKind::Copy, bits)
        }
    }

    pub fn repeat_copy(bits: usize, length: Span, repeats: Span, repeat_scale: usize) -> Self {
        Self {
            length,
            repeats,
            repeat_scale,
            ..Self::base(TaskKind::RepeatCopy, bits)
        }
    }

    pub fn assoc_recall(bits: usize, items: Span, item_length: usize) -> Self {
        Self {
            items,
            item_length,
            ..Self::base(TaskKind::AssocRecall, bits)
        }
    }

    pub fn dynamic_ngrams(length: usize) -> Self {
        Self {
            length: Span::exactly(length),
            ..Self::base(TaskKind::DynamicNgrams, 1)
        }
    }

    pub fn priority_sort(bits: usize, items: usize, sorted: usize) -> Self {
        Self {
            length: Span::exactly(items),
            sorted,
            ..Self::base(TaskKind::PrioritySort, bits)
        }
    }

    pub fn long_copy(bits: usize, length: Span) -> Self {
        Self {
            kind: TaskKind::LongCopy,
            ..Self::copy(bits, length)
        }
    }

    /// Training ranges of the single tasks.
    pub fn train(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Copy => Self::copy(8, Span::new(1, 20)),
            TaskKind::RepeatCopy => Self::repeat_copy(8, Span::new(1, 10), Span::new(1, 10), 10),
            TaskKind::AssocRecall => Self::assoc_recall(6, Span::new(2, 6), 3),
            TaskKind::DynamicNgrams => Self::dynamic_ngrams(50),
            TaskKind::PrioritySort => Self::priority_sort(8, 20, 16),
            TaskKind::LongCopy => Self::long_copy(8, Span::new(1, 40)),
        }
    }

    /// Generalization ranges of the single tasks.
    pub fn test(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Copy => Self::copy(8, Span::exactly(120)),
            TaskKind::RepeatCopy => Self::repeat_copy(8, Span::new(10, 20), Span::new(10, 20), 10),
            TaskKind::AssocRecall => Self::assoc_recall(6, Span::new(6, 20), 3),
            TaskKind::DynamicNgrams => Self::dynamic_ngrams(200),
            TaskKind::PrioritySort => Self::priority_sort(8, 20, 20),
            TaskKind::LongCopy => Self::long_copy(8, Span::exactly(200)),
        }
    }

    pub fn input_width(&self) -> usize {
        match self.kind {
            TaskKind::Copy | TaskKind::LongCopy | TaskKind::AssocRecall => self.bits + 2,
            TaskKind::RepeatCopy | TaskKind::PrioritySort => self.bits + 3,
            TaskKind::DynamicNgrams => 1,
        }
    }

    pub fn output_width(&self) -> usize {
        match self.kind {
            TaskKind::RepeatCopy => self.bits + 1,
            TaskKind::DynamicNgrams => 1,
            _ => self.bits,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NutmError::Task(format!("{}: {m}", self.kind)));
        let span = |name: &str, s: Span, min: usize| -> Result<()> {
            if s.lo < min || s.lo > s.hi {
                return Err(NutmError::Task(format!(
                    "{}: {name} range {s} must be nonempty with minimum at least {min}",
                    self.kind
                )));
            }
            Ok(())
        };
        if self.bits == 0 {
            return bad("bits must be positive".into());
        }
        match self.kind {
            TaskKind::Copy | TaskKind::LongCopy => span("length", self.length, 1)?,
            TaskKind::RepeatCopy => {
                span("length", self.length, 1)?;
                span("repeats", self.repeats, 1)?;
                if self.repeat_scale == 0 {
                    return bad("repeat_scale must be positive".into());
                }
            }
            TaskKind::AssocRecall => {
                span("items", self.items, 2)?;
                if self.item_length == 0 {
                    return bad("item_length must be positive".into());
                }
            }
            TaskKind::DynamicNgrams => {
                span("length", self.length, 1)?;
                if self.bits != 1 {
                    return bad(format!(
                        "the n-gram stream is one bit wide, got bits = {}",
                        self.bits
                    ));
                }
            }
            TaskKind::PrioritySort => {
                span("length", self.length, 1)?;
                if self.sorted == 0 || self.sorted > self.length.lo {
                    return bad(format!(
                        "sorted = {} must be in [1, item count {}]",
                        self.sorted, self.length.lo
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Widths of the shared channel frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frame {
    pub bits: usize,
    /// Number of indicator channels (0 or 4).
    pub indicators: usize,
}

impl Frame {
    pub fn input_width(&self) -> usize {
        self.bits + 3 + self.indicators
    }

    pub fn output_width(&self) -> usize {
        self.bits + 1
    }
}

/// One generated sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskInstance {
    pub inputs: Vec<Array>,
    pub targets: Vec<Array>,
    /// `true` on the timesteps whose targets are scored.
    pub mask: Vec<bool>,
}

impl TaskInstance {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_width(&self) -> usize {
        self.inputs.first().map_or(0, Array::len)
    }

    pub fn output_width(&self) -> usize {
        self.targets.first().map_or(0, Array::len)
    }

    /// Number of scored bits.
    pub fn answer_bits(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count() * self.output_width()
    }

    /// Index of the first scored timestep.
    pub fn answer_start(&self) -> usize {
        self.mask.iter().position(|&m| m).unwrap_or(self.len())
    }

    /// Zero-pads every row to the given widths.
    pub fn padded(&self, input_width: usize, output_width: usize) -> Result<Self> {
        if input_width < self.input_width() || output_width < self.output_width() {
            return Err(NutmError::Task(format!(
                "cannot pad {}x{} rows into {}x{}",
                self.input_width(),
                self.output_width(),
                input_width,
                output_width
            )));
        }
        let pad = |rows: &[Array], w: usize| {
            rows.iter()
                .map(|r| {
                    let mut d = r.data().to_vec();
                    d.resize(w, 0.0);
                    Array::vector(d)
                })
                .collect()
        };
        Ok(Self {
            inputs: pad(&self.inputs, input_width),
            targets: pad(&self.targets, output_width),
            mask: self.mask.clone(),
        })
    }

    /// One line per timestep: `inputs | targets | mask`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in 0..self.len() {
            let join = |a: &Array| {
                a.data()
                    .iter()
                    .map(|v| format!("{v:?}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let _ = writeln!(
                s,
                "{} | {} | {}",
                join(&self.inputs[t]),
                join(&self.targets[t]),
                u8::from(self.mask[t])
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut inst = Self {
            inputs: Vec::new(),
            targets: Vec::new(),
            mask: Vec::new(),
        };
        for (n, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let bad = |m: &str| NutmError::Task(format!("line {}: {m}", n + 1));
            let parts: Vec<&str> = line.split('|').collect();
            if parts.len() != 3 {
                return Err(bad("expected `inputs | targets | mask`"));
            }
            let nums = |s: &str| -> Result<Vec<f64>> {
                s.split_whitespace()
                    .map(|v| {
                        v.parse::<f64>()
                            .map_err(|_| bad(&format!("bad number {v:?}")))
                    })
                    .collect()
            };
            inst.inputs.push(Array::vector(nums(parts[0])?));
            inst.targets.push(Array::vector(nums(parts[1])?));
            inst.mask.push(match parts[2].trim() {
                "0" => false,
                "1" => true,
                other => return Err(bad(&format!("mask must be 0 or 1, got {other:?}"))),
            });
        }
        inst.check()?;
        Ok(inst)
    }

    /// Structural invariants: equal lengths, consistent widths, zero targets
    /// off the mask.
    pub fn check(&self) -> Result<()> {
        if self.inputs.len() != self.targets.len() || self.inputs.len() != self.mask.len() {
            return Err(NutmError::Task(
                "inputs, targets and mask differ in length".into(),
            ));
        }
        let (iw, ow) = (self.input_width(), self.output_width());
        for t in 0..self.len() {
            if self.inputs[t].len() != iw || self.targets[t].len() != ow {
                return Err(NutmError::Task(format!(
                    "timestep {t} has inconsistent width"
                )));
            }
            if !self.mask[t] && self.targets[t].data().iter().any(|&v| v != 0.0) {
                return Err(NutmError::Task(format!(
                    "timestep {t} has a target outside the mask"
                )));
            }
        }
        Ok(())
    }
}

struct Builder {
    iw: usize,
    ow: usize,
    inst: TaskInstance,
}

impl Builder {
    fn new(iw: usize, ow: usize) -> Self {
        Self {
            iw,
            ow,
            inst: TaskInstance {
                inputs: Vec::new(),
                targets: Vec::new(),
                mask: Vec::new(),
            },
        }
    }

    /// Input row with `bits` in the data channels and `extra` channels set.
    fn input(&mut self, bits: &[f64], extra: &[(usize, f64)]) {
        let mut row = vec![0.0; self.iw];
        row[..bits.len()].copy_from_slice(bits);
        for &(c, v) in extra {
            row[c] = v;
        }
        self.inst.inputs.push(Array::vector(row));
        self.inst.targets.push(Array::zeros(&[self.ow]));
        self.inst.mask.push(false);
    }

    fn answer(&mut self, bits: &[f64], extra: &[(usize, f64)]) {
        let mut row = vec![0.0; self.ow];
        row[..bits.len()].copy_from_slice(bits);
        for &(c, v) in extra {
            row[c] = v;
        }
        self.inst.inputs.push(Array::zeros(&[self.iw]));
        self.inst.targets.push(Array::vector(row));
        self.inst.mask.push(true);
    }
}

fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| f64::from(u8::from(rng.gen_bool(0.5))))
        .collect()
}

/// Draws one instance of `spec`.
pub fn generate_task<R: Rng + ?Sized>(spec: &TaskSpec, rng: &mut R) -> Result<TaskInstance> {
    spec.validate()?;
    let b = spec.bits;
    let (start, end, scalar) = (b, b + 1, b + 2);
    let mut out = Builder::new(spec.input_width(), spec.output_width());
    match spec.kind {
        TaskKind::Copy | TaskKind::LongCopy => {
            let len = spec.length.sample(rng);
            let seq: Vec<Vec<f64>> = (0..len).map(|_| random_bits(rng, b)).collect();
            out.input(&[], &[(start, 1.0)]);
            for row in &seq {
                out.input(row, &[]);
            }
            out.input(&[], &[(end, 1.0)]);
            for row in &seq {
                out.answer(row, &[]);
            }
        }
        TaskKind::RepeatCopy => {
            let len = spec.length.sample(rng);
            let reps = spec.repeats.sample(rng);
            let seq: Vec<Vec<f64>> = (0..len).map(|_| random_bits(rng, b)).collect();
            out.input(&[], &[(start, 1.0)]);
            for row in &seq {
                out.input(row, &[]);
            }
            out.input(
                &[],
                &[(end, 1.0), (scalar, reps as f64 / spec.repeat_scale as f64)],
            );
            for _ in 0..reps {
                for row in &seq {
                    out.answer(row, &[]);
                }
            }
            out.answer(&[], &[(b, 1.0)]);
        }
        TaskKind::AssocRecall => {
            let n = spec.items.sample(rng);
            let mut items: Vec<Vec<f64>> = Vec::with_capacity(n);
            while items.len() < n {
                let item = random_bits(rng, b * spec.item_length);
                // Duplicate items would make the successor ambiguous.
                if !items.contains(&item) {
                    items.push(item);
                }
            }
            for item in &items {
                out.input(&[], &[(start, 1.0)]);
                for row in item.chunks(b) {
                    out.input(row, &[]);
                }
            }
            let q = rng.gen_range(0..n - 1);
            out.input(&[], &[(end, 1.0)]);
            for row in items[q].chunks(b) {
                out.input(row, &[]);
            }
            out.input(&[], &[(end, 1.0)]);
            for row in items[q + 1].chunks(b) {
                out.answer(row, &[]);
            }
        }
        TaskKind::DynamicNgrams => {
            let len = spec.length.sample(rng);
            let beta = Beta::new(0.5, 0.5).expect("valid beta parameters");
            let table: Vec<f64> = (0..1 << NGRAM_HISTORY).map(|_| beta.sample(rng)).collect();
            let mut stream = random_bits(rng, NGRAM_HISTORY.min(len + 1));
            while stream.len() < len + 1 {
                let ctx = stream[stream.len() - NGRAM_HISTORY..]
                    .iter()
                    .fold(0usize, |acc, &bit| (acc << 1) | bit as usize);
                stream.push(f64::from(u8::from(rng.gen_bool(table[ctx]))));
            }
            for t in 0..len {
                out.inst.inputs.push(Array::vector(vec![stream[t]]));
                out.inst.targets.push(Array::vector(vec![stream[t + 1]]));
                out.inst.mask.push(true);
            }
        }
        TaskKind::PrioritySort => {
            let n = spec.length.sample(rng);
            let items: Vec<(Vec<f64>, f64)> = (0..n)
                .map(|_| (random_bits(rng, b), rng.gen_range(-1.0..=1.0)))
                .collect();
            out.input(&[], &[(start, 1.0)]);
            for (bits, p) in &items {
                out.input(bits, &[(scalar, *p)]);
            }
            out.input(&[], &[(end, 1.0)]);
            let mut order: Vec<usize> = (0..n).collect();
            // Stable, so ties keep presentation order.
            order.sort_by(|&i, &j| items[j].1.total_cmp(&items[i].1));
            for &i in order.iter().take(spec.sorted) {
                out.answer(&items[i].0, &[]);
            }
        }
    }
    Ok(out.inst)
}

fn supported_combo(kinds: &[TaskKind]) -> bool {
    use TaskKind::*;
    matches!(
        kinds,
        [Copy]
            | [RepeatCopy]
            | [AssocRecall]
            | [PrioritySort]
            | [Copy, RepeatCopy]
            | [Copy, AssocRecall]
            | [Copy, PrioritySort]
            | [Copy, RepeatCopy, AssocRecall, PrioritySort]
    )
}

/// Frame used by sequenced instances of data width `bits`.
pub fn sequence_frame(bits: usize) -> Frame {
    Frame {
        bits,
        indicators: SEQUENCE_KINDS.len(),
    }
}

/// Several subtasks in one sequence: an indicator block naming the order,
/// every subtask's input phase, then every subtask's answer, in order.
pub fn generate_sequenced<R: Rng + ?Sized>(
    specs: &[TaskSpec],
    rng: &mut R,
) -> Result<TaskInstance> {
    let kinds: Vec<TaskKind> = specs.iter().map(|s| s.kind).collect();
    if !supported_combo(&kinds) {
        let names: Vec<&str> = kinds.iter().map(|k| k.tag()).collect();
        return Err(NutmError::Task(format!(
            "unsupported subtask combination {}",
            names.join("+")
        )));
    }
    let bits = specs[0].bits;
    if specs.iter().any(|s| s.bits != bits) {
        return Err(NutmError::Task(
            "subtasks must share the same data width".into(),
        ));
    }
    let frame = sequence_frame(bits);
    let (iw, ow) = (frame.input_width(), frame.output_width());
    let parts = specs
        .iter()
        .map(|s| generate_task(s, rng)?.padded(iw, ow))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Builder::new(iw, ow);
    for k in &kinds {
        let slot = k.indicator().expect("combination checked above");
        out.input(&[], &[(bits + 3 + slot, 1.0)]);
    }
    let mut inst = out.inst;
    for p in &parts {
        let a = p.answer_start();
        inst.inputs.extend_from_slice(&p.inputs[..a]);
        inst.targets.extend_from_slice(&p.targets[..a]);
        inst.mask.extend_from_slice(&p.mask[..a]);
    }
    for p in &parts {
        let a = p.answer_start();
        inst.inputs.extend_from_slice(&p.inputs[a..]);
        inst.targets.extend_from_slice(&p.targets[a..]);
        inst.mask.extend_from_slice(&p.mask[a..]);
    }
    Ok(inst)
}

/// Parses `C+RC`-style combinations.
pub fn parse_combo(s: &str) -> Option<Vec<TaskKind>> {
    let kinds: Option<Vec<TaskKind>> = s.split('+').map(|t| TaskKind::parse(t.trim())).collect();
    kinds.filter(|k| supported_combo(k))
}

/// Training and test subtask specs of a sequencing combination.
pub fn sequencing_specs(kinds: &[TaskKind]) -> Result<(Vec<TaskSpec>, Vec<TaskSpec>)> {
    use TaskKind::*;
    let len = (Span::new(1, 10), Span::new(10, 20));
    let specs = match kinds {
        [Copy, RepeatCopy] => (
            vec![
                TaskSpec::copy(8, len.0),
                TaskSpec::repeat_copy(8, len.0, Span::new(1, 10), 10),
            ],
            vec![
                TaskSpec::copy(8, len.1),
                TaskSpec::repeat_copy(8, len.1, Span::new(10, 15), 10),
            ],
        ),
        [Copy, AssocRecall] => (
            vec![
                TaskSpec::copy(8, len.0),
                TaskSpec::assoc_recall(8, Span::new(2, 4), 8),
            ],
            vec![
                TaskSpec::copy(8, len.1),
                TaskSpec::assoc_recall(8, Span::new(4, 6), 8),
            ],
        ),
        [Copy, PrioritySort] => (
            vec![TaskSpec::copy(8, len.0), TaskSpec::priority_sort(8, 10, 8)],
            vec![TaskSpec::copy(8, len.1), TaskSpec::priority_sort(8, 10, 10)],
        ),
        [Copy, RepeatCopy, AssocRecall, PrioritySort] => (
            vec![
                TaskSpec::copy(8, len.0),
                TaskSpec::repeat_copy(8, len.0, Span::new(1, 5), 5),
                TaskSpec::assoc_recall(8, Span::new(2, 4), 6),
                TaskSpec::priority_sort(8, 10, 8),
            ],
            vec![
                TaskSpec::copy(8, len.1),
                TaskSpec::repeat_copy(8, len.1, Span::exactly(6), 5),
                TaskSpec::assoc_recall(8, Span::exactly(5), 6),
                TaskSpec::priority_sort(8, 10, 10),
            ],
        ),
        _ => {
            return Err(NutmError::Task(
                "sequencing combinations are C+RC, C+AR, C+PS and C+RC+AR+PS".into(),
            ))
        }
    };
    Ok(specs)
}

/// One phase of the continual curriculum.
#[derive(Clone, Debug, PartialEq)]
pub struct Phase {
    pub spec: TaskSpec,
    pub iterations: usize,
    pub batch: usize,
}

/// Continual curriculum: copy, repeat copy, associative recall, priority
/// sort, 20,000 iterations each at batch 16. All phases share the frame
/// returned by [`continual_frame`].
pub fn continual_schedule() -> Vec<Phase> {
    let phase = |spec| Phase {
        spec,
        iterations: 20_000,
        batch: 16,
    };
    vec![
        phase(TaskSpec::copy(8, Span::new(1, 10))),
        phase(TaskSpec::repeat_copy(
            8,
            Span::new(1, 5),
            Span::new(1, 5),
            5,
        )),
        phase(TaskSpec::assoc_recall(8, Span::new(2, 3), 3)),
        phase(TaskSpec::priority_sort(8, 10, 8)),
    ]
}

pub fn continual_frame() -> Frame {
    Frame {
        bits: 8,
        indicators: 0,
    }
}
