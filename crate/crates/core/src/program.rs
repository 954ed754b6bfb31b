//! Neural stored-program memory: a key-value store whose values are
//! flattened interface-network weight matrices ("programs").
//!
//! A query key is matched against the stored keys by cosine similarity,
//! the resulting distribution mixes the stored programs, and the mixture
//! becomes the interface weight for one timestep.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{AdError, Array, Tape, Var, COSINE_GUARD};

/// How a head turns its meta-network output into a program distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AttentionMode {
    /// Cosine match of a query key against learnable program keys.
    KeyValue,
    /// The meta network emits the program logits itself.
    Direct,
    /// Fixed `1/P` mixture; no meta network.
    Uniform,
    /// Key-value logits sampled through a hard Gumbel-softmax.
    GumbelHard,
}

impl AttentionMode {
    pub fn name(self) -> &'static str {
        match self {
            AttentionMode::KeyValue => "key_value",
            AttentionMode::Direct => "direct",
            AttentionMode::Uniform => "uniform",
            AttentionMode::GumbelHard => "gumbel_hard",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            AttentionMode::KeyValue,
            AttentionMode::Direct,
            AttentionMode::Uniform,
            AttentionMode::GumbelHard,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }

    /// Whether the mode stores and matches program keys.
    pub fn uses_keys(self) -> bool {
        matches!(self, AttentionMode::KeyValue | AttentionMode::GumbelHard)
    }
}

/// Program memory of one control head, bound to a tape.
#[derive(Clone, Copy, Debug)]
pub struct ProgramMemory {
    pub programs: usize,
    pub key_dim: usize,
    pub program_size: usize,
    /// `programs x key_dim`; absent for modes that never match keys.
    pub keys: Option<Var>,
    /// `programs x program_size`.
    pub values: Var,
}

/// Query emitted by the meta network: key and (already activated) strength.
#[derive(Clone, Copy, Debug)]
pub struct ProgramQuery {
    pub key: Var,
    pub beta: Var,
}

fn missing(what: &str, mode: AttentionMode) -> AdError {
    AdError::InvalidArgument(format!("{} attention requires {what}", mode.name()))
}

fn key_logits(tape: &mut Tape, query: &ProgramQuery, mem: &ProgramMemory) -> Result<Var, AdError> {
    let keys = mem
        .keys
        .ok_or_else(|| AdError::InvalidArgument("program memory has no keys".into()))?;
    let qnorm = tape
        .value(query.key)
        .data()
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if qnorm <= COSINE_GUARD {
        return Err(AdError::Domain {
            op: "program_attention",
            detail: "query key is zero; cosine similarity is undefined".into(),
        });
    }
    let sim = tape.cosine(keys, query.key)?;
    tape.scale_by(sim, query.beta)
}

/// Program distribution for the soft modes.
///
/// `key_value` needs `query`, `direct` needs `direct_logits`, `uniform`
/// needs neither. `gumbel_hard` must go through
/// [`gumbel_program_attention`].
pub fn program_attention(
    tape: &mut Tape,
    mode: AttentionMode,
    query: Option<&ProgramQuery>,
    direct_logits: Option<Var>,
    mem: &ProgramMemory,
) -> Result<Var, AdError> {
    match mode {
        AttentionMode::KeyValue => {
            let q = query.ok_or_else(|| missing("a query", mode))?;
            let logits = key_logits(tape, q, mem)?;
            tape.softmax(logits)
        }
        AttentionMode::Direct => {
            let logits = direct_logits.ok_or_else(|| missing("direct logits", mode))?;
            if tape.value(logits).len() != mem.programs {
                return Err(AdError::ShapeMismatch {
                    op: "program_attention",
                    lhs: tape.value(logits).shape().to_vec(),
                    rhs: vec![mem.programs],
                });
            }
            tape.softmax(logits)
        }
        AttentionMode::Uniform => {
            let p = mem.programs;
            Ok(tape.constant(Array::filled(&[p], 1.0 / p as f64)))
        }
        AttentionMode::GumbelHard => Err(AdError::InvalidArgument(
            "gumbel_hard attention needs sampled noise; use gumbel_program_attention".into(),
        )),
    }
}

/// Draws one standard Gumbel sample per program.
pub fn sample_gumbel<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            -(-u.ln()).ln()
        })
        .collect()
}

/// Gumbel-softmax over the key-value logits with freshly sampled noise.
pub fn gumbel_program_attention<R: Rng + ?Sized>(
    tape: &mut Tape,
    query: &ProgramQuery,
    mem: &ProgramMemory,
    temperature: f64,
    hard: bool,
    rng: &mut R,
) -> Result<Var, AdError> {
    let noise = sample_gumbel(rng, mem.programs);
    gumbel_program_attention_with_noise(tape, query, mem, temperature, hard, &noise)
}

/// Gumbel-softmax with caller-supplied noise.
///
/// Soft weights are `softmax((logits + noise) / temperature)`. In hard mode
/// the forward value is the one-hot argmax while the gradient flows through
/// the soft weights.
pub fn gumbel_program_attention_with_noise(
    tape: &mut Tape,
    query: &ProgramQuery,
    mem: &ProgramMemory,
    temperature: f64,
    hard: bool,
    noise: &[f64],
) -> Result<Var, AdError> {
    if !(temperature > 0.0) {
        return Err(AdError::InvalidArgument(format!(
            "Gumbel temperature must be positive, got {temperature}"
        )));
    }
    if noise.len() != mem.programs {
        return Err(AdError::ShapeMismatch {
            op: "gumbel_program_attention",
            lhs: vec![noise.len()],
            rhs: vec![mem.programs],
        });
    }
    let logits = key_logits(tape, query, mem)?;
    let g = tape.constant(Array::vector(noise.to_vec()));
    let perturbed = tape.add(logits, g)?;
    let scaled = tape.affine(perturbed, 1.0 / temperature, 0.0);
    let soft = tape.softmax(scaled)?;
    if !hard {
        return Ok(soft);
    }
    let probs = tape.value(soft).data();
    let arg = probs
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > probs[best] { i } else { best });
    tape.straight_through(soft, Array::one_hot(mem.programs, arg))
}

/// `p = sum_i w(i) values(i)`; the caller reshapes it to the interface matrix.
pub fn compose_program(tape: &mut Tape, w: Var, mem: &ProgramMemory) -> Result<Var, AdError> {
    tape.matmul(w, mem.values)
}

/// Sum of cosine similarities over all unordered key pairs. Zero for a
/// single program.
pub fn key_collapse_loss(tape: &mut Tape, keys: Var) -> Result<Var, AdError> {
    let shape = tape.value(keys).shape().to_vec();
    let [p, k] = shape[..] else {
        return Err(AdError::ShapeMismatch {
            op: "key_collapse_loss",
            lhs: shape,
            rhs: vec![],
        });
    };
    if p == 1 {
        return Ok(tape.constant(Array::scalar(0.0)));
    }
    let mut terms = Vec::with_capacity(p - 1);
    for i in 0..p - 1 {
        let key_i = tape.slice(keys, i * k, k)?;
        let rest = tape.slice(keys, (i + 1) * k, (p - 1 - i) * k)?;
        let rest = tape.reshape(rest, &[p - 1 - i, k])?;
        let sims = tape.cosine(rest, key_i)?;
        terms.push(tape.sum(sims));
    }
    let all = tape.concat(&terms)?;
    Ok(tape.sum(all))
}

/// Frobenius norm `|| keys keys^T - I ||`; requires as many key dimensions
/// as programs.
pub fn orthogonal_key_loss(tape: &mut Tape, keys: Var) -> Result<Var, AdError> {
    let shape = tape.value(keys).shape().to_vec();
    let [p, k] = shape[..] else {
        return Err(AdError::ShapeMismatch {
            op: "orthogonal_key_loss",
            lhs: shape,
            rhs: vec![],
        });
    };
    if p != k {
        return Err(AdError::InvalidArgument(format!(
            "orthogonal key loss needs key dimension K equal to program count P (K={k}, P={p})"
        )));
    }
    let kt = tape.transpose(keys)?;
    let gram = tape.matmul(keys, kt)?;
    let mut eye = Array::zeros(&[p, p]);
    for i in 0..p {
        eye.data_mut()[i * p + i] = 1.0;
    }
    let eye = tape.constant(eye);
    let diff = tape.sub(gram, eye)?;
    let sq = tape.mul(diff, diff)?;
    let total = tape.sum(sq);
    tape.sqrt(total)
}

/// Standard-normal keys with unit-norm rows.
pub fn init_keys<R: Rng + ?Sized>(rng: &mut R, programs: usize, key_dim: usize) -> Array {
    let mut data = Vec::with_capacity(programs * key_dim);
    for _ in 0..programs {
        let row: Vec<f64> = (0..key_dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = row
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(COSINE_GUARD);
        data.extend(row.iter().map(|v| v / norm));
    }
    Array::from_parts(vec![programs, key_dim], data)
}

/// Mean cosine similarity over all unordered pairs of key rows.
pub fn mean_pairwise_cosine(keys: &Array) -> f64 {
    let p = keys.shape()[0];
    if p < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..p {
        for j in i + 1..p {
            let (a, b) = (keys.row(i), keys.row(j));
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na = a
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
                .max(COSINE_GUARD);
            let nb = b
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
                .max(COSINE_GUARD);
            total += dot / (na * nb);
        }
    }
    total / (p * (p - 1) / 2) as f64
}
