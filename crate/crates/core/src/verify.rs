//! Finite-difference verification of every differentiable primitive and of
//! a complete small NUTM unroll.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{finite_difference_check_with, AdError, Array, Primitive, Tape, Var};
use crate::error::Result;
use crate::machine::{Machine, MachineConfig};
use crate::memory::DataMemory;
use crate::params::Bound;
use crate::rng::{stream, Stream};
use crate::train::prediction_loss;

/// Largest accepted relative error.
pub const THRESHOLD: f64 = 1e-4;
/// Central-difference step for single primitives.
pub const STEP: f64 = 1e-5;
/// Step for the whole-machine check. Its loss sums many terms, so the
/// evaluation roundoff is larger and a wider step keeps it well below the
/// smallest gradients; truncation error stays far under the threshold.
pub const MACHINE_STEP: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentReport {
    pub name: String,
    pub max_rel_error: f64,
    pub entries: usize,
}

impl ComponentReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < THRESHOLD
    }
}

fn rand_array(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Array {
    let n = shape.iter().product();
    Array::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(lo..hi)).collect(),
    )
    .expect("shape and data agree")
}

/// `sum(out * r)` for a fixed random `r`, so that every output entry gets
/// a distinct weight.
fn project(tape: &mut Tape, out: Var, salt: u64) -> Result<Var, AdError> {
    let shape = tape.value(out).shape().to_vec();
    if shape.is_empty() {
        return Ok(out);
    }
    let mut rng = stream(salt, Stream::Eval);
    let r = tape.constant(rand_array(&mut rng, &shape, -1.0, 1.0));
    let y = tape.mul(out, r)?;
    Ok(tape.sum(y))
}

type Builder = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var, AdError>>;

/// Builder and inputs exercising one primitive.
fn primitive_case(p: Primitive, rng: &mut ChaCha8Rng) -> (Builder, Vec<Array>) {
    let mut r = |shape: &[usize]| rand_array(rng, shape, -1.0, 1.0);
    let salt = p as u64;
    macro_rules! unary {
        ($f:expr) => {
            Box::new(move |t: &mut Tape, v: &[Var]| {
                let y = $f(t, v[0])?;
                project(t, y, salt)
            })
        };
    }
    match p {
        Primitive::Leaf => (Box::new(|t, v| project(t, v[0], 0)), vec![r(&[3])]),
        Primitive::Add | Primitive::Sub | Primitive::Mul => (
            Box::new(move |t, v| {
                let y = match p {
                    Primitive::Add => t.add(v[0], v[1])?,
                    Primitive::Sub => t.sub(v[0], v[1])?,
                    _ => t.mul(v[0], v[1])?,
                };
                project(t, y, salt)
            }),
            vec![r(&[2, 3]), r(&[2, 3])],
        ),
        Primitive::Affine => (
            unary!(|t: &mut Tape, x| Ok::<_, AdError>(t.affine(x, 1.7, -0.3))),
            vec![r(&[4])],
        ),
        Primitive::ScaleBy => (
            Box::new(move |t, v| {
                let y = t.scale_by(v[0], v[1])?;
                project(t, y, salt)
            }),
            vec![r(&[4]), Array::scalar(0.8)],
        ),
        Primitive::Sigmoid => (
            unary!(|t: &mut Tape, x| Ok::<_, AdError>(t.sigmoid(x))),
            vec![r(&[5])],
        ),
        Primitive::Tanh => (
            unary!(|t: &mut Tape, x| Ok::<_, AdError>(t.tanh(x))),
            vec![r(&[5])],
        ),
        Primitive::Softplus => (
            unary!(|t: &mut Tape, x| Ok::<_, AdError>(t.softplus(x))),
            vec![r(&[5])],
        ),
        Primitive::Exp => (
            unary!(|t: &mut Tape, x| Ok::<_, AdError>(t.exp(x))),
            vec![r(&[5])],
        ),
        Primitive::Log => (
            unary!(|t: &mut Tape, x| t.log(x)),
            vec![rand_array(rng, &[5], 0.2, 2.0)],
        ),
        Primitive::Sqrt => (
            unary!(|t: &mut Tape, x| t.sqrt(x)),
            vec![rand_array(rng, &[5], 0.2, 2.0)],
        ),
        Primitive::Pow => (
            Box::new(move |t, v| {
                let y = t.pow(v[0], v[1])?;
                project(t, y, salt)
            }),
            vec![rand_array(rng, &[5], 0.2, 1.0), Array::scalar(2.3)],
        ),
        Primitive::MatMul => (
            Box::new(move |t, v| {
                let mm = t.matmul(v[0], v[1])?;
                let vm = t.matmul(v[2], v[1])?;
                let mv = t.matmul(v[0], v[3])?;
                let all = t.concat(&[mm, vm, mv])?;
                project(t, all, salt)
            }),
            vec![r(&[3, 4]), r(&[4, 2]), r(&[4]), r(&[4])],
        ),
        Primitive::Transpose => (unary!(|t: &mut Tape, x| t.transpose(x)), vec![r(&[2, 3])]),
        Primitive::Outer => (
            Box::new(move |t, v| {
                let y = t.outer(v[0], v[1])?;
                project(t, y, salt)
            }),
            vec![r(&[3]), r(&[4])],
        ),
        Primitive::Softmax => (unary!(|t: &mut Tape, x| t.softmax(x)), vec![r(&[5])]),
        Primitive::Normalize => (
            unary!(|t: &mut Tape, x| t.normalize(x)),
            vec![rand_array(rng, &[5], 0.1, 1.0)],
        ),
        Primitive::Cosine => (
            Box::new(move |t, v| {
                let y = t.cosine(v[0], v[1])?;
                project(t, y, salt)
            }),
            vec![r(&[4, 3]), r(&[3])],
        ),
        Primitive::CircConv => (
            Box::new(move |t, v| {
                let y = t.circular_conv(v[0], v[1])?;
                project(t, y, salt)
            }),
            vec![r(&[5]), r(&[3])],
        ),
        Primitive::Concat => (
            Box::new(move |t, v| {
                let y = t.concat(&[v[0], v[1]])?;
                project(t, y, salt)
            }),
            vec![r(&[2]), r(&[2, 2])],
        ),
        Primitive::Slice => (unary!(|t: &mut Tape, x| t.slice(x, 1, 3)), vec![r(&[6])]),
        Primitive::Reshape => (
            unary!(|t: &mut Tape, x| t.reshape(x, &[3, 2])),
            vec![r(&[6])],
        ),
        Primitive::Sum => (
            unary!(|t: &mut Tape, x| Ok::<_, AdError>(t.sum(x))),
            vec![r(&[2, 3])],
        ),
        Primitive::BceWithLogits => (
            Box::new(|t, v| t.bce_with_logits(v[0], &[1.0, 0.0, 0.3, 1.0])),
            vec![r(&[4])],
        ),
        // The estimator's backward is the identity onto the soft input;
        // with the soft values as forward the two must agree.
        Primitive::StraightThrough => (
            Box::new(move |t, v| {
                let soft = t.softmax(v[0])?;
                let fwd = t.value(soft).clone();
                let y = t.straight_through(soft, fwd)?;
                project(t, y, salt)
            }),
            vec![r(&[4])],
        ),
    }
}

/// The small machine used for the full-step check.
pub fn tiny_config() -> MachineConfig {
    MachineConfig::nutm(4, 3, 6, 8, 4, 2)
}

/// Gradient of prediction loss plus key regularizer over a three-step
/// unroll of [`tiny_config`], with respect to every parameter.
fn machine_case(rng: &mut ChaCha8Rng) -> Result<(Builder, Vec<Array>)> {
    let machine = Machine::build(tiny_config(), 17)?;
    let steps = 3;
    let inputs: Vec<Array> = (0..steps)
        .map(|_| rand_array(rng, &[4], -1.0, 1.0))
        .collect();
    let targets: Vec<Array> = (0..steps)
        .map(|_| {
            Array::vector(
                (0..3)
                    .map(|_| f64::from(u8::from(rng.gen_bool(0.5))))
                    .collect(),
            )
        })
        .collect();
    // A fresh machine's near-constant memory makes content addressing flat,
    // and the resulting ~1e-9 gradients sit below central-difference
    // roundoff. Start from a random memory and random head weights instead.
    let cfg = machine.config().clone();
    let memory = rand_array(rng, &[cfg.memory_rows, cfg.memory_width], -1.0, 1.0);
    let weights: Vec<Array> = (0..cfg.heads())
        .map(|_| rand_array(rng, &[cfg.memory_rows], 0.1, 1.0))
        .collect();
    let reads = rand_array(rng, &[cfg.read_heads * cfg.memory_width], -1.0, 1.0);
    let params = machine.params().values().to_vec();
    let builder: Builder = Box::new(move |t, vars| {
        let bound = Bound::from_vars(vars.to_vec());
        let mut gumbel = stream(0, Stream::Gumbel);
        let mut state = machine.initial_state(t, &bound);
        state.memory = DataMemory::from_array(t, memory.clone());
        for (h, w) in state.heads.iter_mut().zip(&weights) {
            let w = t.constant(w.clone());
            h.weights = t.normalize(w)?;
        }
        state.reads = t.constant(reads.clone());
        let (logits, _) = machine.run_from(t, &bound, state, &inputs, &mut gumbel)?;
        let pred = prediction_loss(t, &logits, &targets, &[true; 3], 1)?;
        match machine.regularizer(t, &bound)? {
            Some(reg) => {
                let reg = t.affine(reg, 0.1, 0.0);
                t.add(pred, reg)
            }
            None => Ok(pred),
        }
    });
    Ok((builder, params))
}

/// Runs every component; `fault` corrupts one primitive's gradient rule in
/// the analytic passes.
pub fn gradcheck_suite(fault: Option<Primitive>) -> Result<Vec<ComponentReport>> {
    let mut rng = stream(2024, Stream::Eval);
    let mut out = Vec::new();
    for p in Primitive::DIFFERENTIABLE {
        let (builder, params) = primitive_case(p, &mut rng);
        let rep = finite_difference_check_with(builder, &params, STEP, fault)?;
        out.push(ComponentReport {
            name: p.name().to_string(),
            max_rel_error: rep.max_rel_error,
            entries: rep.entries_checked,
        });
    }
    let (builder, params) = machine_case(&mut rng)?;
    let rep = finite_difference_check_with(builder, &params, MACHINE_STEP, fault)?;
    out.push(ComponentReport {
        name: "nutm_step".into(),
        max_rel_error: rep.max_rel_error,
        entries: rep.entries_checked,
    });
    Ok(out)
}
