//! External data memory with the content/location addressing pipeline of
//! the Neural Turing Machine.
//!
//! Address weights flow through four stages: content attention, gate
//! interpolation with the previous weight, a circular shift over offsets
//! `{-1, 0, +1}`, and sharpening. Every stage keeps the weight on the
//! probability simplex.

use crate::autodiff::{AdError, Array, Tape, Var};

/// Value every memory cell holds before the first write.
pub const MEMORY_INIT: f64 = 1e-6;

/// Number of shift offsets (`-1, 0, +1`).
pub const SHIFT_WIDTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeadKind {
    Read,
    Write,
}

impl HeadKind {
    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Read => "read",
            HeadKind::Write => "write",
        }
    }

    /// Length of the raw interface vector for a head over words of width `m`.
    ///
    /// Layout: key `m`, strength 1, gate 1, shift 3, sharpening 1, then for
    /// write heads erase `m` and add `m`.
    pub fn layout_len(self, m: usize) -> usize {
        let read = m + 1 + 1 + SHIFT_WIDTH + 1;
        match self {
            HeadKind::Read => read,
            HeadKind::Write => read + 2 * m,
        }
    }
}

/// An `rows x width` memory matrix recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct DataMemory {
    pub rows: usize,
    pub width: usize,
    pub matrix: Var,
}

impl DataMemory {
    /// Memory filled with [`MEMORY_INIT`].
    pub fn init(tape: &mut Tape, rows: usize, width: usize) -> Self {
        Self::from_array(tape, Array::filled(&[rows, width], MEMORY_INIT))
    }

    pub fn from_array(tape: &mut Tape, matrix: Array) -> Self {
        assert_eq!(matrix.rank(), 2, "memory must be a matrix");
        let (rows, width) = (matrix.shape()[0], matrix.shape()[1]);
        Self {
            rows,
            width,
            matrix: tape.constant(matrix),
        }
    }
}

/// Per-head address weight and, for read heads, the last read vector.
#[derive(Clone, Copy, Debug)]
pub struct HeadState {
    pub weights: Var,
    pub read: Option<Var>,
}

/// Activated controls for one memory access.
#[derive(Clone, Copy, Debug)]
pub struct InterfaceControls {
    pub key: Var,
    /// Content strength, `>= 0`.
    pub beta: Var,
    /// Interpolation gate in `[0, 1]`.
    pub gate: Var,
    /// Shift distribution over offsets `-1, 0, +1`.
    pub shift: Var,
    /// Sharpening exponent, `>= 1`.
    pub gamma: Var,
    pub erase: Option<Var>,
    pub add: Option<Var>,
}

/// Splits a raw interface vector and applies the field activations:
/// softplus for the strength, sigmoid for gate and erase, softmax for the
/// shift, `1 + softplus` for sharpening, identity for key and add.
pub fn parse_interface(
    tape: &mut Tape,
    raw: Var,
    kind: HeadKind,
    width: usize,
) -> Result<InterfaceControls, AdError> {
    let expected = kind.layout_len(width);
    let actual = tape.value(raw).len();
    if actual != expected {
        return Err(AdError::InvalidArgument(format!(
            "{} head interface expects {expected} entries (key {width}, strength 1, gate 1, shift {SHIFT_WIDTH}, sharpen 1{}), got {actual}",
            kind.name(),
            if kind == HeadKind::Write {
                format!(", erase {width}, add {width}")
            } else {
                String::new()
            }
        )));
    }
    let m = width;
    let key = tape.slice(raw, 0, m)?;
    let beta_raw = tape.slice(raw, m, 1)?;
    let beta_raw = tape.reshape(beta_raw, &[])?;
    let beta = tape.softplus(beta_raw);
    let gate_raw = tape.slice(raw, m + 1, 1)?;
    let gate_raw = tape.reshape(gate_raw, &[])?;
    let gate = tape.sigmoid(gate_raw);
    let shift_raw = tape.slice(raw, m + 2, SHIFT_WIDTH)?;
    let shift = tape.softmax(shift_raw)?;
    let gamma_raw = tape.slice(raw, m + 2 + SHIFT_WIDTH, 1)?;
    let gamma_raw = tape.reshape(gamma_raw, &[])?;
    let gamma = tape.softplus(gamma_raw);
    let gamma = tape.affine(gamma, 1.0, 1.0);
    let (erase, add) = match kind {
        HeadKind::Read => (None, None),
        HeadKind::Write => {
            let base = m + 3 + SHIFT_WIDTH;
            let erase_raw = tape.slice(raw, base, m)?;
            let erase = tape.sigmoid(erase_raw);
            let add = tape.slice(raw, base + m, m)?;
            (Some(erase), Some(add))
        }
    };
    Ok(InterfaceControls {
        key,
        beta,
        gate,
        shift,
        gamma,
        erase,
        add,
    })
}

/// `softmax_i(beta * cos(key, M(i)))`.
pub fn content_address(
    tape: &mut Tape,
    key: Var,
    beta: Var,
    memory: &DataMemory,
) -> Result<Var, AdError> {
    let sim = tape.cosine(memory.matrix, key)?;
    let scaled = tape.scale_by(sim, beta)?;
    tape.softmax(scaled)
}

/// `g * w_c + (1 - g) * w_prev`.
pub fn interpolate_gate(tape: &mut Tape, w_c: Var, w_prev: Var, gate: Var) -> Result<Var, AdError> {
    let a = tape.scale_by(w_c, gate)?;
    let keep = tape.one_minus(gate);
    let b = tape.scale_by(w_prev, keep)?;
    tape.add(a, b)
}

/// Circular convolution with a length-3 shift distribution over offsets
/// `-1, 0, +1`: `w~(i) = sum_j w_g((i - j) mod N) s(j)`.
pub fn shift_address(tape: &mut Tape, w_g: Var, shift: Var) -> Result<Var, AdError> {
    if tape.value(shift).len() != SHIFT_WIDTH {
        return Err(AdError::ShapeMismatch {
            op: "shift_address",
            lhs: tape.value(w_g).shape().to_vec(),
            rhs: tape.value(shift).shape().to_vec(),
        });
    }
    tape.circular_conv(w_g, shift)
}

/// `w(i) = w~(i)^gamma / sum_j w~(j)^gamma`. An all-zero weight is rejected.
pub fn sharpen(tape: &mut Tape, w_tilde: Var, gamma: Var) -> Result<Var, AdError> {
    if tape.value(w_tilde).data().iter().all(|&v| v == 0.0) {
        return Err(AdError::Domain {
            op: "sharpen",
            detail: "degenerate all-zero address".into(),
        });
    }
    let powered = tape.pow(w_tilde, gamma)?;
    tape.normalize(powered)
}

/// Full addressing pipeline: content, gate, shift, sharpen.
pub fn address(
    tape: &mut Tape,
    controls: &InterfaceControls,
    w_prev: Var,
    memory: &DataMemory,
) -> Result<Var, AdError> {
    let w_c = content_address(tape, controls.key, controls.beta, memory)?;
    let w_g = interpolate_gate(tape, w_c, w_prev, controls.gate)?;
    let w_s = shift_address(tape, w_g, controls.shift)?;
    sharpen(tape, w_s, controls.gamma)
}

/// One write access: `M(i) <- M(i) * (1 - w(i) e) + w(i) v`.
pub fn write_memory(
    tape: &mut Tape,
    memory: &DataMemory,
    w: Var,
    erase: Var,
    add: Var,
) -> Result<DataMemory, AdError> {
    write_memory_multi(tape, memory, &[(w, erase, add)])
}

/// Several write heads at once: every erase is applied before any add, so
/// the result does not depend on head order.
pub fn write_memory_multi(
    tape: &mut Tape,
    memory: &DataMemory,
    writes: &[(Var, Var, Var)],
) -> Result<DataMemory, AdError> {
    let mut matrix = memory.matrix;
    for &(w, erase, _) in writes {
        let we = tape.outer(w, erase)?;
        let keep = tape.one_minus(we);
        matrix = tape.mul(matrix, keep)?;
    }
    for &(w, _, add) in writes {
        let wv = tape.outer(w, add)?;
        matrix = tape.add(matrix, wv)?;
    }
    Ok(DataMemory { matrix, ..*memory })
}

/// `r = sum_i w(i) M(i)`.
pub fn read_memory(tape: &mut Tape, memory: &DataMemory, w: Var) -> Result<Var, AdError> {
    tape.matmul(w, memory.matrix)
}
