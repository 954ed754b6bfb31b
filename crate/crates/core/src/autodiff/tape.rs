use super::{AdError, Array};

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Closed inventory of differentiable primitives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Primitive {
    Leaf,
    Add,
    Sub,
    Mul,
    Affine,
    ScaleBy,
    Sigmoid,
    Tanh,
    Softplus,
    Exp,
    Log,
    Sqrt,
    Pow,
    MatMul,
    Transpose,
    Outer,
    Softmax,
    Normalize,
    Cosine,
    CircConv,
    Concat,
    Slice,
    Reshape,
    Sum,
    BceWithLogits,
    StraightThrough,
}

impl Primitive {
    /// Every primitive that carries a gradient rule.
    pub const DIFFERENTIABLE: [Primitive; 25] = [
        Primitive::Add,
        Primitive::Sub,
        Primitive::Mul,
        Primitive::Affine,
        Primitive::ScaleBy,
        Primitive::Sigmoid,
        Primitive::Tanh,
        Primitive::Softplus,
        Primitive::Exp,
        Primitive::Log,
        Primitive::Sqrt,
        Primitive::Pow,
        Primitive::MatMul,
        Primitive::Transpose,
        Primitive::Outer,
        Primitive::Softmax,
        Primitive::Normalize,
        Primitive::Cosine,
        Primitive::CircConv,
        Primitive::Concat,
        Primitive::Slice,
        Primitive::Reshape,
        Primitive::Sum,
        Primitive::BceWithLogits,
        Primitive::StraightThrough,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Leaf => "leaf",
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Affine => "affine",
            Primitive::ScaleBy => "scale_by",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Tanh => "tanh",
            Primitive::Softplus => "softplus",
            Primitive::Exp => "exp",
            Primitive::Log => "log",
            Primitive::Sqrt => "sqrt",
            Primitive::Pow => "pow",
            Primitive::MatMul => "matmul",
            Primitive::Transpose => "transpose",
            Primitive::Outer => "outer",
            Primitive::Softmax => "softmax",
            Primitive::Normalize => "normalize",
            Primitive::Cosine => "cosine",
            Primitive::CircConv => "circular_conv",
            Primitive::Concat => "concat",
            Primitive::Slice => "slice",
            Primitive::Reshape => "reshape",
            Primitive::Sum => "sum",
            Primitive::BceWithLogits => "bce_with_logits",
            Primitive::StraightThrough => "straight_through",
        }
    }

    pub fn from_name(name: &str) -> Option<Primitive> {
        Self::DIFFERENTIABLE
            .iter()
            .copied()
            .chain(std::iter::once(Primitive::Leaf))
            .find(|p| p.name() == name)
    }
}

/// Norms below this value are clamped in cosine similarity.
pub const COSINE_GUARD: f64 = 1e-12;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine {
        x: Var,
        scale: f64,
    },
    ScaleBy {
        x: Var,
        s: Var,
    },
    Sigmoid(Var),
    Tanh(Var),
    Softplus(Var),
    Exp(Var),
    Log(Var),
    Sqrt(Var),
    Pow {
        base: Var,
        exponent: Var,
    },
    MatMul {
        a: Var,
        b: Var,
        m: usize,
        k: usize,
        n: usize,
    },
    Transpose {
        x: Var,
        rows: usize,
        cols: usize,
    },
    Outer(Var, Var),
    Softmax {
        x: Var,
        cols: usize,
    },
    Normalize {
        x: Var,
        total: f64,
    },
    Cosine {
        rows: Var,
        key: Var,
        row_norms: Vec<f64>,
        key_norm: f64,
    },
    CircConv {
        w: Var,
        s: Var,
    },
    Concat(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
    },
    Reshape(Var),
    Sum(Var),
    BceWithLogits {
        logits: Var,
        targets: Vec<f64>,
    },
    StraightThrough(Var),
}

impl Op {
    fn primitive(&self) -> Primitive {
        match self {
            Op::Leaf => Primitive::Leaf,
            Op::Add(..) => Primitive::Add,
            Op::Sub(..) => Primitive::Sub,
            Op::Mul(..) => Primitive::Mul,
            Op::Affine { .. } => Primitive::Affine,
            Op::ScaleBy { .. } => Primitive::ScaleBy,
            Op::Sigmoid(_) => Primitive::Sigmoid,
            Op::Tanh(_) => Primitive::Tanh,
            Op::Softplus(_) => Primitive::Softplus,
            Op::Exp(_) => Primitive::Exp,
            Op::Log(_) => Primitive::Log,
            Op::Sqrt(_) => Primitive::Sqrt,
            Op::Pow { .. } => Primitive::Pow,
            Op::MatMul { .. } => Primitive::MatMul,
            Op::Transpose { .. } => Primitive::Transpose,
            Op::Outer(..) => Primitive::Outer,
            Op::Softmax { .. } => Primitive::Softmax,
            Op::Normalize { .. } => Primitive::Normalize,
            Op::Cosine { .. } => Primitive::Cosine,
            Op::CircConv { .. } => Primitive::CircConv,
            Op::Concat(_) => Primitive::Concat,
            Op::Slice { .. } => Primitive::Slice,
            Op::Reshape(_) => Primitive::Reshape,
            Op::Sum(_) => Primitive::Sum,
            Op::BceWithLogits { .. } => Primitive::BceWithLogits,
            Op::StraightThrough(_) => Primitive::StraightThrough,
        }
    }
}

struct Node {
    value: Array,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by leaf [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Array> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`. Panics when `v` is not a requires-grad leaf.
    pub fn wrt(&self, v: Var) -> &Array {
        self.get(v)
            .unwrap_or_else(|| panic!("no gradient recorded for {v:?}"))
    }

    pub fn take(&mut self, v: Var) -> Option<Array> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

/// Define-by-run reverse-mode record.
///
/// Every operation evaluates eagerly and appends a node, so the tape is
/// always topologically ordered and acyclic. Primitives:
///
/// | primitive | shapes |
/// |---|---|
/// | `add`, `sub`, `mul` | equal shapes, elementwise |
/// | `affine` | `scale * x + shift` with constants |
/// | `scale_by` | any shape times a scalar node |
/// | `sigmoid`, `tanh`, `softplus`, `exp`, `log`, `sqrt` | elementwise |
/// | `pow` | nonnegative base, scalar exponent node |
/// | `matmul` | `[m,k]x[k,n]`, `[k]x[k,n]`, `[m,k]x[k]` |
/// | `transpose`, `outer` | rank 2 / two vectors |
/// | `softmax` | along the last axis of rank 1 or 2 |
/// | `normalize` | `x / sum(x)` |
/// | `cosine` | `[m]x[m] -> []`, `[n,m]x[m] -> [n]` |
/// | `circular_conv` | `[n] * [2r+1]` with offsets `-r..=r` |
/// | `concat`, `slice`, `reshape`, `sum` | flat layout |
/// | `bce_with_logits` | summed binary cross-entropy against constant targets |
/// | `straight_through` | forward a constant, backward identity into a node |
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    fault: Option<Primitive>,
}

fn shape_err(op: &'static str, a: &Array, b: &Array) -> AdError {
    AdError::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn accumulate(dst: &mut [f64], src: impl IntoIterator<Item = f64>) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape whose backward pass deliberately corrupts one gradient rule.
    /// Used to prove that the gradient checker catches broken rules.
    pub fn with_fault(fault: Primitive) -> Self {
        Self {
            nodes: Vec::new(),
            fault: Some(fault),
        }
    }

    pub fn fault(&self) -> Option<Primitive> {
        self.fault
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value of a recorded node. Evaluation happens when the node is
    /// recorded, so this is a lookup.
    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    pub fn forward(&self, v: Var) -> &Array {
        self.value(v)
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).item()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Array, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Records a leaf that receives a gradient.
    pub fn param(&mut self, value: Array) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a leaf constant.
    pub fn constant(&mut self, value: Array) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let src = &self.nodes[x.0].value;
        let data = src.data().iter().map(|&v| f(v)).collect();
        let value = Array::from_parts(src.shape().to_vec(), data);
        let rg = self.nodes[x.0].requires_grad;
        self.push(value, op, rg)
    }

    fn zip_same(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, AdError> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.shape() != vb.shape() {
            return Err(shape_err(name, va, vb));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Array::from_parts(va.shape().to_vec(), data);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.zip_same("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.zip_same("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.zip_same("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `scale * x + shift` with constant coefficients.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        self.unary(x, |v| scale * v + shift, Op::Affine { x, scale })
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, x: Var) -> Var {
        self.affine(x, -1.0, 1.0)
    }

    /// Multiplies every entry of `x` by the scalar node `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Result<Var, AdError> {
        let vs = &self.nodes[s.0].value;
        if !vs.is_scalar() {
            return Err(shape_err("scale_by", &self.nodes[x.0].value, vs));
        }
        let k = vs.item();
        let src = &self.nodes[x.0].value;
        let value = Array::from_parts(
            src.shape().to_vec(),
            src.data().iter().map(|v| v * k).collect(),
        );
        let rg = self.any_grad(&[x, s]);
        Ok(self.push(value, Op::ScaleBy { x, s }, rg))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, softplus, Op::Softplus(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, f64::exp, Op::Exp(x))
    }

    pub fn log(&mut self, x: Var) -> Result<Var, AdError> {
        if let Some(bad) = self.nodes[x.0]
            .value
            .data()
            .iter()
            .find(|&&v| v <= 0.0 || v.is_nan())
        {
            return Err(AdError::Domain {
                op: "log",
                detail: format!("argument {bad} is not positive"),
            });
        }
        Ok(self.unary(x, f64::ln, Op::Log(x)))
    }

    /// Square root. The gradient at exactly zero is taken as zero.
    pub fn sqrt(&mut self, x: Var) -> Result<Var, AdError> {
        if let Some(bad) = self.nodes[x.0]
            .value
            .data()
            .iter()
            .find(|&&v| v < 0.0 || v.is_nan())
        {
            return Err(AdError::Domain {
                op: "sqrt",
                detail: format!("argument {bad} is negative"),
            });
        }
        Ok(self.unary(x, f64::sqrt, Op::Sqrt(x)))
    }

    /// Elementwise `base^exponent` for a nonnegative base and scalar exponent.
    pub fn pow(&mut self, base: Var, exponent: Var) -> Result<Var, AdError> {
        let ve = &self.nodes[exponent.0].value;
        if !ve.is_scalar() {
            return Err(shape_err("pow", &self.nodes[base.0].value, ve));
        }
        let g = ve.item();
        let vb = &self.nodes[base.0].value;
        if let Some(bad) = vb.data().iter().find(|&&v| v < 0.0 || v.is_nan()) {
            return Err(AdError::Domain {
                op: "pow",
                detail: format!("base {bad} is negative"),
            });
        }
        if g < 1.0 && vb.data().contains(&0.0) {
            return Err(AdError::Domain {
                op: "pow",
                detail: format!("zero base with exponent {g} < 1 has no derivative"),
            });
        }
        let value = Array::from_parts(
            vb.shape().to_vec(),
            vb.data().iter().map(|v| v.powf(g)).collect(),
        );
        let rg = self.any_grad(&[base, exponent]);
        Ok(self.push(value, Op::Pow { base, exponent }, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (m, k, n, out_shape) = match (va.shape(), vb.shape()) {
            ([m, k], [k2, n]) if k == k2 => (*m, *k, *n, vec![*m, *n]),
            ([k], [k2, n]) if k == k2 => (1, *k, *n, vec![*n]),
            ([m, k], [k2]) if k == k2 => (*m, *k, 1, vec![*m]),
            _ => return Err(shape_err("matmul", va, vb)),
        };
        let (ad, bd) = (va.data(), vb.data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = ad[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += aip * bv;
                }
            }
        }
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(
            Array::from_parts(out_shape, out),
            Op::MatMul { a, b, m, k, n },
            rg,
        ))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, AdError> {
        let vx = &self.nodes[x.0].value;
        let [rows, cols] = *vx.shape() else {
            return Err(AdError::ShapeMismatch {
                op: "transpose",
                lhs: vx.shape().to_vec(),
                rhs: vec![],
            });
        };
        let d = vx.data();
        let mut out = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                out[j * rows + i] = d[i * cols + j];
            }
        }
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(
            Array::from_parts(vec![cols, rows], out),
            Op::Transpose { x, rows, cols },
            rg,
        ))
    }

    pub fn outer(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.rank() != 1 || vb.rank() != 1 {
            return Err(shape_err("outer", va, vb));
        }
        let (n, m) = (va.len(), vb.len());
        let mut out = Vec::with_capacity(n * m);
        for &x in va.data() {
            out.extend(vb.data().iter().map(|&y| x * y));
        }
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(Array::from_parts(vec![n, m], out), Op::Outer(a, b), rg))
    }

    /// Softmax along the last axis; subtracts the row maximum first.
    pub fn softmax(&mut self, x: Var) -> Result<Var, AdError> {
        let vx = &self.nodes[x.0].value;
        let cols = match vx.shape() {
            [n] | [_, n] => *n,
            _ => {
                return Err(AdError::ShapeMismatch {
                    op: "softmax",
                    lhs: vx.shape().to_vec(),
                    rhs: vec![],
                })
            }
        };
        let mut out = vx.data().to_vec();
        for row in out.chunks_mut(cols) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        let shape = vx.shape().to_vec();
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(Array::from_parts(shape, out), Op::Softmax { x, cols }, rg))
    }

    /// `x / sum(x)`; rejects a zero total.
    pub fn normalize(&mut self, x: Var) -> Result<Var, AdError> {
        let vx = &self.nodes[x.0].value;
        let total = vx.sum();
        if total == 0.0 || !total.is_finite() {
            return Err(AdError::Domain {
                op: "normalize",
                detail: format!("sum {total} cannot be normalized"),
            });
        }
        let value = Array::from_parts(
            vx.shape().to_vec(),
            vx.data().iter().map(|v| v / total).collect(),
        );
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(value, Op::Normalize { x, total }, rg))
    }

    /// Cosine similarity of `key` against a vector (scalar result) or
    /// against every row of a matrix (vector result). Norms are clamped
    /// below at [`COSINE_GUARD`].
    pub fn cosine(&mut self, rows: Var, key: Var) -> Result<Var, AdError> {
        let (vr, vk) = (&self.nodes[rows.0].value, &self.nodes[key.0].value);
        let (n, out_shape) = match (vr.shape(), vk.shape()) {
            ([m], [m2]) if m == m2 => (1, vec![]),
            ([n, m], [m2]) if m == m2 => (*n, vec![*n]),
            _ => return Err(shape_err("cosine", vr, vk)),
        };
        let m = vk.len();
        let kd = vk.data();
        let key_norm = kd
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(COSINE_GUARD);
        let mut row_norms = Vec::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        for row in vr.data().chunks(m) {
            let rn = row
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
                .max(COSINE_GUARD);
            let dot: f64 = row.iter().zip(kd).map(|(a, b)| a * b).sum();
            row_norms.push(rn);
            out.push(dot / (rn * key_norm));
        }
        let rg = self.any_grad(&[rows, key]);
        Ok(self.push(
            Array::from_parts(out_shape, out),
            Op::Cosine {
                rows,
                key,
                row_norms,
                key_norm,
            },
            rg,
        ))
    }

    /// Circular convolution `out(i) = sum_j w((i - j) mod n) * s(j)` with
    /// kernel offsets `j = -r..=r` for a kernel of length `2r + 1`.
    pub fn circular_conv(&mut self, w: Var, s: Var) -> Result<Var, AdError> {
        let (vw, vs) = (&self.nodes[w.0].value, &self.nodes[s.0].value);
        if vw.rank() != 1 || vs.rank() != 1 || vs.len() % 2 == 0 {
            return Err(shape_err("circular_conv", vw, vs));
        }
        let n = vw.len();
        let r = (vs.len() / 2) as isize;
        let (wd, sd) = (vw.data(), vs.data());
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            for (jj, &sj) in sd.iter().enumerate() {
                let offset = jj as isize - r;
                let src = (i as isize - offset).rem_euclid(n as isize) as usize;
                *o += wd[src] * sj;
            }
        }
        let rg = self.any_grad(&[w, s]);
        Ok(self.push(Array::from_parts(vec![n], out), Op::CircConv { w, s }, rg))
    }

    /// Flat concatenation into a vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, AdError> {
        if parts.is_empty() {
            return Err(AdError::InvalidArgument("concat of zero parts".into()));
        }
        let total: usize = parts.iter().map(|p| self.nodes[p.0].value.len()).sum();
        let mut out = Vec::with_capacity(total);
        for p in parts {
            out.extend_from_slice(self.nodes[p.0].value.data());
        }
        let rg = self.any_grad(parts);
        Ok(self.push(
            Array::from_parts(vec![total], out),
            Op::Concat(parts.to_vec()),
            rg,
        ))
    }

    /// Vector of `len` entries starting at flat offset `start`.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var, AdError> {
        let vx = &self.nodes[x.0].value;
        if len == 0 || start + len > vx.len() {
            return Err(AdError::ShapeMismatch {
                op: "slice",
                lhs: vx.shape().to_vec(),
                rhs: vec![start, len],
            });
        }
        let value = Array::from_parts(vec![len], vx.data()[start..start + len].to_vec());
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(value, Op::Slice { x, start }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, AdError> {
        let value = self.nodes[x.0].value.clone().reshaped(shape.to_vec())?;
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.nodes[x.0].value.sum();
        let rg = self.nodes[x.0].requires_grad;
        self.push(Array::scalar(total), Op::Sum(x), rg)
    }

    /// `sum_i softplus(z_i) - t_i z_i`: binary cross-entropy of
    /// `sigmoid(z)` against constant targets in `[0, 1]`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Result<Var, AdError> {
        let vz = &self.nodes[logits.0].value;
        if vz.len() != targets.len() {
            return Err(AdError::ShapeMismatch {
                op: "bce_with_logits",
                lhs: vz.shape().to_vec(),
                rhs: vec![targets.len()],
            });
        }
        if let Some(bad) = targets.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(AdError::Domain {
                op: "bce_with_logits",
                detail: format!("target {bad} outside [0, 1]"),
            });
        }
        let loss = vz
            .data()
            .iter()
            .zip(targets)
            .map(|(&z, &t)| softplus(z) - t * z)
            .sum();
        let rg = self.nodes[logits.0].requires_grad;
        Ok(self.push(
            Array::scalar(loss),
            Op::BceWithLogits {
                logits,
                targets: targets.to_vec(),
            },
            rg,
        ))
    }

    /// Forward value `forward`, gradient routed unchanged into `soft`.
    pub fn straight_through(&mut self, soft: Var, forward: Array) -> Result<Var, AdError> {
        let vs = &self.nodes[soft.0].value;
        if vs.shape() != forward.shape() {
            return Err(shape_err("straight_through", vs, &forward));
        }
        let rg = self.nodes[soft.0].requires_grad;
        Ok(self.push(forward, Op::StraightThrough(soft), rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, AdError> {
        self.backward_seeded(loss, 1.0)
    }

    /// Reverse sweep with the output gradient set to `seed`.
    pub fn backward_seeded(&self, loss: Var, seed: f64) -> Result<Gradients, AdError> {
        let lv = &self.nodes[loss.0].value;
        if lv.len() != 1 {
            return Err(AdError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![seed]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                grads[i] = None;
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(mut g) = grads[i].take() else {
                continue;
            };
            if self.fault == Some(node.op.primitive()) {
                g.iter_mut().for_each(|v| *v *= 1.5);
            }
            self.propagate(i, &g, &mut grads);
        }
        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                let node = &self.nodes[i];
                if !(node.requires_grad && matches!(node.op, Op::Leaf)) {
                    return None;
                }
                let shape = node.value.shape().to_vec();
                Some(match g {
                    Some(d) => Array::from_parts(shape, d),
                    None => Array::zeros(&shape),
                })
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn slot<'a>(&self, grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]))
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let y = node.value.data();
        let val = |v: Var| self.nodes[v.0].value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if let Some(d) = self.slot(grads, *a) {
                    accumulate(d, g.iter().copied());
                }
                if let Some(d) = self.slot(grads, *b) {
                    accumulate(d, g.iter().copied());
                }
            }
            Op::Sub(a, b) => {
                if let Some(d) = self.slot(grads, *a) {
                    accumulate(d, g.iter().copied());
                }
                if let Some(d) = self.slot(grads, *b) {
                    accumulate(d, g.iter().map(|v| -v));
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                if let Some(d) = self.slot(grads, *a) {
                    accumulate(d, g.iter().zip(vb).map(|(g, b)| g * b));
                }
                if let Some(d) = self.slot(grads, *b) {
                    accumulate(d, g.iter().zip(va).map(|(g, a)| g * a));
                }
            }
            Op::Affine { x, scale } => {
                if let Some(d) = self.slot(grads, *x) {
                    accumulate(d, g.iter().map(|v| v * scale));
                }
            }
            Op::ScaleBy { x, s } => {
                let k = val(*s)[0];
                if let Some(d) = self.slot(grads, *x) {
                    accumulate(d, g.iter().map(|v| v * k));
                }
                let vx = val(*x);
                if let Some(d) = self.slot(grads, *s) {
                    d[0] += g.iter().zip(vx).map(|(g, x)| g * x).sum::<f64>();
                }
            }
            Op::Sigmoid(x) => {
                if let Some(d) = self.slot(grads, *x) {
                    accumulate(d, g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)));
                }
            }
            Op::Tanh(x) => {
                if let Some(d) = self.slot(grads, *x) {
                    accumulate(d, g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)));
                }
            }
            Op::Softplus(x) => {
                let vx = val(*x);
                if let Some(d) = self.slot(grads, *x) {
                    accumulate(d, g.iter().zip(vx).map(|(g, &x)| g * sigmoid(x)));
                }
            }
            Op::Exp(x) => {
                if let Some(d) = self.slot(grads, *x) {
                    accumulate(d, g.iter().zip(y).map(|(g, y)| g * y));
                }
            }
            Op::Log(x) => {
                let vx = val(*x);
                if let Some(d) = self.slot(grads, *x) {
                    accumulate(d, g.iter().zip(vx).map(|(g, x)| g / x));
                }
            }
            Op::Sqrt(x) => {
                if let Some(d) = self.slot(grads, *x) {
                    accumulate(
                        d,
                        g.iter()
                            .zip(y)
                            .map(|(g, &y)| if y > 0.0 { g * 0.5 / y } else { 0.0 }),
                    );
                }
            }
            Op::Pow { base, exponent } => {
                let vb = val(*base);
                let e = val(*exponent)[0];
                if let Some(d) = self.slot(grads, *base) {
                    accumulate(
                        d,
                        g.iter().zip(vb).map(|(g, &b)| {
                            if b == 0.0 {
                                if e == 1.0 {
                                    *g
                                } else {
                                    0.0
                                }
                            } else {
                                g * e * b.powf(e - 1.0)
                            }
                        }),
                    );
                }
                if let Some(d) = self.slot(grads, *exponent) {
                    d[0] += g
                        .iter()
                        .zip(vb)
                        .zip(y)
                        .map(|((g, &b), y)| if b > 0.0 { g * y * b.ln() } else { 0.0 })
                        .sum::<f64>();
                }
            }
            Op::MatMul { a, b, m, k, n } => {
                let (m, k, n) = (*m, *k, *n);
                let (va, vb) = (val(*a), val(*b));
                // dA = G B^T
                if let Some(d) = self.slot(grads, *a) {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &vb[p * n..(p + 1) * n];
                            d[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                }
                // dB = A^T G
                if let Some(d) = self.slot(grads, *b) {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = va[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            let drow = &mut d[p * n..(p + 1) * n];
                            for (dv, &gv) in drow.iter_mut().zip(grow) {
                                *dv += aip * gv;
                            }
                        }
                    }
                }
            }
            Op::Transpose { x, rows, cols } => {
                if let Some(d) = self.slot(grads, *x) {
                    for i in 0..*rows {
                        for j in 0..*cols {
                            d[i * cols + j] += g[j * rows + i];
                        }
                    }
                }
            }
            Op::Outer(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let m = vb.len();
                if let Some(d) = self.slot(grads, *a) {
                    for (i, dv) in d.iter_mut().enumerate() {
                        *dv += g[i * m..(i + 1) * m]
                            .iter()
                            .zip(vb)
                            .map(|(g, b)| g * b)
                            .sum::<f64>();
                    }
                }
                if let Some(d) = self.slot(grads, *b) {
                    for (i, &av) in va.iter().enumerate() {
                        for (dv, gv) in d.iter_mut().zip(&g[i * m..(i + 1) * m]) {
                            *dv += av * gv;
                        }
                    }
                }
            }
            Op::Softmax { x, cols } => {
                if let Some(d) = self.slot(grads, *x) {
                    for ((drow, grow), yrow) in d
                        .chunks_mut(*cols)
                        .zip(g.chunks(*cols))
                        .zip(y.chunks(*cols))
                    {
                        let dot: f64 = grow.iter().zip(yrow).map(|(g, y)| g * y).sum();
                        for ((dv, gv), yv) in drow.iter_mut().zip(grow).zip(yrow) {
                            *dv += yv * (gv - dot);
                        }
                    }
                }
            }
            Op::Normalize { x, total } => {
                if let Some(d) = self.slot(grads, *x) {
                    let dot: f64 = g.iter().zip(y).map(|(g, y)| g * y).sum();
                    accumulate(d, g.iter().map(|gv| (gv - dot) / total));
                }
            }
            Op::Cosine {
                rows,
                key,
                row_norms,
                key_norm,
            } => {
                let (vr, vk) = (val(*rows), val(*key));
                let m = vk.len();
                let key_clamped = *key_norm <= COSINE_GUARD;
                if self.nodes[rows.0].requires_grad {
                    let d = self.slot(grads, *rows).expect("rows requires grad");
                    for (r, row) in vr.chunks(m).enumerate() {
                        let (rn, c, gr) = (row_norms[r], y[r], g[r]);
                        let drow = &mut d[r * m..(r + 1) * m];
                        let row_clamped = rn <= COSINE_GUARD;
                        for ((dv, &a), &b) in drow.iter_mut().zip(row).zip(vk) {
                            let radial = if row_clamped { 0.0 } else { c * a / (rn * rn) };
                            *dv += gr * (b / (rn * key_norm) - radial);
                        }
                    }
                }
                if self.nodes[key.0].requires_grad {
                    let d = self.slot(grads, *key).expect("key requires grad");
                    for (r, row) in vr.chunks(m).enumerate() {
                        let (rn, c, gr) = (row_norms[r], y[r], g[r]);
                        for ((dv, &a), &b) in d.iter_mut().zip(row).zip(vk) {
                            let radial = if key_clamped {
                                0.0
                            } else {
                                c * b / (key_norm * key_norm)
                            };
                            *dv += gr * (a / (rn * key_norm) - radial);
                        }
                    }
                }
            }
            Op::CircConv { w, s } => {
                let (vw, vs) = (val(*w), val(*s));
                let n = vw.len();
                let r = (vs.len() / 2) as isize;
                let src = |i: usize, jj: usize| {
                    (i as isize - (jj as isize - r)).rem_euclid(n as isize) as usize
                };
                if let Some(d) = self.slot(grads, *w) {
                    for (i, gi) in g.iter().enumerate() {
                        for (jj, sj) in vs.iter().enumerate() {
                            d[src(i, jj)] += gi * sj;
                        }
                    }
                }
                if let Some(d) = self.slot(grads, *s) {
                    for (i, gi) in g.iter().enumerate() {
                        for (jj, dv) in d.iter_mut().enumerate() {
                            *dv += gi * vw[src(i, jj)];
                        }
                    }
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.nodes[p.0].value.len();
                    if let Some(d) = self.slot(grads, *p) {
                        accumulate(d, g[offset..offset + len].iter().copied());
                    }
                    offset += len;
                }
            }
            Op::Slice { x, start } => {
                if let Some(d) = self.slot(grads, *x) {
                    accumulate(&mut d[*start..*start + g.len()], g.iter().copied());
                }
            }
            Op::Reshape(x) => {
                if let Some(d) = self.slot(grads, *x) {
                    accumulate(d, g.iter().copied());
                }
            }
            Op::Sum(x) => {
                if let Some(d) = self.slot(grads, *x) {
                    let gv = g[0];
                    d.iter_mut().for_each(|v| *v += gv);
                }
            }
            Op::BceWithLogits { logits, targets } => {
                let vz = val(*logits);
                if let Some(d) = self.slot(grads, *logits) {
                    let gv = g[0];
                    accumulate(
                        d,
                        vz.iter().zip(targets).map(|(&z, t)| gv * (sigmoid(z) - t)),
                    );
                }
            }
            Op::StraightThrough(soft) => {
                if let Some(d) = self.slot(grads, *soft) {
                    accumulate(d, g.iter().copied());
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn matmul_hand_example() {
        let mut t = Tape::new();
        let a = t.constant(Array::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap());
        let b = t.constant(Array::from_rows(&[&[1.0], &[1.0]]).unwrap());
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.value(c).shape(), &[2, 1]);
        assert_eq!(t.value(c).data(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_rejects_mismatch_with_both_shapes() {
        let mut t = Tape::new();
        let a = t.constant(Array::zeros(&[2, 3]));
        let b = t.constant(Array::zeros(&[2, 3]));
        match t.matmul(a, b).unwrap_err() {
            AdError::ShapeMismatch { op, lhs, rhs } => {
                assert_eq!(op, "matmul");
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 3]);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut t = Tape::new();
        let x = t.constant(Array::zeros(&[3]));
        let y = t.softmax(x).unwrap();
        assert!(close(t.value(y).data(), &[1.0 / 3.0; 3], 1e-15));
    }

    #[test]
    fn sigmoid_at_zero() {
        let mut t = Tape::new();
        let x = t.constant(Array::scalar(0.0));
        let y = t.sigmoid(x);
        assert_eq!(t.scalar(y), 0.5);
    }

    #[test]
    fn log_of_nonpositive_is_rejected_by_name() {
        let mut t = Tape::new();
        let x = t.constant(Array::vector(vec![1.0, 0.0]));
        match t.log(x).unwrap_err() {
            AdError::Domain { op, .. } => assert_eq!(op, "log"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut t = Tape::new();
        let x = t.param(Array::vector(vec![0.3, -1.0, 2.0]));
        let s = t.sum(x);
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(x).data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn dot_gradient_is_twice_x() {
        let mut t = Tape::new();
        let x = t.param(Array::vector(vec![1.0, 2.0]));
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq);
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(x).data(), &[2.0, 4.0]);
    }

    #[test]
    fn cosine_gradient_vanishes_at_parallel_vectors() {
        let mut t = Tape::new();
        let a = t.param(Array::vector(vec![1.0, 0.0]));
        let b = t.constant(Array::vector(vec![1.0, 0.0]));
        let c = t.cosine(a, b).unwrap();
        assert_eq!(t.scalar(c), 1.0);
        let g = t.backward(c).unwrap();
        assert!(close(g.wrt(a).data(), &[0.0, 0.0], 1e-15));
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut t = Tape::new();
        let x = t.param(Array::vector(vec![1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(AdError::NonScalarLoss(_))));
    }

    #[test]
    fn unreached_params_get_zero_gradients() {
        let mut t = Tape::new();
        let x = t.param(Array::vector(vec![1.0, 2.0]));
        let unused = t.param(Array::zeros(&[2, 2]));
        let s = t.sum(x);
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(unused).shape(), &[2, 2]);
        assert_eq!(g.wrt(unused).data(), &[0.0; 4]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::new();
        let x = t.param(Array::vector(vec![1.0]));
        let c = t.constant(Array::vector(vec![3.0]));
        let y = t.mul(x, c).unwrap();
        let s = t.sum(y);
        let g = t.backward(s).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.wrt(x).data(), &[3.0]);
    }

    #[test]
    fn circular_conv_shift_by_one() {
        let mut t = Tape::new();
        let w = t.constant(Array::vector(vec![0.1, 0.2, 0.7]));
        let s = t.constant(Array::vector(vec![0.0, 0.0, 1.0]));
        let y = t.circular_conv(w, s).unwrap();
        assert_eq!(t.value(y).data(), &[0.7, 0.1, 0.2]);
    }

    #[test]
    fn straight_through_forwards_constant_and_routes_gradient() {
        let mut t = Tape::new();
        let soft = t.param(Array::vector(vec![0.2, 0.8]));
        let hard = t
            .straight_through(soft, Array::vector(vec![0.0, 1.0]))
            .unwrap();
        assert_eq!(t.value(hard).data(), &[0.0, 1.0]);
        let w = t.constant(Array::vector(vec![3.0, 5.0]));
        let p = t.mul(hard, w).unwrap();
        let s = t.sum(p);
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(soft).data(), &[3.0, 5.0]);
    }

    #[test]
    fn primitive_names_round_trip() {
        for p in Primitive::DIFFERENTIABLE {
            assert_eq!(Primitive::from_name(p.name()), Some(p));
        }
    }
}
