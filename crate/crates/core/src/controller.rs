//! Controller: the state network, the per-head meta network that queries
//! program memory, the interface projection, and the output layer.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{AdError, Array, Tape, Var};
use crate::params::{Bound, ParamId, ParamSet};
use crate::program::ProgramQuery;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ControllerKind {
    Lstm,
    Feedforward,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Lstm => "lstm",
            ControllerKind::Feedforward => "feedforward",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lstm" => Some(ControllerKind::Lstm),
            "feedforward" => Some(ControllerKind::Feedforward),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub input_width: usize,
    pub hidden: usize,
    /// Total width of the concatenated read vectors fed back each step.
    pub read_width: usize,
    pub output_width: usize,
}

/// `U(-bound, bound)` entries.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], bound: f64) -> Array {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
    Array::new(shape.to_vec(), data).expect("positive shape")
}

/// Fan-in scaled uniform initializer, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn fan_in_uniform<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize) -> Array {
    uniform(rng, shape, 1.0 / (fan_in as f64).sqrt())
}

fn normal<R: Rng + ?Sized>(rng: &mut R, len: usize, std: f64) -> Array {
    let dist = Normal::new(0.0, std).expect("finite std");
    Array::vector((0..len).map(|_| dist.sample(rng)).collect())
}

/// Hidden state carried between timesteps. `features` is the vector the
/// interfaces and output layer see; `cell` is present for LSTMs.
#[derive(Clone, Copy, Debug)]
pub struct ControllerState {
    pub hidden: Option<Var>,
    pub cell: Option<Var>,
    pub features: Option<Var>,
}

#[derive(Clone, Debug)]
enum StateNet {
    Lstm {
        weight: ParamId,
        bias_ih: ParamId,
        bias_hh: ParamId,
        h0: ParamId,
        c0: ParamId,
    },
    Feedforward {
        weight: ParamId,
        bias: ParamId,
    },
}

/// State network plus output layer.
///
/// The LSTM keeps two bias vectors and learned initial `h0`/`c0`, the same
/// wiring as the common PyTorch NTM baselines, so parameter counts line up
/// with published model sizes.
#[derive(Clone, Debug)]
pub struct Controller {
    config: ControllerConfig,
    net: StateNet,
    out_weight: ParamId,
    out_bias: ParamId,
}

impl Controller {
    pub fn new<R: Rng + ?Sized>(
        config: ControllerConfig,
        params: &mut ParamSet,
        rng: &mut R,
    ) -> Self {
        let h = config.hidden;
        let fan_in = config.input_width + config.read_width;
        let net = match config.kind {
            ControllerKind::Lstm => {
                let bound = 1.0 / (h as f64).sqrt();
                StateNet::Lstm {
                    weight: params.add(
                        "controller.weight",
                        uniform(rng, &[fan_in + h, 4 * h], bound),
                    ),
                    bias_ih: params.add("controller.bias_ih", uniform(rng, &[4 * h], bound)),
                    bias_hh: params.add("controller.bias_hh", uniform(rng, &[4 * h], bound)),
                    h0: params.add("controller.h0", normal(rng, h, 0.05)),
                    c0: params.add("controller.c0", normal(rng, h, 0.05)),
                }
            }
            ControllerKind::Feedforward => StateNet::Feedforward {
                weight: params.add(
                    "controller.weight",
                    fan_in_uniform(rng, &[fan_in, h], fan_in),
                ),
                bias: params.add("controller.bias", fan_in_uniform(rng, &[h], fan_in)),
            },
        };
        let out_in = h + config.read_width;
        let out_weight = params.add(
            "output.weight",
            fan_in_uniform(rng, &[out_in, config.output_width], out_in),
        );
        let out_bias = params.add(
            "output.bias",
            fan_in_uniform(rng, &[config.output_width], out_in),
        );
        Self {
            config,
            net,
            out_weight,
            out_bias,
        }
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn initial_state(&self, bound: &Bound) -> ControllerState {
        match &self.net {
            StateNet::Lstm { h0, c0, .. } => ControllerState {
                hidden: Some(bound.var(*h0)),
                cell: Some(bound.var(*c0)),
                features: None,
            },
            StateNet::Feedforward { .. } => ControllerState {
                hidden: None,
                cell: None,
                features: None,
            },
        }
    }

    /// `(h_t, c_t) = RNN([x_t, r_{t-1}], h_{t-1})`. The feedforward kind
    /// ignores `state` and maps `[x_t, r_{t-1}]` through one tanh layer.
    pub fn state_step(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        x: Var,
        r_prev: Var,
        state: &ControllerState,
    ) -> Result<ControllerState, AdError> {
        let (xw, rw) = (tape.value(x).len(), tape.value(r_prev).len());
        if xw != self.config.input_width || rw != self.config.read_width {
            return Err(AdError::ShapeMismatch {
                op: "state_step",
                lhs: vec![xw, rw],
                rhs: vec![self.config.input_width, self.config.read_width],
            });
        }
        let h = self.config.hidden;
        match &self.net {
            StateNet::Lstm {
                weight,
                bias_ih,
                bias_hh,
                ..
            } => {
                let (h_prev, c_prev) = match (state.hidden, state.cell) {
                    (Some(h), Some(c)) => (h, c),
                    _ => {
                        return Err(AdError::InvalidArgument(
                            "LSTM controller state lacks hidden or cell".into(),
                        ))
                    }
                };
                let joined = tape.concat(&[x, r_prev, h_prev])?;
                let gates = tape.matmul(joined, bound.var(*weight))?;
                let gates = tape.add(gates, bound.var(*bias_ih))?;
                let gates = tape.add(gates, bound.var(*bias_hh))?;
                let i = tape.slice(gates, 0, h)?;
                let f = tape.slice(gates, h, h)?;
                let g = tape.slice(gates, 2 * h, h)?;
                let o = tape.slice(gates, 3 * h, h)?;
                let i = tape.sigmoid(i);
                let f = tape.sigmoid(f);
                let g = tape.tanh(g);
                let o = tape.sigmoid(o);
                let keep = tape.mul(f, c_prev)?;
                let write = tape.mul(i, g)?;
                let cell = tape.add(keep, write)?;
                let squashed = tape.tanh(cell);
                let hidden = tape.mul(o, squashed)?;
                Ok(ControllerState {
                    hidden: Some(hidden),
                    cell: Some(cell),
                    features: Some(hidden),
                })
            }
            StateNet::Feedforward { weight, bias } => {
                let joined = tape.concat(&[x, r_prev])?;
                let pre = tape.matmul(joined, bound.var(*weight))?;
                let pre = tape.add(pre, bound.var(*bias))?;
                Ok(ControllerState {
                    hidden: None,
                    cell: None,
                    features: Some(tape.tanh(pre)),
                })
            }
        }
    }

    /// `logits = [c_t, r_t] W_out + b_out`.
    pub fn output_project(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        features: Var,
        reads: Var,
    ) -> Result<Var, AdError> {
        let joined = tape.concat(&[features, reads])?;
        let y = tape.matmul(joined, bound.var(self.out_weight))?;
        tape.add(y, bound.var(self.out_bias))
    }
}

/// Meta network of one head: a single affine map from controller features
/// to the program-memory query.
#[derive(Clone, Debug)]
pub struct MetaNetwork {
    weight: ParamId,
    bias: ParamId,
    out_width: usize,
}

impl MetaNetwork {
    pub fn new<R: Rng + ?Sized>(
        prefix: &str,
        hidden: usize,
        out_width: usize,
        params: &mut ParamSet,
        rng: &mut R,
    ) -> Self {
        Self {
            weight: params.add(
                format!("{prefix}.meta.weight"),
                fan_in_uniform(rng, &[hidden, out_width], hidden),
            ),
            bias: params.add(
                format!("{prefix}.meta.bias"),
                fan_in_uniform(rng, &[out_width], hidden),
            ),
            out_width,
        }
    }

    pub fn out_width(&self) -> usize {
        self.out_width
    }

    /// Raw output `c_t W + b`.
    pub fn raw(&self, tape: &mut Tape, bound: &Bound, features: Var) -> Result<Var, AdError> {
        let y = tape.matmul(features, bound.var(self.weight))?;
        tape.add(y, bound.var(self.bias))
    }

    /// Splits the raw output into key (first `K` entries) and strength
    /// (last entry, through softplus).
    pub fn query(
        &self,
        tape: &mut Tape,
        bound: &Bound,
        features: Var,
    ) -> Result<ProgramQuery, AdError> {
        let raw = self.raw(tape, bound, features)?;
        let k = self.out_width - 1;
        let key = tape.slice(raw, 0, k)?;
        let beta = tape.slice(raw, k, 1)?;
        let beta = tape.reshape(beta, &[])?;
        let beta = tape.softplus(beta);
        Ok(ProgramQuery { key, beta })
    }
}

/// `xi_t = c_t W_c`. When `W_c` has one more row than `c_t` has entries,
/// that row is a bias and `c_t` is extended with a constant 1.
pub fn interface_project(tape: &mut Tape, features: Var, w_c: Var) -> Result<Var, AdError> {
    let h = tape.value(features).len();
    let rows = tape.value(w_c).shape().first().copied().unwrap_or(0);
    if tape.value(w_c).rank() != 2 || (rows != h && rows != h + 1) {
        return Err(AdError::ShapeMismatch {
            op: "interface_project",
            lhs: tape.value(features).shape().to_vec(),
            rhs: tape.value(w_c).shape().to_vec(),
        });
    }
    if rows == h + 1 {
        let one = tape.constant(Array::vector(vec![1.0]));
        let extended = tape.concat(&[features, one])?;
        tape.matmul(extended, w_c)
    } else {
        tape.matmul(features, w_c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lstm_config() -> ControllerConfig {
        ControllerConfig {
            kind: ControllerKind::Lstm,
            input_width: 3,
            hidden: 4,
            read_width: 2,
            output_width: 5,
        }
    }

    #[test]
    fn zero_lstm_gives_zero_hidden() {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ctrl = Controller::new(lstm_config(), &mut params, &mut rng);
        for v in params.values_mut() {
            v.data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        let mut t = Tape::new();
        let bound = params.bind(&mut t, false);
        let state = ctrl.initial_state(&bound);
        let x = t.constant(Array::zeros(&[3]));
        let r = t.constant(Array::zeros(&[2]));
        let next = ctrl.state_step(&mut t, &bound, x, r, &state).unwrap();
        assert_eq!(t.value(next.hidden.unwrap()).data(), &[0.0; 4]);
        assert_eq!(t.value(next.features.unwrap()).len(), 4);
    }

    #[test]
    fn feedforward_is_stateless() {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = ControllerConfig {
            kind: ControllerKind::Feedforward,
            ..lstm_config()
        };
        let ctrl = Controller::new(cfg, &mut params, &mut rng);
        let mut t = Tape::new();
        let bound = params.bind(&mut t, false);
        let x = t.constant(Array::vector(vec![0.2, -1.0, 0.5]));
        let r = t.constant(Array::vector(vec![0.3, 0.1]));
        let s0 = ctrl.initial_state(&bound);
        let s1 = ctrl.state_step(&mut t, &bound, x, r, &s0).unwrap();
        let other = t.constant(Array::vector(vec![9.0, 9.0, 9.0]));
        let s2 = ctrl.state_step(&mut t, &bound, other, r, &s1).unwrap();
        let s3 = ctrl.state_step(&mut t, &bound, x, r, &s2).unwrap();
        assert_eq!(
            t.value(s1.features.unwrap()).data(),
            t.value(s3.features.unwrap()).data()
        );
    }

    #[test]
    fn state_step_rejects_bad_widths() {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ctrl = Controller::new(lstm_config(), &mut params, &mut rng);
        let mut t = Tape::new();
        let bound = params.bind(&mut t, false);
        let state = ctrl.initial_state(&bound);
        let x = t.constant(Array::zeros(&[4]));
        let r = t.constant(Array::zeros(&[2]));
        assert!(ctrl.state_step(&mut t, &bound, x, r, &state).is_err());
    }

    #[test]
    fn meta_network_shapes_and_bias() {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = MetaNetwork::new("head0", 4, 3, &mut params, &mut rng);
        let b = MetaNetwork::new("head1", 4, 3, &mut params, &mut rng);
        let wa = params.find("head0.meta.weight").unwrap();
        params
            .get_mut(wa)
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = 0.0);
        let mut t = Tape::new();
        let bound = params.bind(&mut t, false);
        let c = t.constant(Array::zeros(&[4]));
        let q = a.query(&mut t, &bound, c).unwrap();
        let bias = params
            .get(params.find("head0.meta.bias").unwrap())
            .data()
            .to_vec();
        assert_eq!(t.value(q.key).data(), &bias[..2]);
        assert_eq!(t.value(q.key).len() + 1, a.out_width());

        // Perturbing head 0 leaves head 1 untouched.
        let c = t.constant(Array::vector(vec![0.5, -0.2, 0.1, 0.9]));
        let before = b.query(&mut t, &bound, c).unwrap();
        let before = t.value(before.key).clone();
        let mut t2 = Tape::new();
        params.get_mut(wa).data_mut()[0] = 10.0;
        let bound2 = params.bind(&mut t2, false);
        let c2 = t2.constant(Array::vector(vec![0.5, -0.2, 0.1, 0.9]));
        let after = b.query(&mut t2, &bound2, c2).unwrap();
        assert_eq!(t2.value(after.key), &before);
    }

    #[test]
    fn interface_projection_cases() {
        let mut t = Tape::new();
        let w = Array::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]).unwrap();
        let wv = t.constant(w);
        let c = t.constant(Array::vector(vec![0.0, 1.0, 0.0]));
        let xi = interface_project(&mut t, c, wv).unwrap();
        assert_eq!(t.value(xi).data(), &[3.0, 4.0]);
        let z = t.constant(Array::zeros(&[3, 2]));
        let c = t.constant(Array::vector(vec![0.3, -1.0, 2.0]));
        let xi = interface_project(&mut t, c, z).unwrap();
        assert_eq!(t.value(xi).data(), &[0.0, 0.0]);
        let c2 = t.affine(c, 2.5, 0.0);
        let a = interface_project(&mut t, c, wv).unwrap();
        let b = interface_project(&mut t, c2, wv).unwrap();
        for (x, y) in t.value(a).data().iter().zip(t.value(b).data()) {
            assert!((2.5 * x - y).abs() < 1e-12);
        }
        // Bias row.
        let c = t.constant(Array::vector(vec![1.0, 1.0]));
        let xi = interface_project(&mut t, c, wv).unwrap();
        assert_eq!(t.value(xi).data(), &[9.0, 12.0]);
        let bad = t.constant(Array::vector(vec![1.0; 5]));
        assert!(interface_project(&mut t, bad, wv).is_err());
    }

    #[test]
    fn output_layer_cases() {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ctrl = Controller::new(lstm_config(), &mut params, &mut rng);
        let ow = params.find("output.weight").unwrap();
        params
            .get_mut(ow)
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = 0.0);
        let mut t = Tape::new();
        let bound = params.bind(&mut t, false);
        let c = t.constant(Array::vector(vec![0.1, 0.2, 0.3, 0.4]));
        let r = t.constant(Array::vector(vec![1.0, -1.0]));
        let y = ctrl.output_project(&mut t, &bound, c, r).unwrap();
        let bias = params.get(params.find("output.bias").unwrap());
        assert_eq!(t.value(y).data(), bias.data());
        assert_eq!(t.value(y).len(), 5);
    }
}
