//! Plain-f64 NTM forward pass, written without the tape, used as an oracle
//! for the tape-based machine. Reads the machine's parameters by name and
//! assumes an LSTM controller, one read head, one write head, and program
//! memories holding a single program each.

use nutm_core::autodiff::Array;
use nutm_core::machine::Machine;

fn param<'a>(m: &'a Machine, name: &str) -> &'a Array {
    let id = m
        .params()
        .find(name)
        .unwrap_or_else(|| panic!("missing {name}"));
    m.params().get(id)
}

fn vecmat(x: &[f64], w: &Array) -> Vec<f64> {
    let cols = w.shape()[1];
    let mut out = vec![0.0; cols];
    for (i, xi) in x.iter().enumerate() {
        for (j, o) in out.iter_mut().enumerate() {
            *o += xi * w.data()[i * cols + j];
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

struct Head {
    w: Vec<f64>,
}

fn address(ctrl: &[f64], mem: &[Vec<f64>], prev: &[f64]) -> Vec<f64> {
    let m = mem[0].len();
    let key = &ctrl[..m];
    let beta = softplus(ctrl[m]);
    let g = sigmoid(ctrl[m + 1]);
    let s = softmax(&ctrl[m + 2..m + 5]);
    let gamma = 1.0 + softplus(ctrl[m + 5]);
    let kn = key.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    let sims: Vec<f64> = mem
        .iter()
        .map(|row| {
            let rn = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let dot: f64 = row.iter().zip(key).map(|(a, b)| a * b).sum();
            beta * dot / (rn * kn)
        })
        .collect();
    let wc = softmax(&sims);
    let wg: Vec<f64> = wc
        .iter()
        .zip(prev)
        .map(|(c, p)| g * c + (1.0 - g) * p)
        .collect();
    let n = wg.len();
    // Offsets -1, 0, +1: mass at i moves to i + offset.
    let shifted: Vec<f64> = (0..n)
        .map(|i| (0..3).map(|j| wg[(i + n + 1 - j) % n] * s[j]).sum())
        .collect();
    let pw: Vec<f64> = shifted.iter().map(|v| v.powf(gamma)).collect();
    let total: f64 = pw.iter().sum();
    pw.iter().map(|v| v / total).collect()
}

/// Output logits of every timestep.
pub fn ntm_forward(machine: &Machine, inputs: &[Array]) -> Vec<Vec<f64>> {
    let cfg = machine.config();
    let (n, m, h) = (cfg.memory_rows, cfg.memory_width, cfg.hidden);
    let w = param(machine, "controller.weight");
    let b1 = param(machine, "controller.bias_ih").data();
    let b2 = param(machine, "controller.bias_hh").data();
    let wo = param(machine, "output.weight");
    let bo = param(machine, "output.bias").data();
    let rows = h + usize::from(cfg.interface_bias);
    let reshape = |name: &str, layout: usize| {
        let v = param(machine, name);
        assert_eq!(v.shape()[0], 1, "oracle needs a single program");
        Array::new(vec![rows, layout], v.data().to_vec()).unwrap()
    };
    let wr = reshape("read0.values", m + 6);
    let ww = reshape("write0.values", 3 * m + 6);

    let mut hs = param(machine, "controller.h0").data().to_vec();
    let mut cs = param(machine, "controller.c0").data().to_vec();
    let mut mem = vec![vec![1e-6; m]; n];
    let mut one_hot = vec![0.0; n];
    one_hot[0] = 1.0;
    let mut read = Head { w: one_hot.clone() };
    let mut write = Head { w: one_hot };
    let mut r = vec![0.0; m];
    let mut out = Vec::new();
    for x in inputs {
        let joined: Vec<f64> = x.data().iter().chain(&r).chain(&hs).copied().collect();
        let gates = vecmat(&joined, w);
        let gate = |k: usize, j: usize| gates[k * h + j] + b1[k * h + j] + b2[k * h + j];
        for j in 0..h {
            let (i, f, g, o) = (
                sigmoid(gate(0, j)),
                sigmoid(gate(1, j)),
                gate(2, j).tanh(),
                sigmoid(gate(3, j)),
            );
            cs[j] = f * cs[j] + i * g;
            hs[j] = o * cs[j].tanh();
        }
        let mut feat = hs.clone();
        if cfg.interface_bias {
            feat.push(1.0);
        }
        let xr = vecmat(&feat, &wr);
        let xw = vecmat(&feat, &ww);
        read.w = address(&xr, &mem, &read.w);
        write.w = address(&xw, &mem, &write.w);
        r = (0..m)
            .map(|j| (0..n).map(|i| read.w[i] * mem[i][j]).sum())
            .collect();
        let erase: Vec<f64> = xw[m + 6..2 * m + 6].iter().map(|&v| sigmoid(v)).collect();
        let add = &xw[2 * m + 6..3 * m + 6];
        for i in 0..n {
            for j in 0..m {
                mem[i][j] = mem[i][j] * (1.0 - write.w[i] * erase[j]) + write.w[i] * add[j];
            }
        }
        let joined: Vec<f64> = hs.iter().chain(&r).copied().collect();
        let y = vecmat(&joined, wo);
        out.push(y.iter().zip(bo).map(|(a, b)| a + b).collect());
    }
    out
}
