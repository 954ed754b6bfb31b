//! Two-component PCA of controller states by power iteration with
//! deflation.

use rand::Rng;

use crate::error::{NutmError, Result};
use crate::rng::{stream, Stream};

/// Convergence tolerance on the change of the unit direction per iteration.
pub const TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 200_000;
/// A second eigenvalue below this fraction of the first counts as absent.
const RANK_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit principal directions; the largest-magnitude entry is positive.
    pub components: [Vec<f64>; 2],
    /// Sample variances (divided by `n - 1`) along each direction.
    pub variances: [f64; 2],
    pub projections: Vec<[f64; 2]>,
    /// Set when the data spans fewer than two directions; the second
    /// coordinate is then zero.
    pub rank_deficient: bool,
}

fn matvec(c: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    c.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn canonical_sign(v: &mut [f64]) {
    let big = v
        .iter()
        .copied()
        .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Dominant eigenpair of a symmetric positive semidefinite matrix, or
/// `None` if the matrix maps the start vector to zero.
fn dominant(c: &[Vec<f64>]) -> Option<(f64, Vec<f64>)> {
    let d = c.len();
    // Fixed pseudo-random start: never orthogonal to the top direction
    // except on a measure-zero set.
    let mut rng = stream(0x9ca, Stream::Eval);
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    for _ in 0..MAX_ITERATIONS {
        let mut w = matvec(c, &v);
        let n = norm(&w);
        if n == 0.0 {
            return None;
        }
        w.iter_mut().for_each(|x| *x /= n);
        let delta = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = w;
        if delta < TOLERANCE {
            break;
        }
    }
    let lambda = dot(&v, &matvec(c, &v));
    Some((lambda, v))
}

/// Projects mean-centred `states` onto their top two principal directions.
pub fn pca_project(states: &[Vec<f64>]) -> Result<Pca> {
    let n = states.len();
    if n < 2 {
        return Err(NutmError::Pca(format!("need at least 2 states, got {n}")));
    }
    let d = states[0].len();
    if d < 2 {
        return Err(NutmError::Pca(format!(
            "state width must be at least 2, got {d}"
        )));
    }
    if let Some(i) = states.iter().position(|s| s.len() != d) {
        return Err(NutmError::Pca(format!(
            "state {i} has width {}, expected {d}",
            states[i].len()
        )));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| states.iter().map(|s| s[j]).sum::<f64>() / n as f64)
        .collect();
    let centred: Vec<Vec<f64>> = states
        .iter()
        .map(|s| s.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for x in &centred {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += x[i] * x[j];
            }
        }
    }
    cov.iter_mut().flatten().for_each(|v| *v /= (n - 1) as f64);

    let (l1, mut v1) = dominant(&cov).unwrap_or((0.0, {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        e
    }));
    canonical_sign(&mut v1);
    let mut deflated = cov.clone();
    for i in 0..d {
        for j in 0..d {
            deflated[i][j] -= l1 * v1[i] * v1[j];
        }
    }
    let second = dominant(&deflated).map(|(l, mut v)| {
        // Remove any drift back toward the first direction.
        let p = dot(&v, &v1);
        v.iter_mut().zip(&v1).for_each(|(x, a)| *x -= p * a);
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        (l, v)
    });
    let (l2, mut v2, rank_deficient) = match second {
        Some((l, v))
            if l > RANK_EPS * l1.max(f64::MIN_POSITIVE) && v.iter().all(|x| x.is_finite()) =>
        {
            (l, v, false)
        }
        _ => (0.0, vec![0.0; d], true),
    };
    canonical_sign(&mut v2);
    let projections = centred
        .iter()
        .map(|x| [dot(x, &v1), if rank_deficient { 0.0 } else { dot(x, &v2) }])
        .collect();
    Ok(Pca {
        mean,
        components: [v1, v2],
        variances: [l1, l2],
        projections,
        rank_deficient,
    })
}
