//! Full covariance eigendecomposition, used as an oracle for the power
//! iteration PCA.

use nalgebra::{DMatrix, SymmetricEigen};
use nutm_core::pca::pca_project;
use rand::Rng;
use rand_distr::StandardNormal;

/// Top two eigenpairs of the sample covariance, by full decomposition.
pub fn oracle(states: &[Vec<f64>]) -> ([f64; 2], [Vec<f64>; 2]) {
    let (n, d) = (states.len(), states[0].len());
    let x = DMatrix::from_fn(n, d, |i, j| states[i][j]);
    let mean = x.row_mean();
    let c = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = c.transpose() * &c / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vec = |k: usize| eig.eigenvectors.column(order[k]).iter().copied().collect();
    (
        [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]],
        [vec(0), vec(1)],
    )
}

pub fn random_instance(rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let d = rng.gen_range(2..=8);
    let n = rng.gen_range(d + 2..=40);
    let scales: Vec<f64> = (0..d).map(|_| rng.gen_range(0.2..3.0)).collect();
    let mix: Vec<Vec<f64>> = (0..d)
        .map(|_| {
            (0..d)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    (0..n)
        .map(|_| {
            let z: Vec<f64> = scales
                .iter()
                .map(|s| s * rng.sample::<f64, _>(StandardNormal))
                .collect();
            (0..d)
                .map(|j| (0..d).map(|k| mix[j][k] * z[k]).sum())
                .collect()
        })
        .collect()
}

/// Worst deviation of `pca_project` from the oracle on one instance:
/// variance error relative to `max(lambda1, 1)`, and the largest component
/// entry error after sign alignment.
pub fn deviation(states: &[Vec<f64>]) -> (f64, f64) {
    let pca = pca_project(states).unwrap();
    let (vals, vecs) = oracle(states);
    let (mut var_err, mut vec_err) = (0.0f64, 0.0f64);
    for k in 0..2 {
        var_err = var_err.max((pca.variances[k] - vals[k]).abs() / vals[0].max(1.0));
        let dot: f64 = pca.components[k]
            .iter()
            .zip(&vecs[k])
            .map(|(a, b)| a * b)
            .sum();
        let sign = dot.signum();
        for (a, b) in pca.components[k].iter().zip(&vecs[k]) {
            vec_err = vec_err.max((a - sign * b).abs());
        }
    }
    (var_err, vec_err)
}
