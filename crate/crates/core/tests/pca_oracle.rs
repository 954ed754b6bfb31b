mod support;

use nutm_core::pca::pca_project;
use nutm_core::rng::{stream, Stream};
use rand::Rng;
use rand_distr::StandardNormal;
use support::pca_oracle::{deviation, oracle, random_instance};

#[test]
fn matches_eigendecomposition() {
    let mut rng = stream(31, Stream::Eval);
    for _ in 0..50 {
        let states = random_instance(&mut rng);
        let (var_err, vec_err) = deviation(&states);
        assert!(var_err <= 1e-6 && vec_err <= 1e-6, "{var_err} {vec_err}");
    }
}
#[test]
fn isotropic_sample_splits_evenly() {
    let mut rng = stream(5, Stream::Eval);
    let states: Vec<Vec<f64>> = (0..4000)
        .map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let pca = pca_project(&states).unwrap();
    let (vals, _) = oracle(&states);
    let share = pca.variances[0] / (pca.variances[0] + pca.variances[1]);
    assert!((share - 0.5).abs() < 0.05, "{share}");
    assert!((pca.variances[0] - vals[0]).abs() < 1e-6);
}
