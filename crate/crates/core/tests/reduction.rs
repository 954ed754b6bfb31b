mod support;

use nutm_core::autodiff::Array;
use nutm_core::machine::{Machine, MachineConfig};
use nutm_core::program::AttentionMode;
use nutm_core::rng::{stream, Stream};
use rand::Rng;
use support::ntm_oracle::ntm_forward;

fn random_sequence(rng: &mut impl Rng, width: usize) -> Vec<Array> {
    let len = rng.gen_range(1..=12);
    (0..len)
        .map(|_| Array::vector((0..width).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect()
}

fn max_diff(machine: &Machine, inputs: &[Array]) -> f64 {
    let (logits, _) = machine
        .infer(inputs, &mut stream(0, Stream::Gumbel))
        .unwrap();
    let oracle = ntm_forward(machine, inputs);
    logits
        .iter()
        .zip(&oracle)
        .flat_map(|(a, b)| a.data().iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn single_program_nutm_matches_oracle() {
    let machine = Machine::build(MachineConfig::nutm(6, 4, 12, 10, 5, 1), 3).unwrap();
    let mut rng = stream(99, Stream::Task);
    for _ in 0..100 {
        let seq = random_sequence(&mut rng, 6);
        assert!(max_diff(&machine, &seq) <= 1e-10);
    }
}

#[test]
fn plain_ntm_matches_oracle() {
    let machine = Machine::build(MachineConfig::ntm(6, 4, 12, 10, 5), 4).unwrap();
    let mut rng = stream(7, Stream::Task);
    for _ in 0..20 {
        let seq = random_sequence(&mut rng, 6);
        assert!(max_diff(&machine, &seq) <= 1e-10);
    }
}

#[test]
fn every_single_program_mode_is_the_same_ntm() {
    let base = Machine::build(MachineConfig::ntm(6, 4, 12, 10, 5), 5).unwrap();
    let mut rng = stream(8, Stream::Task);
    let seq = random_sequence(&mut rng, 6);
    let (want, _) = base.infer(&seq, &mut stream(0, Stream::Gumbel)).unwrap();
    for mode in [
        AttentionMode::KeyValue,
        AttentionMode::Direct,
        AttentionMode::GumbelHard,
    ] {
        let mut cfg = MachineConfig::nutm(6, 4, 12, 10, 5, 1);
        cfg.attention = mode;
        cfg.regularizer = nutm_core::machine::Regularizer::None;
        let mut m = Machine::build(cfg, 6).unwrap();
        assert_eq!(m.copy_matching(base.params()), base.params().len());
        let (got, _) = m.infer(&seq, &mut stream(0, Stream::Gumbel)).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!(a.max_abs_diff(b) <= 1e-12, "{mode:?}");
        }
    }
}
