use nutm_core::autodiff::{Array, Tape};
use nutm_core::machine::{Machine, MachineConfig};
use nutm_core::rng::{stream, Stream};
use nutm_core::tasks::{generate_task, Span, TaskSpec};
use nutm_core::train::prediction_loss;

fn config() -> MachineConfig {
    MachineConfig {
        read_heads: 2,
        write_heads: 1,
        ..MachineConfig::nutm(5, 3, 8, 6, 4, 3)
    }
}

fn inputs() -> Vec<Array> {
    generate_task(
        &TaskSpec::copy(3, Span::exactly(3)),
        &mut stream(1, Stream::Task),
    )
    .unwrap()
    .inputs
}

#[test]
fn build_and_run_are_deterministic() {
    let a = Machine::build(config(), 12).unwrap();
    let b = Machine::build(config(), 12).unwrap();
    let (la, ta) = a.infer(&inputs(), &mut stream(0, Stream::Gumbel)).unwrap();
    let (lb, tb) = b.infer(&inputs(), &mut stream(0, Stream::Gumbel)).unwrap();
    assert_eq!(la, lb);
    assert_eq!(ta, tb);
}

#[test]
fn heads_have_separate_program_memories() {
    let base = Machine::build(config(), 2).unwrap();
    let mut changed = base.clone();
    let id = changed.params().find("read1.values").unwrap();
    // Row 0, column 6 of program 0: a shift logit, which moves the address
    // even while the memory is still uniform.
    changed.params_mut().get_mut(id).data_mut()[6] += 0.5;
    let rng = || stream(0, Stream::Gumbel);
    let (_, t0) = base.infer(&inputs(), &mut rng()).unwrap();
    let (_, t1) = changed.infer(&inputs(), &mut rng()).unwrap();
    // First step: program choice depends only on the controller, and only
    // head 1's stored programs changed.
    for n in [0, 2] {
        assert_eq!(t0.steps[0].heads[n].program, t1.steps[0].heads[n].program);
        assert_eq!(t0.steps[0].heads[n].address, t1.steps[0].heads[n].address);
    }
    assert_ne!(t0.steps[0].heads[1].address, t1.steps[0].heads[1].address);
}

#[test]
fn gradients_reach_program_keys_and_values() {
    let m = Machine::build(config(), 4).unwrap();
    let inst = generate_task(
        &TaskSpec::copy(3, Span::exactly(3)),
        &mut stream(1, Stream::Task),
    )
    .unwrap();
    let mut tape = Tape::new();
    let bound = m.bind(&mut tape, true);
    let (logits, _) = m
        .run_sequence(
            &mut tape,
            &bound,
            &inst.inputs,
            &mut stream(0, Stream::Gumbel),
        )
        .unwrap();
    let loss = prediction_loss(&mut tape, &logits, &inst.targets, &inst.mask, 1).unwrap();
    let grads = tape.backward(loss).unwrap();
    for head in ["read0", "read1", "write0"] {
        for part in ["keys", "values", "meta.weight"] {
            let id = m.params().find(&format!("{head}.{part}")).unwrap();
            let g = grads.wrt(bound.var(id));
            assert!(g.data().iter().any(|v| *v != 0.0), "{head}.{part}");
        }
    }
}

#[test]
fn trace_has_one_record_per_head_and_step() {
    let m = Machine::build(config(), 4).unwrap();
    let seq = inputs();
    let (_, trace) = m.infer(&seq, &mut stream(0, Stream::Gumbel)).unwrap();
    assert_eq!(trace.steps.len(), seq.len());
    for step in &trace.steps {
        assert_eq!(step.heads.len(), 3);
        assert_eq!(step.features.len(), 8);
    }
}
