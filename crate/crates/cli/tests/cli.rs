use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
[task]
kind = copy
bits = 4
length = 1..3
test_length = 4

[machine]
hidden = 8
memory_rows = 8
memory_width = 4
programs = 2

[train]
iterations = 30
log_every = 10
checkpoint_every = 10
";

fn nutm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nutm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn train(cfg: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--config", cfg, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    nutm(&args)
}

#[test]
fn train_writes_outputs_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.cfg", TINY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let res = train(&cfg, out, &["--seed", "3"]);
        assert!(res.status.success(), "{}", text(&res));
    }
    let metrics = fs::read_to_string(a.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "iter,loss,bit_err,bit_acc,eta,seconds");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("30,"));
    for i in [0, 10, 20, 30] {
        assert!(a.join(format!("ckpt-{i:08}.bin")).exists(), "ckpt {i}");
    }
    let summary = fs::read_to_string(a.join("summary.txt")).unwrap();
    assert!(summary.contains("iterations = 30"), "{summary}");
    for file in ["metrics.csv", "final.ckpt"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file} differs"
        );
    }
    let other = dir.path().join("c");
    assert!(train(&cfg, &other, &["--seed", "4"]).status.success());
    assert_ne!(
        fs::read(a.join("final.ckpt")).unwrap(),
        fs::read(other.join("final.ckpt")).unwrap()
    );
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "nokind.cfg", "[task]\nlength = 1..3\n");
    let res = train(&cfg, &out, &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(text(&res).contains("task.kind"), "{}", text(&res));

    let cfg = write_config(
        dir.path(),
        "typo.cfg",
        &TINY.replace("memory_rows", "memory_row"),
    );
    let res = train(&cfg, &out, &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(text(&res).contains("line 9"), "{}", text(&res));

    let res = nutm(&["train", "--config", "/nonexistent.cfg", "--out", "x"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn gradcheck_passes_and_detects_faults() {
    let res = nutm(&["gradcheck"]);
    assert!(res.status.success(), "{}", text(&res));
    assert!(text(&res).contains("nutm_step"));

    let res = nutm(&["gradcheck", "--inject-fault", "circular_conv"]);
    assert_eq!(res.status.code(), Some(1));
    let t = text(&res);
    assert!(t.contains("gradient check failed for:"), "{t}");
    assert!(t.contains("circular_conv"), "{t}");

    let res = nutm(&["gradcheck", "--inject-fault", "no_such_op"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn params_reports_reference_counts() {
    let res = nutm(&["params"]);
    assert!(res.status.success(), "{}", text(&res));
    let t = text(&res);
    assert!(t.contains("63260") && t.contains("52206"), "{t}");
    assert!(!t.contains("MISMATCH"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.cfg", TINY);
    let res = nutm(&["params", "--config", &cfg]);
    assert!(res.status.success(), "{}", text(&res));
    assert!(text(&res).contains("read0.values"));
}

#[test]
fn eval_and_trace_on_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny.cfg", TINY);
    let run = dir.path().join("run");
    assert!(train(&cfg, &run, &[]).status.success());
    let ckpt = run.join("final.ckpt");
    let ckpt = ckpt.to_str().unwrap();

    let eval = || {
        nutm(&[
            "eval",
            "--config",
            &cfg,
            "--checkpoint",
            ckpt,
            "--count",
            "20",
        ])
    };
    let (e1, e2) = (eval(), eval());
    assert!(e1.status.success(), "{}", text(&e1));
    assert_eq!(e1.stdout, e2.stdout);
    assert!(text(&e1).contains("copy: bit_error_per_sequence"));

    // A checkpoint for a different task layout is refused.
    let other = write_config(
        dir.path(),
        "ar.cfg",
        "[task]\nkind = assoc_recall\n[machine]\nhidden = 8\nmemory_rows = 8\nmemory_width = 4\n",
    );
    let res = nutm(&["eval", "--config", &other, "--checkpoint", ckpt]);
    assert_eq!(res.status.code(), Some(2));
    let res = nutm(&["eval", "--config", &cfg, "--checkpoint", &cfg]);
    assert_eq!(res.status.code(), Some(2));

    let tdir = dir.path().join("trace");
    let res = nutm(&[
        "trace",
        "--config",
        &cfg,
        "--checkpoint",
        ckpt,
        "--out",
        tdir.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", text(&res));
    let instance = fs::read_to_string(tdir.join("instance.txt")).unwrap();
    let steps = instance.lines().count();
    let trace = fs::read_to_string(tdir.join("trace.csv")).unwrap();
    let mut rows = trace.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let rows: Vec<Vec<&str>> = rows.map(|r| r.split(',').collect()).collect();
    assert_eq!(rows.len(), steps * 2);
    let prog: Vec<usize> = (0..header.len())
        .filter(|&i| header[i].starts_with("program"))
        .collect();
    assert_eq!(prog.len(), 2);
    for r in &rows {
        let total: f64 = prog.iter().map(|&i| r[i].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    let states = fs::read_to_string(tdir.join("states.csv")).unwrap();
    assert_eq!(states.lines().count(), steps);
    let pca = fs::read_to_string(tdir.join("pca.csv")).unwrap();
    assert_eq!(pca.lines().count(), steps);
}
