use std::path::Path;
use std::process::{Command, Output};

use piwno::harness::{read_metrics, Checkpoint, METRICS_HEADER};
use piwno::problems::Dataset;

fn piwno(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_piwno"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = piwno(args, cwd);
    assert!(
        out.status.success(),
        "piwno {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const TINY: [&str; 12] = [
    "--set", "model.width=4",
    "--set", "model.blocks=1",
    "--set", "model.proj_hidden=6",
    "--set", "model.levels=2",
    "--set", "run.epochs=2",
    "--set", "run.batch=4",
];

#[test]
fn gen_train_eval_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = ok(&["gen", "--problem", "poisson", "--n", "8", "--seed", "3"], d);
    assert!(s.contains("train.pwno"));
    let train = Dataset::load(&d.join("data/train.pwno")).unwrap();
    assert_eq!(train.count, 8);
    assert!(train.has_solutions());
    assert_eq!(Dataset::load(&d.join("data/val.pwno")).unwrap().count, 1);

    let mut args = vec!["train", "--problem", "poisson", "--mode", "physics", "--data", "data", "--out", "run"];
    args.extend(TINY);
    let s = ok(&args, d);
    assert!(s.contains("trained 2 epochs"), "{s}");
    let run = d.join("run");
    for f in ["best.pwck", "last.pwck", "metrics.csv", "config.cfg"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), METRICS_HEADER);
    assert_eq!(read_metrics(&run.join("metrics.csv")).unwrap().len(), 2);
    let ck = Checkpoint::load(&run.join("best.pwck")).unwrap();
    assert_eq!(ck.model.cfg.lift_dim, 4);

    let s = ok(&["eval", "--ckpt", "best", "--out", "run", "--data", "test"], d);
    assert!(s.contains("relative MSE over 1 samples"), "{s}");

    let s = ok(&["report", "--ckpt", "run/best.pwck", "--data", "data/test.pwno", "--out", "run"], d);
    assert!(s.contains("written"), "{s}");
    let pngs = std::fs::read_dir(run.join("report"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"))
        .count();
    assert!(pngs > 0);
}

#[test]
fn physics_training_without_solutions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--problem", "burgers", "--n", "8", "--no-solutions", "--dtype", "f32"], d);
    assert!(!Dataset::load(&d.join("data/train.pwno")).unwrap().has_solutions());
    let mut args = vec!["train", "--problem", "burgers", "--mode", "physics", "--data", "data", "--out", "run"];
    args.extend(TINY);
    ok(&args, d);

    args[4] = "data";
    let out = piwno(&args, d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn saved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--problem", "poisson", "--n", "8"], d);
    let mut args = vec!["train", "--problem", "poisson", "--mode", "hybrid", "--data", "data", "--out", "a"];
    args.extend(TINY);
    ok(&args, d);
    ok(&["train", "--config", "a/config.cfg", "--out", "b"], d);
    let strip = |p: &str| -> Vec<String> {
        std::fs::read_to_string(d.join(p))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip("a/metrics.csv"), strip("b/metrics.csv"));
}

#[test]
fn bad_input_is_a_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        vec!["train"],
        vec!["train", "--problem", "poisson", "--set", "model.nope=1"],
        vec!["eval", "--ckpt", "missing", "--data", "missing"],
    ] {
        let out = piwno(&args, d);
        assert!(!out.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{args:?}");
    }
    assert!(!piwno(&["gen", "--problem", "heat", "--n", "2"], d).status.success());
}
