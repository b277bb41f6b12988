use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn chainkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainkit")).args(args).output().expect("spawn chainkit")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn planted(dir: &Path) -> PathBuf {
    let data = dir.join("data.csv");
    let o = chainkit(&["generate", "--kind", "planted", "--rows", "150", "--seed", "3", "--out", p(&data)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    data
}

fn metrics(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

#[test]
fn baseline_preset_trains_one_classifier_per_label_per_member() {
    let t = tempfile::tempdir().unwrap();
    let data = planted(t.path());
    let out = t.path().join("run");
    let o = chainkit(&["train", "--data", p(&data), "--labels", "6", "--header", "--preset", "baseline", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = metrics(&out);
    assert_eq!(m["method"], "ecc");
    assert_eq!(m["classifiers_trained"], 60);
    assert!(out.join("model.txt").exists());
}

#[test]
fn good_order_writes_trials() {
    let t = tempfile::tempdir().unwrap();
    let data = planted(t.path());
    let out = t.path().join("run");
    let o = chainkit(&[
        "train", "--data", p(&data), "--labels", "6", "--header", "--preset", "good-order", "--steps", "5", "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trials = std::fs::read_to_string(out.join("trials.csv")).unwrap();
    assert!(trials.starts_with("step,order,score\n"));
    assert_eq!(trials.lines().count(), 1 + 6);
    assert!(out.join("structure.txt").exists());
}

#[test]
fn predictions_are_reproducible() {
    let t = tempfile::tempdir().unwrap();
    let data = planted(t.path());
    let mut outputs = Vec::new();
    for rep in 0..2 {
        let run = t.path().join(format!("run{rep}"));
        let o = chainkit(&["train", "--data", p(&data), "--labels", "6", "--header", "--method", "br", "--out", p(&run)]);
        assert!(o.status.success());
        let o = chainkit(&["predict", "--model", p(&run.join("model.txt")), "--data", p(&data), "--header", "--out", p(&run)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(run.join("predictions.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.starts_with("y1,y2,y3,y4,y5,y6,payoff\n"));
    assert_eq!(text.lines().count(), 151);
}

#[test]
fn usage_errors_exit_with_two() {
    let t = tempfile::tempdir().unwrap();
    let data = planted(t.path());
    assert_eq!(chainkit(&["train"]).status.code(), Some(2));
    let o = chainkit(&["train", "--data", p(&data), "--labels", "6", "--header", "--preset", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    let o = chainkit(&["train", "--data", p(&data), "--labels", "6", "--header", "--method", "ecc", "--inference", "beam"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let t = tempfile::tempdir().unwrap();
    let missing = t.path().join("missing.csv");
    let o = chainkit(&["train", "--data", p(&missing), "--labels", "2", "--out", p(t.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_and_set_are_applied_in_order() {
    let t = tempfile::tempdir().unwrap();
    let data = planted(t.path());
    let cfg = t.path().join("run.conf");
    std::fs::write(&cfg, "# chain with a tree learner\nmethod = cc\nlearner = tree\nmax_depth = 3\nseed = 4\n").unwrap();
    let out = t.path().join("run");
    let o = chainkit(&[
        "train", "--data", p(&data), "--labels", "6", "--header", "--config", p(&cfg), "--set", "seed=9", "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = metrics(&out);
    assert_eq!(m["method"], "cc");
    assert_eq!(m["seed"], 9);
    let model = std::fs::read_to_string(out.join("model.txt")).unwrap();
    assert!(model.contains("classifier tree"));
}

#[test]
fn evaluate_reports_metrics() {
    let t = tempfile::tempdir().unwrap();
    let data = planted(t.path());
    let run = t.path().join("run");
    assert!(chainkit(&["train", "--data", p(&data), "--labels", "6", "--header", "--out", p(&run)]).status.success());
    let ev = t.path().join("eval");
    let o = chainkit(&[
        "evaluate", "--model", p(&run.join("model.txt")), "--data", p(&data), "--labels", "6", "--header",
        "--inference", "exhaustive", "--out", p(&ev),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = metrics(&ev);
    let em = m["metrics"]["exact_match"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&em));
}
