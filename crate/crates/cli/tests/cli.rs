use std::path::Path;
use std::process::{Command, Output};

fn ianpe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ianpe"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(line: &str, key: &str) -> String {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {line}"))
        .to_string()
}

fn body(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

#[test]
fn generated_quadratic_solves_to_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let gen = ianpe(dir.path(), &["gen", "--kind", "quadratic", "--d", "10", "--seed", "1"]);
    assert!(gen.status.success(), "{gen:?}");
    let solve = ianpe(
        dir.path(),
        &["solve", "--instance", "instance.json", "--mode", "ianpe-strict", "--oracle", "exact"],
    );
    assert_eq!(solve.status.code(), Some(0), "{solve:?}");
    let line = stdout(&solve);
    assert_eq!(field(&line, "status"), "converged");
    assert!(field(&line, "grad_norm").parse::<f64>().unwrap() < 1e-7);

    // stored optimum agrees with the solver
    let inst: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("instance.json")).unwrap()).unwrap();
    let f_star = inst["f_star"].as_f64().unwrap();
    let f = field(&line, "f").parse::<f64>().unwrap();
    assert!((f - f_star).abs() <= 1e-10 * (1.0 + f_star.abs()));
}

#[test]
fn generated_logistic_round_trips_through_libsvm() {
    let dir = tempfile::tempdir().unwrap();
    let gen = ianpe(
        dir.path(),
        &["gen", "--kind", "logistic", "--n", "300", "--d", "8", "--seed", "4", "--out", "lr.json"],
    );
    assert!(gen.status.success(), "{gen:?}");
    assert!(dir.path().join("lr.svm").exists());
    for mode in ["ianpe", "ianpe-strict", "gr-newton"] {
        let o = ianpe(dir.path(), &["solve", "--instance", "lr.json", "--mode", mode, "--init-std", "1"]);
        assert!(o.status.success(), "{mode}: {o:?}");
    }
    let data = ianpe(
        dir.path(),
        &["solve", "--problem", "logreg", "--data", "lr.svm", "--mode", "ianpe-strict", "--oracle", "exact", "--init-std", "0"],
    );
    assert!(data.status.success(), "{data:?}");
}

#[test]
fn identical_runs_give_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    ianpe(dir.path(), &["gen", "--kind", "logistic", "--n", "400", "--d", "10", "--out", "lr.json"]);
    for (i, mode) in ["ianpe", "ianpe-strict"].iter().enumerate() {
        let a = format!("a{i}.csv");
        let b = format!("b{i}.csv");
        for t in [&a, &b] {
            let o = ianpe(
                dir.path(),
                &["solve", "--instance", "lr.json", "--mode", mode, "--oracle", "subsample", "--seed", "9", "--omit-timing", "--trace", t],
            );
            assert!(o.status.success(), "{o:?}");
        }
        let (ta, tb) = (body(&dir.path().join(&a)), body(&dir.path().join(&b)));
        assert!(ta.lines().count() > 2);
        assert_eq!(ta, tb);
    }
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let missing = ianpe(dir.path(), &["solve", "--data", "absent.svm"]);
    assert_eq!(missing.status.code(), Some(4));
    let err = String::from_utf8_lossy(&missing.stderr);
    assert!(err.starts_with("error kind=io message=\""), "{err}");
    assert!(err.contains("absent.svm"));

    std::fs::write(dir.path().join("bad.svm"), "+1 1:0.5\n2 1:1\n").unwrap();
    let bad = ianpe(dir.path(), &["solve", "--data", "bad.svm"]);
    assert_eq!(bad.status.code(), Some(4));

    std::fs::write(dir.path().join("ok.svm"), "+1 1:0.5 2:1\n-1 1:-1 2:0.25\n+1 2:2\n").unwrap();
    let cfg = ianpe(dir.path(), &["solve", "--data", "ok.svm", "--grad-tol", "0"]);
    assert_eq!(cfg.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&cfg.stderr).contains("kind=invalid_tolerance"));

    ianpe(dir.path(), &["gen", "--kind", "logistic", "--n", "100", "--d", "5", "--out", "lr.json"]);
    let capped = ianpe(dir.path(), &["solve", "--instance", "lr.json", "--max-outer", "1"]);
    assert_eq!(capped.status.code(), Some(3));
    assert_eq!(field(&stdout(&capped), "stop"), "max_outer");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    ianpe(dir.path(), &["gen", "--kind", "quadratic", "--d", "4", "--out", "q.json"]);
    std::fs::write(dir.path().join("cfg.json"), r#"{"mode": "gr_newton", "c": 0.2}"#).unwrap();
    let o = ianpe(
        dir.path(),
        &["solve", "--instance", "q.json", "--config", "cfg.json", "--mode", "ianpe-strict", "--trace", "t.csv"],
    );
    assert!(o.status.success(), "{o:?}");
    let header = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let json: serde_json::Value = serde_json::from_str(header.lines().next().unwrap().trim_start_matches("# ")).unwrap();
    assert_eq!(json["mode"], "strict");
    assert_eq!(json["config"]["c"], 0.2);
    assert_eq!(json["guarantee"], "certified");
}

#[test]
fn verify_reports_every_battery() {
    let dir = tempfile::tempdir().unwrap();
    let o = ianpe(dir.path(), &["verify", "--instances", "12", "--seed", "3"]);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 8);
    assert!(out.lines().all(|l| field(l, "status") == "pass"));
}

#[test]
fn bench_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = ianpe(
        dir.path(),
        &["bench", "--seeds", "2", "--n", "300", "--d", "6", "--init-std", "1", "--out", "runs.csv"],
    );
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(stdout(&o).lines().count(), 2);
}
