use std::path::Path;
use std::process::{Command, Output};

fn requery(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_requery")).args(args).output().expect("run requery")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let o = requery(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn unknown_subcommand_or_flag_exits_1() {
    assert_eq!(requery(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(requery(&["default-matrix", "--bogus"]).status.code(), Some(1));
    assert_eq!(requery(&["--help"]).status.code(), Some(0));
}

#[test]
fn rule_rewrite_of_worked_example() {
    let o = requery(&["rewrite", "--engine", "rule", "call uncle of r", "no i said uncle levar", "--threshold", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "call uncle levar");
    assert!(lines[1].contains("\"uncle of r\" -> \"uncle levar\""));
    assert!(lines[2].starts_with("distance: "));
    assert_eq!(lines[3], "fire: true (threshold 0.5)");
    assert!(stderr(&o).contains("max_n = 3"));
}

#[test]
fn neural_rewrite_without_checkpoint_is_a_usage_error() {
    let o = requery(&["rewrite", "--engine", "2sa", "a b", "c"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_input_file_is_a_data_error() {
    let o = requery(&["evaluate", "--engine", "rule", "--corpus", "/definitely/not/here.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn default_matrix_matches_library_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let o = requery(&["default-matrix", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let written = std::fs::read_to_string(&path).unwrap();
    assert_eq!(written, requery::phonetics::ConfusionMatrix::default_matrix().to_csv());
    assert_eq!(stdout(&requery(&["default_matrix"])), written);
}

fn gen(path: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["gen-data", "--count", "300", "--out", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    requery(&args)
}

#[test]
fn gen_data_is_deterministic_and_logs_its_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"), dir.path().join("c.jsonl"));
    let o = gen(&a, &["--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("seed = 7"));
    gen(&b, &["--seed", "7"]);
    gen(&c, &["--seed", "8"]);
    let (a, b, c) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), std::fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(requery::datagen::read_corpus(std::str::from_utf8(&a).unwrap()).unwrap().len(), 300);
    assert!(stderr(&gen(&dir.path().join("d.jsonl"), &[])).contains("seed = 0"));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# generator\nseed = 3\ncount = 50\n").unwrap();
    let out = dir.path().join("x.jsonl");
    let o = requery(&["gen-data", "--config", cfg.to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("seed = 4") && err.contains("count = 50"), "{err}");

    std::fs::write(&cfg, "colour = blue\n").unwrap();
    let o = requery(&["gen-data", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_writes_curve_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("eval.jsonl");
    assert_eq!(gen(&corpus, &["--seed", "5", "--correction-proportion", "0.3"]).status.code(), Some(0));
    let csv = dir.path().join("curve.csv");
    let o = requery(&[
        "evaluate", "--engine", "rule", "--corpus", corpus.to_str().unwrap(), "--thresholds", "0.5,0,1", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "threshold,far,werr");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("0.000000,0.000000,0.000000"));
    assert!(rows[3].starts_with("1.000000,"));

    let o = requery(&["evaluate", "--engine", "rule", "--corpus", corpus.to_str().unwrap(), "--format", "json"]);
    let report: requery::eval::EvalReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report.curve.len(), 41);
    assert_eq!(report.engine, "rule");

    let o = requery(&["evaluate", "--engine", "rule", "--corpus", corpus.to_str().unwrap(), "--thresholds", "a,b"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn grad_check_reports_every_component() {
    let o = requery(&["grad-check", "--instances", "2", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    for c in ["ane", "encoder", "2sa decoder", "pointer decoder"] {
        assert!(out.lines().any(|l| l.starts_with(c) && l.ends_with("ok")), "{out}");
    }
}

#[test]
fn neural_pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let ok = |o: Output| assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    ok(requery(&["gen-data", "--count", "40", "--seed", "1", "--correction-proportion", "1", "--out", &p("train.jsonl")]));
    ok(requery(&["ane-train", "--epochs", "1", "--dim", "8", "--char-dim", "4", "--out", &p("ane.ck")]));
    let o = requery(&["ane", "nearest", "call", "--checkpoint", &p("ane.ck"), "-k", "3"]);
    assert_eq!(stdout(&o).lines().count(), 3);
    for engine in ["2sa", "ptr"] {
        let ck = p(&format!("{engine}.ck"));
        ok(requery(&[
            "train", "--engine", engine, "--corpus", &p("train.jsonl"), "--ane", &p("ane.ck"), "--epochs", "1", "--hidden", "8", "--out", &ck,
        ]));
        let o = requery(&["rewrite", "--engine", engine, "--checkpoint", &ck, "call uncle of r", "no i said uncle levar"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).lines().nth(1).unwrap().starts_with("pointers: "));
        let wrong = if engine == "2sa" { "ptr" } else { "2sa" };
        let o = requery(&["rewrite", "--engine", wrong, "--checkpoint", &ck, "a", "b"]);
        assert_eq!(o.status.code(), Some(2));
        let o = requery(&["ane-nearest", "call", "--checkpoint", &ck]);
        assert_eq!(stdout(&o).lines().count(), 5);
    }
}

#[test]
fn emitted_matrix_loads_back_through_matrix_flag() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    assert_eq!(requery(&["default-matrix", "--out", path.to_str().unwrap()]).status.code(), Some(0));
    let o = requery(&["rewrite", "--matrix", path.to_str().unwrap(), "call uncle of r", "no i said uncle levar"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().next(), Some("call uncle levar"));
    std::fs::write(&path, "phone,XX\nXX,0\n").unwrap();
    assert_eq!(requery(&["rewrite", "--matrix", path.to_str().unwrap(), "a", "b"]).status.code(), Some(2));
}
