use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use abic::problems::{phillips_problem, synthesize_observations};
use abic::selection::{select_case1, SearchOptions};
use abic::PriorModel;

fn abic(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abic")).args(args).arg("--out").arg(out).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn end_to_end_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = abic(
        &["select-kappa", "--kind", "phillips", "--n", "32", "--sigma2", "1e-4", "--seed", "42", "--case", "1", "--mu-mode", "zero"],
        &out,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let result = json(&out.join("result.json"));
    assert_eq!(result["version"], abic::experiment::VERSION);
    assert_eq!(result["mu_assumed_zero"], true);
    assert_eq!(result["config"]["seed"], 42);

    let g = phillips_problem(32).unwrap();
    let (y, _) = synthesize_observations(&g.design, &g.exact_solution, 1e-4, 42).unwrap();
    let problem = g.design.with_observations(y).unwrap();
    let sel = select_case1(&problem, &PriorModel::standard(32), &SearchOptions::default()).unwrap();
    assert_eq!(result["result"]["sigma2_hat"].as_f64().unwrap(), sel.sigma2_hat.unwrap());
    assert_eq!(result["result"]["kappa_hat"].as_f64().unwrap(), sel.kappa_hat);

    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("kappa,quad_term,logdet_term,objective,case"));
    assert_eq!(lines.count(), sel.trace.len());
}

#[test]
fn generate_then_select_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    assert!(abic(&["generate", "--kind", "spectrum", "--n", "20", "--t", "5", "--decay", "4", "--seed", "3"], &gen).status.success());
    for f in ["problem.json", "truth.json", "result.json", "config.json"] {
        assert!(gen.join(f).exists(), "{f}");
    }

    let problem = gen.join("problem.json");
    let truth = gen.join("truth.json");
    let sel = dir.path().join("sel");
    let o = abic(
        &["select-kappa", "--problem", problem.to_str().unwrap(), "--truth", truth.to_str().unwrap(), "--mu-mode", "true"],
        &sel,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&sel.join("result.json"));
    assert_eq!(r["mu_assumed_zero"], false);
    assert!(r["result"]["kappa_hat"].as_f64().unwrap() > 0.0);

    // a file without μ is read as zero-mean and flagged
    let zero = dir.path().join("zero");
    assert!(abic(&["sweep", "--problem", problem.to_str().unwrap(), "--points", "11"], &zero).status.success());
    assert_eq!(json(&zero.join("result.json"))["mu_assumed_zero"], true);
    assert_eq!(std::fs::read_to_string(zero.join("sweep.csv")).unwrap().lines().count(), 12);
}

#[test]
fn config_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(abic(&["bias-study", "--kind", "phillips", "--n", "16", "--replicates", "500", "--seed", "9"], &a).status.success());
    let cfg = a.join("config.json");
    assert!(abic(&["--config", cfg.to_str().unwrap()], &b).status.success());
    for f in ["result.json", "config.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let out = dir.path().join("no-source");
    let o = abic(&["solve"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&out.join("error.json"))["code"], "config");

    let out = dir.path().join("missing");
    let o = abic(&["solve", "--problem", "/nonexistent/problem.json"], &out);
    assert_eq!(o.status.code(), Some(4));
    let report: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(report["exit_code"], 4);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"A": [[1.0], [1.0]], "y": [1.0]}"#).unwrap();
    let o = abic(&["solve", "--problem", bad.to_str().unwrap()], &dir.path().join("dim"));
    assert_eq!(o.status.code(), Some(2));

    let flat = dir.path().join("flat.json");
    std::fs::write(&flat, r#"{"A": [[1.0], [1.0]], "y": [0.0, 0.0]}"#).unwrap();
    let o = abic(&["select-kappa", "--problem", flat.to_str().unwrap()], &dir.path().join("flat"));
    assert_eq!(o.status.code(), Some(3));

    let o = abic(&["bias-study", "--kind", "phillips", "--replicates", "10"], &dir.path().join("few"));
    assert_eq!(o.status.code(), Some(2));
}
