use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clinistruct"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CLINISTRUCT_OUT")
        .output()
        .unwrap()
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

const SMALL: &[&str] = &["--seed", "3", "--patients-per-disease", "3", "--disease", "gout,asthma", "--resamples", "100"];

#[test]
fn all_scores_a_clean_corpus_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&run(&[&["all"], SMALL].concat(), dir.path()));
    assert_eq!(v["overall_accuracy"], 100.0);
    assert_eq!(v["tables"], 2);
    assert_eq!(v["assignments"], 3 * (9 + 14));
}

#[test]
fn stages_run_one_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    for stage in ["gen", "scatter", "anonymize", "ingest", "extract", "assemble"] {
        stdout_json(&run(&[&[stage], SMALL].concat(), dir.path()));
    }
    let eval = stdout_json(&run(&[&["eval"], SMALL].concat(), dir.path()));
    assert_eq!(eval["overall"], 100.0);
    let probe = stdout_json(&run(&[&["probe"], SMALL].concat(), dir.path()));
    assert!(probe["documents"].as_u64().unwrap() > 0);
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gen", "--patients-per-disease", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
    let problems = err["problems"].as_array().unwrap();
    assert_eq!(problems.len(), 2);
    assert!(problems[0].as_str().unwrap().contains("seed"));
}

#[test]
fn stage_without_input_names_the_producer() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["extract", "--seed", "1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!((err["error"].as_str(), err["stage"].as_str()), (Some("missing_input"), Some("extract")));
}

#[test]
fn config_file_supplies_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"seed": 3, "patients_per_disease": 2, "diseases": ["gout"]}"#).unwrap();
    let v = stdout_json(&run(&["gen", "--config", cfg.to_str().unwrap()], &dir.path().join("o")));
    assert_eq!(v["patients"], 2);
}

#[test]
fn identical_seeds_give_identical_output() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = stdout_json(&run(&[&["all"], SMALL].concat(), a.path()));
    let sb = stdout_json(&run(&[&["all"], SMALL].concat(), b.path()));
    assert_eq!(sa, sb);
    let ledger = |d: &Path| std::fs::read(d.join("corpus").join("ledger.jsonl")).unwrap();
    assert_eq!(ledger(a.path()), ledger(b.path()));
}
