use std::path::{Path, PathBuf};

use clinistruct::pipeline::{
    run_all, stage_assemble, stage_eval, stage_extract, stage_gen, stage_ingest, stage_scatter, ConfigError,
    ConfigFile, Layout, PipelineError, RunConfig, DEFAULT_OUT, DEFAULT_PATIENTS,
};

fn flags(seed: Option<u64>) -> ConfigFile {
    ConfigFile { seed, ..ConfigFile::default() }
}

fn small(out: &Path, seed: u64) -> RunConfig {
    let f = ConfigFile {
        seed: Some(seed),
        patients_per_disease: Some(4),
        diseases: Some(vec!["prostate_cancer".into(), "ear_infections".into()]),
        out: Some(out.to_path_buf()),
        resamples: Some(200),
        ..ConfigFile::default()
    };
    RunConfig::resolve(f, None, None).unwrap()
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn defaults_fill_the_gaps() {
    let c = RunConfig::resolve(flags(Some(1)), None, None).unwrap();
    assert_eq!((c.patients_per_disease, c.out.as_path(), c.noise.as_str()), (DEFAULT_PATIENTS, Path::new(DEFAULT_OUT), "zero"));
    assert!(c.anonymize && !c.strict && c.diseases.is_empty());
}

#[test]
fn output_precedence_is_flag_env_file_default() {
    let file = ConfigFile { out: Some("from-file".into()), seed: Some(5), ..ConfigFile::default() };
    let env = Some(PathBuf::from("from-env"));
    let with_flag = ConfigFile { out: Some("from-flag".into()), ..ConfigFile::default() };
    assert_eq!(RunConfig::resolve(with_flag, Some(file.clone()), env.clone()).unwrap().out, Path::new("from-flag"));
    assert_eq!(RunConfig::resolve(ConfigFile::default(), Some(file.clone()), env).unwrap().out, Path::new("from-env"));
    assert_eq!(RunConfig::resolve(ConfigFile::default(), Some(file), None).unwrap().out, Path::new("from-file"));
}

#[test]
fn flags_override_file_fields() {
    let file = ConfigFile { seed: Some(5), patients_per_disease: Some(9), noise: Some("mild".into()), ..ConfigFile::default() };
    let c = RunConfig::resolve(ConfigFile { seed: Some(6), ..ConfigFile::default() }, Some(file), None).unwrap();
    assert_eq!((c.seed, c.patients_per_disease, c.noise.as_str()), (6, 9, "mild"));
}

#[test]
fn every_problem_is_collected() {
    let f = ConfigFile {
        patients_per_disease: Some(0),
        diseases: Some(vec!["scurvy".into()]),
        noise: Some("/no/such/profile.json".into()),
        jobs: Some(0),
        ..ConfigFile::default()
    };
    let ConfigError(problems) = RunConfig::resolve(f, None, None).unwrap_err();
    assert_eq!(problems.len(), 5, "{problems:?}");
    assert!(problems[0].contains("seed"));
    assert!(problems.iter().any(|p| p.contains("scurvy")));
}

#[test]
fn config_file_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    std::fs::write(&p, r#"{"seed": 3, "sede": 4}"#).unwrap();
    assert!(ConfigFile::load(&p).unwrap_err().contains("sede"));
    std::fs::write(&p, r#"{"seed": 3, "patients_per_disease": 2}"#).unwrap();
    assert_eq!(ConfigFile::load(&p).unwrap().patients_per_disease, Some(2));
}

#[test]
fn stages_report_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), 1);
    for e in [
        stage_scatter(&cfg).map(|_| ()),
        stage_ingest(&cfg).map(|_| ()),
        stage_extract(&cfg).map(|_| ()),
        stage_assemble(&cfg).map(|_| ()),
        stage_eval(&cfg).map(|_| ()),
    ] {
        match e {
            Err(e @ PipelineError::MissingInput { .. }) => assert_eq!(e.kind(), "missing_input"),
            other => panic!("{other:?}"),
        }
    }
    stage_gen(&cfg).unwrap();
    assert!(matches!(stage_ingest(&cfg), Err(PipelineError::MissingInput { stage: "ingest", .. })));
}

#[test]
fn clean_run_scores_perfectly_and_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let s = run_all(&small(a.path(), 11)).unwrap();
    assert_eq!(s.overall_accuracy, 100.0);
    assert_eq!((s.tables, s.violations, s.outliers), (2, 0, 0));
    assert_eq!(s.assignments, 4 * (10 + 12));
    let layout = Layout::new(a.path());
    assert!(layout.megatable_dir("prostate_cancer").exists());
    assert!(layout.eval().exists());
    run_all(&small(b.path(), 11)).unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
}

#[test]
fn noisy_run_loses_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), 11);
    cfg.noise = "respiratory-otic".into();
    let s = run_all(&cfg).unwrap();
    assert!(s.overall_accuracy < 100.0 && s.overall_accuracy > 50.0, "{}", s.overall_accuracy);
}

#[test]
fn written_report_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), 5);
    run_all(&cfg).unwrap();
    let report = stage_eval(&cfg).unwrap();
    let back = clinistruct::eval::read_report(&Layout::new(dir.path()).eval().join("report.json")).unwrap();
    assert_eq!(back, report);
}
