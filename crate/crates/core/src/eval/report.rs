use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::accuracy::{accuracy_disease, accuracy_overall, accuracy_variable, mean, DiseaseAccuracy, OverallAccuracy};
use super::outliers::{find_outliers, OutlierAnalysis, OUTLIER_THRESHOLD};
use super::stats::{bootstrap_ci, cohens_d, mann_whitney_u, welch_t_test, BootstrapCi, EffectSizeResult, HypothesisTestResult};
use super::EvalError;
use crate::anonymizer::IdentityMap;
use crate::corpus::{Catalog, GroundTruthLedger};
use crate::extract::VariableAssignment;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub threshold: f64,
    pub seed: u64,
    pub resamples: usize,
    pub level: f64,
}

impl ReportOptions {
    pub fn new(seed: u64) -> ReportOptions {
        ReportOptions {
            threshold: OUTLIER_THRESHOLD,
            seed,
            resamples: 10_000,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseSummary {
    pub disease_id: String,
    pub name: String,
    pub n_patients: usize,
    pub n_variables: usize,
    pub accuracy: DiseaseAccuracy,
}

/// Outlier variables against the rest, on per-variable accuracy in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub n_outliers: usize,
    pub n_rest: usize,
    pub mean_all: f64,
    pub mean_without_outliers: Option<f64>,
    pub mean_outliers: Option<f64>,
    pub cohens_d: Option<EffectSizeResult>,
    pub welch: Option<HypothesisTestResult>,
    pub mann_whitney: Option<HypothesisTestResult>,
    pub bootstrap_outliers: Option<BootstrapCi>,
    pub bootstrap_rest: Option<BootstrapCi>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub options: ReportOptions,
    pub overall: OverallAccuracy,
    pub diseases: Vec<DiseaseSummary>,
    pub outliers: OutlierAnalysis,
    pub comparison: Comparison,
}

fn noted<T>(r: Result<T, EvalError>, what: &str, notes: &mut Vec<String>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("{what}: {e}"));
            None
        }
    }
}

fn compare(cells: &[f64], threshold: f64, options: &ReportOptions) -> Comparison {
    let (out, rest): (Vec<f64>, Vec<f64>) = cells.iter().partition(|a| **a < threshold);
    let mut notes = Vec::new();
    let opt_mean = |xs: &[f64]| (!xs.is_empty()).then(|| mean(xs));
    let cohens = noted(cohens_d(&out, &rest), "cohens_d", &mut notes);
    let welch = noted(welch_t_test(&out, &rest), "welch_t_test", &mut notes);
    let mw = noted(mann_whitney_u(&out, &rest), "mann_whitney_u", &mut notes);
    let boot = |xs: &[f64], label: &str, notes: &mut Vec<String>| {
        noted(bootstrap_ci(xs, options.level, options.resamples, options.seed), label, notes)
    };
    let bootstrap_outliers = boot(&out, "bootstrap_outliers", &mut notes);
    let bootstrap_rest = boot(&rest, "bootstrap_rest", &mut notes);
    Comparison {
        n_outliers: out.len(),
        n_rest: rest.len(),
        mean_all: if cells.is_empty() { 0.0 } else { mean(cells) },
        mean_without_outliers: opt_mean(&rest),
        mean_outliers: opt_mean(&out),
        cohens_d: cohens,
        welch,
        mann_whitney: mw,
        bootstrap_outliers,
        bootstrap_rest,
        notes,
    }
}

/// Scores every ledger entry against its assignment. Ledger ids are raw;
/// assignments carry pseudonyms when `ids` is given.
/// Truth and extracted values of one variable, aligned by patient.
type Columns = (Vec<String>, Vec<String>);

pub fn build_report(
    ledger: &GroundTruthLedger,
    assignments: &[VariableAssignment],
    catalog: &Catalog,
    ids: Option<&IdentityMap>,
    options: &ReportOptions,
) -> Result<EvalReport, EvalError> {
    let extracted: BTreeMap<(&str, &str), &str> = assignments
        .iter()
        .map(|a| ((a.patient.as_str(), a.variable_id.as_str()), a.extracted_value.as_str()))
        .collect();
    let mut pairs: BTreeMap<&str, BTreeMap<&str, Columns>> = BTreeMap::new();
    let mut patients: BTreeMap<&str, std::collections::BTreeSet<&str>> = BTreeMap::new();
    for e in &ledger.entries {
        let pid = match ids {
            Some(m) => m.pseudonym(&e.patient_id).ok_or_else(|| EvalError::UnknownPatient(e.patient_id.clone()))?,
            None => e.patient_id.as_str(),
        };
        let x = extracted
            .get(&(pid, e.variable_id.as_str()))
            .ok_or_else(|| EvalError::Incomplete {
                patient: pid.to_string(),
                variable_id: e.variable_id.clone(),
            })?;
        let slot = pairs.entry(&e.disease_id).or_default().entry(&e.variable_id).or_default();
        slot.0.push(e.true_value.clone());
        slot.1.push(x.to_string());
        patients.entry(&e.disease_id).or_default().insert(&e.patient_id);
    }
    let mut diseases = Vec::new();
    for module in &catalog.diseases {
        let Some(vars) = pairs.get(module.disease_id.as_str()) else { continue };
        let mut cells = Vec::with_capacity(module.variable_specs.len());
        for spec in &module.variable_specs {
            let (truth, got) = vars.get(spec.variable_id.as_str()).ok_or_else(|| EvalError::Incomplete {
                patient: "*".into(),
                variable_id: spec.variable_id.clone(),
            })?;
            cells.push(accuracy_variable(&module.disease_id, &spec.variable_id, spec.category, truth, got)?);
        }
        diseases.push(DiseaseSummary {
            disease_id: module.disease_id.clone(),
            name: module.name.clone(),
            n_patients: patients[module.disease_id.as_str()].len(),
            n_variables: cells.len(),
            accuracy: accuracy_disease(&module.disease_id, cells)?,
        });
    }
    let accuracies: Vec<DiseaseAccuracy> = diseases.iter().map(|d| d.accuracy.clone()).collect();
    let overall = accuracy_overall(&accuracies)?;
    let all_cells: Vec<_> = accuracies.iter().flat_map(|d| d.cells.iter().cloned()).collect();
    let outliers = find_outliers(&all_cells, options.threshold);
    let pct: Vec<f64> = all_cells.iter().map(|c| c.percent()).collect();
    let comparison = compare(&pct, options.threshold, options);
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        options: options.clone(),
        overall,
        diseases,
        outliers,
        comparison,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> EvalError + '_ {
    move |e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_rows(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)
        .map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes `report.json`, `fig5_accuracy.csv`, `fig6_outliers.csv` and `fig7_effect.csv`.
pub fn write_report(report: &EvalReport, dir: &Path) -> Result<(), EvalError> {
    let io = |e: std::io::Error| EvalError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    std::fs::write(dir.join("report.json"), json).map_err(io)?;

    let mut fig5: Vec<Vec<String>> = report
        .diseases
        .iter()
        .map(|d| {
            vec![
                d.disease_id.clone(),
                d.name.clone(),
                num(d.accuracy.accuracy),
                num(d.accuracy.sd),
                d.n_variables.to_string(),
                d.n_patients.to_string(),
            ]
        })
        .collect();
    fig5.push(vec![
        "overall".into(),
        "Overall".into(),
        num(report.overall.overall),
        num(report.overall.sd_across_diseases),
        report.diseases.iter().map(|d| d.n_variables).sum::<usize>().to_string(),
        report.diseases.iter().map(|d| d.n_patients).sum::<usize>().to_string(),
    ]);
    write_rows(
        &dir.join("fig5_accuracy.csv"),
        &["disease_id", "disease", "accuracy", "sd", "variables", "patients"],
        fig5,
    )?;

    let o = &report.outliers;
    let mut fig6 = Vec::new();
    for d in &o.per_disease {
        fig6.push(vec!["A".into(), d.disease_id.clone(), String::new(), d.outliers.to_string(), num(d.proportion)]);
    }
    fig6.push(vec!["B".into(), String::new(), "outliers".into(), o.outliers.len().to_string(), num(o.proportion)]);
    fig6.push(vec![
        "B".into(),
        String::new(),
        "non_outliers".into(),
        (o.total_variables - o.outliers.len()).to_string(),
        num(100.0 - o.proportion),
    ]);
    for c in &o.per_category {
        fig6.push(vec!["C".into(), String::new(), c.category.to_string(), c.outliers.to_string(), num(c.contribution)]);
    }
    for c in &o.per_category {
        fig6.push(vec!["D".into(), String::new(), c.category.to_string(), c.outliers.to_string(), num(c.mean_accuracy)]);
    }
    for e in &o.impact {
        fig6.push(vec!["E".into(), e.disease_id.clone(), e.category.to_string(), e.outliers.to_string(), String::new()]);
    }
    write_rows(&dir.join("fig6_outliers.csv"), &["panel", "disease_id", "category", "count", "value"], fig6)?;

    let c = &report.comparison;
    let mut fig7 = vec![
        vec!["mean_all".into(), num(c.mean_all)],
        vec!["mean_without_outliers".into(), opt(c.mean_without_outliers)],
        vec!["mean_outliers".into(), opt(c.mean_outliers)],
        vec!["n_outliers".into(), c.n_outliers.to_string()],
        vec!["n_rest".into(), c.n_rest.to_string()],
        vec!["cohens_d".into(), opt(c.cohens_d.as_ref().map(|d| d.d))],
        vec![
            "effect_band".into(),
            c.cohens_d.as_ref().map(|d| d.band.as_str().to_string()).unwrap_or_default(),
        ],
        vec!["welch_t".into(), opt(c.welch.as_ref().map(|t| t.statistic))],
        vec!["welch_p".into(), opt(c.welch.as_ref().map(|t| t.p_value))],
        vec!["mann_whitney_u".into(), opt(c.mann_whitney.as_ref().map(|t| t.statistic))],
        vec!["mann_whitney_p".into(), opt(c.mann_whitney.as_ref().map(|t| t.p_value))],
    ];
    for (label, ci) in [("outliers", &c.bootstrap_outliers), ("rest", &c.bootstrap_rest)] {
        fig7.push(vec![format!("bootstrap_{label}_lo"), opt(ci.as_ref().map(|b| b.lo))]);
        fig7.push(vec![format!("bootstrap_{label}_hi"), opt(ci.as_ref().map(|b| b.hi))]);
    }
    write_rows(&dir.join("fig7_effect.csv"), &["metric", "value"], fig7)
}

pub fn read_report(path: &Path) -> Result<EvalReport, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
