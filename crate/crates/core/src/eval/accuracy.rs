use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::canonical::values_match;
use crate::types::Category;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub disease_id: String,
    pub variable_id: String,
    pub category: Category,
    /// Proportion of patients whose value matched, in [0, 1].
    pub p: f64,
    pub n_patients: usize,
    pub correct: usize,
    pub se: f64,
}

impl AccuracyCell {
    pub fn percent(&self) -> f64 {
        self.p * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseAccuracy {
    pub disease_id: String,
    pub cells: Vec<AccuracyCell>,
    /// Mean of the cell accuracies, in percent.
    pub accuracy: f64,
    /// Sample SD of the cell accuracies, in percent.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallAccuracy {
    /// Unweighted mean of disease accuracies, in percent.
    pub overall: f64,
    /// Sample SD across disease accuracies, in percent.
    pub sd_across_diseases: f64,
    /// SE of the pooled match proportion over every (patient, variable) pair, in percent.
    pub pooled_se: f64,
    pub n_diseases: usize,
}

pub fn standard_error(p: f64, n: usize) -> Result<f64, EvalError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(EvalError::ProportionOutOfRange(p));
    }
    if n == 0 {
        return Err(EvalError::ZeroPatients);
    }
    Ok((p * (1.0 - p) / n as f64).sqrt())
}

/// Number of exact matches after canonical serialization of both sides.
pub fn count_matches(truth: &[String], extracted: &[String]) -> Result<usize, EvalError> {
    if truth.len() != extracted.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            extracted: extracted.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::ZeroPatients);
    }
    Ok(truth.iter().zip(extracted).filter(|(t, x)| values_match(t, x)).count())
}

pub fn accuracy_variable(
    disease_id: &str,
    variable_id: &str,
    category: Category,
    truth: &[String],
    extracted: &[String],
) -> Result<AccuracyCell, EvalError> {
    let correct = count_matches(truth, extracted)?;
    let n = truth.len();
    let p = correct as f64 / n as f64;
    Ok(AccuracyCell {
        disease_id: disease_id.to_string(),
        variable_id: variable_id.to_string(),
        category,
        p,
        n_patients: n,
        correct,
        se: standard_error(p, n)?,
    })
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Bessel-corrected sample SD; zero for fewer than two values.
pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn accuracy_disease(disease_id: &str, cells: Vec<AccuracyCell>) -> Result<DiseaseAccuracy, EvalError> {
    if cells.is_empty() {
        return Err(EvalError::Empty("variable accuracies"));
    }
    let pct: Vec<f64> = cells.iter().map(AccuracyCell::percent).collect();
    Ok(DiseaseAccuracy {
        disease_id: disease_id.to_string(),
        accuracy: mean(&pct),
        sd: sample_sd(&pct),
        cells,
    })
}

pub fn accuracy_overall(diseases: &[DiseaseAccuracy]) -> Result<OverallAccuracy, EvalError> {
    if diseases.is_empty() {
        return Err(EvalError::Empty("disease accuracies"));
    }
    let acc: Vec<f64> = diseases.iter().map(|d| d.accuracy).collect();
    let (correct, total) = diseases
        .iter()
        .flat_map(|d| &d.cells)
        .fold((0usize, 0usize), |(c, t), cell| (c + cell.correct, t + cell.n_patients));
    let pooled_se = if total == 0 {
        0.0
    } else {
        standard_error(correct as f64 / total as f64, total)? * 100.0
    };
    Ok(OverallAccuracy {
        overall: mean(&acc),
        sd_across_diseases: sample_sd(&acc),
        pooled_se,
        n_diseases: diseases.len(),
    })
}
