//! Exact-match accuracy, standard errors, outlier analysis and effect sizes.

mod accuracy;
mod outliers;
mod report;
mod stats;

pub use accuracy::{
    accuracy_disease, accuracy_overall, accuracy_variable, count_matches, standard_error, AccuracyCell,
    DiseaseAccuracy, OverallAccuracy,
};
pub use outliers::{
    find_outliers, outlier_proportion, CategoryOutliers, DiseaseOutliers, ImpactEntry, OutlierAnalysis, OutlierCell,
    OUTLIER_THRESHOLD,
};
pub use report::{
    build_report, read_report, write_report, Comparison, DiseaseSummary, EvalReport, ReportOptions,
    REPORT_SCHEMA_VERSION,
};
pub use stats::{
    bootstrap_ci, cohens_d, mann_whitney_u, welch_t_test, BootstrapCi, EffectBand, EffectSizeResult,
    HypothesisTestResult, TestMethod, EXACT_U_LIMIT,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch: {truth} truth values, {extracted} extracted values")]
    LengthMismatch { truth: usize, extracted: usize },
    #[error("proportion {0} outside [0, 1]")]
    ProportionOutOfRange(f64),
    #[error("patient count is zero")]
    ZeroPatients,
    #[error("each group needs at least {need} values")]
    GroupTooSmall { need: usize },
    #[error("pooled variance is zero; effect undefined")]
    ZeroVariance,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("distribution: {0}")]
    Distribution(String),
    #[error("missing assignment for patient {patient}, variable {variable_id}")]
    Incomplete { patient: String, variable_id: String },
    #[error("patient {0} has no pseudonym")]
    UnknownPatient(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}
