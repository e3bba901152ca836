use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::accuracy::{mean, AccuracyCell};
use crate::types::Category;

pub const OUTLIER_THRESHOLD: f64 = 85.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierCell {
    pub disease_id: String,
    pub variable_id: String,
    pub category: Category,
    /// Percent.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseOutliers {
    pub disease_id: String,
    pub outliers: usize,
    pub variables: usize,
    /// Outliers as a percentage of the disease's variables.
    pub proportion: f64,
    /// Share of all outliers contributed by the disease, in percent.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryOutliers {
    pub category: Category,
    pub outliers: usize,
    /// Percent of all outliers.
    pub contribution: f64,
    /// Mean accuracy of the category's outliers, in percent.
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactEntry {
    pub category: Category,
    pub disease_id: String,
    pub outliers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierAnalysis {
    pub threshold: f64,
    pub total_variables: usize,
    pub outliers: Vec<OutlierCell>,
    /// Outliers as a percentage of all variables.
    pub proportion: f64,
    pub per_disease: Vec<DiseaseOutliers>,
    /// Sorted by contribution, largest first.
    pub per_category: Vec<CategoryOutliers>,
    pub impact: Vec<ImpactEntry>,
}

/// Percentage of `outliers` among `total` variables.
pub fn outlier_proportion(outliers: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    outliers as f64 / total as f64 * 100.0
}

/// Cells strictly below the threshold (in percent) are outliers.
pub fn find_outliers(cells: &[AccuracyCell], threshold: f64) -> OutlierAnalysis {
    let outliers: Vec<OutlierCell> = cells
        .iter()
        .filter(|c| c.percent() < threshold)
        .map(|c| OutlierCell {
            disease_id: c.disease_id.clone(),
            variable_id: c.variable_id.clone(),
            category: c.category,
            accuracy: c.percent(),
        })
        .collect();

    let mut diseases: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for c in cells {
        diseases.entry(&c.disease_id).or_default().1 += 1;
    }
    for o in &outliers {
        diseases.entry(&o.disease_id).or_default().0 += 1;
    }
    let per_disease = diseases
        .into_iter()
        .map(|(d, (o, v))| DiseaseOutliers {
            disease_id: d.to_string(),
            outliers: o,
            variables: v,
            proportion: outlier_proportion(o, v),
            share: outlier_proportion(o, outliers.len()),
        })
        .collect();

    let mut categories: BTreeMap<Category, Vec<f64>> = BTreeMap::new();
    let mut impact: BTreeMap<(Category, &str), usize> = BTreeMap::new();
    for o in &outliers {
        categories.entry(o.category).or_default().push(o.accuracy);
        *impact.entry((o.category, &o.disease_id)).or_default() += 1;
    }
    let mut per_category: Vec<CategoryOutliers> = categories
        .into_iter()
        .map(|(category, acc)| CategoryOutliers {
            category,
            outliers: acc.len(),
            contribution: outlier_proportion(acc.len(), outliers.len()),
            mean_accuracy: mean(&acc),
        })
        .collect();
    per_category.sort_by(|a, b| b.outliers.cmp(&a.outliers).then(a.category.cmp(&b.category)));

    let impact = impact
        .into_iter()
        .map(|((category, d), n)| ImpactEntry {
            category,
            disease_id: d.to_string(),
            outliers: n,
        })
        .collect();
    OutlierAnalysis {
        threshold,
        total_variables: cells.len(),
        proportion: outlier_proportion(outliers.len(), cells.len()),
        outliers,
        per_disease,
        per_category,
        impact,
    }
}
