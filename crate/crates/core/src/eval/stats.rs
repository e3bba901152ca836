use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::accuracy::{mean, sample_sd};
use super::EvalError;
use crate::seed::rng_for;

/// Largest n1·n2 for which the U test enumerates the exact null distribution.
pub const EXACT_U_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectBand {
    /// |d| < 0.3
    Small,
    /// 0.3 <= |d| < 0.5
    Intermediate,
    /// 0.5 <= |d| < 0.8
    Medium,
    /// |d| >= 0.8
    Large,
}

impl EffectBand {
    pub fn classify(d: f64) -> EffectBand {
        let a = d.abs();
        if a >= 0.8 {
            EffectBand::Large
        } else if a >= 0.5 {
            EffectBand::Medium
        } else if a >= 0.3 {
            EffectBand::Intermediate
        } else {
            EffectBand::Small
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EffectBand::Small => "small",
            EffectBand::Intermediate => "intermediate",
            EffectBand::Medium => "medium",
            EffectBand::Large => "large",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeResult {
    pub d: f64,
    pub pooled_sd: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub band: EffectBand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Welch,
    MannWhitneyExact,
    MannWhitneyNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTestResult {
    pub method: TestMethod,
    /// t for Welch, U of the first group for Mann-Whitney.
    pub statistic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub level: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub resamples: usize,
    pub seed: u64,
}

fn sample_var(xs: &[f64]) -> f64 {
    sample_sd(xs).powi(2)
}

/// Standardized mean difference a minus b over the pooled sample SD.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<EffectSizeResult, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::GroupTooSmall { need: 2 });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * sample_var(a) + (nb - 1.0) * sample_var(b)) / (na + nb - 2.0)).sqrt();
    if pooled == 0.0 || !pooled.is_finite() {
        return Err(EvalError::ZeroVariance);
    }
    let (mean_a, mean_b) = (mean(a), mean(b));
    let d = (mean_a - mean_b) / pooled;
    Ok(EffectSizeResult {
        d,
        pooled_sd: pooled,
        mean_a,
        mean_b,
        band: EffectBand::classify(d),
    })
}

/// Two-sided Welch t test with Welch-Satterthwaite degrees of freedom.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<HypothesisTestResult, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::GroupTooSmall { need: 2 });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_var(a) / na, sample_var(b) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2.powi(2) / (va.powi(2) / (na - 1.0) + vb.powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| EvalError::Distribution(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(HypothesisTestResult {
        method: TestMethod::Welch,
        statistic: t,
        df: Some(df),
        p_value: p,
    })
}

/// Midranks of the pooled sample, doubled so ties stay integral.
fn doubled_ranks(values: &[f64]) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, doubled average = (i+1) + (j+1)
        let r = (i + j + 2) as u64;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Count of size-`k` subsets of `ranks` per doubled rank sum.
fn subset_sum_counts(ranks: &[u64], k: usize) -> Vec<f64> {
    let total: u64 = ranks.iter().sum();
    let width = total as usize + 1;
    let mut dp = vec![vec![0f64; width]; k + 1];
    dp[0][0] = 1.0;
    for &r in ranks {
        for size in (1..=k).rev() {
            let (lo, hi) = dp.split_at_mut(size);
            let (prev, cur) = (&lo[size - 1], &mut hi[0]);
            for s in (r as usize..width).rev() {
                cur[s] += prev[s - r as usize];
            }
        }
    }
    dp.swap_remove(k)
}

/// U of the first group, with exact two-sided p when n1·n2 is small and
/// the tie-corrected normal approximation otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<HypothesisTestResult, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::GroupTooSmall { need: 1 });
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = doubled_ranks(&pooled);
    let r1: u64 = ranks[..n1].iter().sum();
    // 2U = 2R - n1(n1+1)
    let offset = (n1 * (n1 + 1)) as i64;
    let u2 = r1 as i64 - offset;
    let u = u2 as f64 / 2.0;
    let center2 = (n1 * n2) as i64;
    if n1 * n2 <= EXACT_U_LIMIT {
        let counts = subset_sum_counts(&ranks, n1);
        let observed = (u2 - center2).abs();
        let (mut extreme, mut total) = (0.0, 0.0);
        for (s, c) in counts.iter().enumerate().filter(|(_, c)| **c > 0.0) {
            total += c;
            let dev = (s as i64 - offset - center2).abs();
            if dev >= observed {
                extreme += c;
            }
        }
        return Ok(HypothesisTestResult {
            method: TestMethod::MannWhitneyExact,
            statistic: u,
            df: None,
            p_value: (extreme / total).min(1.0),
        });
    }
    let n = (n1 + n2) as f64;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
        tie_term += (j as f64).powi(3) - j as f64;
        i += j;
    }
    let (f1, f2) = (n1 as f64, n2 as f64);
    let var = f1 * f2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let mu = f1 * f2 / 2.0;
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.cdf(-z)).min(1.0)
    };
    Ok(HypothesisTestResult {
        method: TestMethod::MannWhitneyNormal,
        statistic: u,
        df: None,
        p_value: p,
    })
}

/// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile CI of the mean; resample `i` draws from its own derived stream.
pub fn bootstrap_ci(values: &[f64], level: f64, resamples: usize, seed: u64) -> Result<BootstrapCi, EvalError> {
    if values.is_empty() {
        return Err(EvalError::Empty("bootstrap sample"));
    }
    if !(0.0 < level && level < 1.0) || resamples == 0 {
        return Err(EvalError::InvalidParameter(format!("level {level}, resamples {resamples}")));
    }
    let n = values.len();
    if values.iter().all(|v| *v == values[0]) {
        return Ok(BootstrapCi {
            level,
            mean: values[0],
            lo: values[0],
            hi: values[0],
            resamples,
            seed,
        });
    }
    let mut means: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, "bootstrap", i as u64);
            (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(BootstrapCi {
        level,
        mean: mean(values),
        lo: quantile(&means, alpha),
        hi: quantile(&means, 1.0 - alpha),
        resamples,
        seed,
    })
}
