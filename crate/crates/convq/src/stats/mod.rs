//! Hypothesis-driven models: quantile least squares, LASSO, Spearman rank
//! correlation, and Bonferroni correction.

mod lasso;
mod quantile;

pub use lasso::{lasso, LassoConfig};
pub use quantile::{quantile_regression, QuantileConfig};

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// Which model produced a result row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTag {
    Qls,
    Lasso,
    Spearman,
}

impl ModelTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::Qls => "QLS",
            ModelTag::Lasso => "LASSO",
            ModelTag::Spearman => "Spearman",
        }
    }
}

/// Per-predictor outcome of one regression fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorResult {
    pub predictor: String,
    pub beta: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

/// Fit result over a predictor set.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub model: ModelTag,
    /// Intercept, where the model has one.
    pub intercept: f64,
    pub predictors: Vec<PredictorResult>,
    pub significance_threshold: f64,
}

impl RegressionResult {
    /// Apply a Bonferroni correction for `m` tests and flag significance at
    /// the stored threshold.
    pub fn adjust(&mut self, m: usize) {
        for p in &mut self.predictors {
            p.p_adjusted = bonferroni_one(p.p_value, m);
            p.significant = p.p_adjusted < self.significance_threshold;
        }
    }
}

/// Bonferroni adjustment of one p-value: `min(1, m * p)`.
pub fn bonferroni_one(p: f64, m: usize) -> f64 {
    (m as f64 * p).min(1.0)
}

/// Bonferroni adjustment of a batch of p-values.
pub fn bonferroni(p_values: &[f64], m: usize) -> Vec<f64> {
    p_values.iter().map(|&p| bonferroni_one(p, m)).collect()
}

/// Mid-ranks with average ranks for ties (1-based).
fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with a t-approximation p-value.
///
/// Ties receive mid-ranks; the statistic is the Pearson correlation of the
/// rank vectors.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "spearman needs at least 4 samples, got {n}"
        )));
    }
    let rho = crate::coordination::pearson(&mid_ranks(x), &mid_ranks(y))?;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("valid dof");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok((rho, p))
}

/// Two-sided p-value from bootstrap replicates of a coefficient via the
/// normal approximation with the bootstrap standard error.
pub(crate) fn bootstrap_normal_p(beta_hat: f64, replicates: &[f64]) -> f64 {
    let se = crate::util::variance_sample(replicates).sqrt();
    if se == 0.0 || !se.is_finite() {
        return if beta_hat == 0.0 { 1.0 } else { 0.0 };
    }
    let z = (beta_hat / se).abs();
    // 2 * (1 - Phi(z))
    statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonferroni_values() {
        // m = 18: the full test grid size
        assert!((bonferroni_one(0.01, 18) - 0.18).abs() < 1e-12);
        assert_eq!(bonferroni_one(0.2, 18), 1.0);
        assert_eq!(bonferroni_one(0.03, 1), 0.03);
        assert_eq!(bonferroni(&[0.01, 0.2], 18), vec![0.18, 1.0]);
    }

    #[test]
    fn spearman_monotone_maps() {
        let x: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let (rho, p) = spearman(&x, &y).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        assert_eq!(p, 0.0);

        let y_neg: Vec<f64> = x.iter().map(|v| -v.powi(3)).collect();
        let (rho, _) = spearman(&x, &y_neg).unwrap();
        assert!((rho + 1.0).abs() < 1e-12);
    }

    // Oracle: explicit mid-rank assignment on tied data.
    #[test]
    fn spearman_ties_match_explicit_ranks() {
        let x = vec![1.0, 2.0, 2.0, 3.0, 4.0, 4.0, 4.0, 5.0];
        let y = vec![2.0, 1.0, 3.0, 3.0, 5.0, 4.0, 6.0, 7.0];
        let (rho, _) = spearman(&x, &y).unwrap();

        // hand-assigned mid-ranks
        let rx = vec![1.0, 2.5, 2.5, 4.0, 6.0, 6.0, 6.0, 8.0];
        let ry = vec![2.0, 1.0, 3.5, 3.5, 6.0, 5.0, 7.0, 8.0];
        let expected = crate::coordination::pearson(&rx, &ry).unwrap();
        assert!((rho - expected).abs() < 1e-12);
    }

    #[test]
    fn spearman_invariant_under_monotone_transform() {
        use rand::Rng;
        let mut rng = crate::util::seeded_rng(70, 0);
        let x: Vec<f64> = (0..50).map(|_| rng.gen::<f64>() * 10.0).collect();
        let y: Vec<f64> = (0..50).map(|_| rng.gen::<f64>() * 10.0).collect();
        let (rho, _) = spearman(&x, &y).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| (v + 1.0).ln()).collect();
        let y2: Vec<f64> = y.iter().map(|v| v.powi(3)).collect();
        let (rho2, _) = spearman(&x2, &y2).unwrap();
        assert!((rho - rho2).abs() < 1e-12);
    }

    #[test]
    fn spearman_constant_errors() {
        let x = vec![1.0; 10];
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(
            spearman(&x, &y),
            Err(Error::UndefinedCorrelation(_))
        ));
    }
}
