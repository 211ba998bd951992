//! Logistic regression with the elastic penalty, fitted by accelerated
//! proximal gradient descent.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Elastic-penalty settings:
/// `logistic loss + alpha * lambda * ||b||_1 + (1 - alpha) / 2 * lambda * ||b||_2^2`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ElasticConfig {
    /// L1/L2 mixing; 1 is pure lasso, 0 pure ridge.
    pub alpha: f64,
    /// Penalty grid for the inner cross-validated selection.
    pub lambda_grid: Vec<f64>,
    pub inner_folds: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ElasticConfig {
    fn default() -> Self {
        ElasticConfig {
            alpha: 0.5,
            lambda_grid: vec![0.0001, 0.001, 0.01, 0.1, 1.0],
            inner_folds: 5,
            tolerance: 1e-8,
            max_iterations: 20_000,
        }
    }
}

/// A fitted classifier: intercept plus weights over the input columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub lambda: f64,
}

impl LogisticModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Largest singular value via power iteration on `X^T X`.
fn spectral_norm_sq(x: &DMatrix<f64>) -> f64 {
    let p = x.ncols();
    let mut v = DVector::from_element(p, 1.0 / (p as f64).sqrt());
    let mut last = 0.0;
    for _ in 0..200 {
        let mut w = x.transpose() * (x * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        w /= norm;
        if (norm - last).abs() < 1e-10 * norm.max(1.0) {
            return norm;
        }
        last = norm;
        v = w;
    }
    last
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Fit by FISTA with a constant step from the gradient Lipschitz bound.
/// The intercept is unpenalized. Labels are `false`/`true`.
pub fn fit_logistic(
    x: &[Vec<f64>],
    y: &[bool],
    lambda: f64,
    cfg: &ElasticConfig,
) -> Result<LogisticModel> {
    let n = x.len();
    if n == 0 || n != y.len() {
        return Err(Error::Domain(format!("{} rows but {} labels", n, y.len())));
    }
    let p = x[0].len();
    let xm = DMatrix::from_fn(n, p + 1, |r, c| if c == 0 { 1.0 } else { x[r][c - 1] });
    let yv = DVector::from_iterator(n, y.iter().map(|&b| if b { 1.0 } else { 0.0 }));

    let l1 = cfg.alpha * lambda;
    let l2 = (1.0 - cfg.alpha) * lambda;
    let lipschitz = spectral_norm_sq(&xm) / (4.0 * n as f64) + l2;
    if lipschitz <= 0.0 {
        return Err(Error::DegenerateSignal("all-zero design".to_string()));
    }
    let step = 1.0 / lipschitz;

    let grad = |beta: &DVector<f64>| -> DVector<f64> {
        let z = &xm * beta;
        let probs = DVector::from_iterator(n, z.iter().map(|&v| sigmoid(v)));
        let mut g = xm.transpose() * (probs - &yv) / n as f64;
        for j in 1..=p {
            g[j] += l2 * beta[j];
        }
        g
    };

    let mut beta = DVector::zeros(p + 1);
    let mut momentum = beta.clone();
    let mut t: f64 = 1.0;
    for _ in 0..cfg.max_iterations {
        let g = grad(&momentum);
        let mut next = &momentum - step * g;
        for j in 1..=p {
            next[j] = soft_threshold(next[j], step * l1);
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let accel = &next + ((t - 1.0) / t_next) * (&next - &beta);
        let delta = (&next - &beta).amax();
        beta = next;
        momentum = accel;
        t = t_next;
        if delta < cfg.tolerance {
            break;
        }
    }

    Ok(LogisticModel {
        intercept: beta[0],
        weights: beta.iter().skip(1).copied().collect(),
        lambda,
    })
}

/// Mean logistic log-loss of a model on labeled rows.
pub fn log_loss(model: &LogisticModel, x: &[Vec<f64>], y: &[bool]) -> f64 {
    let eps = 1e-12;
    let losses: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let p = model.probability(row).clamp(eps, 1.0 - eps);
            if label {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .collect();
    crate::util::mean(&losses)
}
