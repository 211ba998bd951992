//! L1-penalized least squares by coordinate descent, with cross-validated
//! penalty selection and paired-bootstrap inference.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::{Error, Result};

use super::{bootstrap_normal_p, ModelTag, PredictorResult, RegressionResult};

/// LASSO settings. The objective is
/// `(1 / 2n) * ||y - X b||^2 + lambda * ||b||_1`
/// on internally standardized predictors with a centered response.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LassoConfig {
    /// Penalty grid searched by cross-validation; ties prefer the larger
    /// (sparser) value.
    pub lambda_grid: Vec<f64>,
    pub cv_folds: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Paired bootstrap resamples for p-values; 0 skips inference.
    pub bootstrap: usize,
    pub seed: u64,
    pub significance_threshold: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            lambda_grid: vec![0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0],
            cv_folds: 5,
            tolerance: 1e-10,
            max_iterations: 10_000,
            bootstrap: 1000,
            seed: 0,
            significance_threshold: 0.005,
        }
    }
}

struct Standardizer {
    means: Vec<f64>,
    sds: Vec<f64>,
    y_mean: f64,
}

impl Standardizer {
    fn fit(x: &[Vec<f64>], y: &[f64]) -> Standardizer {
        let p = x[0].len();
        let mut means = vec![0.0; p];
        let mut sds = vec![0.0; p];
        for j in 0..p {
            let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
            means[j] = crate::util::mean(&col);
            let sd = crate::util::variance_pop(&col).sqrt();
            sds[j] = if sd > 0.0 { sd } else { 1.0 };
        }
        Standardizer {
            means,
            sds,
            y_mean: crate::util::mean(y),
        }
    }

    fn apply(&self, x: &[Vec<f64>], y: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs = x
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| (v - self.means[j]) / self.sds[j])
                    .collect()
            })
            .collect();
        let ys = y.iter().map(|v| v - self.y_mean).collect();
        (xs, ys)
    }
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

/// Cyclic coordinate descent on standardized data.
fn coordinate_descent(
    x: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let n = x.len();
    let p = x[0].len();
    let nf = n as f64;
    let col_sq: Vec<f64> = (0..p)
        .map(|j| x.iter().map(|r| r[j] * r[j]).sum::<f64>() / nf)
        .collect();
    let mut beta = vec![0.0; p];
    let mut resid: Vec<f64> = y.to_vec();
    for _ in 0..max_iter {
        let mut max_step: f64 = 0.0;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            let rho: f64 = x
                .iter()
                .zip(&resid)
                .map(|(r, &e)| r[j] * (e + r[j] * old))
                .sum::<f64>()
                / nf;
            let new = soft_threshold(rho, lambda) / col_sq[j];
            if new != old {
                for (row, e) in x.iter().zip(resid.iter_mut()) {
                    *e += row[j] * (old - new);
                }
                beta[j] = new;
                max_step = max_step.max((new - old).abs());
            }
        }
        if max_step < tol {
            break;
        }
    }
    // Coefficients below the step tolerance are numerical residue of the
    // soft threshold; snap them so the filtered set is exact.
    for b in &mut beta {
        if b.abs() < tol {
            *b = 0.0;
        }
    }
    beta
}

fn mse(x: &[Vec<f64>], y: &[f64], beta: &[f64]) -> f64 {
    let errs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let pred: f64 = row.iter().zip(beta).map(|(v, b)| v * b).sum();
            (yi - pred).powi(2)
        })
        .collect();
    crate::util::mean(&errs)
}

/// Fit the LASSO with the penalty chosen by k-fold cross-validated mean
/// squared error. Coefficients are reported on the original predictor scale;
/// zeroed predictors are the "filtered" set. P-values come from a paired
/// bootstrap at the selected penalty.
pub fn lasso(x: &[Vec<f64>], y: &[f64], cfg: &LassoConfig) -> Result<RegressionResult> {
    if cfg.lambda_grid.is_empty() {
        return Err(Error::Config("empty lambda grid".to_string()));
    }
    let n = x.len();
    if n == 0 || n != y.len() {
        return Err(Error::Domain(format!(
            "design has {n} rows but {} responses",
            y.len()
        )));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::Domain("ragged design matrix".to_string()));
    }
    if n < cfg.cv_folds.max(3) {
        return Err(Error::InsufficientData(format!(
            "need at least {} rows for {}-fold cross-validation, got {n}",
            cfg.cv_folds.max(3),
            cfg.cv_folds
        )));
    }

    // Cross-validate lambda on standardized folds.
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = crate::util::seeded_rng(cfg.seed, 0);
    order.shuffle(&mut rng);
    let folds: Vec<Vec<usize>> = (0..cfg.cv_folds)
        .map(|f| {
            order
                .iter()
                .enumerate()
                .filter(|(i, _)| i % cfg.cv_folds == f)
                .map(|(_, &idx)| idx)
                .collect()
        })
        .collect();

    let mut grid: Vec<f64> = cfg.lambda_grid.clone();
    grid.sort_by(|a, b| a.total_cmp(b));
    let mut best = (f64::INFINITY, grid[0]);
    for &lambda in &grid {
        let mut fold_mse = Vec::with_capacity(cfg.cv_folds);
        for fold in &folds {
            let test: std::collections::BTreeSet<usize> = fold.iter().copied().collect();
            let train: Vec<usize> = (0..n).filter(|i| !test.contains(i)).collect();
            if train.len() < 3 || fold.is_empty() {
                continue;
            }
            let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let std = Standardizer::fit(&xt, &yt);
            let (xs, ys) = std.apply(&xt, &yt);
            let beta = coordinate_descent(&xs, &ys, lambda, cfg.tolerance, cfg.max_iterations);
            let xv: Vec<Vec<f64>> = fold.iter().map(|&i| x[i].clone()).collect();
            let yv: Vec<f64> = fold.iter().map(|&i| y[i]).collect();
            let (xvs, yvs) = std.apply(&xv, &yv);
            fold_mse.push(mse(&xvs, &yvs, &beta));
        }
        let score = crate::util::mean(&fold_mse);
        // ties prefer the larger lambda: <= because grid is ascending
        if score <= best.0 {
            best = (score, lambda);
        }
    }
    let lambda = best.1;

    // Final fit on all rows.
    let std = Standardizer::fit(x, y);
    let (xs, ys) = std.apply(x, y);
    let beta_std = coordinate_descent(&xs, &ys, lambda, cfg.tolerance, cfg.max_iterations);

    // Bootstrap inference at the selected lambda.
    let replicates: Vec<Vec<f64>> = (0..cfg.bootstrap)
        .map(|b| {
            let mut rng = crate::util::seeded_rng(cfg.seed, b as u64 + 1);
            let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let xb: Vec<Vec<f64>> = rows.iter().map(|&i| x[i].clone()).collect();
            let yb: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let stdb = Standardizer::fit(&xb, &yb);
            let (xbs, ybs) = stdb.apply(&xb, &yb);
            coordinate_descent(&xbs, &ybs, lambda, cfg.tolerance, cfg.max_iterations)
        })
        .collect();

    let predictors = (0..p)
        .map(|j| {
            let beta = beta_std[j] / std.sds[j];
            let p_value = if cfg.bootstrap >= 2 {
                let draws: Vec<f64> = replicates.iter().map(|r| r[j]).collect();
                bootstrap_normal_p(beta_std[j], &draws)
            } else {
                f64::NAN
            };
            PredictorResult {
                predictor: format!("x{j}"),
                beta,
                p_value,
                p_adjusted: p_value,
                significant: false,
            }
        })
        .collect::<Vec<_>>();

    let intercept = std.y_mean
        - predictors
            .iter()
            .enumerate()
            .map(|(j, pr)| pr.beta * std.means[j])
            .sum::<f64>();

    Ok(RegressionResult {
        model: ModelTag::Lasso,
        intercept,
        predictors,
        significance_threshold: cfg.significance_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cfg(grid: Vec<f64>) -> LassoConfig {
        LassoConfig {
            lambda_grid: grid,
            bootstrap: 0,
            ..Default::default()
        }
    }

    #[test]
    fn huge_lambda_shrinks_everything_to_zero() {
        let mut rng = crate::util::seeded_rng(80, 0);
        let x: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] + r[1]).collect();
        let fit = lasso(&x, &y, &cfg(vec![1e6])).unwrap();
        for p in &fit.predictors {
            assert_eq!(p.beta, 0.0);
        }
    }

    // Oracle: closed-form OLS on an orthonormal design.
    #[test]
    fn zero_lambda_matches_ols_on_orthonormal_design() {
        let n = 64usize;
        // Orthogonal columns built from sign patterns, normalized so that
        // the standardized columns stay orthonormal.
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let c0 = if i % 2 == 0 { 1.0 } else { -1.0 };
                let c1 = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
                vec![c0, c1]
            })
            .collect();
        let mut rng = crate::util::seeded_rng(81, 0);
        let y: Vec<f64> = x
            .iter()
            .map(|r| 1.5 * r[0] - 0.7 * r[1] + 0.01 * (rng.gen::<f64>() - 0.5))
            .collect();
        let fit = lasso(&x, &y, &cfg(vec![0.0])).unwrap();

        // OLS via normal equations on the raw design with intercept.
        let xm = nalgebra::DMatrix::from_fn(n, 3, |r, c| match c {
            0 => 1.0,
            _ => x[r][c - 1],
        });
        let yv = nalgebra::DVector::from_row_slice(&y);
        let ols = crate::util::lstsq(&xm, &yv).unwrap();
        assert!((fit.predictors[0].beta - ols[1]).abs() < 1e-6);
        assert!((fit.predictors[1].beta - ols[2]).abs() < 1e-6);
        assert!((fit.intercept - ols[0]).abs() < 1e-6);
    }

    // Oracle: objective comparison of the two sparse solutions.
    #[test]
    fn duplicated_column_keeps_at_most_one() {
        let mut rng = crate::util::seeded_rng(82, 0);
        let x: Vec<Vec<f64>> = (0..60)
            .map(|_| {
                let v: f64 = rng.gen::<f64>() * 2.0 - 1.0;
                vec![v, v]
            })
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| 2.0 * r[0] + 0.05 * (rng.gen::<f64>() - 0.5))
            .collect();
        let fit = lasso(&x, &y, &cfg(vec![0.05])).unwrap();
        let nonzero = fit.predictors.iter().filter(|p| p.beta != 0.0).count();
        assert!(nonzero <= 1, "betas: {:?}", fit.predictors);

        // splitting weight across the duplicates cannot beat the one-column
        // solution's objective (they are equivalent; descent picks one)
        let b = fit
            .predictors
            .iter()
            .map(|p| p.beta)
            .fold(0.0f64, |a, b| a + b);
        let obj = |b0: f64, b1: f64| -> f64 {
            let rss: f64 = x
                .iter()
                .zip(&y)
                .map(|(r, &yi)| (yi - fit.intercept - b0 * r[0] - b1 * r[1]).powi(2))
                .sum::<f64>()
                / (2.0 * x.len() as f64);
            rss + 0.05 * (b0.abs() + b1.abs())
        };
        assert!(obj(b, 0.0) <= obj(b / 2.0, b / 2.0) + 1e-9);
    }

    #[test]
    fn empty_grid_errors() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]];
        let y = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(matches!(
            lasso(&x, &y, &cfg(vec![])),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn cross_validation_picks_small_lambda_for_clean_signal() {
        let mut rng = crate::util::seeded_rng(83, 0);
        let x: Vec<Vec<f64>> = (0..100)
            .map(|_| vec![rng.gen::<f64>() * 2.0, rng.gen::<f64>() * 2.0])
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|r| 3.0 * r[0] - 1.0 * r[1] + 0.01 * (rng.gen::<f64>() - 0.5))
            .collect();
        let fit = lasso(&x, &y, &cfg(vec![0.001, 10.0])).unwrap();
        assert!((fit.predictors[0].beta - 3.0).abs() < 0.05);
        assert!((fit.predictors[1].beta + 1.0).abs() < 0.05);
    }

    #[test]
    fn nonzero_set_shrinks_as_lambda_grows_on_orthonormal_design() {
        let n = 64usize;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let c0 = if i % 2 == 0 { 1.0 } else { -1.0 };
                let c1 = if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
                let c2 = if (i / 4) % 2 == 0 { 1.0 } else { -1.0 };
                vec![c0, c1, c2]
            })
            .collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] + 0.5 * r[1] + 0.1 * r[2]).collect();
        let mut prev: Option<Vec<usize>> = None;
        for lambda in [0.01, 0.2, 0.7, 3.0] {
            let fit = lasso(&x, &y, &cfg(vec![lambda])).unwrap();
            let support: Vec<usize> = fit
                .predictors
                .iter()
                .enumerate()
                .filter(|(_, p)| p.beta != 0.0)
                .map(|(j, _)| j)
                .collect();
            if let Some(prev) = &prev {
                assert!(
                    support.iter().all(|j| prev.contains(j)),
                    "support grew: {prev:?} -> {support:?} at lambda {lambda}"
                );
            }
            prev = Some(support);
        }
    }
}
