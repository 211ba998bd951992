//! Binary quality classification: SMOTE, in-fold standardization + PCA,
//! elastic-penalty logistic regression, stratified cross-validation with
//! ROC/AUC, and the three data-driven studies.

mod logistic;
mod smote;

pub use logistic::{fit_logistic, log_loss, ElasticConfig, LogisticModel};
pub use smote::smote;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::{Error, Result};

/// Cross-validated training/evaluation settings.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainEvalConfig {
    pub folds: usize,
    pub seed: u64,
    pub elastic: ElasticConfig,
    pub smote_k: usize,
    /// PCA keeps the smallest component count covering this variance share.
    pub pca_variance: f64,
    /// Evenly spaced thresholds for the reported ROC curve.
    pub roc_thresholds: usize,
}

impl Default for TrainEvalConfig {
    fn default() -> Self {
        TrainEvalConfig {
            folds: 5,
            seed: 0,
            elastic: ElasticConfig::default(),
            smote_k: 5,
            pca_variance: 0.95,
            roc_thresholds: 101,
        }
    }
}

/// Binary confusion counts at the 0.5 probability cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

impl Confusion {
    fn add(&mut self, other: &Confusion) {
        self.true_positive += other.true_positive;
        self.false_positive += other.false_positive;
        self.true_negative += other.true_negative;
        self.false_negative += other.false_negative;
    }
}

/// Outcome of one cross-validated evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub auc_per_fold: Vec<f64>,
    pub auc_mean: f64,
    /// Sample standard deviation over folds.
    pub auc_std: f64,
    /// Confusion summed over the test folds.
    pub confusion: Confusion,
    /// `(threshold, mean fpr, mean tpr)` averaged over folds.
    pub roc: Vec<(f64, f64, f64)>,
}

/// One condition of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyCondition {
    pub name: String,
    pub features: Vec<Vec<f64>>,
}

/// A completed study: conditions ranked by mean AUC (descending).
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub ranked: Vec<(String, EvalResult)>,
}

/// Standardizer + PCA fitted on training rows only.
struct FoldTransform {
    means: Vec<f64>,
    sds: Vec<f64>,
    /// Columns are retained principal directions.
    components: DMatrix<f64>,
}

impl FoldTransform {
    fn fit(x: &[Vec<f64>], variance_share: f64) -> FoldTransform {
        let n = x.len();
        let p = x[0].len();
        let mut means = vec![0.0; p];
        let mut sds = vec![1.0; p];
        for j in 0..p {
            let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
            means[j] = crate::util::mean(&col);
            let sd = crate::util::variance_pop(&col).sqrt();
            sds[j] = if sd > 0.0 { sd } else { 1.0 };
        }
        let standardized = DMatrix::from_fn(n, p, |r, c| (x[r][c] - means[c]) / sds[c]);
        let cov = standardized.transpose() * &standardized / (n as f64 - 1.0).max(1.0);
        let (eigenvalues, mut vectors) = crate::util::sym_eigen_desc(cov);
        let clamped: Vec<f64> = eigenvalues.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        let mut keep = 0;
        let mut acc = 0.0;
        for &v in &clamped {
            keep += 1;
            acc += v;
            if total == 0.0 || acc / total >= variance_share {
                break;
            }
        }
        // Deterministic orientation: largest-|entry| coordinate positive.
        for c in 0..keep {
            let col = vectors.column(c);
            let lead = (0..p)
                .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()))
                .unwrap();
            if col[lead] < 0.0 {
                for r in 0..p {
                    vectors[(r, c)] = -vectors[(r, c)];
                }
            }
        }
        FoldTransform {
            means,
            sds,
            components: vectors.columns(0, keep).into_owned(),
        }
    }

    fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|row| {
                let std: Vec<f64> = row
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (v - self.means[j]) / self.sds[j])
                    .collect();
                (0..self.components.ncols())
                    .map(|c| {
                        std.iter()
                            .enumerate()
                            .map(|(j, v)| v * self.components[(j, c)])
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }
}

/// Deterministic stratified fold assignment: per-class shuffle, round-robin.
/// Errors when any class cannot place 2 samples in every fold.
pub fn stratified_folds(y: &[bool], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    let mut assignment = vec![0usize; y.len()];
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if idx.len() < 2 * folds {
            return Err(Error::Stratification(format!(
                "class {class} has {} samples; {folds}-fold stratification needs at least {}",
                idx.len(),
                2 * folds
            )));
        }
        let mut rng = crate::util::seeded_rng(seed, u64::from(class));
        idx.shuffle(&mut rng);
        for (k, &i) in idx.iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    Ok(assignment)
}

/// Exact AUC: trapezoid over the ROC traced at every distinct score, which
/// handles ties and is invariant under strictly monotone score transforms.
pub fn auc_exact(scores: &[f64], labels: &[bool]) -> f64 {
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return f64::NAN;
    }
    // Sort by score descending, index ascending for determinism.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let mut auc = 0.0;
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_tpr, mut prev_fpr) = (0.0f64, 0.0f64);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        // consume the whole tie group at once: ties trace a diagonal
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let tpr = tp as f64 / n_pos as f64;
        let fpr = fp as f64 / n_neg as f64;
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    auc
}

/// ROC points at evenly spaced probability thresholds (for reports).
fn roc_at_thresholds(scores: &[f64], labels: &[bool], n_thresholds: usize) -> Vec<(f64, f64, f64)> {
    let n_pos = labels.iter().filter(|&&l| l).count().max(1);
    let n_neg = (labels.len() - labels.iter().filter(|&&l| l).count()).max(1);
    (0..n_thresholds)
        .map(|k| {
            let thr = k as f64 / (n_thresholds - 1) as f64;
            let (mut tp, mut fp) = (0usize, 0usize);
            for (s, &l) in scores.iter().zip(labels) {
                if *s >= thr {
                    if l {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            (thr, fp as f64 / n_neg as f64, tp as f64 / n_pos as f64)
        })
        .collect()
}

fn confusion_at_half(scores: &[f64], labels: &[bool]) -> Confusion {
    let mut c = Confusion::default();
    for (s, &l) in scores.iter().zip(labels) {
        match (*s >= 0.5, l) {
            (true, true) => c.true_positive += 1,
            (true, false) => c.false_positive += 1,
            (false, false) => c.true_negative += 1,
            (false, true) => c.false_negative += 1,
        }
    }
    c
}

/// Select the penalty by inner stratified cross-validation on the training
/// rows: SMOTE on inner-train only, mean validation log-loss, ties to the
/// larger (more regularized) penalty.
fn select_lambda(x: &[Vec<f64>], y: &[bool], cfg: &TrainEvalConfig) -> Result<f64> {
    let mut grid = cfg.elastic.lambda_grid.clone();
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".to_string()));
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let inner = stratified_folds(y, cfg.elastic.inner_folds, cfg.seed ^ 0x1111)
        // Inner folds may be infeasible on small training sets; fall back to
        // the median of the grid rather than failing the outer fold.
        .ok();
    let Some(inner) = inner else {
        return Ok(grid[grid.len() / 2]);
    };

    let mut best = (f64::INFINITY, grid[0]);
    for &lambda in &grid {
        let mut losses = Vec::new();
        for fold in 0..cfg.elastic.inner_folds {
            let train: Vec<usize> = (0..x.len()).filter(|&i| inner[i] != fold).collect();
            let val: Vec<usize> = (0..x.len()).filter(|&i| inner[i] == fold).collect();
            let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<bool> = train.iter().map(|&i| y[i]).collect();
            let (xs, ys) = smote(&xt, &yt, cfg.smote_k, cfg.seed ^ (fold as u64 + 7))?;
            let model = fit_logistic(&xs, &ys, lambda, &cfg.elastic)?;
            let xv: Vec<Vec<f64>> = val.iter().map(|&i| x[i].clone()).collect();
            let yv: Vec<bool> = val.iter().map(|&i| y[i]).collect();
            losses.push(log_loss(&model, &xv, &yv));
        }
        let score = crate::util::mean(&losses);
        if score <= best.0 {
            best = (score, lambda);
        }
    }
    Ok(best.1)
}

/// Cross-validated evaluation with leak-free preprocessing: standardizer,
/// PCA, and SMOTE are fitted on training folds only; test rows are
/// transformed, never resampled.
pub fn train_eval(x: &[Vec<f64>], y: &[bool], cfg: &TrainEvalConfig) -> Result<EvalResult> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::InsufficientData("no rows".to_string()));
    }
    let assignment = stratified_folds(y, cfg.folds, cfg.seed)?;

    let fold_runs: Vec<Result<(f64, Confusion, Vec<(f64, f64, f64)>)>> = (0..cfg.folds)
        .into_par_iter()
        .map(|fold| {
            let train: Vec<usize> = (0..x.len()).filter(|&i| assignment[i] != fold).collect();
            let test: Vec<usize> = (0..x.len()).filter(|&i| assignment[i] == fold).collect();
            let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let yt: Vec<bool> = train.iter().map(|&i| y[i]).collect();

            let transform = FoldTransform::fit(&xt, cfg.pca_variance);
            let xt = transform.transform(&xt);
            let lambda = select_lambda(&xt, &yt, cfg)?;
            let (xs, ys) = smote(&xt, &yt, cfg.smote_k, cfg.seed ^ (fold as u64 + 1))?;
            let model = fit_logistic(&xs, &ys, lambda, &cfg.elastic)?;

            let x_test: Vec<Vec<f64>> = test.iter().map(|&i| x[i].clone()).collect();
            let y_test: Vec<bool> = test.iter().map(|&i| y[i]).collect();
            let scores: Vec<f64> = transform
                .transform(&x_test)
                .iter()
                .map(|row| model.probability(row))
                .collect();

            Ok((
                auc_exact(&scores, &y_test),
                confusion_at_half(&scores, &y_test),
                roc_at_thresholds(&scores, &y_test, cfg.roc_thresholds),
            ))
        })
        .collect();

    let mut aucs = Vec::with_capacity(cfg.folds);
    let mut confusion = Confusion::default();
    let mut roc_acc: Vec<(f64, f64, f64)> = Vec::new();
    for run in fold_runs {
        let (auc, conf, roc) = run?;
        aucs.push(auc);
        confusion.add(&conf);
        if roc_acc.is_empty() {
            roc_acc = roc;
        } else {
            for (acc, point) in roc_acc.iter_mut().zip(roc) {
                acc.1 += point.1;
                acc.2 += point.2;
            }
        }
    }
    for point in &mut roc_acc {
        point.1 /= cfg.folds as f64;
        point.2 /= cfg.folds as f64;
    }

    let auc_mean = crate::util::mean(&aucs);
    let auc_std = if aucs.len() > 1 {
        crate::util::variance_sample(&aucs).sqrt()
    } else {
        0.0
    };
    Ok(EvalResult {
        auc_per_fold: aucs,
        auc_mean,
        auc_std,
        confusion,
        roc: roc_acc,
    })
}

/// Run one study: evaluate every condition on identical fold splits (same
/// seed and labels) and rank by mean AUC, ties broken by name.
pub fn run_study(
    name: &str,
    conditions: &[StudyCondition],
    labels: &[bool],
    cfg: &TrainEvalConfig,
) -> Result<Experiment> {
    if conditions.is_empty() {
        return Err(Error::Config(format!("study {name} has no conditions")));
    }
    for c in conditions {
        if c.features.len() != labels.len() {
            return Err(Error::Domain(format!(
                "study {name}: condition {} has {} rows for {} labels",
                c.name,
                c.features.len(),
                labels.len()
            )));
        }
        if c.features.is_empty() || c.features[0].is_empty() {
            return Err(Error::InsufficientData(format!(
                "study {name}: condition {} has no features",
                c.name
            )));
        }
    }
    let mut ranked: Vec<(String, EvalResult)> = conditions
        .iter()
        .map(|c| Ok((c.name.clone(), train_eval(&c.features, labels, cfg)?)))
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| b.1.auc_mean.total_cmp(&a.1.auc_mean).then(a.0.cmp(&b.0)));
    Ok(Experiment {
        name: name.to_string(),
        ranked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn separable(n_per_class: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = crate::util::seeded_rng(seed, 0);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..2 * n_per_class {
            let label = i % 2 == 0;
            let center = if label { 3.0 } else { -3.0 };
            x.push(vec![
                center + 0.5 * (rng.gen::<f64>() - 0.5),
                rng.gen::<f64>(),
            ]);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn separable_data_gets_perfect_auc_every_fold() {
        let (x, y) = separable(40, 100);
        let result = train_eval(&x, &y, &TrainEvalConfig::default()).unwrap();
        for (i, auc) in result.auc_per_fold.iter().enumerate() {
            assert!((auc - 1.0).abs() < 1e-12, "fold {i}: auc {auc}");
        }
        assert_eq!(result.confusion.false_positive, 0);
        assert_eq!(result.confusion.false_negative, 0);
    }

    // Oracle: permutation-null reasoning on a fixed seed.
    #[test]
    fn shuffled_labels_give_chance_auc() {
        let (x, mut y) = separable(40, 101);
        use rand::seq::SliceRandom;
        let mut rng = crate::util::seeded_rng(102, 0);
        y.shuffle(&mut rng);
        let result = train_eval(&x, &y, &TrainEvalConfig::default()).unwrap();
        assert!(
            result.auc_mean > 0.35 && result.auc_mean < 0.65,
            "auc {}",
            result.auc_mean
        );
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let mut rng = crate::util::seeded_rng(103, 0);
        let scores: Vec<f64> = (0..60).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<bool> = (0..60).map(|_| rng.gen_bool(0.4)).collect();
        let base = auc_exact(&scores, &labels);
        let squeezed: Vec<f64> = scores.iter().map(|s| (s * 8.0).exp() / 1e6).collect();
        let shifted: Vec<f64> = scores.iter().map(|s| s.atan() * 3.0 - 40.0).collect();
        assert!((auc_exact(&squeezed, &labels) - base).abs() < 1e-12);
        assert!((auc_exact(&shifted, &labels) - base).abs() < 1e-12);
    }

    // Oracle: exhaustive threshold sweep on hand-made scores.
    #[test]
    fn auc_matches_pair_counting() {
        let mut rng = crate::util::seeded_rng(104, 0);
        for _ in 0..20 {
            let n = 40;
            let scores: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() * 8.0).round() / 8.0).collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
            let n_pos = labels.iter().filter(|&&l| l).count();
            if n_pos == 0 || n_pos == n {
                continue;
            }
            // Mann-Whitney pair counting with half credit for ties.
            let mut wins = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if labels[i] && !labels[j] {
                        if scores[i] > scores[j] {
                            wins += 1.0;
                        } else if scores[i] == scores[j] {
                            wins += 0.5;
                        }
                    }
                }
            }
            let expected = wins / (n_pos * (n - n_pos)) as f64;
            assert!((auc_exact(&scores, &labels) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn stratification_requires_two_per_class_per_fold() {
        let y = vec![true, true, true, false, false, false, false, false, false, false];
        assert!(matches!(
            stratified_folds(&y, 5, 0),
            Err(Error::Stratification(_))
        ));
    }

    #[test]
    fn folds_are_deterministic_and_stratified() {
        let mut rng = crate::util::seeded_rng(105, 0);
        let y: Vec<bool> = (0..60).map(|_| rng.gen_bool(0.4)).collect();
        let a = stratified_folds(&y, 5, 9).unwrap();
        let b = stratified_folds(&y, 5, 9).unwrap();
        assert_eq!(a, b);
        for fold in 0..5 {
            let pos = (0..60).filter(|&i| a[i] == fold && y[i]).count();
            let neg = (0..60).filter(|&i| a[i] == fold && !y[i]).count();
            assert!(pos >= 2 && neg >= 2);
        }
    }

    #[test]
    fn identical_conditions_tie_deterministically() {
        let (x, y) = separable(30, 106);
        let conditions = vec![
            StudyCondition {
                name: "a".into(),
                features: x.clone(),
            },
            StudyCondition {
                name: "b".into(),
                features: x.clone(),
            },
        ];
        let exp = run_study("window_study", &conditions, &y, &Default::default()).unwrap();
        assert_eq!(exp.ranked[0].1.auc_mean, exp.ranked[1].1.auc_mean);
        assert_eq!(exp.ranked[0].0, "a");
    }

    #[test]
    fn study_rejects_row_mismatch() {
        let (x, y) = separable(30, 107);
        let conditions = vec![StudyCondition {
            name: "short".into(),
            features: x[..10].to_vec(),
        }];
        assert!(run_study("fusion_study", &conditions, &y, &Default::default()).is_err());
    }

    #[test]
    fn one_component_on_separable_1d_preserves_feature_ordering() {
        // Unpenalized fit through a single principal component on 1-D
        // separable data: predicted ordering must equal feature ordering.
        let mut rng = crate::util::seeded_rng(108, 0);
        let mut x: Vec<Vec<f64>> = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let label = i % 2 == 0;
            let v = if label {
                2.0 + rng.gen::<f64>()
            } else {
                -2.0 - rng.gen::<f64>()
            };
            x.push(vec![v]);
            y.push(label);
        }
        let transform = FoldTransform::fit(&x, 0.95);
        assert_eq!(transform.components.ncols(), 1);
        let projected = transform.transform(&x);
        let model = fit_logistic(
            &projected,
            &y,
            0.0,
            &ElasticConfig {
                lambda_grid: vec![0.0],
                ..Default::default()
            },
        )
        .unwrap();
        let scores: Vec<f64> = projected.iter().map(|r| model.probability(r)).collect();
        let mut order: Vec<usize> = (0..60).collect();
        order.sort_by(|&a, &b| x[a][0].total_cmp(&x[b][0]));
        for w in order.windows(2) {
            assert!(
                scores[w[0]] <= scores[w[1]] + 1e-12,
                "ordering broken at feature {} vs {}",
                x[w[0]][0],
                x[w[1]][0]
            );
        }
        assert!((auc_exact(&scores, &y) - 1.0).abs() < 1e-12);
    }
}
