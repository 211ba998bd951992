//! Annotation processing: scalar quality scores, quadratic weighted kappa,
//! annotator bias normalization, agreement filtering, construct-validity
//! principal components, and label binarization.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::data::{AnnotationLevel, AnnotationSet, QuestionnaireItem};
use crate::{Error, Result};

/// Scalar quality score of one rating vector: negatively-oriented items are
/// reverse-coded as `6 - x`, then all items are averaged. Result is in [1, 5].
pub fn pcq_score(ratings: &[u8], items: &[QuestionnaireItem]) -> Result<f64> {
    if ratings.len() != items.len() {
        return Err(Error::Domain(format!(
            "{} ratings for {} items",
            ratings.len(),
            items.len()
        )));
    }
    let mut sum = 0.0;
    for (&r, item) in ratings.iter().zip(items) {
        if !(1..=5).contains(&r) {
            return Err(Error::Domain(format!(
                "rating {r} for {} outside 1..5",
                item.id
            )));
        }
        sum += if item.positive { r as f64 } else { 6.0 - r as f64 };
    }
    Ok(sum / items.len() as f64)
}

/// Quadratic weighted kappa between two ordinal rating vectors on a
/// `1..=categories` scale.
///
/// `kappa = 1 - sum(w .* O) / sum(w .* E)` with weights
/// `w_ij = (i - j)^2 / (K - 1)^2`, `O` the observed contingency table and
/// `E` the outer product of the marginals scaled to the total count.
pub fn qw_kappa(r1: &[u8], r2: &[u8], categories: usize) -> Result<f64> {
    if r1.len() != r2.len() {
        return Err(Error::Domain(format!(
            "length mismatch: {} vs {}",
            r1.len(),
            r2.len()
        )));
    }
    if r1.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "kappa needs at least 2 ratings, got {}",
            r1.len()
        )));
    }
    if categories < 2 {
        return Err(Error::Config(format!(
            "kappa needs at least 2 categories, got {categories}"
        )));
    }
    let k = categories;
    for &v in r1.iter().chain(r2) {
        if !(1..=k as u8).contains(&v) {
            return Err(Error::Domain(format!("rating {v} outside 1..{k}")));
        }
    }

    let mut observed = vec![0.0; k * k];
    let mut marg1 = vec![0.0; k];
    let mut marg2 = vec![0.0; k];
    for (&a, &b) in r1.iter().zip(r2) {
        let (i, j) = ((a - 1) as usize, (b - 1) as usize);
        observed[i * k + j] += 1.0;
        marg1[i] += 1.0;
        marg2[j] += 1.0;
    }
    let n = r1.len() as f64;
    let denom_w = ((k - 1) * (k - 1)) as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..k {
        for j in 0..k {
            let w = ((i as f64 - j as f64) * (i as f64 - j as f64)) / denom_w;
            num += w * observed[i * k + j];
            den += w * marg1[i] * marg2[j] / n;
        }
    }
    if den == 0.0 {
        return Err(Error::UndefinedKappa(
            "degenerate marginals: expected disagreement is zero".to_string(),
        ));
    }
    Ok(1.0 - num / den)
}

/// Subtract each annotator's own mean from their scores (zero-mean local
/// normalization). Returns the shifted scores keyed the same way.
pub fn normalize_annotator<K: Clone + Ord>(
    scores: &BTreeMap<String, BTreeMap<K, f64>>,
) -> Result<BTreeMap<String, BTreeMap<K, f64>>> {
    let mut out = BTreeMap::new();
    for (rater, per_key) in scores {
        if per_key.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "annotator {rater} has {} ratings; normalization needs at least 2",
                per_key.len()
            )));
        }
        let values: Vec<f64> = per_key.values().copied().collect();
        let mean = crate::util::mean(&values);
        out.insert(
            rater.clone(),
            per_key.iter().map(|(k, v)| (k.clone(), v - mean)).collect(),
        );
    }
    Ok(out)
}

/// Per-sample agreement record.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleReliability {
    /// Mean quadratic weighted kappa over annotator pairs.
    pub mean_kappa: f64,
    /// Mean raw quality score over annotators.
    pub mean_score: f64,
    pub kept: bool,
}

/// Reliability summary for one annotation level.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport<K: Ord> {
    pub per_sample: BTreeMap<K, SampleReliability>,
    pub threshold: f64,
    pub dropped: Vec<K>,
}

impl<K: Ord + Clone> ReliabilityReport<K> {
    /// Scatter points of (mean score, mean kappa) over all samples.
    pub fn scatter(&self) -> Vec<(f64, f64)> {
        self.per_sample
            .values()
            .map(|s| (s.mean_score, s.mean_kappa))
            .collect()
    }

    pub fn kept_keys(&self) -> Vec<K> {
        self.per_sample
            .iter()
            .filter(|(_, s)| s.kept)
            .map(|(k, _)| k.clone())
            .collect()
    }
}

/// Keep samples whose mean pairwise kappa reaches the threshold (inclusive).
///
/// `per_sample_ratings` maps each sample to its annotators' rating vectors.
pub fn filter_by_kappa<K: Ord + Clone + std::fmt::Debug>(
    per_sample_ratings: &BTreeMap<K, BTreeMap<String, Vec<u8>>>,
    items: &[QuestionnaireItem],
    threshold: f64,
) -> Result<ReliabilityReport<K>> {
    let mut per_sample = BTreeMap::new();
    let mut dropped = Vec::new();
    for (key, raters) in per_sample_ratings {
        if raters.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "sample {key:?} has {} annotators; kappa needs at least 2",
                raters.len()
            )));
        }
        let ids: Vec<&String> = raters.keys().collect();
        let mut kappas = Vec::new();
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                kappas.push(qw_kappa(&raters[ids[i]], &raters[ids[j]], 5)?);
            }
        }
        let mean_kappa = crate::util::mean(&kappas);
        let scores: Vec<f64> = raters
            .values()
            .map(|r| pcq_score(r, items))
            .collect::<Result<_>>()?;
        let kept = mean_kappa >= threshold;
        if !kept {
            dropped.push(key.clone());
        }
        per_sample.insert(
            key.clone(),
            SampleReliability {
                mean_kappa,
                mean_score: crate::util::mean(&scores),
                kept,
            },
        );
    }
    Ok(ReliabilityReport {
        per_sample,
        threshold,
        dropped,
    })
}

/// Construct-validity report from principal components of the item
/// correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    /// Eigenvalues of the item correlation matrix, descending; components
    /// beyond the numerical rank are omitted.
    pub eigenvalues: Vec<f64>,
    pub explained_ratios: Vec<f64>,
    pub cumulative_ratios: Vec<f64>,
    /// Loadings (eigenvector * sqrt(eigenvalue)) of each item on the first
    /// two components.
    pub loadings: Vec<(String, f64, f64)>,
    pub rank_deficient: bool,
}

/// Principal component analysis of an items matrix (rows = samples,
/// columns = items in the order of `items`).
///
/// Uses the item correlation matrix, so items are implicitly standardized.
/// The first component is oriented so that the majority of positively-
/// oriented items load positively.
pub fn construct_validity_pca(
    matrix: &[Vec<f64>],
    items: &[QuestionnaireItem],
) -> Result<ValidityReport> {
    let n = matrix.len();
    let k = items.len();
    if n < 2 || k < 2 {
        return Err(Error::InsufficientData(format!(
            "pca needs at least 2 samples and 2 items, got {n} x {k}"
        )));
    }
    if matrix.iter().any(|row| row.len() != k) {
        return Err(Error::Domain("ragged item matrix".to_string()));
    }

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let col: Vec<f64> = matrix.iter().map(|row| row[j]).collect();
        if crate::util::variance_pop(&col) == 0.0 {
            return Err(Error::DegenerateSignal(format!(
                "item {} is constant across samples",
                items[j].id
            )));
        }
        columns.push(col);
    }

    let mut corr = DMatrix::zeros(k, k);
    for i in 0..k {
        corr[(i, i)] = 1.0;
        for j in (i + 1)..k {
            let r = crate::coordination::pearson(&columns[i], &columns[j])?;
            corr[(i, j)] = r;
            corr[(j, i)] = r;
        }
    }

    let (eigenvalues, mut vectors) = crate::util::sym_eigen_desc(corr);
    let total: f64 = eigenvalues.iter().map(|&v| v.max(0.0)).sum();
    let tol = 1e-10 * k as f64;
    let rank = eigenvalues.iter().filter(|&&v| v > tol).count();
    let rank_deficient = rank < k;

    // Orient PC1 so most positive items load positively; orient the rest by
    // largest absolute entry for determinism.
    for c in 0..rank.min(2).max(1) {
        let col = vectors.column(c);
        let flip = if c == 0 {
            let balance: f64 = items
                .iter()
                .enumerate()
                .map(|(j, item)| if item.positive { col[j] } else { -col[j] })
                .sum();
            balance < 0.0
        } else {
            let lead = (0..k)
                .max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs()))
                .unwrap();
            col[lead] < 0.0
        };
        if flip {
            for j in 0..k {
                vectors[(j, c)] = -vectors[(j, c)];
            }
        }
    }

    let eigenvalues: Vec<f64> = eigenvalues.into_iter().take(rank).collect();
    let explained_ratios: Vec<f64> = eigenvalues.iter().map(|v| v / total).collect();
    let mut cumulative_ratios = Vec::with_capacity(rank);
    let mut acc = 0.0;
    for r in &explained_ratios {
        acc += r;
        cumulative_ratios.push(acc);
    }

    let loadings = items
        .iter()
        .enumerate()
        .map(|(j, item)| {
            let l1 = vectors[(j, 0)] * eigenvalues[0].sqrt();
            let l2 = if rank > 1 {
                vectors[(j, 1)] * eigenvalues[1].sqrt()
            } else {
                0.0
            };
            (item.id.clone(), l1, l2)
        })
        .collect();

    Ok(ValidityReport {
        eigenvalues,
        explained_ratios,
        cumulative_ratios,
        loadings,
        rank_deficient,
    })
}

/// Binary quality label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualityLabel {
    Low,
    High,
}

/// Binarize a raw-scale score: high iff strictly above the threshold.
/// Applies to raw rater-mean scores, before annotator normalization.
pub fn binarize(score: f64, threshold: f64) -> QualityLabel {
    if score > threshold {
        QualityLabel::High
    } else {
        QualityLabel::Low
    }
}

/// Collect per-sample rating vectors from an annotation set, keyed by slice
/// id (group level) or (slice id, participant id) (individual level).
pub fn ratings_by_sample(
    set: &AnnotationSet,
) -> BTreeMap<(String, Option<String>), BTreeMap<String, Vec<u8>>> {
    let mut out: BTreeMap<(String, Option<String>), BTreeMap<String, Vec<u8>>> = BTreeMap::new();
    for (key, values) in &set.ratings {
        out.entry((key.slice_id.clone(), key.participant_id.clone()))
            .or_default()
            .insert(key.rater_id.clone(), values.clone());
    }
    out
}

/// Mean normalized score per sample: each annotator's per-sample quality
/// scores are zero-mean normalized, then averaged across annotators.
pub fn normalized_mean_scores(
    set: &AnnotationSet,
) -> Result<BTreeMap<(String, Option<String>), f64>> {
    let mut per_rater: BTreeMap<String, BTreeMap<(String, Option<String>), f64>> = BTreeMap::new();
    for (key, values) in &set.ratings {
        let score = pcq_score(values, &set.items)?;
        per_rater
            .entry(key.rater_id.clone())
            .or_default()
            .insert((key.slice_id.clone(), key.participant_id.clone()), score);
    }
    let normalized = normalize_annotator(&per_rater)?;
    let mut sums: BTreeMap<(String, Option<String>), (f64, usize)> = BTreeMap::new();
    for per_key in normalized.values() {
        for (k, v) in per_key {
            let e = sums.entry(k.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    Ok(sums
        .into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect())
}

impl AnnotationLevel {
    /// Whether a sample key belongs to this level.
    pub fn matches(&self, key: &(String, Option<String>)) -> bool {
        match self {
            AnnotationLevel::Group => key.1.is_none(),
            AnnotationLevel::Individual => key.1.is_some(),
        }
    }
}
