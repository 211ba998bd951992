//! The hypothesis-test grid: {IndivPCQ, GroupPCQ} x {cardinality,
//! turn-taking, bodily coordination} x {QLS, LASSO, Spearman}.

use std::collections::BTreeMap;

use crate::aggregate::FeatureKey;
use crate::stats::{lasso, quantile_regression, spearman, ModelTag, RegressionResult};
use crate::{Error, Result};

use super::config::{FeatureToggles, StatsSection};
use super::features::{key_in_sets, matrix_of, select_columns, SliceFeatures, SPEECH_CHANNEL};

/// One row of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct TestRow {
    pub model: &'static str,
    pub dependent: &'static str,
    pub iv_set: &'static str,
    pub predictor: String,
    pub beta: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

const IV_SETS: [&str; 3] = ["cardinality", "turn_taking", "bodily_coordination"];

struct TestCase {
    dependent: &'static str,
    iv_set: &'static str,
    columns: Vec<String>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

fn coordination_columns(
    vectors: &BTreeMap<impl Ord, crate::aggregate::FeatureVector>,
    cfg: &StatsSection,
) -> Vec<FeatureKey> {
    let coord = FeatureToggles {
        tt: false,
        sync: true,
        caus: true,
        conv: true,
    };
    select_columns(vectors, |k| {
        key_in_sets(k, &coord)
            && k.aggregator == cfg.aggregator
            && cfg.channels.iter().any(|c| &k.channel == c)
    })
}

fn tt_columns(
    vectors: &BTreeMap<impl Ord, crate::aggregate::FeatureVector>,
    cfg: &StatsSection,
) -> Vec<FeatureKey> {
    select_columns(vectors, |k| {
        k.channel == SPEECH_CHANNEL && k.aggregator == cfg.aggregator
    })
}

/// Drop constant columns (they make QLS designs degenerate) but keep the
/// names for reporting.
fn drop_constant_columns(columns: &mut Vec<String>, x: &mut Vec<Vec<f64>>) {
    let p = columns.len();
    let keep: Vec<usize> = (0..p)
        .filter(|&j| {
            let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
            crate::util::variance_pop(&col) > 0.0
        })
        .collect();
    if keep.len() == p {
        return;
    }
    *columns = keep.iter().map(|&j| columns[j].clone()).collect();
    for row in x.iter_mut() {
        *row = keep.iter().map(|&j| row[j]).collect();
    }
}

fn build_cases(
    features: &SliceFeatures,
    group_dv: &BTreeMap<String, f64>,
    individual_dv: &BTreeMap<(String, String), f64>,
    group_sizes: &BTreeMap<String, usize>,
    cfg: &StatsSection,
) -> Result<Vec<TestCase>> {
    let mut cases = Vec::new();

    // Group level rows: kept slices that have features.
    let g_rows: Vec<String> = group_dv
        .keys()
        .filter(|s| features.group_vectors.contains_key(*s))
        .cloned()
        .collect();
    let g_y: Vec<f64> = g_rows.iter().map(|s| group_dv[s]).collect();

    // Individual level rows.
    let i_rows: Vec<(String, String)> = individual_dv
        .keys()
        .filter(|k| features.individual_vectors.contains_key(*k))
        .cloned()
        .collect();
    let i_y: Vec<f64> = i_rows.iter().map(|k| individual_dv[k]).collect();

    if g_rows.is_empty() || i_rows.is_empty() {
        return Err(Error::InsufficientData(
            "no labeled rows survive reliability filtering".to_string(),
        ));
    }

    for iv_set in IV_SETS {
        // group level
        let (columns, x) = match iv_set {
            "cardinality" => (
                vec!["cardinality".to_string()],
                g_rows
                    .iter()
                    .map(|s| vec![group_sizes[s] as f64])
                    .collect::<Vec<_>>(),
            ),
            "turn_taking" => {
                let keys = tt_columns(&features.group_vectors, cfg);
                let names = keys.iter().map(|k| k.column()).collect();
                (names, matrix_of(&features.group_vectors, &g_rows, &keys)?)
            }
            _ => {
                let keys = coordination_columns(&features.group_vectors, cfg);
                let names = keys.iter().map(|k| k.column()).collect();
                (names, matrix_of(&features.group_vectors, &g_rows, &keys)?)
            }
        };
        let mut columns = columns;
        let mut x = x;
        drop_constant_columns(&mut columns, &mut x);
        cases.push(TestCase {
            dependent: "GroupPCQ",
            iv_set,
            columns,
            x,
            y: g_y.clone(),
        });

        // individual level
        let (columns, x) = match iv_set {
            "cardinality" => (
                vec!["cardinality".to_string()],
                i_rows
                    .iter()
                    .map(|(s, _)| vec![group_sizes[s] as f64])
                    .collect::<Vec<_>>(),
            ),
            "turn_taking" => {
                let keys = tt_columns(&features.individual_vectors, cfg);
                let names = keys.iter().map(|k| k.column()).collect();
                (
                    names,
                    matrix_of(&features.individual_vectors, &i_rows, &keys)?,
                )
            }
            _ => {
                let keys = coordination_columns(&features.individual_vectors, cfg);
                let names = keys.iter().map(|k| k.column()).collect();
                (
                    names,
                    matrix_of(&features.individual_vectors, &i_rows, &keys)?,
                )
            }
        };
        let mut columns = columns;
        let mut x = x;
        drop_constant_columns(&mut columns, &mut x);
        cases.push(TestCase {
            dependent: "IndivPCQ",
            iv_set,
            columns,
            x,
            y: i_y.clone(),
        });
    }
    Ok(cases)
}

fn rows_of(
    result: &RegressionResult,
    case: &TestCase,
    only: Option<&[usize]>,
) -> Vec<TestRow> {
    result
        .predictors
        .iter()
        .enumerate()
        .filter(|(j, _)| only.map_or(true, |keep| keep.contains(j)))
        .map(|(j, p)| TestRow {
            model: result.model.as_str(),
            dependent: case.dependent,
            iv_set: case.iv_set,
            predictor: case.columns[j].clone(),
            beta: p.beta,
            p_value: p.p_value,
            p_adjusted: p.p_adjusted,
            significant: p.significant,
        })
        .collect()
}

/// Run the full grid. Every model's p-values receive a Bonferroni
/// correction with `m` = the grid size (unless overridden) and the
/// configured significance threshold.
pub fn run_grid(
    features: &SliceFeatures,
    group_dv: &BTreeMap<String, f64>,
    individual_dv: &BTreeMap<(String, String), f64>,
    group_sizes: &BTreeMap<String, usize>,
    cfg: &StatsSection,
    seed: u64,
) -> Result<Vec<TestRow>> {
    let cases = build_cases(features, group_dv, individual_dv, group_sizes, cfg)?;
    let m = cfg.bonferroni_m.unwrap_or(cases.len() * 3);
    let mut rows = Vec::new();

    for case in &cases {
        if case.columns.is_empty() {
            return Err(Error::InsufficientData(format!(
                "{} / {}: no usable predictors",
                case.dependent, case.iv_set
            )));
        }
        let mut qcfg = cfg.quantile.clone();
        qcfg.seed = seed;
        qcfg.significance_threshold = cfg.significance_threshold;
        let mut qls = quantile_regression(&case.x, &case.y, &qcfg)?;
        qls.adjust(m);
        rows.extend(rows_of(&qls, case, None));

        let mut lcfg = cfg.lasso.clone();
        lcfg.seed = seed;
        lcfg.significance_threshold = cfg.significance_threshold;
        let mut lasso_fit = lasso(&case.x, &case.y, &lcfg)?;
        lasso_fit.adjust(m);
        rows.extend(rows_of(&lasso_fit, case, None));

        // Post-hoc rank correlation on the LASSO-filtered (nonzero)
        // predictors; when the penalty removes everything, fall back to all.
        let surviving: Vec<usize> = lasso_fit
            .predictors
            .iter()
            .enumerate()
            .filter(|(_, p)| p.beta != 0.0)
            .map(|(j, _)| j)
            .collect();
        let tested: Vec<usize> = if surviving.is_empty() {
            (0..case.columns.len()).collect()
        } else {
            surviving
        };
        let mut spearman_result = RegressionResult {
            model: ModelTag::Spearman,
            intercept: 0.0,
            predictors: Vec::new(),
            significance_threshold: cfg.significance_threshold,
        };
        for &j in &tested {
            let col: Vec<f64> = case.x.iter().map(|r| r[j]).collect();
            let (rho, p) = spearman(&col, &case.y)?;
            spearman_result.predictors.push(crate::stats::PredictorResult {
                predictor: case.columns[j].clone(),
                beta: rho,
                p_value: p,
                p_adjusted: p,
                significant: false,
            });
        }
        spearman_result.adjust(m);
        // spearman_result.predictors indexes `tested`, not case.columns
        for (k, p) in spearman_result.predictors.iter().enumerate() {
            rows.push(TestRow {
                model: spearman_result.model.as_str(),
                dependent: case.dependent,
                iv_set: case.iv_set,
                predictor: case.columns[tested[k]].clone(),
                beta: p.beta,
                p_value: p.p_value,
                p_adjusted: p.p_adjusted,
                significant: p.significant,
            });
        }
    }
    Ok(rows)
}

/// Number of model fits in the grid: 2 dependents x 3 sets x 3 models.
pub const GRID_TESTS: usize = 18;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregate::{Aggregator, FeatureVector, Scope};

    fn fv_group(slice: &str, entries: &[(&str, &str, f64)]) -> FeatureVector {
        FeatureVector {
            scope: Scope::Group {
                slice_id: slice.into(),
            },
            entries: entries
                .iter()
                .map(|(f, c, v)| {
                    (
                        FeatureKey {
                            feature: (*f).to_string(),
                            channel: (*c).to_string(),
                            aggregator: Aggregator::Mean,
                        },
                        *v,
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn grid_emits_all_cells_with_planted_cardinality_effect() {
        use rand::Rng;
        let mut rng = crate::util::seeded_rng(130, 0);
        let mut features = SliceFeatures {
            pair_rows: Vec::new(),
            turn_rows: Vec::new(),
            member_rows: BTreeMap::new(),
            group_vectors: BTreeMap::new(),
            individual_vectors: BTreeMap::new(),
        };
        let mut group_dv = BTreeMap::new();
        let mut individual_dv = BTreeMap::new();
        let mut group_sizes = BTreeMap::new();
        for i in 0..40 {
            let slice = format!("g{i:02}_s00");
            let size = 2 + i % 4;
            let dv = 1.0 - 0.4 * size as f64 + 0.2 * rng.gen::<f64>();
            let entries = [
                ("eq", SPEECH_CHANNEL, rng.gen::<f64>()),
                ("d_silence", SPEECH_CHANNEL, rng.gen::<f64>()),
                ("correlation_rho", "euclid_norm", rng.gen::<f64>() - 0.5),
                ("granger_f_in", "euclid_norm", rng.gen::<f64>() * 3.0),
            ];
            features
                .group_vectors
                .insert(slice.clone(), fv_group(&slice, &entries));
            group_dv.insert(slice.clone(), dv);
            group_sizes.insert(slice.clone(), size);
            for m in 0..2 {
                let key = (slice.clone(), format!("p{m}"));
                features.individual_vectors.insert(
                    key.clone(),
                    fv_group(&slice, &entries),
                );
                individual_dv.insert(key, dv + 0.1 * rng.gen::<f64>());
            }
        }

        let cfg = StatsSection {
            quantile: crate::stats::QuantileConfig {
                bootstrap: 100,
                ..Default::default()
            },
            lasso: crate::stats::LassoConfig {
                bootstrap: 50,
                ..Default::default()
            },
            ..Default::default()
        };
        let rows = run_grid(
            &features,
            &group_dv,
            &individual_dv,
            &group_sizes,
            &cfg,
            7,
        )
        .unwrap();

        // all 18 cells present
        let mut cells: std::collections::BTreeSet<(&str, &str, &str)> =
            std::collections::BTreeSet::new();
        for row in &rows {
            cells.insert((row.model, row.dependent, row.iv_set));
        }
        assert_eq!(cells.len(), GRID_TESTS);

        // the planted cardinality effect is negative and significant for QLS
        let card = rows
            .iter()
            .find(|r| r.model == "QLS" && r.dependent == "GroupPCQ" && r.iv_set == "cardinality")
            .unwrap();
        assert!(card.beta < 0.0);
        assert!(card.significant, "p_adj {}", card.p_adjusted);
        // adjusted p respects min(1, m p)
        for row in &rows {
            if row.p_value.is_finite() {
                assert!((row.p_adjusted - (row.p_value * 18.0).min(1.0)).abs() < 1e-12);
            }
        }
    }
}
