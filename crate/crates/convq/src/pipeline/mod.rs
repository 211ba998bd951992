//! Batch pipeline: ingest -> slice -> reliability -> preprocess -> features
//! -> aggregate -> stats/predict, with provenance-stamped report files.

pub mod config;
mod features;
mod grid;
mod report;

pub use config::{FeatureToggles, InputPaths, PipelineConfig, Study};
pub use features::{compute_features, key_in_sets, matrix_of, select_columns, SliceFeatures};
pub use grid::{run_grid, TestRow, GRID_TESTS};

use std::collections::BTreeMap;

use crate::aggregate::Aggregator;
use crate::data::{
    self, AccelRecording, AnnotationLevel, AnnotationSet, ConversationGroup, ConversationSlice,
    SpeakingStatus,
};
use crate::predict::{run_study, Experiment, StudyCondition, TrainEvalConfig};
use crate::preprocess::{derive_channels, zscore, ChannelSet, WindowConfig};
use crate::reliability::{
    construct_validity_pca, filter_by_kappa, normalized_mean_scores, ratings_by_sample, binarize,
    QualityLabel, ReliabilityReport, ValidityReport,
};
use crate::{Error, Result};

/// Everything loaded by the ingest stage.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub accel: Vec<AccelRecording>,
    pub speaking: Vec<SpeakingStatus>,
    pub groups: Vec<ConversationGroup>,
    pub group_annotations: AnnotationSet,
    pub individual_annotations: AnnotationSet,
    pub warnings: Vec<String>,
}

/// Labels and dependent variables produced by the reliability stage.
#[derive(Debug, Clone)]
pub struct ReliabilityOutcome {
    pub group_report: ReliabilityReport<String>,
    pub individual_report: ReliabilityReport<(String, String)>,
    pub group_validity: ValidityReport,
    pub individual_validity: ValidityReport,
    /// Normalized mean score per kept slice.
    pub group_dv: BTreeMap<String, f64>,
    pub individual_dv: BTreeMap<(String, String), f64>,
    /// Binary labels (raw rater-mean > threshold) per kept sample.
    pub group_labels: BTreeMap<String, bool>,
    pub individual_labels: BTreeMap<(String, String), bool>,
}

fn wrap<T>(stage: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| Error::Stage {
        stage: stage.to_string(),
        source: Box::new(e),
    })
}

/// Load and cross-validate all inputs.
pub fn ingest(cfg: &PipelineConfig) -> Result<Dataset> {
    let (accel, mut warnings) = data::load_accel(&cfg.inputs.accel, cfg.rate_hz)?;
    let speaking = data::load_speaking(&cfg.inputs.speaking, cfg.rate_hz)?;
    let groups = data::load_groups(&cfg.inputs.groups)?;
    let group_annotations = data::load_annotations(
        &cfg.inputs.annotations_group,
        AnnotationLevel::Group,
        &data::default_group_items(),
    )?;
    let individual_annotations = data::load_annotations(
        &cfg.inputs.annotations_individual,
        AnnotationLevel::Individual,
        &data::default_individual_items(),
    )?;

    // Orphan participant ids are reported, not fatal.
    let accel_ids: std::collections::BTreeSet<&String> =
        accel.iter().map(|r| &r.participant_id).collect();
    let speaking_ids: std::collections::BTreeSet<&String> =
        speaking.iter().map(|s| &s.participant_id).collect();
    for group in &groups {
        for member in &group.member_ids {
            if !accel_ids.contains(member) {
                warnings.push(format!(
                    "group {}: member {member} has no accelerometer data",
                    group.group_id
                ));
            }
            if !speaking_ids.contains(member) {
                warnings.push(format!(
                    "group {}: member {member} has no speaking data",
                    group.group_id
                ));
            }
        }
    }

    Ok(Dataset {
        accel,
        speaking,
        groups,
        group_annotations,
        individual_annotations,
        warnings,
    })
}

/// Reliability stage: per-sample agreement, filtering, scores, labels, and
/// the construct-validity reports.
pub fn reliability_stage(
    dataset: &Dataset,
    cfg: &PipelineConfig,
) -> Result<ReliabilityOutcome> {
    let threshold = cfg.reliability.kappa_threshold;
    let binarize_at = cfg.reliability.binarize_threshold;

    let group_samples: BTreeMap<String, BTreeMap<String, Vec<u8>>> =
        ratings_by_sample(&dataset.group_annotations)
            .into_iter()
            .map(|((slice, _), raters)| (slice, raters))
            .collect();
    let group_report = filter_by_kappa(&group_samples, &dataset.group_annotations.items, threshold)?;

    let individual_samples: BTreeMap<(String, String), BTreeMap<String, Vec<u8>>> =
        ratings_by_sample(&dataset.individual_annotations)
            .into_iter()
            .map(|((slice, participant), raters)| {
                ((slice, participant.expect("individual level")), raters)
            })
            .collect();
    let individual_report = filter_by_kappa(
        &individual_samples,
        &dataset.individual_annotations.items,
        threshold,
    )?;

    // PCA of all rating vectors (one row per rater x sample).
    let group_matrix: Vec<Vec<f64>> = dataset
        .group_annotations
        .ratings
        .values()
        .map(|v| v.iter().map(|&x| x as f64).collect())
        .collect();
    let group_validity = construct_validity_pca(&group_matrix, &dataset.group_annotations.items)?;
    let individual_matrix: Vec<Vec<f64>> = dataset
        .individual_annotations
        .ratings
        .values()
        .map(|v| v.iter().map(|&x| x as f64).collect())
        .collect();
    let individual_validity =
        construct_validity_pca(&individual_matrix, &dataset.individual_annotations.items)?;

    // Normalized dependent variables over kept samples.
    let group_norm = normalized_mean_scores(&dataset.group_annotations)?;
    let individual_norm = normalized_mean_scores(&dataset.individual_annotations)?;

    let mut group_dv = BTreeMap::new();
    let mut group_labels = BTreeMap::new();
    for (slice, sample) in &group_report.per_sample {
        if !sample.kept {
            continue;
        }
        group_dv.insert(
            slice.clone(),
            group_norm[&(slice.clone(), None::<String>)],
        );
        group_labels.insert(
            slice.clone(),
            binarize(sample.mean_score, binarize_at) == QualityLabel::High,
        );
    }
    let mut individual_dv = BTreeMap::new();
    let mut individual_labels = BTreeMap::new();
    for (key, sample) in &individual_report.per_sample {
        if !sample.kept {
            continue;
        }
        individual_dv.insert(
            key.clone(),
            individual_norm[&(key.0.clone(), Some(key.1.clone()))],
        );
        individual_labels.insert(
            key.clone(),
            binarize(sample.mean_score, binarize_at) == QualityLabel::High,
        );
    }

    Ok(ReliabilityOutcome {
        group_report,
        individual_report,
        group_validity,
        individual_validity,
        group_dv,
        individual_dv,
        group_labels,
        individual_labels,
    })
}

/// Preprocess stage: z-score and derive the 7 channels per participant.
pub fn preprocess_stage(dataset: &Dataset) -> Result<BTreeMap<String, ChannelSet>> {
    dataset
        .accel
        .iter()
        .map(|rec| Ok((rec.participant_id.clone(), derive_channels(&zscore(rec)?))))
        .collect()
}

fn speaking_map(dataset: &Dataset) -> BTreeMap<String, SpeakingStatus> {
    dataset
        .speaking
        .iter()
        .map(|s| (s.participant_id.clone(), s.clone()))
        .collect()
}

/// Feature extraction for one window condition.
pub fn features_stage(
    dataset: &Dataset,
    channels: &BTreeMap<String, ChannelSet>,
    slices: &[ConversationSlice],
    window: Option<&WindowConfig>,
    toggles: &FeatureToggles,
    cfg: &PipelineConfig,
) -> Result<SliceFeatures> {
    compute_features(
        channels,
        &speaking_map(dataset),
        slices,
        window,
        toggles,
        &cfg.coordination,
        &cfg.turns,
        cfg.overlap_mode,
        &cfg.aggregators,
    )
}

/// Hop-1 smoothing window used by the window study so derived series keep
/// the original clock rate.
fn study_window(cfg: &PipelineConfig, window_s: f64) -> Option<WindowConfig> {
    if window_s <= 0.0 {
        return None;
    }
    Some(WindowConfig {
        window_len_s: window_s,
        hop_s: Some(1.0 / cfg.rate_hz),
        stats: cfg.predict.window_stats.clone(),
        n_bands: 4,
    })
}

/// Labeled matrix rows for one scope level.
struct LabeledRows<K> {
    keys: Vec<K>,
    labels: Vec<bool>,
}

fn labeled_group_rows(
    features: &SliceFeatures,
    labels: &BTreeMap<String, bool>,
) -> LabeledRows<String> {
    let keys: Vec<String> = labels
        .keys()
        .filter(|k| features.group_vectors.contains_key(*k))
        .cloned()
        .collect();
    let labels = keys.iter().map(|k| labels[k]).collect();
    LabeledRows { keys, labels }
}

fn labeled_individual_rows(
    features: &SliceFeatures,
    labels: &BTreeMap<(String, String), bool>,
) -> LabeledRows<(String, String)> {
    let keys: Vec<(String, String)> = labels
        .keys()
        .filter(|k| features.individual_vectors.contains_key(*k))
        .cloned()
        .collect();
    let labels = keys.iter().map(|k| labels[k]).collect();
    LabeledRows { keys, labels }
}

/// The three data-driven studies at one annotation level.
#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub study: Study,
    pub level: &'static str,
    pub experiment: Experiment,
}

#[allow(clippy::too_many_arguments)]
fn window_study(
    dataset: &Dataset,
    channels: &BTreeMap<String, ChannelSet>,
    slices: &[ConversationSlice],
    outcome: &ReliabilityOutcome,
    cfg: &PipelineConfig,
    eval: &TrainEvalConfig,
) -> Result<Vec<StudyOutcome>> {
    let toggles = FeatureToggles::parse_sets(&cfg.predict.window_study_sets)?;
    let mut per_condition: Vec<(String, SliceFeatures)> = Vec::new();
    for &w in &cfg.predict.window_sizes_s {
        let name = if w <= 0.0 {
            "none".to_string()
        } else {
            format!("{w}s")
        };
        let window = study_window(cfg, w);
        let features = features_stage(dataset, channels, slices, window.as_ref(), &toggles, cfg)?;
        per_condition.push((name, features));
    }

    let mut outcomes = Vec::new();
    for level in ["group", "individual"] {
        let mut conditions = Vec::new();
        for (name, features) in &per_condition {
            let matrix = if level == "group" {
                let rows = labeled_group_rows(features, &outcome.group_labels);
                let columns = select_columns(&features.group_vectors, |k| key_in_sets(k, &toggles));
                matrix_of(&features.group_vectors, &rows.keys, &columns)?
            } else {
                let rows = labeled_individual_rows(features, &outcome.individual_labels);
                let columns =
                    select_columns(&features.individual_vectors, |k| key_in_sets(k, &toggles));
                matrix_of(&features.individual_vectors, &rows.keys, &columns)?
            };
            conditions.push(StudyCondition {
                name: name.clone(),
                features: matrix,
            });
        }
        let labels: Vec<bool> = if level == "group" {
            labeled_group_rows(&per_condition[0].1, &outcome.group_labels).labels
        } else {
            labeled_individual_rows(&per_condition[0].1, &outcome.individual_labels).labels
        };
        outcomes.push(StudyOutcome {
            study: Study::Window,
            level: if level == "group" { "group" } else { "individual" },
            experiment: run_study(Study::Window.name(), &conditions, &labels, eval)?,
        });
    }
    Ok(outcomes)
}

fn fusion_study(
    features: &SliceFeatures,
    outcome: &ReliabilityOutcome,
    cfg: &PipelineConfig,
    eval: &TrainEvalConfig,
) -> Result<Vec<StudyOutcome>> {
    let mut outcomes = Vec::new();
    for level in ["group", "individual"] {
        let mut conditions = Vec::new();
        for set_name in &cfg.predict.fusion_conditions {
            let toggles = FeatureToggles::parse_sets(set_name)?;
            let matrix = if level == "group" {
                let rows = labeled_group_rows(features, &outcome.group_labels);
                let columns = select_columns(&features.group_vectors, |k| key_in_sets(k, &toggles));
                matrix_of(&features.group_vectors, &rows.keys, &columns)?
            } else {
                let rows = labeled_individual_rows(features, &outcome.individual_labels);
                let columns =
                    select_columns(&features.individual_vectors, |k| key_in_sets(k, &toggles));
                matrix_of(&features.individual_vectors, &rows.keys, &columns)?
            };
            conditions.push(StudyCondition {
                name: set_name.clone(),
                features: matrix,
            });
        }
        let labels: Vec<bool> = if level == "group" {
            labeled_group_rows(features, &outcome.group_labels).labels
        } else {
            labeled_individual_rows(features, &outcome.individual_labels).labels
        };
        outcomes.push(StudyOutcome {
            study: Study::Fusion,
            level: if level == "group" { "group" } else { "individual" },
            experiment: run_study(Study::Fusion.name(), &conditions, &labels, eval)?,
        });
    }
    Ok(outcomes)
}

fn aggregator_study(
    features: &SliceFeatures,
    outcome: &ReliabilityOutcome,
    eval: &TrainEvalConfig,
) -> Result<Vec<StudyOutcome>> {
    let toggles = FeatureToggles::default();
    let mut outcomes = Vec::new();
    for level in ["group", "individual"] {
        let mut conditions = Vec::new();
        for agg in Aggregator::ALL {
            let matrix = if level == "group" {
                let rows = labeled_group_rows(features, &outcome.group_labels);
                let columns = select_columns(&features.group_vectors, |k| {
                    k.aggregator == agg && key_in_sets(k, &toggles)
                });
                matrix_of(&features.group_vectors, &rows.keys, &columns)?
            } else {
                let rows = labeled_individual_rows(features, &outcome.individual_labels);
                let columns = select_columns(&features.individual_vectors, |k| {
                    k.aggregator == agg && key_in_sets(k, &toggles)
                });
                matrix_of(&features.individual_vectors, &rows.keys, &columns)?
            };
            conditions.push(StudyCondition {
                name: agg.as_str().to_string(),
                features: matrix,
            });
        }
        let labels: Vec<bool> = if level == "group" {
            labeled_group_rows(features, &outcome.group_labels).labels
        } else {
            labeled_individual_rows(features, &outcome.individual_labels).labels
        };
        outcomes.push(StudyOutcome {
            study: Study::Aggregator,
            level: if level == "group" { "group" } else { "individual" },
            experiment: run_study(Study::Aggregator.name(), &conditions, &labels, eval)?,
        });
    }
    Ok(outcomes)
}

/// Run the full pipeline, writing one report directory per stage. Completed
/// stage outputs are left intact when a later stage fails.
pub fn run(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    if let Some(workers) = worker_count(cfg) {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let preamble = cfg.preamble();

    let dataset = wrap("ingest", ingest(cfg))?;
    let (slices, dropped) = wrap(
        "slice",
        data::slice_conversations(&dataset.groups, cfg.rate_hz, cfg.slice),
    )?;
    wrap(
        "ingest",
        report::write_ingest(cfg, &preamble, &dataset, &slices, &dropped),
    )?;

    let outcome = wrap("reliability", reliability_stage(&dataset, cfg))?;
    wrap(
        "reliability",
        report::write_reliability(cfg, &preamble, &outcome),
    )?;

    let channels = wrap("preprocess", preprocess_stage(&dataset))?;

    let features = wrap(
        "features",
        features_stage(
            &dataset,
            &channels,
            &slices,
            cfg.window.as_ref(),
            &cfg.features,
            cfg,
        ),
    )?;
    wrap(
        "features",
        report::write_features(cfg, &preamble, &features),
    )?;

    let group_sizes: BTreeMap<String, usize> = slices
        .iter()
        .map(|s| (s.slice_id.clone(), s.member_ids.len()))
        .collect();
    let rows = wrap(
        "stats",
        run_grid(
            &features,
            &outcome.group_dv,
            &outcome.individual_dv,
            &group_sizes,
            &cfg.stats,
            cfg.seed,
        ),
    )?;
    wrap("stats", report::write_stats(cfg, &preamble, &rows))?;

    let studies = cfg
        .studies
        .clone()
        .unwrap_or_else(|| Study::ALL.to_vec());
    let eval = cfg.eval_config();
    let mut all_outcomes = Vec::new();
    for study in studies {
        let outcomes = wrap(
            "predict",
            match study {
                Study::Window => {
                    window_study(&dataset, &channels, &slices, &outcome, cfg, &eval)
                }
                Study::Fusion => fusion_study(&features, &outcome, cfg, &eval),
                Study::Aggregator => aggregator_study(&features, &outcome, &eval),
            },
        )?;
        all_outcomes.extend(outcomes);
    }
    wrap(
        "predict",
        report::write_studies(cfg, &preamble, &all_outcomes),
    )?;
    Ok(())
}

fn worker_count(cfg: &PipelineConfig) -> Option<usize> {
    if let Ok(value) = std::env::var("CONVQ_WORKERS") {
        if let Ok(n) = value.parse::<usize>() {
            if n > 0 {
                return Some(n);
            }
        }
    }
    cfg.workers
}
