//! Declarative pipeline configuration (TOML).

use std::path::{Path, PathBuf};

use crate::aggregate::Aggregator;
use crate::coordination::CoordinationConfig;
use crate::data::SlicePolicy;
use crate::predict::{ElasticConfig, TrainEvalConfig};
use crate::preprocess::{WindowConfig, WindowStat};
use crate::stats::{LassoConfig, QuantileConfig};
use crate::turntaking::{OverlapMode, TurnConfig};
use crate::{Error, Result};

/// Input file locations.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InputPaths {
    pub accel: PathBuf,
    pub speaking: PathBuf,
    pub groups: PathBuf,
    pub annotations_group: PathBuf,
    pub annotations_individual: PathBuf,
}

/// Feature-set toggles matching the attribute categories.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FeatureToggles {
    pub tt: bool,
    pub sync: bool,
    pub caus: bool,
    pub conv: bool,
}

impl Default for FeatureToggles {
    fn default() -> Self {
        FeatureToggles {
            tt: true,
            sync: true,
            caus: true,
            conv: true,
        }
    }
}

impl FeatureToggles {
    pub fn parse_sets(sets: &str) -> Result<FeatureToggles> {
        let mut toggles = FeatureToggles {
            tt: false,
            sync: false,
            caus: false,
            conv: false,
        };
        for part in sets.split([',', '+']) {
            match part.trim() {
                "tt" => toggles.tt = true,
                "sync" => toggles.sync = true,
                "caus" => toggles.caus = true,
                "conv" => toggles.conv = true,
                "coord" => {
                    toggles.sync = true;
                    toggles.caus = true;
                    toggles.conv = true;
                }
                "all" => return Ok(FeatureToggles::default()),
                other => {
                    return Err(Error::Config(format!(
                        "unknown feature set {other:?} (expected tt, sync, caus, conv, coord, all)"
                    )))
                }
            }
        }
        Ok(toggles)
    }
}

/// Reliability thresholds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ReliabilitySection {
    pub kappa_threshold: f64,
    pub binarize_threshold: f64,
}

impl Default for ReliabilitySection {
    fn default() -> Self {
        ReliabilitySection {
            kappa_threshold: 0.2,
            binarize_threshold: 3.0,
        }
    }
}

/// Statistical-analysis section.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct StatsSection {
    /// Channels whose aggregated coordination features enter the tests.
    pub channels: Vec<String>,
    /// Aggregator used for test predictors.
    pub aggregator: Aggregator,
    /// Bonferroni multiplier; `None` uses the grid size (18).
    pub bonferroni_m: Option<usize>,
    pub significance_threshold: f64,
    pub quantile: QuantileConfig,
    pub lasso: LassoConfig,
}

impl Default for StatsSection {
    fn default() -> Self {
        StatsSection {
            channels: vec!["euclid_norm".to_string()],
            aggregator: Aggregator::Mean,
            bonferroni_m: None,
            significance_threshold: 0.005,
            quantile: QuantileConfig::default(),
            lasso: LassoConfig::default(),
        }
    }
}

/// Data-driven study section.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PredictSection {
    /// Window sizes for the window study; 0 means no smoothing.
    pub window_sizes_s: Vec<f64>,
    /// Window statistics used for the smoothed conditions.
    pub window_stats: Vec<WindowStat>,
    /// Feature sets evaluated in the window study.
    pub window_study_sets: String,
    /// Conditions for the fusion study (comma-separated set names).
    pub fusion_conditions: Vec<String>,
    pub folds: usize,
    pub smote_k: usize,
    pub pca_variance: f64,
    pub elastic: ElasticConfig,
}

impl Default for PredictSection {
    fn default() -> Self {
        PredictSection {
            window_sizes_s: vec![0.0, 1.0, 3.0, 5.0, 10.0],
            window_stats: vec![WindowStat::Mean],
            window_study_sets: "coord".to_string(),
            fusion_conditions: vec![
                "tt".to_string(),
                "sync".to_string(),
                "caus".to_string(),
                "conv".to_string(),
                "coord".to_string(),
            ],
            folds: 5,
            smote_k: 5,
            pca_variance: 0.95,
            elastic: ElasticConfig::default(),
        }
    }
}

/// Which studies to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Window,
    Fusion,
    Aggregator,
}

impl Study {
    pub const ALL: [Study; 3] = [Study::Window, Study::Fusion, Study::Aggregator];

    pub fn name(&self) -> &'static str {
        match self {
            Study::Window => "window_study",
            Study::Fusion => "fusion_study",
            Study::Aggregator => "aggregator_study",
        }
    }

    pub fn parse(name: &str) -> Result<Study> {
        match name {
            "window" | "window_study" => Ok(Study::Window),
            "fusion" | "fusion_study" => Ok(Study::Fusion),
            "aggregator" | "aggregator_study" => Ok(Study::Aggregator),
            other => Err(Error::Config(format!(
                "unknown study {other:?} (expected window, fusion, aggregator)"
            ))),
        }
    }
}

/// Full pipeline configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Common sample clock rate.
    pub rate_hz: f64,
    pub inputs: InputPaths,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub slice: SlicePolicy,
    /// Optional sliding-window smoothing for the main feature extraction.
    #[serde(default)]
    pub window: Option<WindowConfig>,
    #[serde(default)]
    pub features: FeatureToggles,
    #[serde(default = "default_aggregators")]
    pub aggregators: Vec<Aggregator>,
    #[serde(default)]
    pub coordination: CoordinationConfig,
    #[serde(default)]
    pub turns: TurnConfig,
    #[serde(default = "default_overlap_mode")]
    pub overlap_mode: OverlapMode,
    #[serde(default)]
    pub reliability: ReliabilitySection,
    #[serde(default)]
    pub stats: StatsSection,
    #[serde(default)]
    pub predict: PredictSection,
    /// Studies to run in the predict stage; defaults to all three.
    #[serde(default)]
    pub studies: Option<Vec<Study>>,
    /// Worker threads; the CONVQ_WORKERS environment variable overrides.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_aggregators() -> Vec<Aggregator> {
    Aggregator::ALL.to_vec()
}

fn default_overlap_mode() -> OverlapMode {
    OverlapMode::JointSpeech
}

impl PipelineConfig {
    /// Defaults rooted at a data directory with the standard file names.
    pub fn with_data_dir(data_dir: &Path, out_dir: &Path) -> PipelineConfig {
        PipelineConfig {
            seed: 0,
            rate_hz: 20.0,
            inputs: InputPaths {
                accel: data_dir.join(crate::synth::ACCEL_FILE),
                speaking: data_dir.join(crate::synth::SPEAKING_FILE),
                groups: data_dir.join(crate::synth::GROUPS_FILE),
                annotations_group: data_dir.join(crate::synth::GROUP_ANNOTATIONS_FILE),
                annotations_individual: data_dir.join(crate::synth::INDIVIDUAL_ANNOTATIONS_FILE),
            },
            out_dir: out_dir.to_path_buf(),
            slice: SlicePolicy::default(),
            window: None,
            features: FeatureToggles::default(),
            aggregators: default_aggregators(),
            coordination: CoordinationConfig::default(),
            turns: TurnConfig::default(),
            overlap_mode: default_overlap_mode(),
            reliability: ReliabilitySection::default(),
            stats: StatsSection::default(),
            predict: PredictSection::default(),
            studies: None,
            workers: None,
        }
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rate_hz <= 0.0 {
            return Err(Error::Config(format!(
                "rate_hz must be positive, got {}",
                self.rate_hz
            )));
        }
        for (name, path) in [
            ("accel", &self.inputs.accel),
            ("speaking", &self.inputs.speaking),
            ("groups", &self.inputs.groups),
            ("annotations_group", &self.inputs.annotations_group),
            (
                "annotations_individual",
                &self.inputs.annotations_individual,
            ),
        ] {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "input {name} does not exist: {}",
                    path.display()
                )));
            }
        }
        if self.aggregators.is_empty() {
            return Err(Error::Config("aggregators must not be empty".to_string()));
        }
        Ok(())
    }

    /// Train/eval settings derived from the predict section.
    pub fn eval_config(&self) -> TrainEvalConfig {
        TrainEvalConfig {
            folds: self.predict.folds,
            seed: self.seed,
            elastic: self.predict.elastic.clone(),
            smote_k: self.predict.smote_k,
            pca_variance: self.predict.pca_variance,
            roc_thresholds: 101,
        }
    }

    /// Fingerprint of the serialized configuration, stamped into outputs.
    pub fn fingerprint(&self) -> u64 {
        let text = toml::to_string(self).unwrap_or_default();
        crate::util::fnv1a64(text.as_bytes())
    }

    /// Provenance line prepended to every output file.
    pub fn preamble(&self) -> String {
        format!(
            "# convq config_hash={:016x} seed={}\n",
            self.fingerprint(),
            self.seed
        )
    }
}
