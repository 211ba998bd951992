//! Reduce pairwise and per-member features to group-level and
//! individual-level vectors via the six feature aggregators.

use std::collections::{BTreeMap, BTreeSet};

use crate::coordination::PairFeatureSet;
use crate::{Error, Result};

/// The six reductions applied per (feature, channel).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Min,
    Max,
    Mean,
    Mode,
    Median,
    Variance,
}

impl Aggregator {
    pub const ALL: [Aggregator; 6] = [
        Aggregator::Min,
        Aggregator::Max,
        Aggregator::Mean,
        Aggregator::Mode,
        Aggregator::Median,
        Aggregator::Variance,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Aggregator::Min => "min",
            Aggregator::Max => "max",
            Aggregator::Mean => "mean",
            Aggregator::Mode => "mode",
            Aggregator::Median => "median",
            Aggregator::Variance => "variance",
        }
    }

    pub fn parse(name: &str) -> Result<Aggregator> {
        Aggregator::ALL
            .into_iter()
            .find(|a| a.as_str() == name)
            .ok_or_else(|| Error::Config(format!("unknown aggregator {name:?}")))
    }

    /// Apply to a non-empty pool of values.
    pub fn apply(&self, values: &[f64]) -> f64 {
        match self {
            Aggregator::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregator::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregator::Mean => crate::util::mean(values),
            Aggregator::Mode => mode_binned(values),
            Aggregator::Median => crate::util::median(values),
            Aggregator::Variance => crate::util::variance_pop(values),
        }
    }
}

/// Mode for continuous values: the midpoint of the densest of 10 equal-width
/// bins over the value range. A single value (or zero range) is its own mode.
/// Bin ties resolve to the lowest bin.
fn mode_binned(values: &[f64]) -> f64 {
    const BINS: usize = 10;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.len() == 1 || hi <= lo {
        return values[0];
    }
    let width = (hi - lo) / BINS as f64;
    let mut counts = [0usize; BINS];
    for &v in values {
        let b = (((v - lo) / (hi - lo)) * BINS as f64) as usize;
        counts[b.min(BINS - 1)] += 1;
    }
    let best = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    lo + (best as f64 + 0.5) * width
}

/// Scope of a feature vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scope {
    Group { slice_id: String },
    Individual { slice_id: String, participant_id: String },
}

/// Column identity in the final feature matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FeatureKey {
    pub feature: String,
    pub channel: String,
    pub aggregator: Aggregator,
}

impl FeatureKey {
    /// Column name: `feature__channel__aggregator`.
    pub fn column(&self) -> String {
        format!(
            "{}__{}__{}",
            self.feature,
            self.channel,
            self.aggregator.as_str()
        )
    }
}

/// One scope instance's aggregated features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub scope: Scope,
    pub entries: BTreeMap<FeatureKey, f64>,
}

/// Aggregate pair features over all pairs of a group (group scope).
///
/// Every unordered pair of `member_ids` must be present; directional
/// features contribute both perspectives to the pool.
pub fn aggregate_group(
    slice_id: &str,
    member_ids: &[String],
    pair_sets: &[PairFeatureSet],
    aggregators: &[Aggregator],
) -> Result<FeatureVector> {
    let pools = pair_pools(member_ids, pair_sets, None)?;
    Ok(FeatureVector {
        scope: Scope::Group {
            slice_id: slice_id.to_string(),
        },
        entries: reduce(pools, aggregators),
    })
}

/// Aggregate pair features over the pairs containing one participant
/// (individual scope), from that participant's perspective.
pub fn aggregate_individual(
    slice_id: &str,
    participant_id: &str,
    member_ids: &[String],
    pair_sets: &[PairFeatureSet],
    aggregators: &[Aggregator],
) -> Result<FeatureVector> {
    let pools = pair_pools(member_ids, pair_sets, Some(participant_id))?;
    Ok(FeatureVector {
        scope: Scope::Individual {
            slice_id: slice_id.to_string(),
            participant_id: participant_id.to_string(),
        },
        entries: reduce(pools, aggregators),
    })
}

/// Aggregate per-member values (turn-taking features) to group scope.
pub fn aggregate_members(
    slice_id: &str,
    channel: &str,
    per_member: &BTreeMap<String, BTreeMap<String, f64>>,
    aggregators: &[Aggregator],
) -> Result<FeatureVector> {
    if per_member.is_empty() {
        return Err(Error::InsufficientData(
            "no member features to aggregate".to_string(),
        ));
    }
    let mut pools: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for features in per_member.values() {
        for (name, &v) in features {
            pools
                .entry((name.clone(), channel.to_string()))
                .or_default()
                .push(v);
        }
    }
    Ok(FeatureVector {
        scope: Scope::Group {
            slice_id: slice_id.to_string(),
        },
        entries: reduce(pools, aggregators),
    })
}

/// Build per-(feature, channel) value pools from ordered pair sets.
///
/// `pair_sets` holds one entry per ordered pair per channel. Group scope
/// (`focus = None`) pools both perspectives of every pair; individual scope
/// pools the perspectives whose first member is the focus participant.
fn pair_pools(
    member_ids: &[String],
    pair_sets: &[PairFeatureSet],
    focus: Option<&str>,
) -> Result<BTreeMap<(String, String), Vec<f64>>> {
    if pair_sets.is_empty() {
        return Err(Error::InsufficientData("empty pair set".to_string()));
    }
    let channels: BTreeSet<&String> = pair_sets.iter().map(|s| &s.channel).collect();
    let present: BTreeSet<(&String, &String, &String)> = pair_sets
        .iter()
        .map(|s| (&s.pair.0, &s.pair.1, &s.channel))
        .collect();

    // Required ordered pairs for the scope.
    let mut required: Vec<(&String, &String)> = Vec::new();
    for a in member_ids {
        for b in member_ids {
            if a == b {
                continue;
            }
            match focus {
                None => required.push((a, b)),
                Some(f) if a == f => required.push((a, b)),
                _ => {}
            }
        }
    }
    if required.is_empty() {
        return Err(Error::InsufficientData(format!(
            "participant {focus:?} has no pairs among {member_ids:?}"
        )));
    }
    for (a, b) in &required {
        for channel in &channels {
            if !present.contains(&(a, b, channel)) {
                return Err(Error::MissingPair(format!(
                    "({a}, {b}) on channel {channel}"
                )));
            }
        }
    }

    let wanted: BTreeSet<(&String, &String)> = required.into_iter().collect();
    let mut pools: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for set in pair_sets {
        if !wanted.contains(&(&set.pair.0, &set.pair.1)) {
            continue;
        }
        for (name, &v) in &set.values {
            pools
                .entry((name.clone(), set.channel.clone()))
                .or_default()
                .push(v);
        }
    }
    Ok(pools)
}

fn reduce(
    pools: BTreeMap<(String, String), Vec<f64>>,
    aggregators: &[Aggregator],
) -> BTreeMap<FeatureKey, f64> {
    let mut entries = BTreeMap::new();
    for ((feature, channel), mut values) in pools {
        // Canonical pool order makes reductions bit-identical regardless of
        // the order pair sets arrive in.
        values.sort_by(|a, b| a.total_cmp(b));
        for &aggregator in aggregators {
            entries.insert(
                FeatureKey {
                    feature: feature.clone(),
                    channel: channel.clone(),
                    aggregator,
                },
                aggregator.apply(&values),
            );
        }
    }
    entries
}
