//! Per-slice feature extraction and matrix assembly.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::aggregate::{
    aggregate_group, aggregate_individual, aggregate_members, Aggregator, FeatureKey,
    FeatureVector,
};
use crate::coordination::{
    feature_names_by_category, pair_features, swap_perspective, CoordinationConfig,
    PairFeatureSet,
};
use crate::data::{cut_contiguous, ConversationSlice, SpeakingStatus};
use crate::preprocess::{window_features, ChannelSet, WindowConfig};
use crate::turntaking::{segment_turns, turn_features, OverlapMode, TurnConfig, TurnSequence};
use crate::{Error, Result};

use super::config::FeatureToggles;

/// Channel name used for turn-taking features in the aggregated matrix.
pub const SPEECH_CHANNEL: &str = "speech";

/// All per-slice feature products for one window condition.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceFeatures {
    /// Raw ordered-pair banks, one entry per (slice, ordered pair, channel).
    pub pair_rows: Vec<(String, PairFeatureSet)>,
    /// Per-slice segmented turns (global clock).
    pub turn_rows: Vec<(String, TurnSequence)>,
    /// Per-slice per-member turn feature values.
    pub member_rows: BTreeMap<(String, String), BTreeMap<String, f64>>,
    pub group_vectors: BTreeMap<String, FeatureVector>,
    pub individual_vectors: BTreeMap<(String, String), FeatureVector>,
}

fn wanted_features(toggles: &FeatureToggles) -> BTreeSet<String> {
    let mut wanted = BTreeSet::new();
    for (category, names) in feature_names_by_category() {
        let on = match category {
            "sync" => toggles.sync,
            "caus" => toggles.caus,
            "conv" => toggles.conv,
            _ => false,
        };
        if on {
            for n in names {
                wanted.insert(n.to_string());
            }
        }
    }
    wanted
}

/// One participant's derived series within a slice: `(name, rate, values)`.
fn slice_channels(
    set: &ChannelSet,
    slice: &ConversationSlice,
    window: Option<&WindowConfig>,
) -> Result<Vec<(String, f64, Vec<f64>)>> {
    let mut out = Vec::new();
    for channel in &set.channels {
        let cut = cut_contiguous(
            &set.ts,
            &channel.values,
            slice.start_t,
            slice.end_t,
            &format!("accel {} channel {}", set.participant_id, channel.name),
        )?;
        for series in window_features(&cut, set.sample_rate_hz, window)? {
            let name = if series.stat == "raw" {
                channel.name.clone()
            } else {
                format!("{}_{}", channel.name, series.stat)
            };
            out.push((name, series.rate_hz, series.values));
        }
    }
    Ok(out)
}

/// Compute coordination + turn-taking features for every slice and reduce
/// them to group- and individual-level vectors. Slices run in parallel;
/// outputs are collected in slice order so results are deterministic.
#[allow(clippy::too_many_arguments)]
pub fn compute_features(
    channel_sets: &BTreeMap<String, ChannelSet>,
    speaking: &BTreeMap<String, SpeakingStatus>,
    slices: &[ConversationSlice],
    window: Option<&WindowConfig>,
    toggles: &FeatureToggles,
    coordination: &CoordinationConfig,
    turns_cfg: &TurnConfig,
    overlap_mode: OverlapMode,
    aggregators: &[Aggregator],
) -> Result<SliceFeatures> {
    let coordination_on = toggles.sync || toggles.caus || toggles.conv;
    let wanted = wanted_features(toggles);

    let per_slice: Vec<Result<SliceFeatures>> = slices
        .par_iter()
        .map(|slice| {
            let mut pair_rows = Vec::new();
            let mut turn_rows = Vec::new();
            let mut member_rows = BTreeMap::new();
            let mut group_vectors = BTreeMap::new();
            let mut individual_vectors = BTreeMap::new();

            let mut pair_sets: Vec<PairFeatureSet> = Vec::new();
            if coordination_on {
                // Derived series per member.
                let mut derived: BTreeMap<&String, Vec<(String, f64, Vec<f64>)>> =
                    BTreeMap::new();
                for member in &slice.member_ids {
                    let set = channel_sets.get(member).ok_or_else(|| {
                        Error::Domain(format!(
                            "slice {}: no accelerometer data for member {member}",
                            slice.slice_id
                        ))
                    })?;
                    derived.insert(member, slice_channels(set, slice, window)?);
                }
                for (i, a) in slice.member_ids.iter().enumerate() {
                    for b in slice.member_ids.iter().skip(i + 1) {
                        let series_a = &derived[a];
                        let series_b = &derived[b];
                        for ((name_a, rate, values_a), (name_b, _, values_b)) in
                            series_a.iter().zip(series_b)
                        {
                            debug_assert_eq!(name_a, name_b);
                            let mut set = pair_features(
                                (a, b),
                                name_a,
                                values_a,
                                values_b,
                                *rate,
                                coordination,
                            )
                            .map_err(|e| {
                                Error::Domain(format!(
                                    "slice {} pair ({a}, {b}) channel {name_a}: {e}",
                                    slice.slice_id
                                ))
                            })?;
                            set.values.retain(|name, _| wanted.contains(name));
                            let swapped = swap_perspective(&set);
                            pair_sets.push(set);
                            pair_sets.push(swapped);
                        }
                    }
                }
                for set in &pair_sets {
                    // keep one dump row per unordered pair per channel
                    if set.pair.0 < set.pair.1 {
                        pair_rows.push((slice.slice_id.clone(), set.clone()));
                    }
                }
            }

            let mut member_features: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
            if toggles.tt {
                let mut statuses: BTreeMap<String, Vec<u8>> = BTreeMap::new();
                for member in &slice.member_ids {
                    let status = speaking.get(member).ok_or_else(|| {
                        Error::Domain(format!(
                            "slice {}: no speaking data for member {member}",
                            slice.slice_id
                        ))
                    })?;
                    statuses.insert(member.clone(), status.cut(slice.start_t, slice.end_t)?);
                }
                let rate = speaking[&slice.member_ids[0]].rate_hz;
                for (member, status) in &statuses {
                    let mut seq = segment_turns(member, status, rate, turns_cfg)?;
                    for turn in &mut seq.turns {
                        turn.start += slice.start_t as usize;
                        turn.end += slice.start_t as usize;
                    }
                    turn_rows.push((slice.slice_id.clone(), seq));
                }
                let features = turn_features(&statuses, rate, turns_cfg, overlap_mode)?;
                for (member, values) in &features.per_member {
                    member_rows.insert(
                        (slice.slice_id.clone(), member.clone()),
                        values.clone(),
                    );
                }
                member_features = features.per_member;
            }

            // Group-level vector.
            let mut entries = BTreeMap::new();
            if coordination_on {
                let fv = aggregate_group(
                    &slice.slice_id,
                    &slice.member_ids,
                    &pair_sets,
                    aggregators,
                )?;
                entries.extend(fv.entries);
            }
            if toggles.tt {
                let fv = aggregate_members(
                    &slice.slice_id,
                    SPEECH_CHANNEL,
                    &member_features,
                    aggregators,
                )?;
                entries.extend(fv.entries);
            }
            group_vectors.insert(
                slice.slice_id.clone(),
                FeatureVector {
                    scope: crate::aggregate::Scope::Group {
                        slice_id: slice.slice_id.clone(),
                    },
                    entries,
                },
            );

            // Individual-level vectors.
            for member in &slice.member_ids {
                let mut entries = BTreeMap::new();
                if coordination_on {
                    let fv = aggregate_individual(
                        &slice.slice_id,
                        member,
                        &slice.member_ids,
                        &pair_sets,
                        aggregators,
                    )?;
                    entries.extend(fv.entries);
                }
                if toggles.tt {
                    let own: BTreeMap<String, BTreeMap<String, f64>> = [(
                        member.clone(),
                        member_features[member].clone(),
                    )]
                    .into_iter()
                    .collect();
                    let fv = aggregate_members(&slice.slice_id, SPEECH_CHANNEL, &own, aggregators)?;
                    entries.extend(fv.entries);
                }
                individual_vectors.insert(
                    (slice.slice_id.clone(), member.clone()),
                    FeatureVector {
                        scope: crate::aggregate::Scope::Individual {
                            slice_id: slice.slice_id.clone(),
                            participant_id: member.clone(),
                        },
                        entries,
                    },
                );
            }

            Ok(SliceFeatures {
                pair_rows,
                turn_rows,
                member_rows,
                group_vectors,
                individual_vectors,
            })
        })
        .collect();

    let mut merged = SliceFeatures {
        pair_rows: Vec::new(),
        turn_rows: Vec::new(),
        member_rows: BTreeMap::new(),
        group_vectors: BTreeMap::new(),
        individual_vectors: BTreeMap::new(),
    };
    for part in per_slice {
        let part = part?;
        merged.pair_rows.extend(part.pair_rows);
        merged.turn_rows.extend(part.turn_rows);
        merged.member_rows.extend(part.member_rows);
        merged.group_vectors.extend(part.group_vectors);
        merged.individual_vectors.extend(part.individual_vectors);
    }
    Ok(merged)
}

/// Select the columns of a vector set matching a predicate, sorted.
pub fn select_columns(
    vectors: &BTreeMap<impl Ord, FeatureVector>,
    predicate: impl Fn(&FeatureKey) -> bool,
) -> Vec<FeatureKey> {
    let mut keys: BTreeSet<FeatureKey> = BTreeSet::new();
    for fv in vectors.values() {
        for key in fv.entries.keys() {
            if predicate(key) {
                keys.insert(key.clone());
            }
        }
    }
    keys.into_iter().collect()
}

/// Assemble a dense matrix over given row keys and columns; every cell must
/// be present.
pub fn matrix_of<K: Ord + Clone + std::fmt::Debug>(
    vectors: &BTreeMap<K, FeatureVector>,
    rows: &[K],
    columns: &[FeatureKey],
) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|key| {
            let fv = vectors
                .get(key)
                .ok_or_else(|| Error::Domain(format!("no feature vector for row {key:?}")))?;
            columns
                .iter()
                .map(|col| {
                    fv.entries.get(col).copied().ok_or_else(|| {
                        Error::Domain(format!("row {key:?} lacks column {}", col.column()))
                    })
                })
                .collect()
        })
        .collect()
}

/// True when the feature key belongs to one of the toggled categories.
pub fn key_in_sets(key: &FeatureKey, toggles: &FeatureToggles) -> bool {
    if key.channel == SPEECH_CHANNEL {
        return toggles.tt;
    }
    for (category, names) in feature_names_by_category() {
        let on = match category {
            "sync" => toggles.sync,
            "caus" => toggles.caus,
            "conv" => toggles.conv,
            _ => false,
        };
        if names.iter().any(|n| *n == key.feature) {
            return on;
        }
    }
    false
}
