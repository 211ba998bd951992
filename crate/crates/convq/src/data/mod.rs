//! Data model for accelerometer, speaking-status, group-membership, and
//! annotation inputs, plus thin-slicing of conversations.
//!
//! All streams are indexed on one integer sample clock. Loaded structures are
//! immutable after validation and safe to share across parallel workers.

mod io;
mod slicing;

pub use io::{
    load_accel, load_annotations, load_groups, load_speaking, resample_nearest, save_accel,
    save_annotations, save_groups, save_speaking,
};
pub use slicing::{slice_conversations, SlicePolicy};

use std::collections::BTreeMap;

use crate::{Error, Result};

/// Per-participant tri-axial acceleration time series in raw sensor units.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelRecording {
    pub participant_id: String,
    pub sample_rate_hz: f64,
    /// Sample clock indices, strictly increasing. Gaps (jumps > 1) are
    /// permitted but reported by loaders rather than filled.
    pub ts: Vec<i64>,
    /// `[ax, ay, az]` per sample, aligned with `ts`.
    pub samples: Vec<[f64; 3]>,
}

impl AccelRecording {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz <= 0.0 {
            return Err(Error::Domain(format!(
                "participant {}: sample rate must be positive, got {}",
                self.participant_id, self.sample_rate_hz
            )));
        }
        if self.ts.len() != self.samples.len() {
            return Err(Error::Domain(format!(
                "participant {}: {} timestamps but {} samples",
                self.participant_id,
                self.ts.len(),
                self.samples.len()
            )));
        }
        if let Some(w) = self.ts.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Domain(format!(
                "participant {}: sample indices not strictly increasing at t={}",
                self.participant_id, w[0]
            )));
        }
        Ok(())
    }

    /// Gaps in the sample clock as `(last_t_before, first_t_after)` pairs.
    pub fn gaps(&self) -> Vec<(i64, i64)> {
        self.ts
            .windows(2)
            .filter(|w| w[1] - w[0] > 1)
            .map(|w| (w[0], w[1]))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }
}

/// Per-participant binary speaking series on the common sample clock.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakingStatus {
    pub participant_id: String,
    pub rate_hz: f64,
    pub ts: Vec<i64>,
    /// Values are exactly 0 or 1.
    pub status: Vec<u8>,
}

impl SpeakingStatus {
    pub fn validate(&self) -> Result<()> {
        if self.rate_hz <= 0.0 {
            return Err(Error::Domain(format!(
                "participant {}: rate must be positive",
                self.participant_id
            )));
        }
        if self.ts.len() != self.status.len() {
            return Err(Error::Domain(format!(
                "participant {}: {} timestamps but {} status values",
                self.participant_id,
                self.ts.len(),
                self.status.len()
            )));
        }
        if let Some(v) = self.status.iter().find(|&&v| v > 1) {
            return Err(Error::Domain(format!(
                "participant {}: speaking status must be 0 or 1, got {v}",
                self.participant_id
            )));
        }
        if let Some(w) = self.ts.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Domain(format!(
                "participant {}: sample indices not strictly increasing at t={}",
                self.participant_id, w[0]
            )));
        }
        Ok(())
    }

    /// Dense cut over `[start_t, end_t)`. Requires contiguous coverage.
    pub fn cut(&self, start_t: i64, end_t: i64) -> Result<Vec<u8>> {
        cut_contiguous(&self.ts, &self.status, start_t, end_t, &self.participant_id)
    }
}

/// Dense cut of an aligned (ts, values) pair over `[start_t, end_t)`,
/// erroring when the range is not contiguously covered.
pub(crate) fn cut_contiguous<T: Copy>(
    ts: &[i64],
    values: &[T],
    start_t: i64,
    end_t: i64,
    who: &str,
) -> Result<Vec<T>> {
    if end_t <= start_t {
        return Err(Error::Domain(format!(
            "empty cut range [{start_t}, {end_t}) for {who}"
        )));
    }
    let lo = ts.partition_point(|&t| t < start_t);
    let hi = ts.partition_point(|&t| t < end_t);
    let want = (end_t - start_t) as usize;
    if hi - lo != want || ts.get(lo) != Some(&start_t) {
        return Err(Error::InsufficientData(format!(
            "{who}: range [{start_t}, {end_t}) not contiguously covered ({} of {want} samples present)",
            hi - lo
        )));
    }
    Ok(values[lo..hi].to_vec())
}

/// A conversing group over a window of the sample clock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversationGroup {
    pub group_id: String,
    /// At least two distinct participant ids.
    pub member_ids: Vec<String>,
    pub start_t: i64,
    pub end_t: i64,
}

impl ConversationGroup {
    pub fn validate(&self) -> Result<()> {
        if self.end_t <= self.start_t {
            return Err(Error::Domain(format!(
                "group {}: end_t {} must exceed start_t {}",
                self.group_id, self.end_t, self.start_t
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &self.member_ids {
            if !seen.insert(id) {
                return Err(Error::Domain(format!(
                    "group {}: duplicate member {id}",
                    self.group_id
                )));
            }
        }
        if self.member_ids.len() < 2 {
            return Err(Error::Domain(format!(
                "group {}: needs at least 2 members, got {}",
                self.group_id,
                self.member_ids.len()
            )));
        }
        Ok(())
    }
}

/// The unit of annotation and feature extraction: a group over one thin slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ConversationSlice {
    pub slice_id: String,
    pub group_id: String,
    pub member_ids: Vec<String>,
    pub start_t: i64,
    pub end_t: i64,
    pub duration_s: f64,
}

/// Annotation level: one rating per slice, or one per (slice, member).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationLevel {
    Group,
    Individual,
}

impl std::fmt::Display for AnnotationLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnnotationLevel::Group => write!(f, "group"),
            AnnotationLevel::Individual => write!(f, "individual"),
        }
    }
}

/// One questionnaire item with its orientation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionnaireItem {
    pub id: String,
    /// `false` for items phrased so that higher ratings mean lower quality.
    pub positive: bool,
}

/// Key of one rating vector: who rated what.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RatingKey {
    pub rater_id: String,
    pub slice_id: String,
    /// Present iff the set is individual-level; must be a slice member.
    pub participant_id: Option<String>,
}

/// Rater x slice (x participant) ordinal ratings on the 1..=5 scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSet {
    pub level: AnnotationLevel,
    pub items: Vec<QuestionnaireItem>,
    pub ratings: BTreeMap<RatingKey, Vec<u8>>,
}

impl AnnotationSet {
    pub fn validate(&self) -> Result<()> {
        for (key, values) in &self.ratings {
            if values.len() != self.items.len() {
                return Err(Error::Schema(format!(
                    "rating {}:{} has {} values for {} items",
                    key.rater_id,
                    key.slice_id,
                    values.len(),
                    self.items.len()
                )));
            }
            if let Some(v) = values.iter().find(|&&v| !(1..=5).contains(&v)) {
                return Err(Error::Domain(format!(
                    "rating {}:{}: value {v} outside 1..5",
                    key.rater_id, key.slice_id
                )));
            }
            match (self.level, &key.participant_id) {
                (AnnotationLevel::Group, Some(_)) => {
                    return Err(Error::Schema(format!(
                        "group-level rating {}:{} carries a participant id",
                        key.rater_id, key.slice_id
                    )))
                }
                (AnnotationLevel::Individual, None) => {
                    return Err(Error::Schema(format!(
                        "individual-level rating {}:{} lacks a participant id",
                        key.rater_id, key.slice_id
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn rater_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .ratings
            .keys()
            .map(|k| k.rater_id.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        ids.sort();
        ids
    }
}

/// The ten group-level questionnaire items. Item 3 (forced/awkward/strained)
/// is negatively oriented.
pub fn default_group_items() -> Vec<QuestionnaireItem> {
    (1..=10)
        .map(|i| QuestionnaireItem {
            id: format!("item_{i}"),
            positive: i != 3,
        })
        .collect()
}

/// The ten individual-level items. Items 3 (forced/awkward), 5 (uncomfortable)
/// and 10 (self-conscious) are negatively oriented.
pub fn default_individual_items() -> Vec<QuestionnaireItem> {
    (1..=10)
        .map(|i| QuestionnaireItem {
            id: format!("item_{i}"),
            positive: !matches!(i, 3 | 5 | 10),
        })
        .collect()
}
