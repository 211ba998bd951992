//! Thin-slicing of conversation groups into annotation/feature units.

use crate::{Error, Result};

use super::{ConversationGroup, ConversationSlice};

/// Slicing policy: long conversations are split into `slice_len_s` pieces,
/// short ones kept whole, and very short ones dropped.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SlicePolicy {
    pub slice_len_s: f64,
    pub min_dur_s: f64,
}

impl Default for SlicePolicy {
    fn default() -> Self {
        SlicePolicy {
            slice_len_s: 60.0,
            min_dur_s: 30.0,
        }
    }
}

/// Split groups into consecutive slices on the sample clock.
///
/// - duration < `min_dur_s`: dropped (logged in the returned report);
/// - duration in `[min_dur_s, 2 * slice_len_s]`: kept whole as one slice;
/// - otherwise: consecutive `slice_len_s` slices. A trailing remainder is
///   kept as a final shorter slice when it is at least `min_dur_s`, else
///   merged into the last full slice.
///
/// Slice ids are `{group_id}_s{index:02}`.
pub fn slice_conversations(
    groups: &[ConversationGroup],
    rate_hz: f64,
    policy: SlicePolicy,
) -> Result<(Vec<ConversationSlice>, Vec<String>)> {
    if policy.slice_len_s <= 0.0 || policy.min_dur_s <= 0.0 {
        return Err(Error::Config(format!(
            "slice policy must be positive, got slice_len_s={}, min_dur_s={}",
            policy.slice_len_s, policy.min_dur_s
        )));
    }
    if rate_hz <= 0.0 {
        return Err(Error::Config(format!("rate must be positive, got {rate_hz}")));
    }

    let slice_len = (policy.slice_len_s * rate_hz).round() as i64;
    let min_dur = (policy.min_dur_s * rate_hz).round() as i64;

    let mut slices = Vec::new();
    let mut dropped = Vec::new();
    for group in groups {
        group.validate()?;
        let duration = group.end_t - group.start_t;
        if duration < min_dur {
            dropped.push(format!(
                "group {} dropped: duration {:.1}s below minimum {:.1}s",
                group.group_id,
                duration as f64 / rate_hz,
                policy.min_dur_s
            ));
            continue;
        }

        let mut bounds = Vec::new();
        if duration <= 2 * slice_len {
            bounds.push((group.start_t, group.end_t));
        } else {
            let n_full = duration / slice_len;
            let remainder = duration - n_full * slice_len;
            for k in 0..n_full {
                bounds.push((
                    group.start_t + k * slice_len,
                    group.start_t + (k + 1) * slice_len,
                ));
            }
            if remainder >= min_dur {
                bounds.push((group.start_t + n_full * slice_len, group.end_t));
            } else if remainder > 0 {
                bounds.last_mut().expect("n_full >= 2").1 = group.end_t;
            }
        }

        for (index, (start_t, end_t)) in bounds.into_iter().enumerate() {
            slices.push(ConversationSlice {
                slice_id: format!("{}_s{index:02}", group.group_id),
                group_id: group.group_id.clone(),
                member_ids: group.member_ids.clone(),
                start_t,
                end_t,
                duration_s: (end_t - start_t) as f64 / rate_hz,
            });
        }
    }
    Ok((slices, dropped))
}
