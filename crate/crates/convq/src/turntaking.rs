//! Turn segmentation and turn-taking features from binary speaking status:
//! conversation equality, fluency, and synchronisation.

use std::collections::BTreeMap;

use crate::{Error, Result};

/// Turn segmentation thresholds.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TurnConfig {
    /// Silences of at most this length are bridged into one turn.
    pub gap_threshold_ms: f64,
    /// Turns up to this duration (inclusive) are flagged back-channels.
    pub backchannel_max_s: f64,
}

impl Default for TurnConfig {
    fn default() -> Self {
        TurnConfig {
            gap_threshold_ms: 500.0,
            backchannel_max_s: 2.0,
        }
    }
}

/// One speaking turn as a half-open sample range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Turn {
    pub start: usize,
    pub end: usize,
    pub is_backchannel: bool,
}

impl Turn {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// A participant's segmented turns within one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnSequence {
    pub participant_id: String,
    pub rate_hz: f64,
    pub turns: Vec<Turn>,
}

/// Per-member turn-taking feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnFeatures {
    /// participant -> feature name -> value.
    pub per_member: BTreeMap<String, BTreeMap<String, f64>>,
}

/// How speech overlap counts coincident statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    /// Count samples where the member and at least one partner both speak.
    JointSpeech,
    /// Count samples where at least one partner has the same status,
    /// which also matches joint silence.
    LiteralStatusMatch,
}

/// Segment a binary status vector into turns.
///
/// Speech runs separated by at most `round(gap_threshold * rate)` silent
/// samples are merged into one turn (the bridged silence is part of the
/// turn). After merging, turns no longer than `backchannel_max_s` are
/// flagged back-channels.
pub fn segment_turns(
    participant_id: &str,
    status: &[u8],
    rate_hz: f64,
    cfg: &TurnConfig,
) -> Result<TurnSequence> {
    if rate_hz <= 0.0 {
        return Err(Error::Config(format!("rate must be positive, got {rate_hz}")));
    }
    if let Some(&v) = status.iter().find(|&&v| v > 1) {
        return Err(Error::Domain(format!("status value {v} is not binary")));
    }
    let gap = (cfg.gap_threshold_ms / 1000.0 * rate_hz).round() as usize;
    let backchannel_max = (cfg.backchannel_max_s * rate_hz).round() as usize;

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (i, &v) in status.iter().enumerate() {
        match (v, start) {
            (1, None) => start = Some(i),
            (0, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, status.len()));
    }

    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (s, e) in runs {
        match merged.last_mut() {
            Some(last) if s - last.1 <= gap => last.1 = e,
            _ => merged.push((s, e)),
        }
    }

    Ok(TurnSequence {
        participant_id: participant_id.to_string(),
        rate_hz,
        turns: merged
            .into_iter()
            .map(|(start, end)| Turn {
                start,
                end,
                is_backchannel: end - start <= backchannel_max,
            })
            .collect(),
    })
}

/// Speaking shares and the degree of equality per member.
///
/// `d_speak_i` is the fraction of samples member `i` speaks;
/// `eq_i = (d_speak_i - mean) / mean`. A fully silent group makes equality
/// undefined.
pub fn equality(statuses: &BTreeMap<String, Vec<u8>>) -> Result<BTreeMap<String, (f64, f64)>> {
    if statuses.is_empty() {
        return Err(Error::InsufficientData("no members".to_string()));
    }
    let shares: BTreeMap<String, f64> = statuses
        .iter()
        .map(|(id, s)| {
            let t = s.len() as f64;
            (id.clone(), s.iter().map(|&v| v as f64).sum::<f64>() / t)
        })
        .collect();
    let mean = shares.values().sum::<f64>() / shares.len() as f64;
    if mean == 0.0 {
        return Err(Error::UndefinedEquality(
            "nobody spoke: mean speaking share is zero".to_string(),
        ));
    }
    Ok(shares
        .into_iter()
        .map(|(id, d)| (id, (d, (d - mean) / mean)))
        .collect())
}

/// Fluency measures: percentage of silence and back-channel count.
pub fn fluency(status: &[u8], turns: &TurnSequence) -> (f64, usize) {
    let t = status.len() as f64;
    let d_speak = status.iter().map(|&v| v as f64).sum::<f64>() / t;
    let n_backchannels = turns.turns.iter().filter(|t| t.is_backchannel).count();
    (1.0 - d_speak, n_backchannels)
}

/// Per-member synchronisation measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synchronization {
    pub d_overlap: f64,
    pub n_successful: usize,
    pub n_unsuccessful: usize,
}

/// Speech overlap and interruption counts.
///
/// An interruption is a turn by `j` starting strictly inside a turn of `i`:
/// successful when `i`'s turn ends before `j`'s, unsuccessful when `j`'s
/// turn ends while `i` still speaks. Counts are attributed to the
/// interrupter.
pub fn synchronization(
    statuses: &BTreeMap<String, Vec<u8>>,
    turns: &BTreeMap<String, TurnSequence>,
    mode: OverlapMode,
) -> Result<BTreeMap<String, Synchronization>> {
    if statuses.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "synchronisation needs at least 2 members, got {}",
            statuses.len()
        )));
    }
    let ids: Vec<&String> = statuses.keys().collect();
    let len = statuses[ids[0]].len();
    if statuses.values().any(|s| s.len() != len) {
        return Err(Error::Domain(
            "member statuses have mismatched lengths".to_string(),
        ));
    }

    let mut out = BTreeMap::new();
    for id in &ids {
        let own = &statuses[*id];
        let partners: Vec<&String> = ids.iter().filter(|other| *other != id).copied().collect();
        let mut overlap = 0usize;
        for t in 0..len {
            let partner_match = partners.iter().any(|other| match mode {
                OverlapMode::JointSpeech => statuses[*other][t] == 1,
                OverlapMode::LiteralStatusMatch => statuses[*other][t] == own[t],
            });
            let counted = match mode {
                OverlapMode::JointSpeech => own[t] == 1 && partner_match,
                OverlapMode::LiteralStatusMatch => partner_match,
            };
            if counted {
                overlap += 1;
            }
        }

        let mut successful = 0usize;
        let mut unsuccessful = 0usize;
        for turn in &turns[*id].turns {
            for other in &partners {
                for held in &turns[*other].turns {
                    if held.start < turn.start && turn.start < held.end {
                        if held.end < turn.end {
                            successful += 1;
                        } else {
                            unsuccessful += 1;
                        }
                    }
                }
            }
        }

        out.insert(
            (*id).clone(),
            Synchronization {
                d_overlap: overlap as f64 / len as f64,
                n_successful: successful,
                n_unsuccessful: unsuccessful,
            },
        );
    }
    Ok(out)
}

/// Compute the full turn-taking feature set for one group slice.
pub fn turn_features(
    statuses: &BTreeMap<String, Vec<u8>>,
    rate_hz: f64,
    cfg: &TurnConfig,
    mode: OverlapMode,
) -> Result<TurnFeatures> {
    let turns: BTreeMap<String, TurnSequence> = statuses
        .iter()
        .map(|(id, s)| Ok((id.clone(), segment_turns(id, s, rate_hz, cfg)?)))
        .collect::<Result<_>>()?;
    let eq = equality(statuses)?;
    let sync = synchronization(statuses, &turns, mode)?;

    let mut per_member = BTreeMap::new();
    for (id, status) in statuses {
        let (d_speak, eq_i) = eq[id];
        let (d_silence, n_backchannels) = fluency(status, &turns[id]);
        let s = sync[id];
        let mut features = BTreeMap::new();
        features.insert("eq".to_string(), eq_i);
        features.insert("abs_eq".to_string(), eq_i.abs());
        features.insert("d_speak".to_string(), d_speak);
        features.insert("d_silence".to_string(), d_silence);
        features.insert("n_backchannels".to_string(), n_backchannels as f64);
        features.insert("d_overlap".to_string(), s.d_overlap);
        features.insert("n_success_intr".to_string(), s.n_successful as f64);
        features.insert("n_unsuccess_intr".to_string(), s.n_unsuccessful as f64);
        per_member.insert(id.clone(), features);
    }
    Ok(TurnFeatures { per_member })
}

/// Names of the per-member turn-taking features, in output order.
pub fn turn_feature_names() -> Vec<&'static str> {
    vec![
        "eq",
        "abs_eq",
        "d_speak",
        "d_silence",
        "n_backchannels",
        "d_overlap",
        "n_success_intr",
        "n_unsuccess_intr",
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(parts: &[(u8, usize)]) -> Vec<u8> {
        parts
            .iter()
            .flat_map(|&(v, n)| std::iter::repeat(v).take(n))
            .collect()
    }

    fn segment(status: &[u8]) -> TurnSequence {
        segment_turns("p", status, 20.0, &TurnConfig::default()).unwrap()
    }

    // Oracle: brute-force merge over the binary string.
    pub(super) fn brute_force_turns(status: &[u8], gap: usize) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut i = 0;
        while i < status.len() {
            if status[i] == 1 {
                let start = i;
                while i < status.len() && status[i] == 1 {
                    i += 1;
                }
                runs.push((start, i));
            } else {
                i += 1;
            }
        }
        let mut merged: Vec<(usize, usize)> = Vec::new();
        for (s, e) in runs {
            match merged.last_mut() {
                Some(last) if s - last.1 <= gap => last.1 = e,
                _ => merged.push((s, e)),
            }
        }
        merged
    }

    #[test]
    fn gap_of_400ms_merges() {
        let status = seq(&[(1, 40), (0, 8), (1, 40)]);
        let turns = segment(&status);
        assert_eq!(turns.turns.len(), 1);
        assert_eq!(turns.turns[0].len(), 88);
        assert_eq!(
            brute_force_turns(&status, 10),
            vec![(0, 88)]
        );
    }

    #[test]
    fn gap_of_600ms_separates() {
        let status = seq(&[(1, 40), (0, 12), (1, 40)]);
        let turns = segment(&status);
        assert_eq!(turns.turns.len(), 2);
        assert_eq!(brute_force_turns(&status, 10).len(), 2);
    }

    #[test]
    fn all_silent_yields_no_turns() {
        let turns = segment(&vec![0u8; 100]);
        assert!(turns.turns.is_empty());
    }

    #[test]
    fn segmentation_matches_brute_force_on_random_strings() {
        use rand::Rng;
        let mut rng = crate::util::seeded_rng(40, 0);
        for _ in 0..200 {
            let n = rng.gen_range(50..2000);
            let status: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.4))).collect();
            let got: Vec<(usize, usize)> = segment(&status)
                .turns
                .iter()
                .map(|t| (t.start, t.end))
                .collect();
            assert_eq!(got, brute_force_turns(&status, 10));
        }
    }

    #[test]
    fn removing_short_silences_before_segmenting_is_identity() {
        use rand::Rng;
        let mut rng = crate::util::seeded_rng(41, 0);
        for _ in 0..50 {
            let n = rng.gen_range(100..1000);
            let status: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
            let turns = segment(&status);
            // Build a pre-bridged copy: fill every silence <= gap between runs.
            let mut bridged = status.clone();
            for w in brute_force_turns(&status, 10) {
                for v in &mut bridged[w.0..w.1] {
                    *v = 1;
                }
            }
            let again = segment(&bridged);
            let a: Vec<(usize, usize)> = turns.turns.iter().map(|t| (t.start, t.end)).collect();
            let b: Vec<(usize, usize)> = again.turns.iter().map(|t| (t.start, t.end)).collect();
            assert_eq!(a, b);
        }
    }

    // Oracle: hand evaluation of the formula.
    #[test]
    fn equality_two_members() {
        let statuses: BTreeMap<String, Vec<u8>> = [
            ("a".to_string(), seq(&[(1, 60), (0, 40)])),
            ("b".to_string(), seq(&[(1, 40), (0, 60)])),
        ]
        .into_iter()
        .collect();
        let eq = equality(&statuses).unwrap();
        assert!((eq["a"].0 - 0.6).abs() < 1e-12);
        assert!((eq["a"].1 - 0.2).abs() < 1e-12);
        assert!((eq["b"].1 + 0.2).abs() < 1e-12);
    }

    #[test]
    fn equality_identical_shares_are_zero() {
        let statuses: BTreeMap<String, Vec<u8>> = [
            ("a".to_string(), seq(&[(1, 30), (0, 70)])),
            ("b".to_string(), seq(&[(0, 70), (1, 30)])),
            ("c".to_string(), seq(&[(0, 35), (1, 30), (0, 35)])),
        ]
        .into_iter()
        .collect();
        let eq = equality(&statuses).unwrap();
        for (_, (_, e)) in eq {
            assert!(e.abs() < 1e-12);
        }
    }

    #[test]
    fn equality_silent_group_errors() {
        let statuses: BTreeMap<String, Vec<u8>> = [
            ("a".to_string(), vec![0u8; 50]),
            ("b".to_string(), vec![0u8; 50]),
        ]
        .into_iter()
        .collect();
        assert!(matches!(
            equality(&statuses),
            Err(Error::UndefinedEquality(_))
        ));
    }

    #[test]
    fn equality_sums_to_zero() {
        use rand::Rng;
        let mut rng = crate::util::seeded_rng(42, 0);
        let statuses: BTreeMap<String, Vec<u8>> = (0..4)
            .map(|i| {
                (
                    format!("p{i}"),
                    (0..200).map(|_| u8::from(rng.gen_bool(0.3))).collect(),
                )
            })
            .collect();
        let eq = equality(&statuses).unwrap();
        let sum: f64 = eq.values().map(|&(_, e)| e).sum();
        assert!(sum.abs() < 1e-9);
    }

    #[test]
    fn fluency_complement_and_backchannels() {
        let status = seq(&[(1, 6), (0, 14)]);
        let turns = segment(&status);
        let (d_silence, _) = fluency(&status, &turns);
        assert!((d_silence - 0.7).abs() < 1e-12);

        // Turns of 1.5s, 2.0s, 2.5s at 20 Hz: the 2.0s boundary is inclusive.
        let status = seq(&[(1, 30), (0, 20), (1, 40), (0, 20), (1, 50)]);
        let turns = segment(&status);
        let (_, n_backchannels) = fluency(&status, &turns);
        assert_eq!(n_backchannels, 2);
    }

    #[test]
    fn fluency_no_turns() {
        let status = vec![0u8; 40];
        let turns = segment(&status);
        let (d_silence, n_backchannels) = fluency(&status, &turns);
        assert_eq!(d_silence, 1.0);
        assert_eq!(n_backchannels, 0);
    }

    fn sync_of(specs: &[(&str, Vec<u8>)]) -> BTreeMap<String, Synchronization> {
        let statuses: BTreeMap<String, Vec<u8>> = specs
            .iter()
            .map(|(id, s)| (id.to_string(), s.clone()))
            .collect();
        let turns: BTreeMap<String, TurnSequence> = statuses
            .iter()
            .map(|(id, s)| (id.clone(), segment_turns(id, s, 20.0, &Default::default()).unwrap()))
            .collect();
        synchronization(&statuses, &turns, OverlapMode::JointSpeech).unwrap()
    }

    #[test]
    fn overlap_simultaneous_speakers() {
        let got = sync_of(&[("a", vec![1u8; 50]), ("b", vec![1u8; 50])]);
        assert_eq!(got["a"].d_overlap, 1.0);
        assert_eq!(got["b"].d_overlap, 1.0);
    }

    // Oracle: exhaustive scan of turn boundaries.
    #[test]
    fn successful_interruption() {
        // i speaks [0,100); j speaks [50,150)
        let mut i = vec![0u8; 150];
        i[..100].fill(1);
        let mut j = vec![0u8; 150];
        j[50..150].fill(1);
        let got = sync_of(&[("i", i), ("j", j)]);
        assert_eq!(got["j"].n_successful, 1);
        assert_eq!(got["j"].n_unsuccessful, 0);
        assert_eq!(got["i"].n_successful, 0);
    }

    #[test]
    fn unsuccessful_interruption() {
        // i speaks [0,100); j speaks [40,60)
        let mut i = vec![0u8; 120];
        i[..100].fill(1);
        let mut j = vec![0u8; 120];
        j[40..60].fill(1);
        let got = sync_of(&[("i", i), ("j", j)]);
        assert_eq!(got["j"].n_successful, 0);
        assert_eq!(got["j"].n_unsuccessful, 1);
    }

    #[test]
    fn turn_start_at_exact_boundary_is_not_interruption() {
        // j starts exactly when i starts: not strictly inside.
        let mut i = vec![0u8; 100];
        i[10..60].fill(1);
        let mut j = vec![0u8; 100];
        j[10..40].fill(1);
        let got = sync_of(&[("i", i), ("j", j)]);
        assert_eq!(got["j"].n_successful + got["j"].n_unsuccessful, 0);
    }

    #[test]
    fn literal_mode_counts_joint_silence() {
        let statuses: BTreeMap<String, Vec<u8>> = [
            ("a".to_string(), vec![0u8, 0, 1, 1]),
            ("b".to_string(), vec![0u8, 1, 1, 0]),
        ]
        .into_iter()
        .collect();
        let turns: BTreeMap<String, TurnSequence> = statuses
            .iter()
            .map(|(id, s)| (id.clone(), segment_turns(id, s, 20.0, &Default::default()).unwrap()))
            .collect();
        let joint = synchronization(&statuses, &turns, OverlapMode::JointSpeech).unwrap();
        let literal =
            synchronization(&statuses, &turns, OverlapMode::LiteralStatusMatch).unwrap();
        assert!((joint["a"].d_overlap - 0.25).abs() < 1e-12); // only t=2
        assert!((literal["a"].d_overlap - 0.5).abs() < 1e-12); // t=0 and t=2
    }

    #[test]
    fn interruptions_bounded_by_turn_count() {
        use rand::Rng;
        let mut rng = crate::util::seeded_rng(43, 0);
        for _ in 0..20 {
            let n = 400;
            let statuses: BTreeMap<String, Vec<u8>> = (0..3)
                .map(|i| {
                    (
                        format!("p{i}"),
                        (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect(),
                    )
                })
                .collect();
            let turns: BTreeMap<String, TurnSequence> = statuses
                .iter()
                .map(|(id, s)| {
                    (id.clone(), segment_turns(id, s, 20.0, &Default::default()).unwrap())
                })
                .collect();
            let sync =
                synchronization(&statuses, &turns, OverlapMode::JointSpeech).unwrap();
            for (id, s) in &sync {
                // per interrupted partner, at most one interruption per own turn
                assert!(
                    s.n_successful + s.n_unsuccessful
                        <= turns[id].turns.len() * (statuses.len() - 1)
                );
            }
        }
    }

    #[test]
    fn relabeling_members_permutes_features() {
        use rand::Rng;
        let mut rng = crate::util::seeded_rng(44, 0);
        let statuses: BTreeMap<String, Vec<u8>> = (0..3)
            .map(|i| {
                (
                    format!("p{i}"),
                    (0..300).map(|_| u8::from(rng.gen_bool(0.4))).collect(),
                )
            })
            .collect();
        let feats =
            turn_features(&statuses, 20.0, &Default::default(), OverlapMode::JointSpeech)
                .unwrap();
        // Relabel p0 <-> p2
        let relabeled: BTreeMap<String, Vec<u8>> = statuses
            .iter()
            .map(|(id, s)| {
                let new_id = match id.as_str() {
                    "p0" => "p2",
                    "p2" => "p0",
                    other => other,
                };
                (new_id.to_string(), s.clone())
            })
            .collect();
        let feats2 =
            turn_features(&relabeled, 20.0, &Default::default(), OverlapMode::JointSpeech)
                .unwrap();
        assert_eq!(feats.per_member["p0"], feats2.per_member["p2"]);
        assert_eq!(feats.per_member["p2"], feats2.per_member["p0"]);
        assert_eq!(feats.per_member["p1"], feats2.per_member["p1"]);
    }

    #[test]
    fn speech_conservation() {
        use rand::Rng;
        let mut rng = crate::util::seeded_rng(45, 0);
        let n = 250usize;
        let statuses: BTreeMap<String, Vec<u8>> = (0..4)
            .map(|i| {
                (
                    format!("p{i}"),
                    (0..n).map(|_| u8::from(rng.gen_bool(0.3))).collect(),
                )
            })
            .collect();
        let eq = equality(&statuses).unwrap();
        let total_speech: usize = statuses
            .values()
            .map(|s| s.iter().map(|&v| v as usize).sum::<usize>())
            .sum();
        let reconstructed: f64 = eq.values().map(|&(d, _)| d * n as f64).sum();
        assert!((reconstructed - total_speech as f64).abs() < 1e-9);
    }
}
