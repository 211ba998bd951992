//! Ground-truth synthetic data generator ("mini-mingle"): coupled
//! accelerometer traces and Markov turn-taking with known coordination
//! parameters and planted quality labels, emitted in the standard file
//! formats plus a ground-truth sidecar.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{
    default_group_items, default_individual_items, save_accel, save_annotations, save_groups,
    save_speaking, slice_conversations, AccelRecording, AnnotationLevel, AnnotationSet,
    ConversationGroup, QuestionnaireItem, RatingKey, SlicePolicy, SpeakingStatus,
};
use crate::{Error, Result};

/// Scenario parameters. Identical config + seed produce byte-identical files.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_groups: usize,
    pub rate_hz: f64,
    pub cardinality_min: usize,
    pub cardinality_max: usize,
    pub duration_s_min: f64,
    pub duration_s_max: f64,
    /// Probability a group is the high-quality type (strong coupling, low
    /// speaking-share skew, few interruptions).
    pub high_fraction: f64,
    /// Coupling strength ranges per type.
    pub coupling_high: (f64, f64),
    pub coupling_low: (f64, f64),
    /// Speaking-share skew ranges per type (0 = equal shares).
    pub skew_of_high: (f64, f64),
    pub skew_of_low: (f64, f64),
    /// Coupling lag in samples.
    pub lag_range: (usize, usize),
    /// Per-turn interruption probability per type.
    pub interruption_rate_high: f64,
    pub interruption_rate_low: f64,
    /// AR(1) coefficient of the individual motion component.
    pub indiv_ar: f64,
    /// AR(1) coefficient and relative amplitude of the slow drift shared by
    /// a group's members.
    pub drift_ar: f64,
    pub drift_amplitude: f64,
    /// Noise scale of the uncoupled part of follower signals.
    pub noise_sd: f64,
    pub n_raters: usize,
    /// Rater noise in rating categories; 0 makes raters identical.
    pub rater_noise_sd: f64,
    /// Latent score offsets: high type gets `+quality_gap`, low `-quality_gap`
    /// around the 3.0 midpoint, and each extra member beyond the midpoint
    /// cardinality subtracts `cardinality_effect`.
    pub quality_gap: f64,
    pub cardinality_effect: f64,
    pub slice: SlicePolicy,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            n_groups: 40,
            rate_hz: 20.0,
            cardinality_min: 2,
            cardinality_max: 4,
            duration_s_min: 60.0,
            duration_s_max: 180.0,
            high_fraction: 0.4,
            coupling_high: (0.7, 0.95),
            coupling_low: (0.0, 0.25),
            skew_of_high: (0.0, 0.3),
            skew_of_low: (1.0, 2.0),
            lag_range: (2, 8),
            interruption_rate_high: 0.05,
            interruption_rate_low: 0.35,
            indiv_ar: 0.6,
            drift_ar: 0.999,
            drift_amplitude: 1.0,
            noise_sd: 1.0,
            n_raters: 3,
            rater_noise_sd: 0.5,
            quality_gap: 0.9,
            cardinality_effect: 0.0,
            slice: SlicePolicy::default(),
        }
    }
}

/// Per-group planted parameters, kept as the ground-truth sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupTruth {
    pub group_id: String,
    pub label_high: bool,
    pub latent_score: f64,
    pub coupling: f64,
    pub lag: usize,
    pub skew: f64,
    pub cardinality: usize,
    pub n_success_planted: usize,
    pub n_unsuccess_planted: usize,
}

/// One planted interruption with its known outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInterruption {
    pub interrupter: String,
    pub interruptee: String,
    pub start: usize,
    pub successful: bool,
}

/// Turn-taking ground truth returned next to generated statuses.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnTruth {
    pub target_shares: BTreeMap<String, f64>,
    pub interruptions: Vec<PlantedInterruption>,
}

/// A complete generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniMingle {
    pub accel: Vec<AccelRecording>,
    pub speaking: Vec<SpeakingStatus>,
    pub groups: Vec<ConversationGroup>,
    pub group_annotations: AnnotationSet,
    pub individual_annotations: AnnotationSet,
    pub truth: Vec<GroupTruth>,
}

/// Normalized AR(1) series with unit marginal variance.
fn ar1(rng: &mut ChaCha8Rng, phi: f64, len: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let scale = (1.0 - phi * phi).sqrt();
    let mut out = Vec::with_capacity(len);
    let mut x: f64 = normal.sample(rng);
    out.push(x);
    for _ in 1..len {
        x = phi * x + scale * normal.sample(rng);
        out.push(x);
    }
    out
}

/// Generate a coupled pair of tri-axial recordings: the base participant is
/// a smooth AR(1) process (coefficient 0.95) and the follower per axis is
/// `b_t = c * a_{t - lag} + (1 - c) * e_t` with `e` an independent AR(1)
/// process scaled by `noise_sd`.
pub fn gen_coupled_pair(
    lag: usize,
    coupling: f64,
    noise_sd: f64,
    len: usize,
    rate_hz: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(AccelRecording, AccelRecording)> {
    if len <= 10 * lag.max(1) {
        return Err(Error::Config(format!(
            "length {len} too short for lag {lag}"
        )));
    }
    let phi = 0.95;
    let mut a_axes = Vec::with_capacity(3);
    let mut b_axes = Vec::with_capacity(3);
    for _ in 0..3 {
        let base = ar1(rng, phi, len + lag);
        let noise = ar1(rng, phi, len);
        let a: Vec<f64> = base[lag..].to_vec();
        let b: Vec<f64> = (0..len)
            .map(|t| coupling * base[t] + (1.0 - coupling) * noise_sd * noise[t])
            .collect();
        a_axes.push(a);
        b_axes.push(b);
    }
    let pack = |axes: &[Vec<f64>], id: &str| AccelRecording {
        participant_id: id.to_string(),
        sample_rate_hz: rate_hz,
        ts: (0..len as i64).collect(),
        samples: (0..len).map(|t| [axes[0][t], axes[1][t], axes[2][t]]).collect(),
    };
    Ok((pack(&a_axes, "a"), pack(&b_axes, "b")))
}

/// Target speaking shares under a skew parameter: softmax of a decreasing
/// linear profile; skew 0 gives equal shares.
fn target_shares(n: usize, skew: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|i| (-skew * i as f64 / (n.max(2) - 1) as f64).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Generate a group's speaking statuses from a floor-holding chain whose
/// stationary shares follow the skew, with interruptions injected at the
/// given per-turn rate and their outcomes retained as ground truth.
pub fn gen_turn_sequence(
    member_ids: &[String],
    skew: f64,
    interruption_rate: f64,
    len: usize,
    rate_hz: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<SpeakingStatus>, TurnTruth)> {
    let n = member_ids.len();
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 members, got {n}")));
    }
    let shares = target_shares(n, skew);
    // All in samples at 20 Hz scale; derived from rate for other rates.
    let scale = rate_hz / 20.0;
    let turn_min = (40.0 * scale) as usize; // 2 s
    let turn_max = (120.0 * scale) as usize; // 6 s
    let gap_min = (15.0 * scale) as usize; // 0.75 s, above the 0.5 s bridge
    let gap_max = (30.0 * scale) as usize;
    let cooldown = (15.0 * scale) as usize;

    let mut speech: Vec<usize> = vec![0; n];
    let mut last_end: Vec<usize> = vec![0; n];
    let mut turns: Vec<(usize, usize, usize)> = Vec::new(); // (member, start, end)
    let mut interruptions = Vec::new();

    let mut cursor = rng.gen_range(gap_min..=gap_max);
    while cursor + turn_min < len {
        // floor choice: target share with a deficit boost keeps realized
        // shares near target
        let total: usize = speech.iter().sum();
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                let share = if total == 0 {
                    shares[i]
                } else {
                    speech[i] as f64 / total as f64
                };
                shares[i] * (6.0 * (shares[i] - share)).exp()
            })
            .collect();
        let wsum: f64 = weights.iter().sum();
        let mut draw = rng.gen::<f64>() * wsum;
        let mut speaker = n - 1;
        for (i, w) in weights.iter().enumerate() {
            if draw < *w {
                speaker = i;
                break;
            }
            draw -= w;
        }
        if cursor > 0 && cursor.saturating_sub(last_end[speaker]) <= cooldown && speech[speaker] > 0
        {
            cursor += gap_min;
            continue;
        }

        let start = cursor;
        let mut end = (start + rng.gen_range(turn_min..=turn_max)).min(len);
        if end - start < turn_min / 2 {
            break;
        }

        // optionally plant one interruption strictly inside this turn
        let room = end - start;
        let plantable = room > turn_min && rng.gen::<f64>() < interruption_rate;
        let mut planted: Option<(usize, usize, usize, bool)> = None;
        if plantable {
            let offset = rng.gen_range(room / 5..room / 2).max(1);
            let i_start = start + offset;
            let candidates: Vec<usize> = (0..n)
                .filter(|&j| {
                    j != speaker && (speech[j] == 0 || i_start.saturating_sub(last_end[j]) > cooldown)
                })
                .collect();
            if !candidates.is_empty() {
                let j = candidates[rng.gen_range(0..candidates.len())];
                let successful = rng.gen_bool(0.5);
                if successful {
                    // interrupted speaker trails off shortly after the grab
                    let overlap = (10.0 * scale) as usize;
                    let j_end = (i_start + rng.gen_range(turn_min..=turn_max)).min(len);
                    if j_end > i_start + overlap + 2 {
                        end = i_start + overlap;
                        planted = Some((j, i_start, j_end, true));
                    }
                } else {
                    // brief failed grab fully inside the holder's turn
                    let j_end = i_start + (rng.gen_range(10..=25) as f64 * scale) as usize;
                    if j_end + 5 < end {
                        planted = Some((j, i_start, j_end, false));
                    }
                }
            }
        }

        turns.push((speaker, start, end));
        speech[speaker] += end - start;
        last_end[speaker] = end;
        let mut resume_from = end;
        if let Some((j, i_start, j_end, successful)) = planted {
            turns.push((j, i_start, j_end));
            speech[j] += j_end - i_start;
            last_end[j] = j_end;
            interruptions.push(PlantedInterruption {
                interrupter: member_ids[j].clone(),
                interruptee: member_ids[speaker].clone(),
                start: i_start,
                successful,
            });
            resume_from = resume_from.max(j_end);
        }
        cursor = resume_from + rng.gen_range(gap_min..=gap_max);
    }

    let mut grids: Vec<Vec<u8>> = vec![vec![0u8; len]; n];
    for &(member, start, end) in &turns {
        for v in &mut grids[member][start..end] {
            *v = 1;
        }
    }
    let statuses = member_ids
        .iter()
        .zip(grids)
        .map(|(id, status)| SpeakingStatus {
            participant_id: id.clone(),
            rate_hz,
            ts: (0..len as i64).collect(),
            status,
        })
        .collect();
    Ok((
        statuses,
        TurnTruth {
            target_shares: member_ids
                .iter()
                .cloned()
                .zip(shares.iter().copied())
                .collect(),
            interruptions,
        },
    ))
}

fn rating_for(score: f64, item: &QuestionnaireItem, noise: f64) -> u8 {
    let oriented = if item.positive { score } else { 6.0 - score };
    (oriented + noise).round().clamp(1.0, 5.0) as u8
}

/// Generate the full dataset: coupled accelerometer traces, speaking
/// statuses, groups, per-slice annotations at both levels, and the planted
/// ground truth.
pub fn gen_mini_mingle(cfg: &ScenarioConfig) -> Result<MiniMingle> {
    if cfg.n_groups == 0 {
        return Err(Error::Config("n_groups must be positive".to_string()));
    }
    if cfg.cardinality_min < 2 || cfg.cardinality_max < cfg.cardinality_min {
        return Err(Error::Config(format!(
            "invalid cardinality range {}..{}",
            cfg.cardinality_min, cfg.cardinality_max
        )));
    }
    let group_items = default_group_items();
    let individual_items = default_individual_items();
    let normal = Normal::new(0.0, 1.0).expect("valid normal");

    let mut accel = Vec::new();
    let mut speaking_raw: Vec<SpeakingStatus> = Vec::new();
    let mut groups = Vec::new();
    let mut truth = Vec::new();
    let mut group_ratings: BTreeMap<RatingKey, Vec<u8>> = BTreeMap::new();
    let mut individual_ratings: BTreeMap<RatingKey, Vec<u8>> = BTreeMap::new();
    let mut max_len = 0usize;

    for g in 0..cfg.n_groups {
        // Per-group stream keeps groups independent of generation order.
        let mut rng = crate::util::seeded_rng(cfg.seed, g as u64 + 1);
        let group_id = format!("g{g:02}");
        let cardinality = rng.gen_range(cfg.cardinality_min..=cfg.cardinality_max);
        let duration_s = cfg.duration_s_min
            + (cfg.duration_s_max - cfg.duration_s_min) * rng.gen::<f64>();
        let len = (duration_s * cfg.rate_hz).round() as usize;
        max_len = max_len.max(len);
        let member_ids: Vec<String> =
            (0..cardinality).map(|m| format!("{group_id}_p{m}")).collect();

        let high = rng.gen::<f64>() < cfg.high_fraction;
        let (c_lo, c_hi) = if high { cfg.coupling_high } else { cfg.coupling_low };
        let coupling = c_lo + (c_hi - c_lo) * rng.gen::<f64>();
        let (s_lo, s_hi) = if high { cfg.skew_of_high } else { cfg.skew_of_low };
        let skew = s_lo + (s_hi - s_lo) * rng.gen::<f64>();
        let lag = rng.gen_range(cfg.lag_range.0..=cfg.lag_range.1);
        let interruption_rate = if high {
            cfg.interruption_rate_high
        } else {
            cfg.interruption_rate_low
        };

        // Motion: shared slow drift plus coupled individual components.
        let drift: Vec<Vec<f64>> = (0..3)
            .map(|_| ar1(&mut rng, cfg.drift_ar, len))
            .collect();
        let base: Vec<Vec<f64>> = (0..3).map(|_| ar1(&mut rng, cfg.indiv_ar, len + lag)).collect();
        for (m, member) in member_ids.iter().enumerate() {
            let mut axes: Vec<Vec<f64>> = Vec::with_capacity(3);
            for axis in 0..3 {
                let indiv: Vec<f64> = if m == 0 {
                    base[axis][lag..].to_vec()
                } else {
                    let noise = ar1(&mut rng, cfg.indiv_ar, len);
                    (0..len)
                        .map(|t| {
                            coupling * base[axis][t]
                                + (1.0 - coupling) * cfg.noise_sd * noise[t]
                        })
                        .collect()
                };
                axes.push(
                    (0..len)
                        .map(|t| cfg.drift_amplitude * drift[axis][t] + indiv[t])
                        .collect(),
                );
            }
            accel.push(AccelRecording {
                participant_id: member.clone(),
                sample_rate_hz: cfg.rate_hz,
                ts: (0..len as i64).collect(),
                samples: (0..len).map(|t| [axes[0][t], axes[1][t], axes[2][t]]).collect(),
            });
        }

        let (statuses, turn_truth) = gen_turn_sequence(
            &member_ids,
            skew,
            interruption_rate,
            len,
            cfg.rate_hz,
            &mut rng,
        )?;
        let n_success = turn_truth
            .interruptions
            .iter()
            .filter(|i| i.successful)
            .count();
        let n_unsuccess = turn_truth.interruptions.len() - n_success;
        speaking_raw.extend(statuses);

        let group = ConversationGroup {
            group_id: group_id.clone(),
            member_ids: member_ids.clone(),
            start_t: 0,
            end_t: len as i64,
        };

        // Annotations per slice of this group.
        let card_mid = (cfg.cardinality_min + cfg.cardinality_max) as f64 / 2.0;
        let latent = 3.0 + if high { cfg.quality_gap } else { -cfg.quality_gap }
            - cfg.cardinality_effect * (cardinality as f64 - card_mid);
        let (slices, _) = slice_conversations(
            std::slice::from_ref(&group),
            cfg.rate_hz,
            cfg.slice,
        )?;
        let member_offsets: Vec<f64> = member_ids
            .iter()
            .map(|_| 0.25 * normal.sample(&mut rng))
            .collect();
        for slice in &slices {
            let slice_score = latent + 0.1 * normal.sample(&mut rng);
            for r in 0..cfg.n_raters {
                let rater_id = format!("r{r}");
                let values: Vec<u8> = group_items
                    .iter()
                    .enumerate()
                    .map(|(k, item)| {
                        let difficulty = -0.6 + 1.2 * k as f64 / (group_items.len() - 1) as f64;
                        let noise = cfg.rater_noise_sd * normal.sample(&mut rng);
                        rating_for(slice_score + difficulty, item, noise)
                    })
                    .collect();
                group_ratings.insert(
                    RatingKey {
                        rater_id: rater_id.clone(),
                        slice_id: slice.slice_id.clone(),
                        participant_id: None,
                    },
                    values,
                );
                for (m, member) in member_ids.iter().enumerate() {
                    let member_score = slice_score + member_offsets[m];
                    let values: Vec<u8> = individual_items
                        .iter()
                        .enumerate()
                        .map(|(k, item)| {
                            let difficulty =
                                -0.6 + 1.2 * k as f64 / (individual_items.len() - 1) as f64;
                            let noise = cfg.rater_noise_sd * normal.sample(&mut rng);
                            rating_for(member_score + difficulty, item, noise)
                        })
                        .collect();
                    individual_ratings.insert(
                        RatingKey {
                            rater_id: rater_id.clone(),
                            slice_id: slice.slice_id.clone(),
                            participant_id: Some(member.clone()),
                        },
                        values,
                    );
                }
            }
        }

        groups.push(group);
        truth.push(GroupTruth {
            group_id,
            label_high: latent > 3.0,
            latent_score: latent,
            coupling,
            lag,
            skew,
            cardinality,
            n_success_planted: n_success,
            n_unsuccess_planted: n_unsuccess,
        });
    }

    // Pad speaking to a common length so every participant shares one clock.
    let speaking = speaking_raw
        .into_iter()
        .map(|mut s| {
            let have = s.status.len();
            if have < max_len {
                s.status.resize(max_len, 0);
                s.ts = (0..max_len as i64).collect();
            }
            s
        })
        .collect();

    Ok(MiniMingle {
        accel,
        speaking,
        groups,
        group_annotations: AnnotationSet {
            level: AnnotationLevel::Group,
            items: group_items,
            ratings: group_ratings,
        },
        individual_annotations: AnnotationSet {
            level: AnnotationLevel::Individual,
            items: individual_items,
            ratings: individual_ratings,
        },
        truth,
    })
}

/// File names written by [`write_mini_mingle`].
pub const ACCEL_FILE: &str = "accel.csv";
pub const SPEAKING_FILE: &str = "speaking.csv";
pub const GROUPS_FILE: &str = "groups.csv";
pub const GROUP_ANNOTATIONS_FILE: &str = "annotations_group.csv";
pub const INDIVIDUAL_ANNOTATIONS_FILE: &str = "annotations_individual.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

/// Write a generated dataset in the standard formats plus the ground-truth
/// sidecar. `preamble` is prepended to every file (provenance comments).
pub fn write_mini_mingle(dir: &Path, data: &MiniMingle, preamble: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    save_accel(&dir.join(ACCEL_FILE), &data.accel, preamble)?;
    save_speaking(&dir.join(SPEAKING_FILE), &data.speaking, preamble)?;
    save_groups(&dir.join(GROUPS_FILE), &data.groups, preamble)?;
    save_annotations(
        &dir.join(GROUP_ANNOTATIONS_FILE),
        &data.group_annotations,
        preamble,
    )?;
    save_annotations(
        &dir.join(INDIVIDUAL_ANNOTATIONS_FILE),
        &data.individual_annotations,
        preamble,
    )?;

    let mut out = String::from(preamble);
    out.push_str(
        "group_id,label,latent_score,coupling,lag,skew,cardinality,n_success_planted,n_unsuccess_planted\n",
    );
    for t in &data.truth {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            t.group_id,
            if t.label_high { "high" } else { "low" },
            t.latent_score,
            t.coupling,
            t.lag,
            t.skew,
            t.cardinality,
            t.n_success_planted,
            t.n_unsuccess_planted
        );
    }
    let path = dir.join(GROUND_TRUTH_FILE);
    std::fs::write(&path, out).map_err(|source| Error::Io { path, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::turntaking::{segment_turns, synchronization, OverlapMode, TurnConfig};

    #[test]
    fn coupled_pair_exact_copy_recovers_lag() {
        let mut rng = crate::util::seeded_rng(110, 0);
        let (a, b) = gen_coupled_pair(5, 1.0, 0.0, 2000, 20.0, &mut rng).unwrap();
        let ax: Vec<f64> = a.samples.iter().map(|s| s[0]).collect();
        let bx: Vec<f64> = b.samples.iter().map(|s| s[0]).collect();
        let lagged = crate::coordination::lagged_correlation(&ax, &bx, 10).unwrap();
        assert_eq!(lagged.argmax, 5);
        assert!((lagged.max - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uncoupled_pair_is_uncorrelated() {
        let mut rng = crate::util::seeded_rng(111, 0);
        let (a, b) = gen_coupled_pair(3, 0.0, 1.0, 3000, 20.0, &mut rng).unwrap();
        let ax: Vec<f64> = a.samples.iter().map(|s| s[0]).collect();
        let bx: Vec<f64> = b.samples.iter().map(|s| s[0]).collect();
        let rho = crate::coordination::pearson(&ax, &bx).unwrap();
        assert!(rho.abs() < 0.2, "{rho}");
    }

    #[test]
    fn coupled_pair_is_granger_directional() {
        let mut rng = crate::util::seeded_rng(112, 0);
        let (a, b) = gen_coupled_pair(1, 0.8, 1.0, 1000, 20.0, &mut rng).unwrap();
        let ax: Vec<f64> = a.samples.iter().map(|s| s[0]).collect();
        let bx: Vec<f64> = b.samples.iter().map(|s| s[0]).collect();
        let f_ab = crate::coordination::granger(&ax, &bx, 2).unwrap();
        let f_ba = crate::coordination::granger(&bx, &ax, 2).unwrap();
        assert!(f_ab > f_ba, "F(a->b)={f_ab} vs F(b->a)={f_ba}");
    }

    fn members(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    // Oracle: stationary shares of the chain are the softmax targets.
    #[test]
    fn zero_skew_gives_equal_shares() {
        let ids = members(3);
        let mut rng = crate::util::seeded_rng(113, 0);
        let len = 12_000; // 10 minutes at 20 Hz
        let (statuses, _) =
            gen_turn_sequence(&ids, 0.0, 0.0, len, 20.0, &mut rng).unwrap();
        let map: BTreeMap<String, Vec<u8>> = statuses
            .iter()
            .map(|s| (s.participant_id.clone(), s.status.clone()))
            .collect();
        let eq = crate::turntaking::equality(&map).unwrap();
        for (id, (_, e)) in eq {
            assert!(e.abs() < 0.1, "{id}: eq {e}");
        }
    }

    #[test]
    fn skew_orders_shares() {
        let ids = members(3);
        let mut rng = crate::util::seeded_rng(114, 0);
        let (statuses, truth) =
            gen_turn_sequence(&ids, 1.5, 0.0, 12_000, 20.0, &mut rng).unwrap();
        let shares: Vec<f64> = statuses
            .iter()
            .map(|s| s.status.iter().map(|&v| v as f64).sum::<f64>() / s.status.len() as f64)
            .collect();
        assert!(shares[0] > shares[1] && shares[1] > shares[2], "{shares:?}");
        let targets: Vec<f64> = ids.iter().map(|id| truth.target_shares[id]).collect();
        assert!(targets[0] > targets[2]);
    }

    #[test]
    fn zero_interruption_rate_detects_none() {
        let ids = members(3);
        let mut rng = crate::util::seeded_rng(115, 0);
        let (statuses, truth) =
            gen_turn_sequence(&ids, 0.5, 0.0, 6000, 20.0, &mut rng).unwrap();
        assert!(truth.interruptions.is_empty());
        let map: BTreeMap<String, Vec<u8>> = statuses
            .iter()
            .map(|s| (s.participant_id.clone(), s.status.clone()))
            .collect();
        let turns: BTreeMap<String, crate::turntaking::TurnSequence> = map
            .iter()
            .map(|(id, s)| {
                (
                    id.clone(),
                    segment_turns(id, s, 20.0, &TurnConfig::default()).unwrap(),
                )
            })
            .collect();
        let sync = synchronization(&map, &turns, OverlapMode::JointSpeech).unwrap();
        for (id, s) in sync {
            assert_eq!(s.n_successful + s.n_unsuccessful, 0, "{id}");
        }
    }

    // Oracle: planted ground truth equals detector output exactly.
    #[test]
    fn planted_interruptions_recovered_exactly() {
        for seed in 0..5u64 {
            let ids = members(3);
            let mut rng = crate::util::seeded_rng(116 + seed, 0);
            let (statuses, truth) =
                gen_turn_sequence(&ids, 0.3, 0.4, 12_000, 20.0, &mut rng).unwrap();
            let map: BTreeMap<String, Vec<u8>> = statuses
                .iter()
                .map(|s| (s.participant_id.clone(), s.status.clone()))
                .collect();
            let turns: BTreeMap<String, crate::turntaking::TurnSequence> = map
                .iter()
                .map(|(id, s)| {
                    (
                        id.clone(),
                        segment_turns(id, s, 20.0, &TurnConfig::default()).unwrap(),
                    )
                })
                .collect();
            let sync = synchronization(&map, &turns, OverlapMode::JointSpeech).unwrap();
            for id in &ids {
                let planted_success = truth
                    .interruptions
                    .iter()
                    .filter(|i| &i.interrupter == id && i.successful)
                    .count();
                let planted_fail = truth
                    .interruptions
                    .iter()
                    .filter(|i| &i.interrupter == id && !i.successful)
                    .count();
                assert_eq!(
                    sync[id].n_successful, planted_success,
                    "seed {seed} member {id} successes"
                );
                assert_eq!(
                    sync[id].n_unsuccessful, planted_fail,
                    "seed {seed} member {id} failures"
                );
            }
        }
    }

    #[test]
    fn mini_mingle_structure_and_determinism() {
        let cfg = ScenarioConfig {
            n_groups: 6,
            duration_s_min: 40.0,
            duration_s_max: 90.0,
            ..Default::default()
        };
        let a = gen_mini_mingle(&cfg).unwrap();
        let b = gen_mini_mingle(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.groups.len(), 6);
        assert_eq!(a.truth.len(), 6);
        let total_members: usize = a.groups.iter().map(|g| g.member_ids.len()).sum();
        assert_eq!(a.accel.len(), total_members);
        assert_eq!(a.speaking.len(), total_members);
        // all speaking sequences share one clock length
        let lens: std::collections::BTreeSet<usize> =
            a.speaking.iter().map(|s| s.status.len()).collect();
        assert_eq!(lens.len(), 1);
    }

    #[test]
    fn zero_rater_noise_gives_perfect_agreement() {
        let cfg = ScenarioConfig {
            n_groups: 4,
            rater_noise_sd: 0.0,
            duration_s_min: 40.0,
            duration_s_max: 80.0,
            ..Default::default()
        };
        let data = gen_mini_mingle(&cfg).unwrap();
        let by_sample = crate::reliability::ratings_by_sample(&data.group_annotations);
        for (key, raters) in by_sample {
            let vecs: Vec<&Vec<u8>> = raters.values().collect();
            for pair in vecs.windows(2) {
                assert_eq!(pair[0], pair[1], "{key:?}");
            }
            let kappa =
                crate::reliability::qw_kappa(vecs[0], vecs[1], 5).unwrap();
            assert!((kappa - 1.0).abs() < 1e-12);
        }
    }

    // Oracle: direct kappa computation on noisy annotations.
    #[test]
    fn rater_noise_yields_intermediate_agreement() {
        let cfg = ScenarioConfig {
            n_groups: 8,
            rater_noise_sd: 1.0,
            duration_s_min: 40.0,
            duration_s_max: 80.0,
            ..Default::default()
        };
        let data = gen_mini_mingle(&cfg).unwrap();
        let by_sample = crate::reliability::ratings_by_sample(&data.group_annotations);
        let mut kappas = Vec::new();
        for raters in by_sample.values() {
            let vecs: Vec<&Vec<u8>> = raters.values().collect();
            for i in 0..vecs.len() {
                for j in (i + 1)..vecs.len() {
                    if let Ok(k) = crate::reliability::qw_kappa(vecs[i], vecs[j], 5) {
                        kappas.push(k);
                    }
                }
            }
        }
        let mean = crate::util::mean(&kappas);
        assert!(mean > 0.0 && mean < 1.0, "mean kappa {mean}");
    }

    #[test]
    fn files_round_trip_and_are_deterministic() {
        let cfg = ScenarioConfig {
            n_groups: 3,
            duration_s_min: 40.0,
            duration_s_max: 70.0,
            ..Default::default()
        };
        let data = gen_mini_mingle(&cfg).unwrap();
        let dir = std::env::temp_dir().join("convq-synth-test");
        let _ = std::fs::remove_dir_all(&dir);
        write_mini_mingle(&dir, &data, "# seed=0\n").unwrap();

        let (accel, _) = crate::data::load_accel(&dir.join(ACCEL_FILE), cfg.rate_hz).unwrap();
        assert_eq!(accel.len(), data.accel.len());
        let speaking =
            crate::data::load_speaking(&dir.join(SPEAKING_FILE), cfg.rate_hz).unwrap();
        assert_eq!(speaking.len(), data.speaking.len());
        let groups = crate::data::load_groups(&dir.join(GROUPS_FILE)).unwrap();
        assert_eq!(groups.len(), 3);
        let annotations = crate::data::load_annotations(
            &dir.join(GROUP_ANNOTATIONS_FILE),
            AnnotationLevel::Group,
            &default_group_items(),
        )
        .unwrap();
        assert_eq!(annotations, data.group_annotations);

        // byte-identical rerun
        let dir2 = std::env::temp_dir().join("convq-synth-test-2");
        let _ = std::fs::remove_dir_all(&dir2);
        write_mini_mingle(&dir2, &gen_mini_mingle(&cfg).unwrap(), "# seed=0\n").unwrap();
        for file in [ACCEL_FILE, SPEAKING_FILE, GROUPS_FILE, GROUND_TRUTH_FILE] {
            let a = std::fs::read(dir.join(file)).unwrap();
            let b = std::fs::read(dir2.join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between reruns");
        }
    }
}
