//! Readers and writers for the comma-separated input formats.
//!
//! All files are UTF-8 with LF line endings and a header row. Lines starting
//! with `#` are provenance comments and are skipped. Formats:
//!
//! - accel: `participant_id,t,ax,ay,az`
//! - speaking: `participant_id,t,status`
//! - groups: `group_id,member_ids,start_t,end_t` (members semicolon-joined)
//! - annotations: `rater_id,slice_id[,participant_id],item_1..item_K`

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

use super::{
    AccelRecording, AnnotationLevel, AnnotationSet, ConversationGroup, QuestionnaireItem,
    RatingKey, SpeakingStatus,
};

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.to_string()))
        .filter(|(_, line)| !line.trim().is_empty() && !line.starts_with('#'))
        .collect())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_f64(path: &Path, line: usize, field: &str, raw: &str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("{field}: not a number: {raw:?}")))
}

fn parse_i64(path: &Path, line: usize, field: &str, raw: &str) -> Result<i64> {
    raw.trim()
        .parse::<i64>()
        .map_err(|_| parse_err(path, line, format!("{field}: not an integer: {raw:?}")))
}

fn expect_header(path: &Path, lines: &[(usize, String)], expected: &str) -> Result<()> {
    match lines.first() {
        Some((n, line)) if line.trim() != expected => Err(parse_err(
            path,
            *n,
            format!("expected header {expected:?}, found {:?}", line.trim()),
        )),
        None => Err(parse_err(path, 1, "empty file")),
        _ => Ok(()),
    }
}

/// Load tri-axial accelerometer rows into one recording per participant.
///
/// Returns the recordings plus a gap report (one entry per clock jump);
/// gaps are reported, never filled.
pub fn load_accel(path: &Path, sample_rate_hz: f64) -> Result<(Vec<AccelRecording>, Vec<String>)> {
    if sample_rate_hz <= 0.0 {
        return Err(Error::Config(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    let lines = read_lines(path)?;
    expect_header(path, &lines, "participant_id,t,ax,ay,az")?;

    let mut per: BTreeMap<String, (Vec<i64>, Vec<[f64; 3]>)> = BTreeMap::new();
    for (n, line) in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(parse_err(
                path,
                *n,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        }
        let id = fields[0].trim().to_string();
        let t = parse_i64(path, *n, "t", fields[1])?;
        let ax = parse_f64(path, *n, "ax", fields[2])?;
        let ay = parse_f64(path, *n, "ay", fields[3])?;
        let az = parse_f64(path, *n, "az", fields[4])?;
        let entry = per.entry(id.clone()).or_default();
        if entry.0.last() == Some(&t) || entry.0.binary_search(&t).is_ok() {
            return Err(parse_err(path, *n, format!("duplicate sample ({id}, {t})")));
        }
        if entry.0.last().is_some_and(|&last| t < last) {
            return Err(parse_err(
                path,
                *n,
                format!("out-of-order sample ({id}, {t}); rows must be time-sorted per participant"),
            ));
        }
        entry.0.push(t);
        entry.1.push([ax, ay, az]);
    }
    if per.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }

    let mut gap_reports = Vec::new();
    let mut recordings = Vec::new();
    for (participant_id, (ts, samples)) in per {
        let rec = AccelRecording {
            participant_id,
            sample_rate_hz,
            ts,
            samples,
        };
        rec.validate()?;
        for (before, after) in rec.gaps() {
            gap_reports.push(format!(
                "accel {}: gap of {} samples between t={before} and t={after}",
                rec.participant_id,
                after - before - 1
            ));
        }
        recordings.push(rec);
    }
    Ok((recordings, gap_reports))
}

/// Load binary speaking-status rows, one sequence per participant.
///
/// All participants must cover the same clock range; mismatched lengths are
/// rejected with the offending ids listed.
pub fn load_speaking(path: &Path, rate_hz: f64) -> Result<Vec<SpeakingStatus>> {
    if rate_hz <= 0.0 {
        return Err(Error::Config(format!(
            "rate must be positive, got {rate_hz}"
        )));
    }
    let lines = read_lines(path)?;
    expect_header(path, &lines, "participant_id,t,status")?;

    let mut per: BTreeMap<String, (Vec<i64>, Vec<u8>)> = BTreeMap::new();
    for (n, line) in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                *n,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let id = fields[0].trim().to_string();
        let t = parse_i64(path, *n, "t", fields[1])?;
        let raw = fields[2].trim();
        let status: u8 = match raw {
            "0" => 0,
            "1" => 1,
            _ => {
                return Err(Error::Domain(format!(
                    "{}:{n}: speaking status must be 0 or 1, got {raw:?}",
                    path.display()
                )))
            }
        };
        let entry = per.entry(id).or_default();
        entry.0.push(t);
        entry.1.push(status);
    }
    if per.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }

    let lengths: BTreeMap<usize, Vec<&String>> =
        per.iter().fold(BTreeMap::new(), |mut acc, (id, (ts, _))| {
            acc.entry(ts.len()).or_default().push(id);
            acc
        });
    if lengths.len() > 1 {
        let detail = lengths
            .iter()
            .map(|(len, ids)| {
                format!(
                    "{} ({} samples)",
                    ids.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "),
                    len
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::Domain(format!(
            "speaking sequences have mixed lengths: {detail}"
        )));
    }

    per.into_iter()
        .map(|(participant_id, (ts, status))| {
            let s = SpeakingStatus {
                participant_id,
                rate_hz,
                ts,
                status,
            };
            s.validate()?;
            Ok(s)
        })
        .collect()
}

/// Load conversation groups. Member ids are semicolon-joined in the file.
pub fn load_groups(path: &Path) -> Result<Vec<ConversationGroup>> {
    let lines = read_lines(path)?;
    expect_header(path, &lines, "group_id,member_ids,start_t,end_t")?;

    let mut groups = Vec::new();
    for (n, line) in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(
                path,
                *n,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let group = ConversationGroup {
            group_id: fields[0].trim().to_string(),
            member_ids: fields[1]
                .split(';')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
            start_t: parse_i64(path, *n, "start_t", fields[2])?,
            end_t: parse_i64(path, *n, "end_t", fields[3])?,
        };
        group.validate()?;
        groups.push(group);
    }
    if groups.is_empty() {
        return Err(parse_err(path, 1, "no data rows"));
    }
    Ok(groups)
}

/// Load an annotation file against a questionnaire schema.
///
/// The header's item columns must match the schema's item ids in order;
/// unknown or missing items are schema errors.
pub fn load_annotations(
    path: &Path,
    level: AnnotationLevel,
    items: &[QuestionnaireItem],
) -> Result<AnnotationSet> {
    let lines = read_lines(path)?;
    let id_cols: &[&str] = match level {
        AnnotationLevel::Group => &["rater_id", "slice_id"],
        AnnotationLevel::Individual => &["rater_id", "slice_id", "participant_id"],
    };
    let (header_line, header) = lines
        .first()
        .map(|(n, l)| (*n, l.trim()))
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != id_cols.len() + items.len() {
        return Err(Error::Schema(format!(
            "{}:{}: expected {} columns ({} id columns + {} items), found {}",
            path.display(),
            header_line,
            id_cols.len() + items.len(),
            id_cols.len(),
            items.len(),
            cols.len()
        )));
    }
    for (i, expected) in id_cols.iter().enumerate() {
        if cols[i] != *expected {
            return Err(Error::Schema(format!(
                "{}:{}: column {} should be {expected:?}, found {:?}",
                path.display(),
                header_line,
                i + 1,
                cols[i]
            )));
        }
    }
    for (i, item) in items.iter().enumerate() {
        let found = cols[id_cols.len() + i];
        if found != item.id {
            return Err(Error::Schema(format!(
                "{}:{}: unknown item id {found:?} (expected {:?})",
                path.display(),
                header_line,
                item.id
            )));
        }
    }

    let mut ratings = BTreeMap::new();
    for (n, line) in &lines[1..] {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(parse_err(
                path,
                *n,
                format!("expected {} fields, found {}", cols.len(), fields.len()),
            ));
        }
        let key = RatingKey {
            rater_id: fields[0].to_string(),
            slice_id: fields[1].to_string(),
            participant_id: match level {
                AnnotationLevel::Group => None,
                AnnotationLevel::Individual => Some(fields[2].to_string()),
            },
        };
        let values: Vec<u8> = fields[id_cols.len()..]
            .iter()
            .map(|raw| {
                let v = parse_i64(path, *n, "rating", raw)?;
                if !(1..=5).contains(&v) {
                    return Err(Error::Domain(format!(
                        "{}:{n}: rating {v} outside 1..5",
                        path.display()
                    )));
                }
                Ok(v as u8)
            })
            .collect::<Result<_>>()?;
        if ratings.insert(key.clone(), values).is_some() {
            return Err(parse_err(
                path,
                *n,
                format!("duplicate rating key {}:{}", key.rater_id, key.slice_id),
            ));
        }
    }

    let set = AnnotationSet {
        level,
        items: items.to_vec(),
        ratings,
    };
    set.validate()?;
    Ok(set)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_accel(path: &Path, recordings: &[AccelRecording], preamble: &str) -> Result<()> {
    let mut out = String::from(preamble);
    out.push_str("participant_id,t,ax,ay,az\n");
    for rec in recordings {
        for (t, s) in rec.ts.iter().zip(&rec.samples) {
            let _ = writeln!(out, "{},{t},{},{},{}", rec.participant_id, s[0], s[1], s[2]);
        }
    }
    write_file(path, &out)
}

pub fn save_speaking(path: &Path, statuses: &[SpeakingStatus], preamble: &str) -> Result<()> {
    let mut out = String::from(preamble);
    out.push_str("participant_id,t,status\n");
    for s in statuses {
        for (t, v) in s.ts.iter().zip(&s.status) {
            let _ = writeln!(out, "{},{t},{v}", s.participant_id);
        }
    }
    write_file(path, &out)
}

pub fn save_groups(path: &Path, groups: &[ConversationGroup], preamble: &str) -> Result<()> {
    let mut out = String::from(preamble);
    out.push_str("group_id,member_ids,start_t,end_t\n");
    for g in groups {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            g.group_id,
            g.member_ids.join(";"),
            g.start_t,
            g.end_t
        );
    }
    write_file(path, &out)
}

pub fn save_annotations(path: &Path, set: &AnnotationSet, preamble: &str) -> Result<()> {
    let mut out = String::from(preamble);
    match set.level {
        AnnotationLevel::Group => out.push_str("rater_id,slice_id"),
        AnnotationLevel::Individual => out.push_str("rater_id,slice_id,participant_id"),
    }
    for item in &set.items {
        let _ = write!(out, ",{}", item.id);
    }
    out.push('\n');
    for (key, values) in &set.ratings {
        let _ = write!(out, "{},{}", key.rater_id, key.slice_id);
        if let Some(pid) = &key.participant_id {
            let _ = write!(out, ",{pid}");
        }
        for v in values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Nearest-neighbor resampling of a dense series from one rate to another.
/// Output sample k takes the input sample nearest to time `k / to_hz`.
pub fn resample_nearest<T: Copy>(values: &[T], from_hz: f64, to_hz: f64) -> Vec<T> {
    if values.is_empty() || (from_hz - to_hz).abs() < 1e-12 {
        return values.to_vec();
    }
    let out_len = ((values.len() as f64) * to_hz / from_hz).round() as usize;
    (0..out_len)
        .map(|k| {
            let src = (k as f64 * from_hz / to_hz).round() as usize;
            values[src.min(values.len() - 1)]
        })
        .collect()
}
