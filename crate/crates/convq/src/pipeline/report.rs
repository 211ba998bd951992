//! Delimited report files, each stamped with the config hash and seed.

use std::fmt::Write as _;
use std::path::Path;

use crate::coordination::feature_names_by_category;
use crate::turntaking::turn_feature_names;
use crate::{Error, Result};

use super::config::PipelineConfig;
use super::features::SliceFeatures;
use super::grid::TestRow;
use super::{Dataset, ReliabilityOutcome, StudyOutcome};
use crate::data::ConversationSlice;
use crate::reliability::{ReliabilityReport, ValidityReport};

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

pub fn write_ingest(
    cfg: &PipelineConfig,
    preamble: &str,
    dataset: &Dataset,
    slices: &[ConversationSlice],
    dropped: &[String],
) -> Result<()> {
    let dir = cfg.out_dir.join("ingest");

    let mut out = String::from(preamble);
    out.push_str("slice_id,group_id,member_ids,start_t,end_t,duration_s\n");
    for s in slices {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.slice_id,
            s.group_id,
            s.member_ids.join(";"),
            s.start_t,
            s.end_t,
            s.duration_s
        );
    }
    write_file(&dir.join("slices.csv"), &out)?;

    let mut out = String::from(preamble);
    for w in dataset.warnings.iter().chain(dropped) {
        let _ = writeln!(out, "{w}");
    }
    if dataset.warnings.is_empty() && dropped.is_empty() {
        out.push_str("no findings\n");
    }
    write_file(&dir.join("validation.txt"), &out)
}

fn write_sample_report<K: Ord + Clone>(
    path: &Path,
    preamble: &str,
    header: &str,
    report: &ReliabilityReport<K>,
    key_to_fields: impl Fn(&K) -> String,
) -> Result<()> {
    let mut out = String::from(preamble);
    out.push_str(header);
    for (key, sample) in &report.per_sample {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            key_to_fields(key),
            sample.mean_kappa,
            sample.mean_score,
            if sample.kept { "kept" } else { "dropped" }
        );
    }
    write_file(path, &out)
}

fn write_validity(
    dir: &Path,
    preamble: &str,
    prefix: &str,
    validity: &ValidityReport,
) -> Result<()> {
    let mut out = String::from(preamble);
    out.push_str("component,eigenvalue,explained_ratio,cumulative_ratio\n");
    for (i, ((e, r), c)) in validity
        .eigenvalues
        .iter()
        .zip(&validity.explained_ratios)
        .zip(&validity.cumulative_ratios)
        .enumerate()
    {
        let _ = writeln!(out, "{},{e},{r},{c}", i + 1);
    }
    write_file(&dir.join(format!("{prefix}_pca.csv")), &out)?;

    let mut out = String::from(preamble);
    out.push_str("item,pc1_loading,pc2_loading\n");
    for (item, l1, l2) in &validity.loadings {
        let _ = writeln!(out, "{item},{l1},{l2}");
    }
    write_file(&dir.join(format!("{prefix}_loadings.csv")), &out)
}

pub fn write_reliability(
    cfg: &PipelineConfig,
    preamble: &str,
    outcome: &ReliabilityOutcome,
) -> Result<()> {
    let dir = cfg.out_dir.join("reliability");
    write_sample_report(
        &dir.join("group_reliability.csv"),
        preamble,
        "slice_id,mean_kappa,mean_score,status\n",
        &outcome.group_report,
        |k| k.clone(),
    )?;
    write_sample_report(
        &dir.join("individual_reliability.csv"),
        preamble,
        "slice_id,participant_id,mean_kappa,mean_score,status\n",
        &outcome.individual_report,
        |(s, p)| format!("{s},{p}"),
    )?;

    // Scatter data of (mean score, mean kappa) per sample.
    for (name, points) in [
        ("group_scatter.csv", outcome.group_report.scatter()),
        ("individual_scatter.csv", outcome.individual_report.scatter()),
    ] {
        let mut out = String::from(preamble);
        out.push_str("mean_score,mean_kappa\n");
        for (score, kappa) in points {
            let _ = writeln!(out, "{score},{kappa}");
        }
        write_file(&dir.join(name), &out)?;
    }

    write_validity(&dir, preamble, "group", &outcome.group_validity)?;
    write_validity(&dir, preamble, "individual", &outcome.individual_validity)
}

pub fn write_features(
    cfg: &PipelineConfig,
    preamble: &str,
    features: &SliceFeatures,
) -> Result<()> {
    let dir = cfg.out_dir.join("features");

    // Pairwise dump: one row per (slice, unordered pair, channel).
    let feature_order: Vec<&'static str> = feature_names_by_category()
        .into_iter()
        .flat_map(|(_, names)| names)
        .collect();
    let mut out = String::from(preamble);
    out.push_str("slice_id,participant_a,participant_b,channel");
    for name in &feature_order {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for (slice_id, set) in &features.pair_rows {
        let _ = write!(
            out,
            "{slice_id},{},{},{}",
            set.pair.0, set.pair.1, set.channel
        );
        for name in &feature_order {
            match set.values.get(*name) {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    write_file(&dir.join("pair_features.csv"), &out)?;

    let mut out = String::from(preamble);
    out.push_str("slice_id,participant_id,start_t,end_t,is_backchannel\n");
    for (slice_id, seq) in &features.turn_rows {
        for turn in &seq.turns {
            let _ = writeln!(
                out,
                "{slice_id},{},{},{},{}",
                seq.participant_id, turn.start, turn.end, turn.is_backchannel
            );
        }
    }
    write_file(&dir.join("turns.csv"), &out)?;

    let mut out = String::from(preamble);
    out.push_str("slice_id,participant_id");
    for name in turn_feature_names() {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for ((slice_id, member), values) in &features.member_rows {
        let _ = write!(out, "{slice_id},{member}");
        for name in turn_feature_names() {
            let _ = write!(out, ",{}", values.get(name).copied().unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    write_file(&dir.join("turn_features.csv"), &out)?;

    // Final matrices.
    let group_columns = super::features::select_columns(&features.group_vectors, |_| true);
    let mut out = String::from(preamble);
    out.push_str("slice_id");
    for c in &group_columns {
        let _ = write!(out, ",{}", c.column());
    }
    out.push('\n');
    for (slice_id, fv) in &features.group_vectors {
        let _ = write!(out, "{slice_id}");
        for c in &group_columns {
            let _ = write!(out, ",{}", fv.entries.get(c).copied().unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    write_file(&dir.join("group_matrix.csv"), &out)?;

    let individual_columns =
        super::features::select_columns(&features.individual_vectors, |_| true);
    let mut out = String::from(preamble);
    out.push_str("slice_id,participant_id");
    for c in &individual_columns {
        let _ = write!(out, ",{}", c.column());
    }
    out.push('\n');
    for ((slice_id, member), fv) in &features.individual_vectors {
        let _ = write!(out, "{slice_id},{member}");
        for c in &individual_columns {
            let _ = write!(out, ",{}", fv.entries.get(c).copied().unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    write_file(&dir.join("individual_matrix.csv"), &out)
}

pub fn write_stats(cfg: &PipelineConfig, preamble: &str, rows: &[TestRow]) -> Result<()> {
    let dir = cfg.out_dir.join("stats");
    let mut out = String::from(preamble);
    out.push_str("model,dependent,iv_set,predictor,beta,p_value,p_adjusted,significant\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.model,
            row.dependent,
            row.iv_set,
            row.predictor,
            row.beta,
            row.p_value,
            row.p_adjusted,
            row.significant
        );
    }
    write_file(&dir.join("tests.csv"), &out)
}

pub fn write_studies(
    cfg: &PipelineConfig,
    preamble: &str,
    outcomes: &[StudyOutcome],
) -> Result<()> {
    let dir = cfg.out_dir.join("predict");
    let mut by_study: std::collections::BTreeMap<&str, Vec<&StudyOutcome>> =
        std::collections::BTreeMap::new();
    for o in outcomes {
        by_study.entry(o.study.name()).or_default().push(o);
    }
    for (study, list) in by_study {
        let mut out = String::from(preamble);
        out.push_str(
            "level,rank,condition,auc_mean,auc_std,true_negative,false_positive,false_negative,true_positive\n",
        );
        let mut roc = String::from(preamble);
        roc.push_str("level,condition,threshold,fpr,tpr\n");
        for outcome in &list {
            for (rank, (condition, result)) in outcome.experiment.ranked.iter().enumerate() {
                let c = &result.confusion;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    outcome.level,
                    rank + 1,
                    condition,
                    result.auc_mean,
                    result.auc_std,
                    c.true_negative,
                    c.false_positive,
                    c.false_negative,
                    c.true_positive
                );
                for (threshold, fpr, tpr) in &result.roc {
                    let _ = writeln!(
                        roc,
                        "{},{condition},{threshold},{fpr},{tpr}",
                        outcome.level
                    );
                }
            }
        }
        write_file(&dir.join(format!("{study}.csv")), &out)?;
        write_file(&dir.join(format!("{study}_roc.csv")), &roc)?;
    }
    Ok(())
}
