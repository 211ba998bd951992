//! Pairwise bodily-coordination features: synchrony (correlation, lagged
//! correlation, mutual information, mimicry), causality (coherence, Granger),
//! and convergence (symmetric, asymmetric, global). Computed per channel per
//! ordered pair per slice.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Tuning for the coordination feature bank, in seconds so it adapts to the
/// effective rate of whatever series it is applied to.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoordinationConfig {
    /// Maximum lag for the lagged correlation.
    pub max_lag_s: f64,
    /// Equal-width bins per marginal for histogram mutual information.
    pub mi_bins: usize,
    /// Non-overlapping window length for mutual information statistics.
    pub mi_window_s: f64,
    /// Window length for next-window mimicry correlation.
    pub mimicry_window_s: f64,
    /// Autoregressive model order for Granger causality.
    pub granger_order: usize,
    /// Segment length for Welch magnitude-squared coherence.
    pub coherence_segment_s: f64,
}

impl Default for CoordinationConfig {
    fn default() -> Self {
        CoordinationConfig {
            max_lag_s: 3.0,
            mi_bins: 8,
            mi_window_s: 10.0,
            mimicry_window_s: 5.0,
            granger_order: 2,
            coherence_segment_s: 4.0,
        }
    }
}

/// Summary statistics over a collection of per-window scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population variance over windows.
    pub variance: f64,
}

impl WindowStats {
    fn from_values(values: &[f64]) -> WindowStats {
        WindowStats {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: crate::util::mean(values),
            variance: crate::util::variance_pop(values),
        }
    }
}

/// Result of the lagged correlation scan over lags in `[-L, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaggedCorrelation {
    pub min: f64,
    pub max: f64,
    /// Lag (in samples) of the extremes; ties broken toward smaller |lag|.
    pub argmin: i64,
    pub argmax: i64,
}

/// All Table-style feature values for one ordered pair on one channel,
/// from the first participant's perspective.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatureSet {
    pub pair: (String, String),
    pub channel: String,
    /// feature name -> value; names are stable column identifiers.
    pub values: BTreeMap<String, f64>,
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Domain(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation needs at least 3 samples, got {}",
            a.len()
        )));
    }
    let (ma, mb) = (crate::util::mean(a), crate::util::mean(b));
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "constant input series".to_string(),
        ));
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation of `a_t` against `b_{t+lag}` over the overlapping segment.
fn correlation_at_lag(a: &[f64], b: &[f64], lag: i64) -> Result<f64> {
    let n = a.len() as i64;
    if lag >= 0 {
        pearson(&a[..(n - lag) as usize], &b[lag as usize..])
    } else {
        pearson(&a[(-lag) as usize..], &b[..(n + lag) as usize])
    }
}

/// Scan Pearson correlation over every lag in `[-L, L]`.
///
/// Positive argmax means the second series trails the first. Ties in the
/// extremes are broken toward smaller |lag| (and toward negative lag when
/// magnitudes tie), making results deterministic.
pub fn lagged_correlation(a: &[f64], b: &[f64], max_lag: usize) -> Result<LaggedCorrelation> {
    let l = max_lag as i64;
    if a.len() as i64 <= 2 * l + 2 {
        return Err(Error::InsufficientData(format!(
            "lagged correlation needs length > {}, got {}",
            2 * l + 2,
            a.len()
        )));
    }
    let mut curve = Vec::with_capacity(2 * max_lag + 1);
    for lag in -l..=l {
        curve.push((lag, correlation_at_lag(a, b, lag)?));
    }
    Ok(extremes_of_lag_curve(&curve))
}

fn extremes_of_lag_curve(curve: &[(i64, f64)]) -> LaggedCorrelation {
    // Visit lags by increasing |lag| so the first strict extreme wins ties.
    let mut order: Vec<usize> = (0..curve.len()).collect();
    order.sort_by_key(|&i| (curve[i].0.abs(), curve[i].0));
    let (mut argmin, mut min) = (curve[order[0]].0, curve[order[0]].1);
    let (mut argmax, mut max) = (curve[order[0]].0, curve[order[0]].1);
    for &i in &order[1..] {
        let (lag, r) = curve[i];
        if r < min {
            min = r;
            argmin = lag;
        }
        if r > max {
            max = r;
            argmax = lag;
        }
    }
    LaggedCorrelation {
        min,
        max,
        argmin,
        argmax,
    }
}

/// Histogram mutual information in nats between two equal-length slices,
/// with `bins x bins` equal-width binning over each slice's own range.
fn histogram_mi(a: &[f64], b: &[f64], bins: usize) -> f64 {
    let n = a.len();
    let bin_of = |values: &[f64], v: f64| -> usize {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return 0;
        }
        (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
    };
    let mut joint = vec![0usize; bins * bins];
    let mut pa = vec![0usize; bins];
    let mut pb = vec![0usize; bins];
    for (&x, &y) in a.iter().zip(b) {
        let (i, j) = (bin_of(a, x), bin_of(b, y));
        joint[i * bins + j] += 1;
        pa[i] += 1;
        pb[j] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c > 0 {
                let pxy = c as f64 / nf;
                let px = pa[i] as f64 / nf;
                let py = pb[j] as f64 / nf;
                mi += pxy * (pxy / (px * py)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Per-window histogram mutual information over non-overlapping windows,
/// summarized as min/max/mean/variance across windows.
pub fn mutual_information(
    a: &[f64],
    b: &[f64],
    bins: usize,
    mi_window: usize,
) -> Result<WindowStats> {
    if bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {bins}")));
    }
    if mi_window < 2 {
        return Err(Error::Config(format!(
            "mi window must be at least 2 samples, got {mi_window}"
        )));
    }
    let n_windows = a.len() / mi_window;
    if n_windows < 2 {
        return Err(Error::InsufficientData(format!(
            "mutual information needs at least 2 full windows of {mi_window}, got {}",
            a.len()
        )));
    }
    let per_window: Vec<f64> = (0..n_windows)
        .map(|w| {
            let s = w * mi_window;
            histogram_mi(&a[s..s + mi_window], &b[s..s + mi_window], bins)
        })
        .collect();
    Ok(WindowStats::from_values(&per_window))
}

/// Directional mimicry summaries: `lag` is the follower imitating the model
/// one window later, `lead` is the reverse direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mimicry {
    pub lag: WindowStats,
    pub lead: WindowStats,
}

/// Next-window mimicry scores in one direction: score at window `w` is the
/// Pearson correlation of `follower` over window `w+1` with `model` over
/// window `w`. Windows with a constant side are skipped.
fn mimicry_direction(follower: &[f64], model: &[f64], window: usize) -> Result<Vec<f64>> {
    let n_windows = follower.len() / window;
    let mut scores = Vec::new();
    for w in 0..n_windows.saturating_sub(1) {
        let m = &model[w * window..(w + 1) * window];
        let f = &follower[(w + 1) * window..(w + 2) * window];
        match pearson(f, m) {
            Ok(r) => scores.push(r),
            Err(Error::UndefinedCorrelation(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if scores.is_empty() {
        return Err(Error::UndefinedCorrelation(
            "every mimicry window was constant".to_string(),
        ));
    }
    Ok(scores)
}

/// Delayed-imitation mimicry in both directions for an ordered pair
/// (`a` = self, `b` = partner).
pub fn mimicry(a: &[f64], b: &[f64], window: usize) -> Result<Mimicry> {
    if window < 3 {
        return Err(Error::Config(format!(
            "mimicry window must be at least 3 samples, got {window}"
        )));
    }
    if a.len() / window < 3 {
        return Err(Error::InsufficientData(format!(
            "mimicry needs at least 3 windows of {window}, got {} samples",
            a.len()
        )));
    }
    Ok(Mimicry {
        lag: WindowStats::from_values(&mimicry_direction(a, b, window)?),
        lead: WindowStats::from_values(&mimicry_direction(b, a, window)?),
    })
}

/// Extremes of the magnitude-squared coherence over frequency bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence {
    pub min: f64,
    pub max: f64,
}

/// Welch magnitude-squared coherence: Hann-tapered segments with 50% overlap,
/// cross- and auto-spectra averaged across segments, then
/// `|P_ab|^2 / (P_aa * P_bb)` per bin. DC is excluded; bins where either
/// signal has zero power are excluded; all-excluded is an error.
pub fn coherence(a: &[f64], b: &[f64], seg_len: usize) -> Result<Coherence> {
    if seg_len < 4 {
        return Err(Error::Config(format!(
            "coherence segment must be at least 4 samples, got {seg_len}"
        )));
    }
    if a.len() < 2 * seg_len {
        return Err(Error::InsufficientData(format!(
            "coherence needs at least {} samples, got {}",
            2 * seg_len,
            a.len()
        )));
    }
    let hop = seg_len / 2;
    let n_segments = (a.len() - seg_len) / hop + 1;
    let taper: Vec<f64> = (0..seg_len)
        .map(|i| {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (seg_len - 1) as f64).cos())
        })
        .collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(seg_len);
    let n_bins = seg_len / 2;
    let mut p_ab = vec![Complex::new(0.0, 0.0); n_bins + 1];
    let mut p_aa = vec![0.0; n_bins + 1];
    let mut p_bb = vec![0.0; n_bins + 1];
    let mut buf_a = vec![Complex::new(0.0, 0.0); seg_len];
    let mut buf_b = vec![Complex::new(0.0, 0.0); seg_len];
    for s in 0..n_segments {
        let start = s * hop;
        // Remove each segment's mean before tapering so DC leakage does not
        // contaminate low bins.
        let seg_a = &a[start..start + seg_len];
        let seg_b = &b[start..start + seg_len];
        let mean_a = crate::util::mean(seg_a);
        let mean_b = crate::util::mean(seg_b);
        for i in 0..seg_len {
            buf_a[i] = Complex::new((seg_a[i] - mean_a) * taper[i], 0.0);
            buf_b[i] = Complex::new((seg_b[i] - mean_b) * taper[i], 0.0);
        }
        fft.process(&mut buf_a);
        fft.process(&mut buf_b);
        for k in 0..=n_bins {
            p_ab[k] += buf_a[k] * buf_b[k].conj();
            p_aa[k] += buf_a[k].norm_sqr();
            p_bb[k] += buf_b[k].norm_sqr();
        }
    }

    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut any = false;
    for k in 1..=n_bins {
        if p_aa[k] <= 0.0 || p_bb[k] <= 0.0 {
            continue;
        }
        let msc = (p_ab[k].norm_sqr() / (p_aa[k] * p_bb[k])).clamp(0.0, 1.0);
        min = min.min(msc);
        max = max.max(msc);
        any = true;
    }
    if !any {
        return Err(Error::DegenerateSignal(
            "all coherence bands excluded for zero power".to_string(),
        ));
    }
    Ok(Coherence { min, max })
}

/// Granger causality F statistic for "`a` helps predict `b`".
///
/// Fits AR(p) models of `b` with and without lagged `a` terms by least
/// squares and returns
/// `F = ((RSS_r - RSS_u) / p) / (RSS_u / (T - 2p - 1))`
/// where `T` is the number of regression rows.
pub fn granger(a: &[f64], b: &[f64], order: usize) -> Result<f64> {
    let p = order;
    if p == 0 {
        return Err(Error::Config("granger order must be positive".to_string()));
    }
    let n = a.len();
    if n <= 3 * p + 10 {
        return Err(Error::InsufficientData(format!(
            "granger needs length > {}, got {n}",
            3 * p + 10
        )));
    }
    let rows = n - p;
    let y = DVector::from_iterator(rows, b[p..].iter().copied());

    // Restricted: intercept + p lags of b. Unrestricted: + p lags of a.
    let mut restricted = DMatrix::zeros(rows, p + 1);
    let mut unrestricted = DMatrix::zeros(rows, 2 * p + 1);
    for t in 0..rows {
        restricted[(t, 0)] = 1.0;
        unrestricted[(t, 0)] = 1.0;
        for k in 1..=p {
            restricted[(t, k)] = b[t + p - k];
            unrestricted[(t, k)] = b[t + p - k];
            unrestricted[(t, p + k)] = a[t + p - k];
        }
    }
    let rss = |x: &DMatrix<f64>| -> Result<f64> {
        let beta = crate::util::lstsq(x, &y)?;
        let resid = &y - x * beta;
        Ok(resid.dot(&resid))
    };
    let rss_r = rss(&restricted)?;
    let rss_u = rss(&unrestricted)?;
    let df_denom = rows as f64 - 2.0 * p as f64 - 1.0;
    let f = ((rss_r - rss_u) / p as f64) / (rss_u / df_denom);
    Ok(f.max(0.0))
}

/// Symmetric convergence: correlation of elapsed time with |a_t - b_t|.
/// More negative means the pair grows more similar over the slice.
pub fn symmetric_convergence(a: &[f64], b: &[f64]) -> Result<f64> {
    let t: Vec<f64> = (0..a.len()).map(|i| i as f64).collect();
    let dist: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    pearson(&t, &dist)
}

/// Asymmetric convergence for an ordered pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymmetricConvergence {
    /// Self approaching the partner's first-half baseline.
    pub lag: f64,
    /// Partner approaching self's first-half baseline.
    pub lead: f64,
}

/// Convergence of each series onto the other's first-half mean.
pub fn asymmetric_convergence(a: &[f64], b: &[f64]) -> Result<AsymmetricConvergence> {
    if a.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "asymmetric convergence needs at least 4 samples, got {}",
            a.len()
        )));
    }
    let half = a.len() / 2;
    let t: Vec<f64> = (0..a.len()).map(|i| i as f64).collect();
    let toward = |series: &[f64], baseline: f64| -> Result<f64> {
        let dist: Vec<f64> = series.iter().map(|x| (x - baseline).abs()).collect();
        pearson(&t, &dist)
    };
    Ok(AsymmetricConvergence {
        lag: toward(a, crate::util::mean(&b[..half]))?,
        lead: toward(b, crate::util::mean(&a[..half]))?,
    })
}

/// Global convergence `d1 - d2`: mean absolute distance in the first half
/// minus that in the second half. Positive means converging.
pub fn global_convergence(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "global convergence needs at least 4 samples, got {}",
            a.len()
        )));
    }
    let half = a.len() / 2;
    let dist = |range: std::ops::Range<usize>| -> f64 {
        let d: Vec<f64> = range.map(|i| (a[i] - b[i]).abs()).collect();
        crate::util::mean(&d)
    };
    Ok(dist(0..half) - dist(half..a.len()))
}

fn to_samples(seconds: f64, rate_hz: f64) -> usize {
    (seconds * rate_hz).round().max(1.0) as usize
}

/// Compute the full coordination feature bank for an ordered pair on one
/// channel. `a` is the first participant's series ("self"), `b` the
/// partner's; both must share the same effective rate.
pub fn pair_features(
    pair: (&str, &str),
    channel: &str,
    a: &[f64],
    b: &[f64],
    rate_hz: f64,
    cfg: &CoordinationConfig,
) -> Result<PairFeatureSet> {
    let mut values = BTreeMap::new();
    let mut put = |name: &str, v: f64| {
        values.insert(name.to_string(), v);
    };

    put("correlation_rho", pearson(a, b)?);

    let lagged = lagged_correlation(a, b, to_samples(cfg.max_lag_s, rate_hz))?;
    put("lagged_correlation_min", lagged.min);
    put("lagged_correlation_max", lagged.max);
    put("lagged_correlation_argmin", lagged.argmin as f64);
    put("lagged_correlation_argmax", lagged.argmax as f64);

    let mi = mutual_information(a, b, cfg.mi_bins, to_samples(cfg.mi_window_s, rate_hz))?;
    put("mutual_information_min", mi.min);
    put("mutual_information_max", mi.max);
    put("mutual_information_mean", mi.mean);
    put("mutual_information_variance", mi.variance);

    let mim = mimicry(a, b, to_samples(cfg.mimicry_window_s, rate_hz))?;
    for (prefix, stats) in [("lag", mim.lag), ("lead", mim.lead)] {
        put(&format!("mimicry_{prefix}_min"), stats.min);
        put(&format!("mimicry_{prefix}_max"), stats.max);
        put(&format!("mimicry_{prefix}_mean"), stats.mean);
        put(&format!("mimicry_{prefix}_variance"), stats.variance);
    }

    let coh = coherence(a, b, to_samples(cfg.coherence_segment_s, rate_hz))?;
    put("coherence_min", coh.min);
    put("coherence_max", coh.max);

    put("granger_f_in", granger(b, a, cfg.granger_order)?);
    put("granger_f_out", granger(a, b, cfg.granger_order)?);

    put("symmetric_convergence_rho", symmetric_convergence(a, b)?);
    let asym = asymmetric_convergence(a, b)?;
    put("asymmetric_convergence_lag", asym.lag);
    put("asymmetric_convergence_lead", asym.lead);
    put("global_convergence_diff", global_convergence(a, b)?);

    Ok(PairFeatureSet {
        pair: (pair.0.to_string(), pair.1.to_string()),
        channel: channel.to_string(),
        values,
    })
}

/// Feature names emitted by [`pair_features`], grouped by attribute category.
pub fn feature_names_by_category() -> Vec<(&'static str, Vec<&'static str>)> {
    vec![
        (
            "sync",
            vec![
                "correlation_rho",
                "lagged_correlation_min",
                "lagged_correlation_max",
                "lagged_correlation_argmin",
                "lagged_correlation_argmax",
                "mutual_information_min",
                "mutual_information_max",
                "mutual_information_mean",
                "mutual_information_variance",
                "mimicry_lag_min",
                "mimicry_lag_max",
                "mimicry_lag_mean",
                "mimicry_lag_variance",
                "mimicry_lead_min",
                "mimicry_lead_max",
                "mimicry_lead_mean",
                "mimicry_lead_variance",
            ],
        ),
        (
            "caus",
            vec![
                "coherence_min",
                "coherence_max",
                "granger_f_in",
                "granger_f_out",
            ],
        ),
        (
            "conv",
            vec![
                "symmetric_convergence_rho",
                "asymmetric_convergence_lag",
                "asymmetric_convergence_lead",
                "global_convergence_diff",
            ],
        ),
    ]
}

/// View of a pair feature set from the partner's perspective: directional
/// features swap roles, symmetric ones are shared.
pub fn swap_perspective(set: &PairFeatureSet) -> PairFeatureSet {
    let mut values = BTreeMap::new();
    for (name, &v) in &set.values {
        let swapped = if let Some(rest) = name.strip_prefix("mimicry_lag_") {
            format!("mimicry_lead_{rest}")
        } else if let Some(rest) = name.strip_prefix("mimicry_lead_") {
            format!("mimicry_lag_{rest}")
        } else {
            match name.as_str() {
                "granger_f_in" => "granger_f_out".to_string(),
                "granger_f_out" => "granger_f_in".to_string(),
                "asymmetric_convergence_lag" => "asymmetric_convergence_lead".to_string(),
                "asymmetric_convergence_lead" => "asymmetric_convergence_lag".to_string(),
                "lagged_correlation_argmin" | "lagged_correlation_argmax" => {
                    values.insert(name.clone(), -v);
                    continue;
                }
                _ => name.clone(),
            }
        };
        values.insert(swapped, v);
    }
    PairFeatureSet {
        pair: (set.pair.1.clone(), set.pair.0.clone()),
        channel: set.channel.clone(),
        values,
    }
}
