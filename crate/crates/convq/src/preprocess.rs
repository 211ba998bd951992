//! Acceleration standardization, the 7 feature channels, and optional
//! sliding-window smoothing into statistical/spectral series.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::data::AccelRecording;
use crate::{Error, Result};

pub const CHANNEL_NAMES: [&str; 7] = [
    "raw_x",
    "raw_y",
    "raw_z",
    "abs_x",
    "abs_y",
    "abs_z",
    "euclid_norm",
];

/// One derived series with the clock metadata needed to cut and window it.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

/// The 7 per-participant feature channels derived from z-scored acceleration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub participant_id: String,
    pub sample_rate_hz: f64,
    /// Sample clock indices shared by all channels.
    pub ts: Vec<i64>,
    pub channels: Vec<Channel>,
}

impl ChannelSet {
    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }
}

/// Standardize each axis to mean 0 and sample standard deviation 1.
///
/// A constant axis makes standardization undefined and is rejected with the
/// axis named.
pub fn zscore(recording: &AccelRecording) -> Result<AccelRecording> {
    recording.validate()?;
    let n = recording.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "participant {}: z-score needs at least 2 samples, got {n}",
            recording.participant_id
        )));
    }
    let mut out = recording.clone();
    for (axis, axis_name) in ["x", "y", "z"].iter().enumerate() {
        let values: Vec<f64> = recording.samples.iter().map(|s| s[axis]).collect();
        let m = crate::util::mean(&values);
        let sd = crate::util::variance_sample(&values).sqrt();
        if sd == 0.0 {
            return Err(Error::DegenerateSignal(format!(
                "participant {}: axis {axis_name} is constant",
                recording.participant_id
            )));
        }
        for (sample, v) in out.samples.iter_mut().zip(&values) {
            sample[axis] = (v - m) / sd;
        }
    }
    Ok(out)
}

/// Derive the 7 channels from a z-scored recording: raw and absolute values
/// per axis plus the Euclidean norm of the raw values.
pub fn derive_channels(z: &AccelRecording) -> ChannelSet {
    let axis = |i: usize| -> Vec<f64> { z.samples.iter().map(|s| s[i]).collect() };
    let abs_axis = |i: usize| -> Vec<f64> { z.samples.iter().map(|s| s[i].abs()).collect() };
    let norm: Vec<f64> = z
        .samples
        .iter()
        .map(|s| (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt())
        .collect();
    let values = [
        axis(0),
        axis(1),
        axis(2),
        abs_axis(0),
        abs_axis(1),
        abs_axis(2),
        norm,
    ];
    ChannelSet {
        participant_id: z.participant_id.clone(),
        sample_rate_hz: z.sample_rate_hz,
        ts: z.ts.clone(),
        channels: CHANNEL_NAMES
            .iter()
            .zip(values)
            .map(|(name, values)| Channel {
                name: (*name).to_string(),
                values,
            })
            .collect(),
    }
}

/// Which statistics a sliding window emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowStat {
    Mean,
    Variance,
    BandPower,
}

/// Sliding-window configuration. `None` passes channels through unchanged.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WindowConfig {
    pub window_len_s: f64,
    /// Hop between window starts; defaults to half the window (50% overlap).
    pub hop_s: Option<f64>,
    pub stats: Vec<WindowStat>,
    /// Number of log-spaced power bands over (0, Nyquist].
    pub n_bands: usize,
}

impl WindowConfig {
    pub fn new(window_len_s: f64) -> Self {
        WindowConfig {
            window_len_s,
            hop_s: None,
            stats: vec![WindowStat::Mean, WindowStat::Variance, WindowStat::BandPower],
            n_bands: 4,
        }
    }

    fn hop_samples(&self, rate_hz: f64) -> usize {
        let hop_s = self.hop_s.unwrap_or(self.window_len_s / 2.0);
        ((hop_s * rate_hz).round() as usize).max(1)
    }

    fn window_samples(&self, rate_hz: f64) -> usize {
        (self.window_len_s * rate_hz).round() as usize
    }
}

/// One statistic series derived from sliding windows over a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSeries {
    /// Statistic suffix, e.g. `mean`, `variance`, `band0`.
    pub stat: String,
    pub values: Vec<f64>,
    /// Effective rate of the derived series (windows per second).
    pub rate_hz: f64,
}

fn hann(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (len - 1) as f64).cos()))
        .collect()
}

/// Log-spaced band edges over (0, Nyquist], as inclusive bin-index ranges of
/// an rfft with `n_fft` points. Bin 0 (DC) is never included.
fn band_edges(n_fft: usize, n_bands: usize) -> Vec<(usize, usize)> {
    let n_bins = n_fft / 2; // positive-frequency bins 1..=n_bins
    let mut edges = Vec::with_capacity(n_bands);
    let log_max = (n_bins as f64).ln();
    let mut lo = 1usize;
    for b in 0..n_bands {
        let hi_f = ((b + 1) as f64 / n_bands as f64 * log_max).exp();
        let hi = (hi_f.round() as usize).clamp(lo, n_bins);
        edges.push((lo, hi));
        lo = (hi + 1).min(n_bins);
    }
    edges
}

/// Compute sliding-window statistics over one channel.
///
/// With `cfg = None`, the input channel is returned untouched as a single
/// `raw` series (the no-smoothing condition). Otherwise one series per
/// statistic is emitted: `mean`, `variance`, and `band{0..B-1}` magnitude-
/// squared DFT power in log-spaced bands with a Hann taper.
pub fn window_features(
    values: &[f64],
    rate_hz: f64,
    cfg: Option<&WindowConfig>,
) -> Result<Vec<WindowedSeries>> {
    let Some(cfg) = cfg else {
        return Ok(vec![WindowedSeries {
            stat: "raw".to_string(),
            values: values.to_vec(),
            rate_hz,
        }]);
    };
    let w = cfg.window_samples(rate_hz);
    let hop = cfg.hop_samples(rate_hz);
    if w < 2 {
        return Err(Error::Config(format!(
            "window of {:.3}s is below 2 samples at {rate_hz} Hz",
            cfg.window_len_s
        )));
    }
    if w > values.len() {
        return Err(Error::InsufficientData(format!(
            "window of {w} samples longer than signal of {} samples",
            values.len()
        )));
    }

    let n_windows = (values.len() - w) / hop + 1;
    let derived_rate = rate_hz / hop as f64;
    let mut out: Vec<WindowedSeries> = Vec::new();
    let mut push = |stat: String, series: Vec<f64>| {
        out.push(WindowedSeries {
            stat,
            values: series,
            rate_hz: derived_rate,
        });
    };

    let starts: Vec<usize> = (0..n_windows).map(|k| k * hop).collect();
    if cfg.stats.contains(&WindowStat::Mean) {
        push(
            "mean".into(),
            starts
                .iter()
                .map(|&s| crate::util::mean(&values[s..s + w]))
                .collect(),
        );
    }
    if cfg.stats.contains(&WindowStat::Variance) {
        push(
            "variance".into(),
            starts
                .iter()
                .map(|&s| crate::util::variance_pop(&values[s..s + w]))
                .collect(),
        );
    }
    if cfg.stats.contains(&WindowStat::BandPower) && cfg.n_bands > 0 {
        let taper = hann(w);
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(w);
        let edges = band_edges(w, cfg.n_bands);
        let mut bands: Vec<Vec<f64>> = vec![Vec::with_capacity(n_windows); cfg.n_bands];
        let mut buf: Vec<Complex<f64>> = vec![Complex::default(); w];
        for &s in &starts {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex::new(values[s + i] * taper[i], 0.0);
            }
            fft.process(&mut buf);
            for (band, &(lo, hi)) in bands.iter_mut().zip(&edges) {
                band.push(buf[lo..=hi].iter().map(|c| c.norm_sqr()).sum::<f64>());
            }
        }
        for (b, series) in bands.into_iter().enumerate() {
            push(format!("band{b}"), series);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recording(samples: Vec<[f64; 3]>) -> AccelRecording {
        AccelRecording {
            participant_id: "p0".into(),
            sample_rate_hz: 20.0,
            ts: (0..samples.len() as i64).collect(),
            samples,
        }
    }

    #[test]
    fn zscore_simple_axis() {
        let rec = recording(vec![[1.0, 1.0, 0.5], [2.0, 3.0, 1.5], [3.0, 5.0, 2.5]]);
        let z = zscore(&rec).unwrap();
        for axis in 0..3 {
            let v: Vec<f64> = z.samples.iter().map(|s| s[axis]).collect();
            assert!(crate::util::mean(&v).abs() < 1e-9);
            assert!((crate::util::variance_sample(&v).sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zscore_constant_axis_names_axis() {
        let rec = recording(vec![[5.0, 1.0, 0.0], [5.0, 2.0, 1.0], [5.0, 3.0, 2.0]]);
        match zscore(&rec) {
            Err(Error::DegenerateSignal(msg)) => assert!(msg.contains("axis x"), "{msg}"),
            other => panic!("expected degenerate-signal error, got {other:?}"),
        }
    }

    // Oracle: independent two-pass mean/sd on a seeded random axis.
    #[test]
    fn zscore_matches_two_pass_oracle() {
        use rand::Rng;
        let mut rng = crate::util::seeded_rng(11, 0);
        let samples: Vec<[f64; 3]> = (0..1000)
            .map(|_| [rng.gen::<f64>() * 7.0 - 2.0, rng.gen(), rng.gen::<f64>() + 0.5])
            .collect();
        let rec = recording(samples.clone());
        let z = zscore(&rec).unwrap();

        for axis in 0..3 {
            let raw: Vec<f64> = samples.iter().map(|s| s[axis]).collect();
            // two-pass oracle
            let m: f64 = raw.iter().sum::<f64>() / raw.len() as f64;
            let sd =
                (raw.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (raw.len() - 1) as f64).sqrt();
            for (s, r) in z.samples.iter().zip(&raw) {
                assert!((s[axis] - (r - m) / sd).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zscore_idempotent() {
        let rec = recording(
            (0..50)
                .map(|i| [i as f64, (i as f64).sin(), (i * i) as f64 * 0.01])
                .collect(),
        );
        let once = zscore(&rec).unwrap();
        let twice = zscore(&once).unwrap();
        for (a, b) in once.samples.iter().zip(&twice.samples) {
            for axis in 0..3 {
                assert!((a[axis] - b[axis]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn channels_three_four_five_norm() {
        let rec = recording(vec![[3.0, 4.0, 0.0], [-1.0, 0.0, 0.0]]);
        let set = derive_channels(&rec);
        assert_eq!(set.channels.len(), 7);
        assert_eq!(set.channel("euclid_norm").unwrap().values[0], 5.0);
        assert_eq!(set.channel("abs_x").unwrap().values[1], 1.0);
        assert_eq!(set.channel("raw_x").unwrap().values[1], -1.0);
    }

    // Oracle: element-wise recomputation of the norm channel.
    #[test]
    fn channels_norm_matches_pointwise_recompute() {
        use rand::Rng;
        let mut rng = crate::util::seeded_rng(12, 0);
        let rec = recording((0..200).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect());
        let set = derive_channels(&rec);
        let norm = &set.channel("euclid_norm").unwrap().values;
        for (i, s) in rec.samples.iter().enumerate() {
            let expect = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
            assert!((norm[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn channels_commute_with_truncation() {
        let rec = recording(
            (0..60)
                .map(|i| [(i as f64).cos(), i as f64 * 0.1, 1.0 - i as f64])
                .collect(),
        );
        let full = derive_channels(&rec);
        let mut cut = rec.clone();
        cut.ts.truncate(25);
        cut.samples.truncate(25);
        let truncated = derive_channels(&cut);
        for (a, b) in full.channels.iter().zip(&truncated.channels) {
            assert_eq!(&a.values[..25], &b.values[..]);
        }
    }

    #[test]
    fn window_none_is_identity() {
        let v: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let out = window_features(&v, 20.0, None).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].values, v);
        assert_eq!(out[0].rate_hz, 20.0);
    }

    #[test]
    fn window_variance_of_constant_is_zero() {
        let v = vec![2.5; 100];
        let cfg = WindowConfig::new(1.0);
        let out = window_features(&v, 20.0, Some(&cfg)).unwrap();
        let var = out.iter().find(|s| s.stat == "variance").unwrap();
        assert!(var.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn window_longer_than_signal_errors() {
        let v = vec![0.0; 10];
        let cfg = WindowConfig::new(1.0);
        assert!(window_features(&v, 20.0, Some(&cfg)).is_err());
    }

    #[test]
    fn window_mean_of_ramp_is_linear() {
        let v: Vec<f64> = (0..200).map(|i| 0.5 * i as f64 + 3.0).collect();
        let cfg = WindowConfig::new(1.0);
        let out = window_features(&v, 20.0, Some(&cfg)).unwrap();
        let mean = out.iter().find(|s| s.stat == "mean").unwrap();
        let diffs: Vec<f64> = mean.values.windows(2).map(|w| w[1] - w[0]).collect();
        for d in &diffs {
            assert!((d - diffs[0]).abs() < 1e-9);
        }
    }

    // Oracle: direct DFT of one window confirms the dominant band.
    #[test]
    fn window_band_power_tracks_sinusoid() {
        let rate = 20.0;
        let f0 = 6.0; // Hz, in the upper bands
        let v: Vec<f64> = (0..400)
            .map(|i| (2.0 * std::f64::consts::PI * f0 * i as f64 / rate).sin())
            .collect();
        let cfg = WindowConfig {
            window_len_s: 4.0,
            hop_s: None,
            stats: vec![WindowStat::BandPower],
            n_bands: 4,
        };
        let out = window_features(&v, rate, Some(&cfg)).unwrap();

        // Naive DFT oracle over the first window with the same Hann taper.
        let w = 80usize;
        let taper = hann(w);
        let edges = band_edges(w, 4);
        let mut oracle = vec![0.0; 4];
        for (b, &(lo, hi)) in edges.iter().enumerate() {
            for k in lo..=hi {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, t) in taper.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (k * i) as f64 / w as f64;
                    re += v[i] * t * ang.cos();
                    im += v[i] * t * ang.sin();
                }
                oracle[b] += re * re + im * im;
            }
        }
        let oracle_best = (0..4).max_by(|&a, &b| oracle[a].total_cmp(&oracle[b])).unwrap();

        // f0 = 6 Hz -> bin 24 of 40; bands over bins 1..=40 log-spaced.
        let firsts: Vec<f64> = out.iter().map(|s| s.values[0]).collect();
        let impl_best = (0..4).max_by(|&a, &b| firsts[a].total_cmp(&firsts[b])).unwrap();
        assert_eq!(impl_best, oracle_best);
        for (b, &(lo, hi)) in edges.iter().enumerate() {
            let bin_f0 = (f0 / rate * w as f64).round() as usize;
            if (lo..=hi).contains(&bin_f0) {
                assert_eq!(impl_best, b, "dominant power must sit in the f0 band");
            }
        }
        for (got, want) in firsts.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-6 * want.max(1.0), "{got} vs {want}");
        }
    }
}
