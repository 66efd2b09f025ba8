//! Seeded synthetic benchmark generators.
//!
//! All generators are pure functions of their configuration: the RNG is a
//! counter-based ChaCha8 stream (`rand_chacha`), seeded from the config and
//! split into fixed per-purpose stream ids, so identical configs produce
//! bitwise identical data on every platform and run.

use super::{DataError, SeriesTable};
use crate::gpr::Dataset;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Ground-truth functions for the toy anomaly benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthFn {
    /// `sin(2 pi x) + 0.5 sin(7 x)`: smooth but not exactly periodic.
    SmoothMix,
    /// `sin(2 pi x)`.
    Sine,
}

impl TruthFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TruthFn::SmoothMix => {
                (2.0 * std::f64::consts::PI * x).sin() + 0.5 * (7.0 * x).sin()
            }
            TruthFn::Sine => (2.0 * std::f64::consts::PI * x).sin(),
        }
    }
}

/// Configuration for [`synth_toy_anomaly`].
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    /// Probability that any one point is replaced by an anomaly.
    pub contamination_rate: f64,
    /// Anomalous values are drawn uniformly from this interval and replace
    /// the clean value outright.
    pub anomaly_range: (f64, f64),
    pub noise_std: f64,
    pub truth: TruthFn,
    pub train_range: (f64, f64),
    /// Wider than the training range by default, so part of the test set
    /// probes the model where it has no data.
    pub test_range: (f64, f64),
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_train: 50,
            n_test: 1000,
            contamination_rate: 0.1,
            anomaly_range: (-5.0, 5.0),
            noise_std: 0.1,
            truth: TruthFn::SmoothMix,
            train_range: (0.0, 1.0),
            test_range: (0.0, 2.0),
        }
    }
}

/// A dataset whose points carry a ground-truth anomaly label.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub data: Dataset,
    /// `true` where the value was replaced by an anomaly.
    pub anomalous: Vec<bool>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.anomalous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anomalous.is_empty()
    }

    /// The subset with clean labels, e.g. for training on known-good data.
    pub fn normals_only(&self) -> Dataset {
        let inputs: Vec<Vec<f64>> = self
            .data
            .inputs()
            .iter()
            .zip(&self.anomalous)
            .filter(|(_, &a)| !a)
            .map(|(x, _)| x.clone())
            .collect();
        let outputs: Vec<f64> = self
            .data
            .outputs()
            .iter()
            .zip(&self.anomalous)
            .filter(|(_, &a)| !a)
            .map(|(y, _)| *y)
            .collect();
        Dataset::new(inputs, outputs).expect("subset of a valid dataset")
    }
}

/// Generates a contaminated train/test pair for the anomaly benchmark.
///
/// Each point is independently anomalous with the configured rate; labels
/// are known by construction. Points are sorted by location within each
/// split.
pub fn synth_toy_anomaly(cfg: &SynthConfig) -> Result<(LabeledDataset, LabeledDataset), DataError> {
    check_range("train_range", cfg.train_range)?;
    check_range("test_range", cfg.test_range)?;
    check_range("anomaly_range", cfg.anomaly_range)?;
    if !(0.0..1.0).contains(&cfg.contamination_rate) {
        return Err(DataError::BadConfig(format!(
            "contamination_rate must lie in [0, 1), got {}",
            cfg.contamination_rate
        )));
    }
    if cfg.n_train == 0 || cfg.n_test == 0 {
        return Err(DataError::BadConfig(
            "n_train and n_test must be at least 1".to_string(),
        ));
    }
    if !cfg.noise_std.is_finite() || cfg.noise_std < 0.0 {
        return Err(DataError::BadConfig(format!(
            "noise_std must be finite and nonnegative, got {}",
            cfg.noise_std
        )));
    }
    let train = synth_split(cfg, 1, cfg.n_train, cfg.train_range);
    let test = synth_split(cfg, 2, cfg.n_test, cfg.test_range);
    Ok((train, test))
}

fn synth_split(cfg: &SynthConfig, stream: u64, n: usize, range: (f64, f64)) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut xs: Vec<f64> = (0..n).map(|_| rng.gen_range(range.0..range.1)).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    let noise = Normal::new(0.0, cfg.noise_std.max(f64::MIN_POSITIVE)).expect("positive std");
    let mut ys = Vec::with_capacity(n);
    let mut anomalous = Vec::with_capacity(n);
    for &x in &xs {
        let is_anomaly = rng.gen_bool(cfg.contamination_rate);
        let y = if is_anomaly {
            rng.gen_range(cfg.anomaly_range.0..cfg.anomaly_range.1)
        } else if cfg.noise_std > 0.0 {
            cfg.truth.eval(x) + noise.sample(&mut rng)
        } else {
            cfg.truth.eval(x)
        };
        ys.push(y);
        anomalous.push(is_anomaly);
    }
    LabeledDataset {
        data: Dataset::from_1d(&xs, &ys).expect("finite draws"),
        anomalous,
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<(), DataError> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(DataError::BadConfig(format!(
            "{name} must be a finite interval with lo < hi, got ({lo}, {hi})"
        )))
    }
}

/// Configuration for [`synth_periodic_drift`].
#[derive(Debug, Clone)]
pub struct PeriodicDriftConfig {
    pub seed: u64,
    /// Whole cycles to generate.
    pub days: usize,
    pub samples_per_day: usize,
    /// Duration of one cycle in time units.
    pub period: f64,
    /// Amplitude of a slow drift spanning the whole series once.
    pub trend_scale: f64,
    pub noise_std: f64,
}

impl Default for PeriodicDriftConfig {
    fn default() -> Self {
        PeriodicDriftConfig {
            seed: 0,
            days: 10,
            samples_per_day: 24,
            period: 1.0,
            trend_scale: 0.3,
            noise_std: 0.05,
        }
    }
}

/// Generates a daily-periodic series with slow drift and Gaussian noise.
///
/// The periodic component is evaluated on the per-cycle phase, so with zero
/// trend and zero noise the series repeats bitwise from one cycle to the
/// next.
pub fn synth_periodic_drift(cfg: &PeriodicDriftConfig) -> Result<SeriesTable, DataError> {
    if cfg.days == 0 || cfg.samples_per_day == 0 {
        return Err(DataError::BadConfig(
            "days and samples_per_day must be at least 1".to_string(),
        ));
    }
    if !(cfg.period.is_finite() && cfg.period > 0.0) {
        return Err(DataError::BadConfig(format!(
            "period must be finite and positive, got {}",
            cfg.period
        )));
    }
    if !cfg.trend_scale.is_finite() {
        return Err(DataError::BadConfig("trend_scale must be finite".to_string()));
    }
    if !cfg.noise_std.is_finite() || cfg.noise_std < 0.0 {
        return Err(DataError::BadConfig(format!(
            "noise_std must be finite and nonnegative, got {}",
            cfg.noise_std
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(3);
    let noise = Normal::new(0.0, cfg.noise_std.max(f64::MIN_POSITIVE)).expect("positive std");
    let total = cfg.days * cfg.samples_per_day;
    let mut times = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    for i in 0..total {
        let cycle = (i / cfg.samples_per_day) as f64;
        let phase = (i % cfg.samples_per_day) as f64 / cfg.samples_per_day as f64;
        let tau = 2.0 * std::f64::consts::PI * phase;
        let pattern = tau.sin() + 0.3 * (2.0 * tau).sin();
        let drift =
            cfg.trend_scale * (2.0 * std::f64::consts::PI * i as f64 / total as f64).sin();
        let eps = if cfg.noise_std > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        times.push(Some(cfg.period * (cycle + phase)));
        values.push(Some(pattern + drift + eps));
    }
    let mut table = SeriesTable::new(
        vec!["t".to_string(), "y".to_string()],
        vec![times, values],
        0,
        1,
    )?;
    table.set_provenance(format!(
        "synth_periodic_drift(v{}, {cfg:?})",
        env!("CARGO_PKG_VERSION")
    ));
    Ok(table)
}

/// Removes the y values inside the given half-open time spans, returning
/// the censored table and a ground-truth table holding the removed samples.
///
/// Spans must not overlap (a shared endpoint is fine). Re-inserting the
/// ground-truth values restores the original series exactly.
pub fn censor(
    series: &SeriesTable,
    spans: &[(f64, f64)],
) -> Result<(SeriesTable, SeriesTable), DataError> {
    for &(s, e) in spans {
        if !(s.is_finite() && e.is_finite() && s < e) {
            return Err(DataError::BadConfig(format!(
                "censor span [{s}, {e}) is not a finite interval with start < end"
            )));
        }
    }
    let mut sorted: Vec<(f64, f64)> = spans.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite spans"));
    for w in sorted.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(DataError::OverlappingSpans {
                a0: w[0].0,
                a1: w[0].1,
                b0: w[1].0,
                b1: w[1].1,
            });
        }
    }
    let times = series.time();
    let in_span = |t: f64| sorted.iter().any(|&(s, e)| t >= s && t < e);
    let mut censored_y = series.y().to_vec();
    let mut truth_t = Vec::new();
    let mut truth_y = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        if in_span(t) {
            if let Some(y) = censored_y[i].take() {
                truth_t.push(Some(t));
                truth_y.push(Some(y));
            }
        }
    }
    let censored = series.replace_y(censored_y);
    let mut truth = SeriesTable::new(
        vec![
            series.time_name().to_string(),
            series.y_name().to_string(),
        ],
        vec![truth_t, truth_y],
        0,
        1,
    )?;
    truth.set_provenance(format!(
        "censor(spans={sorted:?}) of [{}]",
        series.provenance().unwrap_or("unknown source")
    ));
    Ok((censored, truth))
}
