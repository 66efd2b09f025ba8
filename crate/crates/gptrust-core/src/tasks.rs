//! Time-series judgment calls built on knowledge profiles: how far a model
//! can extrapolate before its predictions stop being grounded in data, and
//! whether a gap in a recording is short enough to interpolate across.
//!
//! Both analyses scan the knowledge score over a grid and compare it to a
//! caller-chosen threshold `rho`. They assume one-dimensional inputs (time).

use crate::dataio::SeriesTable;
use crate::gpr::{GprError, GprModel};
use crate::knowledge::{knowledge_score, KnowledgeError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("knowledge threshold {value} outside {allowed}")]
    BadThreshold { value: f64, allowed: &'static str },
    #[error("queries per gap must be at least 1")]
    ZeroQueries,
    #[error("bad span ({start}, {end}): need finite start <= end")]
    BadSpan { start: f64, end: f64 },
    #[error("bad scan grid: need finite from < to and step > 0, got from {from}, to {to}, step {step}")]
    BadGrid { from: f64, to: f64, step: f64 },
    #[error("this analysis needs a model over one-dimensional inputs, got dimension {0}")]
    NotOneDimensional(usize),
    #[error("model has no training data")]
    EmptyModel,
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Gpr(#[from] GprError),
}

/// Whether a gap is safe to fill in from the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapDecision {
    Interpolate,
    Reject,
}

impl std::fmt::Display for GapDecision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GapDecision::Interpolate => write!(f, "interpolate"),
            GapDecision::Reject => write!(f, "reject"),
        }
    }
}

/// One model-filled sample inside an accepted gap.
#[derive(Debug, Clone, Copy)]
pub struct ImputedPoint {
    pub location: f64,
    pub mean: f64,
    pub obs_std: f64,
    pub knowledge: f64,
}

/// Verdict for one missing-data gap.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub gap_index: usize,
    /// Half-open time span of the gap.
    pub span: (f64, f64),
    pub length: f64,
    /// Lowest knowledge score over the interior grid.
    pub min_knowledge: f64,
    pub decision: GapDecision,
    /// Model fill-in, present exactly when the gap was accepted.
    pub imputed: Option<Vec<ImputedPoint>>,
}

/// One scanned point of an extrapolation profile.
#[derive(Debug, Clone, Copy)]
pub struct ProfilePoint {
    pub time: f64,
    pub knowledge: f64,
}

/// Where a model's forward predictions stop clearing the threshold.
#[derive(Debug, Clone)]
pub struct HorizonReport {
    pub last_train_time: f64,
    /// First scanned time with knowledge below the threshold, if any
    /// crossing happened inside the scanned range.
    pub horizon: Option<f64>,
    pub profile: Vec<ProfilePoint>,
}

/// Extracts maximal runs of missing y values as half-open time spans.
///
/// A run that ends before the last row closes at the first present sample
/// after it. A run that touches the end of the series has no such sample;
/// it closes one median sampling interval past the last missing timestamp,
/// so its length stays comparable with interior gaps.
pub fn find_missing_segments(series: &SeriesTable) -> Vec<(f64, f64)> {
    let times = series.time();
    let y = series.y();
    let dt = series.median_dt();
    let mut spans = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 0..times.len() {
        match (y[i].is_none(), run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                spans.push((times[s], times[i]));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        spans.push((times[s], times[times.len() - 1] + dt));
    }
    spans
}

/// Queries-per-gap heuristic: one per original sampling interval, floored
/// at nine so even short gaps get their dip resolved.
pub fn default_queries_per_gap(length: f64, sampling_interval: f64) -> usize {
    if sampling_interval > 0.0 && sampling_interval.is_finite() && length.is_finite() {
        ((length / sampling_interval).ceil() as usize).max(9)
    } else {
        9
    }
}

/// Judges each gap by the worst-informed interior point and fills in the
/// accepted ones.
///
/// Knowledge is evaluated on `count` evenly spaced points strictly inside
/// each span; the minimum drives the decision (`Interpolate` iff it reaches
/// `rho`). Prediction runs only for accepted gaps.
pub fn assess_gaps(
    model: &GprModel,
    spans: &[(f64, f64)],
    rho: f64,
    count: usize,
) -> Result<Vec<GapReport>, TaskError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(TaskError::BadThreshold {
            value: rho,
            allowed: "[0, 1]",
        });
    }
    if count == 0 {
        return Err(TaskError::ZeroQueries);
    }
    require_1d(model)?;
    let mut reports = Vec::with_capacity(spans.len());
    for (gap_index, &(start, end)) in spans.iter().enumerate() {
        if !(start.is_finite() && end.is_finite() && start <= end) {
            return Err(TaskError::BadSpan { start, end });
        }
        let grid: Vec<f64> = (0..count)
            .map(|i| start + (end - start) * (i + 1) as f64 / (count + 1) as f64)
            .collect();
        let mut scores = Vec::with_capacity(count);
        for &t in &grid {
            scores.push(knowledge_score(model, &[t])?.value);
        }
        let min_knowledge = scores
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let decision = if min_knowledge >= rho {
            GapDecision::Interpolate
        } else {
            GapDecision::Reject
        };
        let imputed = if decision == GapDecision::Interpolate {
            let queries: Vec<Vec<f64>> = grid.iter().map(|&t| vec![t]).collect();
            let preds = model.predict(&queries)?;
            Some(
                grid.iter()
                    .zip(&preds)
                    .zip(&scores)
                    .map(|((&location, p), &knowledge)| ImputedPoint {
                        location,
                        mean: p.mean,
                        obs_std: p.obs_var.sqrt(),
                        knowledge,
                    })
                    .collect(),
            )
        } else {
            None
        };
        reports.push(GapReport {
            gap_index,
            span: (start, end),
            length: end - start,
            min_knowledge,
            decision,
            imputed,
        });
    }
    Ok(reports)
}

/// Scans knowledge forward over `[from, to]` in steps of `step` and reports
/// the first grid time where it drops below `rho`.
///
/// Later re-crossings (periodic kernels can regain score) are ignored. The
/// horizon is reported at grid resolution; no refinement between grid
/// points is attempted.
pub fn extrapolation_horizon(
    model: &GprModel,
    from: f64,
    to: f64,
    step: f64,
    rho: f64,
) -> Result<HorizonReport, TaskError> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(TaskError::BadThreshold {
            value: rho,
            allowed: "(0, 1]",
        });
    }
    if !(from.is_finite() && to.is_finite() && step.is_finite() && from < to && step > 0.0) {
        return Err(TaskError::BadGrid { from, to, step });
    }
    require_1d(model)?;
    let last_train_time = model
        .train_inputs()
        .iter()
        .map(|x| x[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut profile = Vec::new();
    let mut horizon = None;
    let mut k = 0u64;
    loop {
        let t = from + k as f64 * step;
        if t > to {
            break;
        }
        let g = knowledge_score(model, &[t])?.value;
        profile.push(ProfilePoint { time: t, knowledge: g });
        if horizon.is_none() && g < rho {
            horizon = Some(t);
        }
        k += 1;
    }
    Ok(HorizonReport {
        last_train_time,
        horizon,
        profile,
    })
}

fn require_1d(model: &GprModel) -> Result<(), TaskError> {
    if model.train_inputs().is_empty() {
        return Err(TaskError::EmptyModel);
    }
    let dim = model.train_inputs()[0].len();
    if dim != 1 {
        return Err(TaskError::NotOneDimensional(dim));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpr::{condition, Dataset};
    use crate::kernels::KernelSpec;

    fn table(times: &[f64], y: &[Option<f64>]) -> SeriesTable {
        SeriesTable::new(
            vec!["t".to_string(), "y".to_string()],
            vec![times.iter().map(|&t| Some(t)).collect(), y.to_vec()],
            0,
            1,
        )
        .expect("valid table")
    }

    fn rbf_model(xs: &[f64], len: f64, noise: f64) -> GprModel {
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        condition(
            KernelSpec::Rbf { var: 1.0, len },
            noise,
            &Dataset::from_1d(xs, &ys).expect("finite"),
        )
        .expect("conditioning succeeds")
    }

    #[test]
    fn no_missing_values_means_no_segments() {
        let t = table(&[0.0, 1.0, 2.0], &[Some(1.0), Some(2.0), Some(3.0)]);
        assert!(find_missing_segments(&t).is_empty());
    }

    #[test]
    fn interior_run_closes_at_first_present_sample() {
        let t = table(
            &[0.0, 1.0, 2.0, 3.0],
            &[Some(0.5), None, None, Some(0.25)],
        );
        assert_eq!(find_missing_segments(&t), vec![(1.0, 3.0)]);
    }

    #[test]
    fn alternating_mask_yields_single_sample_segments() {
        let t = table(
            &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            &[Some(0.0), None, Some(0.0), None, Some(0.0), None],
        );
        // The tail run has no following present sample; it closes one
        // median sampling interval (here exactly 1.0) past its start.
        assert_eq!(
            find_missing_segments(&t),
            vec![(1.0, 2.0), (3.0, 4.0), (5.0, 6.0)]
        );
    }

    #[test]
    fn leading_run_starts_at_first_timestamp() {
        let t = table(&[0.0, 1.0, 2.0], &[None, None, Some(1.0)]);
        assert_eq!(find_missing_segments(&t), vec![(0.0, 2.0)]);
    }

    #[test]
    fn default_query_count_floors_at_nine() {
        assert_eq!(default_queries_per_gap(0.5, 1.0), 9);
        assert_eq!(default_queries_per_gap(20.0, 1.0), 20);
        assert_eq!(default_queries_per_gap(20.0, 0.0), 9);
    }

    #[test]
    fn zero_threshold_accepts_every_gap() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let model = rbf_model(&xs, 0.5, 0.01);
        let reports =
            assess_gaps(&model, &[(2.0, 2.5), (4.0, 8.0)], 0.0, 9).expect("assessment runs");
        for r in &reports {
            assert_eq!(r.decision, GapDecision::Interpolate);
            assert!(r.imputed.is_some());
        }
    }

    #[test]
    fn single_query_lands_on_the_midpoint() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let model = rbf_model(&xs, 0.8, 0.01);
        let reports = assess_gaps(&model, &[(3.0, 5.0)], 0.0, 1).expect("assessment runs");
        let direct = knowledge_score(&model, &[4.0]).expect("score").value;
        assert_eq!(reports[0].min_knowledge, direct);
        let imputed = reports[0].imputed.as_ref().expect("accepted");
        assert_eq!(imputed.len(), 1);
        assert_eq!(imputed[0].location, 4.0);
    }

    #[test]
    fn decision_threshold_is_inclusive() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let model = rbf_model(&xs, 0.8, 0.01);
        let probe = assess_gaps(&model, &[(3.0, 5.0)], 0.0, 7).expect("probe")[0].min_knowledge;
        let at = assess_gaps(&model, &[(3.0, 5.0)], probe, 7).expect("at threshold");
        assert_eq!(at[0].decision, GapDecision::Interpolate);
        let above = assess_gaps(
            &model,
            &[(3.0, 5.0)],
            (probe + 1e-9).min(1.0),
            7,
        )
        .expect("just above");
        assert_eq!(above[0].decision, GapDecision::Reject);
        assert!(above[0].imputed.is_none());
    }

    #[test]
    fn imputed_samples_match_direct_prediction() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.3).collect();
        let model = rbf_model(&xs, 0.7, 0.05);
        let reports = assess_gaps(&model, &[(2.0, 4.0)], 0.0, 5).expect("assessment runs");
        let imputed = reports[0].imputed.as_ref().expect("accepted");
        for p in imputed {
            let direct = model.predict_one(&[p.location]).expect("predict");
            assert_eq!(p.mean, direct.mean);
            assert_eq!(p.obs_std, direct.obs_var.sqrt());
        }
    }

    #[test]
    fn short_gaps_keep_more_knowledge_than_long_ones() {
        // Dense series on [0, 10] with two holes: one of half a length
        // scale, one of ten length scales.
        let len = 0.3;
        let short = (2.0, 2.0 + 0.5 * len);
        let long = (5.0, 5.0 + 10.0 * len);
        let xs: Vec<f64> = (0..=200)
            .map(|i| i as f64 * 0.05)
            .filter(|&t| !(t >= short.0 && t < short.1) && !(t >= long.0 && t < long.1))
            .collect();
        let model = rbf_model(&xs, len, 0.01);
        let reports = assess_gaps(&model, &[short, long], 0.0, 15).expect("assessment runs");
        assert!(
            reports[0].min_knowledge > reports[1].min_knowledge,
            "short gap {} should beat long gap {}",
            reports[0].min_knowledge,
            reports[1].min_knowledge
        );
        assert!(reports[1].min_knowledge < 0.5);
        assert!(reports[0].min_knowledge > 0.5);
    }

    #[test]
    fn knowledge_dip_is_symmetric_for_symmetric_data() {
        // Training points are mirror images around t = 5, so the knowledge
        // profile inside the hole must be symmetric about the midpoint.
        let xs = [0.0, 1.0, 2.0, 3.0, 7.0, 8.0, 9.0, 10.0];
        let model = rbf_model(&xs, 1.5, 0.01);
        let reports = assess_gaps(&model, &[(3.0, 7.0)], 0.0, 9).expect("assessment runs");
        let g: Vec<f64> = reports[0]
            .imputed
            .as_ref()
            .expect("accepted at rho 0")
            .iter()
            .map(|p| p.knowledge)
            .collect();
        for i in 0..g.len() / 2 {
            let diff = (g[i] - g[g.len() - 1 - i]).abs();
            assert!(diff <= 1e-8, "asymmetry {diff} at offset {i}");
        }
    }

    #[test]
    fn widening_a_gap_never_raises_min_knowledge() {
        let widths = [0.5, 1.0, 2.0, 4.0];
        let mut mins = Vec::new();
        for &w in &widths {
            let span = (5.0 - w / 2.0, 5.0 + w / 2.0);
            let xs: Vec<f64> = (0..=100)
                .map(|i| i as f64 * 0.1)
                .filter(|&t| !(t >= span.0 && t < span.1))
                .collect();
            let model = rbf_model(&xs, 0.6, 0.01);
            mins.push(
                assess_gaps(&model, &[span], 0.0, 11).expect("assessment runs")[0].min_knowledge,
            );
        }
        for pair in mins.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-8,
                "widened gap raised min knowledge: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn threshold_above_profile_crosses_immediately() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let model = rbf_model(&xs, 0.2, 0.5);
        // With substantial noise the score never reaches 1, so rho = 1
        // crosses at the very first grid point.
        let report = extrapolation_horizon(&model, 0.0, 2.0, 0.1, 1.0).expect("scan runs");
        assert_eq!(report.horizon, Some(0.0));
        assert_eq!(report.profile[0].time, 0.0);
    }

    #[test]
    fn rbf_horizon_sits_within_half_a_unit_of_the_data_edge() {
        let xs: Vec<f64> = (0..=50).map(|i| i as f64 * 0.02).collect();
        let model = rbf_model(&xs, 0.1, 1e-4);
        let report = extrapolation_horizon(&model, 1.0, 3.0, 0.01, 0.5).expect("scan runs");
        assert_eq!(report.last_train_time, 1.0);
        let h = report.horizon.expect("knowledge decays past the data");
        assert!(h > 1.0 && h < 1.5, "horizon {h} out of expected band");
        // The crossing must actually bracket the threshold at grid
        // resolution.
        let idx = report
            .profile
            .iter()
            .position(|p| p.time == h)
            .expect("horizon is a grid point");
        assert!(report.profile[idx].knowledge < 0.5);
        assert!(report.profile[idx - 1].knowledge >= 0.5);
    }

    #[test]
    fn first_crossing_wins_even_if_knowledge_recovers() {
        // Training covers only phases [0, 0.4] of a period-1 kernel, so
        // knowledge dips at unseen phases and recovers at seen ones. The
        // reported horizon must be the first dip, not the last.
        let xs: Vec<f64> = (0..=24).map(|i| i as f64 * 0.4 / 24.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| (2.0 * std::f64::consts::PI * x).sin())
            .collect();
        let model = condition(
            KernelSpec::Periodic {
                var: 1.0,
                period: 1.0,
                len: 0.6,
            },
            1e-4,
            &Dataset::from_1d(&xs, &ys).expect("finite"),
        )
        .expect("conditioning succeeds");
        let report = extrapolation_horizon(&model, 1.0, 3.0, 0.05, 0.9).expect("scan runs");
        let h = report
            .horizon
            .expect("unseen phases must dip below the threshold");
        let recovered = report
            .profile
            .iter()
            .any(|p| p.time > h && p.knowledge >= 0.9);
        assert!(
            recovered,
            "knowledge should recover at trained phases after the first dip"
        );
        // Every grid point before the crossing clears the threshold.
        for p in report.profile.iter().take_while(|p| p.time < h) {
            assert!(p.knowledge >= 0.9);
        }
    }

    #[test]
    fn bad_arguments_are_rejected() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let model = rbf_model(&xs, 1.0, 0.01);
        assert!(matches!(
            assess_gaps(&model, &[(0.0, 1.0)], -0.1, 5),
            Err(TaskError::BadThreshold { .. })
        ));
        assert!(matches!(
            assess_gaps(&model, &[(0.0, 1.0)], 0.5, 0),
            Err(TaskError::ZeroQueries)
        ));
        assert!(matches!(
            assess_gaps(&model, &[(2.0, 1.0)], 0.5, 5),
            Err(TaskError::BadSpan { .. })
        ));
        assert!(matches!(
            extrapolation_horizon(&model, 0.0, 1.0, 0.1, 0.0),
            Err(TaskError::BadThreshold { .. })
        ));
        assert!(matches!(
            extrapolation_horizon(&model, 1.0, 0.0, 0.1, 0.5),
            Err(TaskError::BadGrid { .. })
        ));
        assert!(matches!(
            extrapolation_horizon(&model, 0.0, 1.0, -0.1, 0.5),
            Err(TaskError::BadGrid { .. })
        ));
        let flat = condition(
            KernelSpec::Rbf { var: 1.0, len: 1.0 },
            0.01,
            &Dataset::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.0, 1.0]).expect("valid"),
        )
        .expect("conditioning succeeds");
        assert!(matches!(
            assess_gaps(&flat, &[(0.0, 1.0)], 0.5, 5),
            Err(TaskError::NotOneDimensional(2))
        ));
        let empty = condition(
            KernelSpec::Rbf { var: 1.0, len: 1.0 },
            0.01,
            &Dataset::new(vec![], vec![]).expect("valid"),
        )
        .expect("conditioning succeeds");
        assert!(matches!(
            extrapolation_horizon(&empty, 0.0, 1.0, 0.1, 0.5),
            Err(TaskError::EmptyModel)
        ));
    }
}
