//! Anomaly detection against the posterior predictive, with a reject
//! option driven by the knowledge score.
//!
//! Stage 1 asks whether the model knows enough at the query (`G >= rho`);
//! if not, the verdict is [`TriageLabel::Unknown`] rather than a forced
//! call. Stage 2 flags an observation as anomalous when its residual
//! exceeds `multiplier` predictive standard deviations. ROC evaluation
//! ranks points by the unit-free score `residual / threshold` and is
//! computed over admitted (non-rejected) samples only.

use crate::gpr::{GprModel, PredictiveDistribution};
use crate::knowledge::{knowledge_score, KnowledgeError, KnowledgeScore};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnomalyError {
    #[error("threshold multiplier must be finite and positive, got {0}")]
    BadMultiplier(f64),
    #[error("knowledge floor rho must lie in [0, 1], got {0}")]
    BadRho(f64),
    #[error("observed value must be finite, got {0}")]
    BadObservation(f64),
    #[error("scores, labels, and admission flags disagree in length: {scores}, {labels}, {admitted}")]
    LengthMismatch {
        scores: usize,
        labels: usize,
        admitted: usize,
    },
    #[error("ROC is degenerate: admitted samples contain {normals} normals and {anomalies} anomalies")]
    DegenerateRoc { normals: usize, anomalies: usize },
    #[error("rho grid must be ascending within [0, 1]; offending value {0}")]
    BadGrid(f64),
    #[error("score {0} is not comparable (NaN)")]
    UnrankableScore(f64),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Gpr(#[from] crate::gpr::GprError),
}

/// Outcome of the two-stage triage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriageLabel {
    Normal,
    Anomaly,
    /// The model does not know enough at this query to judge.
    Unknown,
}

impl std::fmt::Display for TriageLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TriageLabel::Normal => "normal",
            TriageLabel::Anomaly => "anomaly",
            TriageLabel::Unknown => "unknown",
        })
    }
}

/// Plain threshold detection result (no reject option).
#[derive(Debug, Clone, Copy)]
pub struct Detection {
    pub is_anomaly: bool,
    /// `|observed - predicted mean|` in output units.
    pub residual: f64,
    /// `multiplier * sqrt(obs_var)` in output units.
    pub threshold: f64,
    pub predicted: PredictiveDistribution,
}

/// Full two-stage verdict; residual and threshold are reported even for
/// `Unknown` so rejected points remain inspectable.
#[derive(Debug, Clone, Copy)]
pub struct TriageVerdict {
    pub label: TriageLabel,
    pub knowledge: KnowledgeScore,
    pub residual: f64,
    pub threshold: f64,
    pub predicted: PredictiveDistribution,
}

/// The detection threshold at a query: `multiplier` predictive standard
/// deviations of a new observation there.
pub fn anomaly_threshold(
    model: &GprModel,
    query: &[f64],
    multiplier: f64,
) -> Result<f64, AnomalyError> {
    check_multiplier(multiplier)?;
    let p = model.predict_one(query)?;
    Ok(multiplier * p.obs_var.sqrt())
}

/// Flags `observed` as anomalous when its residual strictly exceeds the
/// threshold; a residual exactly at the threshold stays normal.
pub fn detect(
    model: &GprModel,
    query: &[f64],
    observed: f64,
    multiplier: f64,
) -> Result<Detection, AnomalyError> {
    check_multiplier(multiplier)?;
    if !observed.is_finite() {
        return Err(AnomalyError::BadObservation(observed));
    }
    let predicted = model.predict_one(query)?;
    let residual = (observed - predicted.mean).abs();
    let threshold = multiplier * predicted.obs_var.sqrt();
    Ok(Detection {
        is_anomaly: residual > threshold,
        residual,
        threshold,
        predicted,
    })
}

/// Two-stage triage: reject to `Unknown` when the knowledge score falls
/// below `rho`, otherwise apply threshold detection.
pub fn two_stage_detect(
    model: &GprModel,
    query: &[f64],
    observed: f64,
    rho: f64,
    multiplier: f64,
) -> Result<TriageVerdict, AnomalyError> {
    check_rho(rho)?;
    let knowledge = knowledge_score(model, query)?;
    let d = detect(model, query, observed, multiplier)?;
    let label = if knowledge.value < rho {
        TriageLabel::Unknown
    } else if d.is_anomaly {
        TriageLabel::Anomaly
    } else {
        TriageLabel::Normal
    };
    Ok(TriageVerdict {
        label,
        knowledge,
        residual: d.residual,
        threshold: d.threshold,
        predicted: d.predicted,
    })
}

/// A receiver operating characteristic over admitted samples.
#[derive(Debug, Clone)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` points, starting at
    /// `(0, 0)` and ending at `(1, 1)`, tied scores grouped into one step.
    pub points: Vec<(f64, f64)>,
    /// Trapezoidal area under the curve, in `[0, 1]`.
    pub auc: f64,
    /// Number of admitted samples the curve is built from.
    pub n_used: usize,
    pub n_total: usize,
}

/// Builds a ROC curve from anomaly scores (higher = more anomalous), true
/// labels (`true` = anomaly), and per-sample admission flags.
///
/// Requires at least one admitted sample of each class.
pub fn roc_curve(
    scores: &[f64],
    labels: &[bool],
    admitted: &[bool],
) -> Result<RocCurve, AnomalyError> {
    if scores.len() != labels.len() || scores.len() != admitted.len() {
        return Err(AnomalyError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
            admitted: admitted.len(),
        });
    }
    let mut used: Vec<(f64, bool)> = scores
        .iter()
        .zip(labels)
        .zip(admitted)
        .filter(|&(_, &a)| a)
        .map(|((&s, &l), _)| (s, l))
        .collect();
    for (s, _) in &used {
        if s.is_nan() {
            return Err(AnomalyError::UnrankableScore(*s));
        }
    }
    let n_used = used.len();
    let anomalies = used.iter().filter(|(_, l)| *l).count();
    let normals = n_used - anomalies;
    if anomalies == 0 || normals == 0 {
        return Err(AnomalyError::DegenerateRoc { normals, anomalies });
    }
    used.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("NaN scores rejected above"));

    let mut points = vec![(0.0, 0.0)];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < used.len() {
        // Consume a whole tie group before emitting a point.
        let score = used[i].0;
        while i < used.len() && used[i].0 == score {
            if used[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / normals as f64, tp as f64 / anomalies as f64));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    Ok(RocCurve {
        points,
        auc,
        n_used,
        n_total: scores.len(),
    })
}

/// One row of a knowledge-floor sweep.
#[derive(Debug, Clone, Copy)]
pub struct RhoSweepRow {
    pub rho: f64,
    /// Samples admitted at this floor (`G >= rho`).
    pub n_used: usize,
    /// Absent when the admitted set lacks one of the classes.
    pub auc: Option<f64>,
}

/// Sweeps the knowledge floor over an ascending `grid`, reporting how many
/// labeled samples stay admitted and the ROC AUC over them.
///
/// Scores and knowledge values are computed once; only the admission mask
/// varies with `rho`.
pub fn sweep_rho(
    model: &GprModel,
    inputs: &[Vec<f64>],
    outputs: &[f64],
    labels: &[bool],
    multiplier: f64,
    grid: &[f64],
) -> Result<Vec<RhoSweepRow>, AnomalyError> {
    check_multiplier(multiplier)?;
    if inputs.len() != outputs.len() || inputs.len() != labels.len() {
        return Err(AnomalyError::LengthMismatch {
            scores: inputs.len(),
            labels: labels.len(),
            admitted: outputs.len(),
        });
    }
    let mut prev = f64::NEG_INFINITY;
    for &r in grid {
        if !(0.0..=1.0).contains(&r) || r <= prev {
            return Err(AnomalyError::BadGrid(r));
        }
        prev = r;
    }
    let mut scores = Vec::with_capacity(inputs.len());
    let mut knowledge = Vec::with_capacity(inputs.len());
    for (x, &y) in inputs.iter().zip(outputs) {
        let d = detect(model, x, y, multiplier)?;
        scores.push(anomaly_rank_score(d.residual, d.threshold));
        knowledge.push(knowledge_score(model, x)?.value);
    }
    Ok(grid
        .iter()
        .map(|&rho| {
            let admitted: Vec<bool> = knowledge.iter().map(|&g| g >= rho).collect();
            let n_used = admitted.iter().filter(|a| **a).count();
            let auc = roc_curve(&scores, labels, &admitted).ok().map(|c| c.auc);
            RhoSweepRow { rho, n_used, auc }
        })
        .collect())
}

/// Unit-free ranking score. A zero threshold (noiseless, fully known point)
/// maps a nonzero residual to infinity and a zero residual to zero.
pub fn anomaly_rank_score(residual: f64, threshold: f64) -> f64 {
    if threshold > 0.0 {
        residual / threshold
    } else if residual > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn check_multiplier(multiplier: f64) -> Result<(), AnomalyError> {
    if multiplier.is_finite() && multiplier > 0.0 {
        Ok(())
    } else {
        Err(AnomalyError::BadMultiplier(multiplier))
    }
}

fn check_rho(rho: f64) -> Result<(), AnomalyError> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(AnomalyError::BadRho(rho))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpr::{condition, Dataset};
    use crate::kernels::KernelSpec;
    use approx::assert_relative_eq;

    fn rbf(var: f64, len: f64) -> KernelSpec {
        KernelSpec::Rbf { var, len }
    }

    fn prior_model(var: f64, noise: f64) -> crate::gpr::GprModel {
        condition(rbf(var, 1.0), noise, &Dataset::new(vec![], vec![]).unwrap()).unwrap()
    }

    #[test]
    fn threshold_by_hand_on_prior() {
        // 3 * sqrt(1 + 0.25)
        let m = prior_model(1.0, 0.25);
        assert_relative_eq!(
            anomaly_threshold(&m, &[0.0], 3.0).unwrap(),
            3.3541019662496847,
            max_relative = 1e-15
        );
    }

    #[test]
    fn bad_multiplier_and_rho_are_rejected() {
        let m = prior_model(1.0, 0.1);
        assert!(anomaly_threshold(&m, &[0.0], 0.0).is_err());
        assert!(anomaly_threshold(&m, &[0.0], -1.0).is_err());
        assert!(detect(&m, &[0.0], f64::NAN, 3.0).is_err());
        assert!(two_stage_detect(&m, &[0.0], 0.0, 1.5, 3.0).is_err());
    }

    #[test]
    fn residual_exactly_at_threshold_stays_normal() {
        let m = prior_model(1.0, 0.25);
        let theta = anomaly_threshold(&m, &[0.0], 3.0).unwrap();
        let d = detect(&m, &[0.0], theta, 3.0).unwrap();
        assert!(!d.is_anomaly);
        let d = detect(&m, &[0.0], theta + 1e-6, 3.0).unwrap();
        assert!(d.is_anomaly);
    }

    #[test]
    fn prior_model_flags_wild_value() {
        let m = prior_model(1.0, 0.25);
        let d = detect(&m, &[0.3], 4.0, 3.0).unwrap();
        assert!(d.is_anomaly);
        assert_eq!(d.residual, 4.0);
    }

    #[test]
    fn noiseless_training_point_has_zero_threshold() {
        let data = Dataset::from_1d(&[0.0], &[2.0]).unwrap();
        let m = condition(rbf(1.0, 1.0), 0.0, &data).unwrap();
        let theta = anomaly_threshold(&m, &[0.0], 3.0).unwrap();
        assert!(theta <= 1e-6, "threshold {theta}");
    }

    #[test]
    fn rho_zero_never_rejects_and_matches_detect() {
        let data = Dataset::from_1d(&[0.0, 0.5, 1.0], &[0.1, -0.2, 0.3]).unwrap();
        let m = condition(rbf(1.0, 0.4), 0.01, &data).unwrap();
        for (q, y) in [(0.2, 0.05), (0.9, 2.5), (4.0, 0.0), (6.0, 5.0)] {
            let v = two_stage_detect(&m, &[q], y, 0.0, 3.0).unwrap();
            let d = detect(&m, &[q], y, 3.0).unwrap();
            assert_ne!(v.label, TriageLabel::Unknown);
            assert_eq!(v.label == TriageLabel::Anomaly, d.is_anomaly);
            assert_eq!(v.residual, d.residual);
            assert_eq!(v.threshold, d.threshold);
        }
    }

    #[test]
    fn off_data_query_rejects_at_full_floor() {
        let data = Dataset::from_1d(&[0.0, 0.1, 0.2], &[0.0, 0.1, 0.0]).unwrap();
        let m = condition(rbf(1.0, 0.1), 0.05, &data).unwrap();
        let v = two_stage_detect(&m, &[3.0], 0.0, 1.0, 3.0).unwrap();
        assert_eq!(v.label, TriageLabel::Unknown);
        // Diagnostics still populated for rejected points.
        assert!(v.threshold > 0.0);
    }

    #[test]
    fn label_tracks_knowledge_against_rho() {
        let data = Dataset::from_1d(&[0.0, 0.3, 0.6], &[0.1, 0.0, -0.1]).unwrap();
        let m = condition(rbf(1.0, 0.3), 0.01, &data).unwrap();
        for q in [0.1, 0.8, 1.5, 3.0] {
            for rho in [0.0, 0.25, 0.5, 0.9, 1.0] {
                let v = two_stage_detect(&m, &[q], 0.0, rho, 3.0).unwrap();
                assert_eq!(v.label == TriageLabel::Unknown, v.knowledge.value < rho);
            }
        }
    }

    #[test]
    fn roc_perfect_separation() {
        let scores = [5.0, 4.0, 3.0, 0.5, 0.2, 0.1];
        let labels = [true, true, true, false, false, false];
        let admitted = [true; 6];
        let roc = roc_curve(&scores, &labels, &admitted).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(*roc.points.first().unwrap(), (0.0, 0.0));
        assert_eq!(*roc.points.last().unwrap(), (1.0, 1.0));
        assert_eq!(roc.n_used, 6);
    }

    #[test]
    fn roc_ties_collapse_into_one_step() {
        // All scores equal: the curve is the diagonal corner point only.
        let scores = [1.0, 1.0, 1.0, 1.0];
        let labels = [true, false, true, false];
        let roc = roc_curve(&scores, &labels, &[true; 4]).unwrap();
        assert_eq!(roc.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_relative_eq!(roc.auc, 0.5);
    }

    #[test]
    fn roc_is_invariant_under_monotone_score_transforms() {
        let scores = [0.3, 2.5, 0.9, 1.1, 0.05, 1.7];
        let labels = [false, true, false, true, false, true];
        let a = roc_curve(&scores, &labels, &[true; 6]).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|s| s.tanh()).collect();
        let b = roc_curve(&squashed, &labels, &[true; 6]).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.auc, b.auc);
    }

    #[test]
    fn roc_excludes_unadmitted_samples() {
        let scores = [9.0, 8.0, 1.0, 0.5];
        let labels = [true, false, true, false];
        // Drop the confusing high-scoring normal.
        let roc = roc_curve(&scores, &labels, &[true, false, true, true]).unwrap();
        assert_eq!(roc.n_used, 3);
        assert_eq!(roc.n_total, 4);
        assert_eq!(roc.auc, 1.0);
    }

    #[test]
    fn degenerate_roc_is_an_error() {
        let e = roc_curve(&[1.0, 2.0], &[true, true], &[true, true]).unwrap_err();
        assert!(matches!(
            e,
            AnomalyError::DegenerateRoc {
                normals: 0,
                anomalies: 2
            }
        ));
    }

    #[test]
    fn random_scores_give_chance_auc() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        let roc = roc_curve(&scores, &labels, &vec![true; n]).unwrap();
        assert!((roc.auc - 0.5).abs() < 0.02, "auc {}", roc.auc);
    }

    #[test]
    fn sweep_rows_shrink_with_rho() {
        let xs: Vec<f64> = (0..15).map(|i| i as f64 * 0.08).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x).sin()).collect();
        let m = condition(rbf(1.0, 0.15), 0.01, &Dataset::from_1d(&xs, &ys).unwrap()).unwrap();
        // Half the queries on-data, half far off; alternate labels so no
        // admitted set is single-class.
        let mut qs = Vec::new();
        let mut obs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let on = i % 2 == 0;
            let x = if on { 0.56 } else { 3.0 + i as f64 };
            qs.push(vec![x]);
            let anomalous = i % 4 < 2;
            obs.push(if anomalous { 4.0 } else { 0.0 });
            labels.push(anomalous);
        }
        let rows = sweep_rho(&m, &qs, &obs, &labels, 3.0, &[0.0, 0.5, 0.9]).unwrap();
        assert_eq!(rows[0].n_used, 10);
        assert!(rows[1].n_used < rows[0].n_used);
        assert!(rows
            .windows(2)
            .all(|w| w[1].n_used <= w[0].n_used));
    }

    #[test]
    fn sweep_rejects_unsorted_grid() {
        let m = prior_model(1.0, 0.1);
        let e = sweep_rho(&m, &[], &[], &[], 3.0, &[0.5, 0.25]).unwrap_err();
        assert!(matches!(e, AnomalyError::BadGrid(_)));
        let e = sweep_rho(&m, &[], &[], &[], 3.0, &[0.5, 1.5]).unwrap_err();
        assert!(matches!(e, AnomalyError::BadGrid(_)));
    }

    #[test]
    fn verdict_scale_equivariance_under_power_of_two() {
        // Scaling outputs by 2 and (var, noise) by 4 scales residual and
        // threshold exactly and must not flip any verdict.
        let xs: Vec<f64> = (0..12).map(|i| i as f64 * 0.25).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (2.1 * x).cos()).collect();
        let y2: Vec<f64> = ys.iter().map(|y| 2.0 * y).collect();
        let m1 = condition(rbf(1.0, 0.5), 0.04, &Dataset::from_1d(&xs, &ys).unwrap()).unwrap();
        let m2 = condition(rbf(4.0, 0.5), 0.16, &Dataset::from_1d(&xs, &y2).unwrap()).unwrap();
        for (q, y) in [(0.4, 0.9), (1.3, -0.4), (2.6, 2.0), (5.0, 1.0)] {
            let v1 = two_stage_detect(&m1, &[q], y, 0.4, 3.0).unwrap();
            let v2 = two_stage_detect(&m2, &[q], 2.0 * y, 0.4, 3.0).unwrap();
            assert_eq!(v1.label, v2.label, "verdict flipped at x = {q}");
            assert_relative_eq!(2.0 * v1.residual, v2.residual, max_relative = 1e-12);
            assert_relative_eq!(2.0 * v1.threshold, v2.threshold, max_relative = 1e-12);
        }
    }
}
