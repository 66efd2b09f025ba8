//! The canned benchmark studies behind `gptrust experiment`. Each one is a
//! pure function of its seed: synthetic data, fitting, and analysis all run
//! from seeded generators, so a repeated run writes bitwise identical
//! outputs. Files go through the caller's [`OutputGuard`]; the caller adds
//! the manifest.

use gptrust_core::anomaly::{
    anomaly_rank_score, detect, roc_curve, AnomalyError, RhoSweepRow,
};
use gptrust_core::dataio::{
    censor, synth_periodic_drift, synth_toy_anomaly, to_csv_string, LabeledDataset,
    PeriodicDriftConfig, SynthConfig,
};
use gptrust_core::tasks::{
    assess_gaps, default_queries_per_gap, extrapolation_horizon, find_missing_segments, GapReport,
};
use gptrust_core::{fit, knowledge_score, Dataset, FitOptions, GprModel, KernelSpec};

use crate::error::{data_err, fit_err, numerics_err, task_err, CliError};
use crate::output::{csv_text, fmt_f, OutputGuard};

/// Sweep results of the anomaly study, one row per knowledge floor.
#[derive(Debug)]
pub struct ToyAnomalyOutcome {
    pub sweep: Vec<RhoSweepRow>,
}

/// Decay measurements of the forecasting study.
#[derive(Debug)]
pub struct ForecastDecayOutcome {
    /// Training data ends here; the scan starts here.
    pub cutoff: f64,
    /// Fitted length scale of the locally periodic envelope.
    pub envelope_len: f64,
    /// Maximum knowledge over each of the first three cycles past the
    /// cutoff.
    pub period_maxima: Vec<f64>,
    /// Knowledge ten envelope lengths past the cutoff.
    pub g_at_ten_lengths: f64,
    /// First scan time where knowledge drops below 0.5, if any.
    pub horizon: Option<f64>,
}

/// Prediction error over one censored gap, measured against the withheld
/// ground truth.
#[derive(Debug, Clone, Copy)]
pub struct GapRmse {
    pub gap_index: usize,
    pub rmse: f64,
    pub n: usize,
}

/// Triage verdicts and truth-based errors of the gap study.
#[derive(Debug)]
pub struct GapTriageOutcome {
    pub reports: Vec<GapReport>,
    pub rmse: Vec<GapRmse>,
}

fn labeled_csv(split: &LabeledDataset) -> String {
    let rows: Vec<String> = split
        .data
        .inputs()
        .iter()
        .zip(split.data.outputs())
        .zip(&split.anomalous)
        .map(|((x, &y), &a)| format!("{},{},{}", fmt_f(x[0]), fmt_f(y), u8::from(a)))
        .collect();
    csv_text(&[], "x,y,anomalous", &rows)
}

fn write_model(guard: &mut OutputGuard, model: &GprModel) -> Result<(), CliError> {
    guard.write("model.json", &(model.to_json() + "\n"))?;
    Ok(())
}

/// Contaminated test points scored by a model trained on clean data only,
/// with ROC curves at several knowledge floors. Admitting only points the
/// model knows trades coverage for ranking quality.
pub fn run_toy_anomaly(seed: u64, guard: &mut OutputGuard) -> Result<ToyAnomalyOutcome, CliError> {
    let cfg = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    let (train, test) = synth_toy_anomaly(&cfg).map_err(data_err)?;
    let clean = train.normals_only();
    let template = KernelSpec::Rbf { var: 1.0, len: 0.3 };
    let opts = FitOptions {
        seed,
        restarts: 4,
        max_iters: 150,
        ..FitOptions::default()
    };
    let model = fit(&clean, &template, &opts).map_err(fit_err)?;
    let multiplier = 3.0;

    let mut scores = Vec::with_capacity(test.len());
    let mut knowledge = Vec::with_capacity(test.len());
    for (x, &y) in test.data.inputs().iter().zip(test.data.outputs()) {
        let d = detect(&model, x, y, multiplier).map_err(numerics_err)?;
        scores.push(anomaly_rank_score(d.residual, d.threshold));
        knowledge.push(knowledge_score(&model, x).map_err(numerics_err)?.value);
    }

    guard.write("train.csv", &labeled_csv(&train))?;
    guard.write("test.csv", &labeled_csv(&test))?;
    let score_rows: Vec<String> = test
        .data
        .inputs()
        .iter()
        .zip(test.data.outputs())
        .zip(test.anomalous.iter().zip(scores.iter().zip(&knowledge)))
        .map(|((x, &y), (&a, (&s, &g)))| {
            format!(
                "{},{},{},{},{}",
                fmt_f(x[0]),
                fmt_f(y),
                u8::from(a),
                fmt_f(s),
                fmt_f(g)
            )
        })
        .collect();
    guard.write(
        "scores.csv",
        &csv_text(
            &[format!("multiplier={multiplier}")],
            "x,y,anomalous,score,knowledge",
            &score_rows,
        ),
    )?;

    let mut sweep = Vec::new();
    let mut summary_rows = Vec::new();
    for rho in [0.0, 0.25, 0.5, 0.75] {
        let admitted: Vec<bool> = knowledge.iter().map(|&g| g >= rho).collect();
        let n_used = admitted.iter().filter(|&&a| a).count();
        let file = format!("roc_rho_{rho:.2}.csv");
        let row = match roc_curve(&scores, &test.anomalous, &admitted) {
            Ok(curve) => {
                let rows: Vec<String> = curve
                    .points
                    .iter()
                    .map(|&(fpr, tpr)| format!("{},{}", fmt_f(fpr), fmt_f(tpr)))
                    .collect();
                let comments = vec![
                    format!("rho={rho}"),
                    format!("auc={}", curve.auc),
                    format!("n_used={} of {}", curve.n_used, curve.n_total),
                ];
                guard.write(&file, &csv_text(&comments, "fpr,tpr", &rows))?;
                RhoSweepRow {
                    rho,
                    n_used: curve.n_used,
                    auc: Some(curve.auc),
                }
            }
            Err(AnomalyError::DegenerateRoc { .. }) => {
                let comments = vec![
                    format!("rho={rho}"),
                    "auc undefined: admitted points are all one class".to_string(),
                ];
                guard.write(&file, &csv_text(&comments, "fpr,tpr", &[]))?;
                RhoSweepRow {
                    rho,
                    n_used,
                    auc: None,
                }
            }
            Err(e) => return Err(numerics_err(e)),
        };
        summary_rows.push(format!(
            "{},{},{}",
            fmt_f(row.rho),
            row.n_used,
            row.auc.map(fmt_f).unwrap_or_default()
        ));
        sweep.push(row);
    }
    guard.write(
        "summary.csv",
        &csv_text(&[], "rho,n_used,auc", &summary_rows),
    )?;
    write_model(guard, &model)?;
    Ok(ToyAnomalyOutcome { sweep })
}

/// A locally periodic model trained on seven cycles of a drifting daily
/// series, then scanned forward: knowledge decays cycle over cycle and is
/// essentially gone ten envelope lengths out.
pub fn run_forecast_decay(
    seed: u64,
    guard: &mut OutputGuard,
) -> Result<ForecastDecayOutcome, CliError> {
    let cfg = PeriodicDriftConfig {
        seed,
        ..PeriodicDriftConfig::default()
    };
    let series = synth_periodic_drift(&cfg).map_err(data_err)?;
    let cutoff = 7.0 * cfg.period;
    let times = series.time();
    let values = series.y();
    let mut train_t = Vec::new();
    let mut train_y = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        if t < cutoff {
            if let Some(y) = values[i] {
                train_t.push(t);
                train_y.push(y);
            }
        }
    }
    let train = Dataset::from_1d(&train_t, &train_y).map_err(data_err)?;
    let template = KernelSpec::LocallyPeriodic {
        var: 1.0,
        period: cfg.period,
        len: 3.0,
        plen: 1.0,
    };
    let opts = FitOptions {
        seed,
        restarts: 3,
        max_iters: 150,
        ..FitOptions::default()
    };
    let model = fit(&train, &template, &opts).map_err(fit_err)?;
    let envelope_len = match model.kernel() {
        KernelSpec::LocallyPeriodic { len, .. } => *len,
        other => {
            return Err(numerics_err(format!(
                "fit changed the kernel shape to {other}"
            )))
        }
    };

    let rho = 0.5;
    let step = cfg.period / cfg.samples_per_day as f64;
    let t_far = cutoff + 10.0 * envelope_len;
    let to = (cutoff + 3.0 * cfg.period).max(t_far) + step;
    let report = extrapolation_horizon(&model, cutoff, to, step, rho).map_err(task_err)?;
    let mut period_maxima = Vec::with_capacity(3);
    for k in 0..3 {
        let lo = cutoff + k as f64 * cfg.period;
        let hi = lo + cfg.period;
        let max = report
            .profile
            .iter()
            .filter(|p| p.time >= lo && p.time < hi)
            .map(|p| p.knowledge)
            .fold(f64::NEG_INFINITY, f64::max);
        period_maxima.push(max);
    }
    let g_at_ten_lengths = knowledge_score(&model, &[t_far])
        .map_err(numerics_err)?
        .value;

    guard.write("series.csv", &to_csv_string(&series))?;
    let train_rows: Vec<String> = train_t
        .iter()
        .zip(&train_y)
        .map(|(&t, &y)| format!("{},{}", fmt_f(t), fmt_f(y)))
        .collect();
    guard.write(
        "train.csv",
        &csv_text(&[format!("training slice t < {cutoff}")], "t,y", &train_rows),
    )?;
    write_model(guard, &model)?;
    let profile_rows: Vec<String> = report
        .profile
        .iter()
        .map(|p| format!("{},{}", fmt_f(p.time), fmt_f(p.knowledge)))
        .collect();
    let horizon_text = match report.horizon {
        Some(t) => format!("{t}"),
        None => "not crossed".to_string(),
    };
    guard.write(
        "profile.csv",
        &csv_text(
            &[
                format!("rho={rho}"),
                format!("cutoff={cutoff}"),
                format!("horizon={horizon_text}"),
            ],
            "t,knowledge",
            &profile_rows,
        ),
    )?;
    let decay_rows: Vec<String> = period_maxima
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let lo = cutoff + k as f64 * cfg.period;
            format!("{k},{},{},{}", fmt_f(lo), fmt_f(lo + cfg.period), fmt_f(m))
        })
        .collect();
    guard.write(
        "decay.csv",
        &csv_text(
            &[format!(
                "knowledge at t={t_far} (ten envelope lengths out): {g_at_ten_lengths}"
            )],
            "cycle_index,t_start,t_end,max_knowledge",
            &decay_rows,
        ),
    )?;

    Ok(ForecastDecayOutcome {
        cutoff,
        envelope_len,
        period_maxima,
        g_at_ten_lengths,
        horizon: report.horizon,
    })
}

/// Three gaps of very different widths are censored out of a drifting
/// periodic series; the model triages them and the withheld truth scores
/// the fill-ins. Gap widths are sized from a fitted length scale so the
/// study stays meaningful if the seed changes the data's smoothness.
pub fn run_gap_triage(seed: u64, guard: &mut OutputGuard) -> Result<GapTriageOutcome, CliError> {
    let cfg = PeriodicDriftConfig {
        seed,
        trend_scale: 0.2,
        ..PeriodicDriftConfig::default()
    };
    let series = synth_periodic_drift(&cfg).map_err(data_err)?;
    let full = series.present_dataset().map_err(data_err)?;
    let template = KernelSpec::Rbf { var: 1.0, len: 0.3 };
    let probe = fit(
        &full,
        &template,
        &FitOptions {
            seed,
            restarts: 2,
            max_iters: 100,
            ..FitOptions::default()
        },
    )
    .map_err(fit_err)?;
    let fitted_len = match probe.kernel() {
        KernelSpec::Rbf { len, .. } => *len,
        other => {
            return Err(numerics_err(format!(
                "fit changed the kernel shape to {other}"
            )))
        }
    };
    // Keep the unit width within a sane range so the three gaps stay well
    // separated inside the series whatever length the probe fit landed on.
    let unit = fitted_len.clamp(0.1, 0.35);

    let times = series.time();
    let snap = |c: f64| {
        times
            .iter()
            .copied()
            .min_by(|a, b| {
                (a - c).abs()
                    .partial_cmp(&(b - c).abs())
                    .expect("sample times are finite")
            })
            .expect("series is nonempty")
    };
    let spans: Vec<(f64, f64)> = [(2.5, 0.25), (5.0, 1.0), (8.0, 5.0)]
        .iter()
        .map(|&(center, half_widths)| {
            let c = snap(center);
            (c - half_widths * unit, c + half_widths * unit)
        })
        .collect();

    let (gapped, truth) = censor(&series, &spans).map_err(data_err)?;
    let present = gapped.present_dataset().map_err(data_err)?;
    let model = fit(
        &present,
        &template,
        &FitOptions {
            seed,
            restarts: 3,
            max_iters: 150,
            ..FitOptions::default()
        },
    )
    .map_err(fit_err)?;

    let found = find_missing_segments(&gapped);
    if found.len() != spans.len() {
        return Err(data_err(format!(
            "expected {} gaps after censoring, found {}",
            spans.len(),
            found.len()
        )));
    }
    let dt = gapped.median_dt();
    let rho = 0.5;
    let mut reports = Vec::with_capacity(found.len());
    for (i, &(start, end)) in found.iter().enumerate() {
        let count = default_queries_per_gap(end - start, dt);
        let mut report = assess_gaps(&model, &[(start, end)], rho, count)
            .map_err(task_err)?
            .remove(0);
        report.gap_index = i;
        reports.push(report);
    }

    let truth_t = truth.time();
    let truth_y = truth.y();
    let mut rmse = Vec::with_capacity(found.len());
    for (i, &(start, end)) in found.iter().enumerate() {
        let mut sum_sq = 0.0;
        let mut n = 0usize;
        for (&t, y) in truth_t.iter().zip(truth_y) {
            if t >= start && t < end {
                if let Some(v) = y {
                    let p = model.predict_one(&[t]).map_err(numerics_err)?;
                    sum_sq += (p.mean - v) * (p.mean - v);
                    n += 1;
                }
            }
        }
        let value = if n > 0 {
            (sum_sq / n as f64).sqrt()
        } else {
            f64::NAN
        };
        rmse.push(GapRmse {
            gap_index: i,
            rmse: value,
            n,
        });
    }

    guard.write("series.csv", &to_csv_string(&gapped))?;
    guard.write("truth.csv", &to_csv_string(&truth))?;
    write_model(guard, &model)?;
    let gap_rows: Vec<String> = reports
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.gap_index,
                fmt_f(r.span.0),
                fmt_f(r.span.1),
                fmt_f(r.length),
                fmt_f(r.min_knowledge),
                r.decision
            )
        })
        .collect();
    guard.write(
        "gaps.csv",
        &csv_text(
            &[format!("rho={rho}")],
            "gap_index,start,end,length,min_knowledge,decision",
            &gap_rows,
        ),
    )?;
    let mut fill_rows = Vec::new();
    for r in &reports {
        if let Some(points) = &r.imputed {
            for p in points {
                fill_rows.push(format!(
                    "{},{},{},{},{}",
                    r.gap_index,
                    fmt_f(p.location),
                    fmt_f(p.mean),
                    fmt_f(p.obs_std),
                    fmt_f(p.knowledge)
                ));
            }
        }
    }
    guard.write(
        "imputed.csv",
        &csv_text(
            &[format!("rho={rho}")],
            "gap_index,x,mean,obs_std,knowledge",
            &fill_rows,
        ),
    )?;
    let rmse_rows: Vec<String> = rmse
        .iter()
        .map(|r| format!("{},{},{}", r.gap_index, fmt_f(r.rmse), r.n))
        .collect();
    guard.write(
        "rmse.csv",
        &csv_text(
            &["prediction error against the withheld samples".to_string()],
            "gap_index,rmse,n",
            &rmse_rows,
        ),
    )?;

    Ok(GapTriageOutcome { reports, rmse })
}
