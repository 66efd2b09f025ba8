//! The subcommands behind the `gptrust` binary. Each command resolves its
//! options, does its work, writes its outputs through an [`OutputGuard`]
//! (so failures leave no partial files), records a manifest, and prints a
//! short human summary to stdout.

use std::collections::BTreeMap;
use std::path::Path;

use gptrust_core::anomaly::{two_stage_detect, AnomalyError, TriageLabel};
use gptrust_core::dataio::{read_csv, read_x_csv, read_xy_csv, ReadOptions};
use gptrust_core::gpr::log_marginal_likelihood;
use gptrust_core::tasks::{assess_gaps, default_queries_per_gap, extrapolation_horizon, find_missing_segments};
use gptrust_core::{fit, knowledge_score, parse_kernel, Dataset, FitOptions, GprModel};

use crate::config::{RawArgs, Resolver};
use crate::error::{data_err, fit_err, model_err, numerics_err, task_err, CliError};
use crate::experiments;
use crate::manifest::{file_digest, RunManifest, MANIFEST_NAME};
use crate::output::{csv_text, fmt_f, OutputGuard};

pub const DEFAULT_KERNEL: &str = "rbf(var=1, len=1)";
pub const DEFAULT_RHO: f64 = 0.5;
pub const DEFAULT_MULTIPLIER: f64 = 3.0;

/// Writes the manifest as the final output file and commits the guard.
fn finalize(
    mut guard: OutputGuard,
    command: &str,
    config: BTreeMap<String, String>,
) -> Result<(), CliError> {
    let model_digest = if guard.names().iter().any(|n| n == "model.json") {
        Some(file_digest(&guard.dir().join("model.json"))?)
    } else {
        None
    };
    let mut manifest = RunManifest::new(command, config);
    manifest.model_digest = model_digest;
    manifest.outputs = guard.names().to_vec();
    let text = manifest.render()?;
    guard.write(MANIFEST_NAME, &text)?;
    guard.commit();
    Ok(())
}

fn load_model(path: &Path) -> Result<GprModel, CliError> {
    GprModel::load(path).map_err(|e| model_err(format!("{}: {e}", path.display())))
}

/// Commands that scan one input value per row need a model over 1-D inputs.
fn require_1d_model(model: &GprModel, command: &str) -> Result<(), CliError> {
    if let Some(x) = model.train_inputs().first() {
        if x.len() != 1 {
            return Err(data_err(format!(
                "`{command}` reads one input value per row, but the model was trained on {}-dimensional inputs",
                x.len()
            )));
        }
    }
    Ok(())
}

/// `fit`: train hyperparameters on an x,y CSV and save the model.
pub fn cmd_fit(raw: RawArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(raw)?;
    let data_path = r.data_path()?;
    let kernel_text = r.kernel(DEFAULT_KERNEL)?;
    let seed = r.seed()?;
    let out_dir = r.out_dir()?;
    r.deny_unused()?;

    let rows = read_xy_csv(&data_path, None, None).map_err(data_err)?;
    if rows.len() < 2 {
        return Err(CliError::Usage(format!(
            "fitting needs at least 2 data rows, got {} in {}",
            rows.len(),
            data_path.display()
        )));
    }
    let xs: Vec<f64> = rows.iter().map(|&(x, _)| x).collect();
    let ys: Vec<f64> = rows.iter().map(|&(_, y)| y).collect();
    let data = Dataset::from_1d(&xs, &ys).map_err(data_err)?;

    let template =
        parse_kernel(&kernel_text).map_err(|e| CliError::Usage(format!("--kernel: {e}")))?;
    let opts = FitOptions {
        seed,
        ..FitOptions::default()
    };
    let model = fit(&data, &template, &opts).map_err(fit_err)?;

    // The model stores normalized outputs, so evaluating the likelihood on
    // its own stored arrays reproduces the objective the optimizer saw.
    let stored = Dataset::new(model.train_inputs().to_vec(), model.train_outputs().to_vec())
        .map_err(numerics_err)?;
    let (lml, _) =
        log_marginal_likelihood(model.kernel(), model.noise_var(), &stored).map_err(numerics_err)?;

    let mut guard = OutputGuard::new(&out_dir)?;
    let model_path = guard.write("model.json", &(model.to_json() + "\n"))?;
    let digest = file_digest(&model_path)?;

    println!("fitted kernel: {}", model.kernel());
    println!("noise variance (output units): {}", model.noise_var_output_units());
    println!("log marginal likelihood: {lml}");
    println!("wrote {} ({digest})", model_path.display());
    finalize(guard, "fit", r.finish())
}

/// `score`: predictions plus knowledge scores over a query-point CSV.
pub fn cmd_score(raw: RawArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(raw)?;
    let model_path = r.model_path()?;
    let data_path = r.data_path()?;
    let out_dir = r.out_dir()?;
    r.deny_unused()?;

    let model = load_model(&model_path)?;
    require_1d_model(&model, "score")?;
    let xs = read_x_csv(&data_path, None).map_err(data_err)?;

    let mut rows = Vec::with_capacity(xs.len());
    for &x in &xs {
        let p = model.predict_one(&[x]).map_err(numerics_err)?;
        let g = knowledge_score(&model, &[x]).map_err(numerics_err)?;
        rows.push(format!(
            "{},{},{},{}",
            fmt_f(x),
            fmt_f(p.mean),
            fmt_f(p.obs_var.sqrt()),
            fmt_f(g.value)
        ));
    }

    let mut guard = OutputGuard::new(&out_dir)?;
    let comments = vec![format!("model={}", model_path.display())];
    let path = guard.write(
        "scores.csv",
        &csv_text(&comments, "x,mean,obs_std,knowledge", &rows),
    )?;
    println!("scored {} points, wrote {}", xs.len(), path.display());
    finalize(guard, "score", r.finish())
}

/// `triage`: two-stage anomaly verdicts over observed x,y pairs.
pub fn cmd_triage(raw: RawArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(raw)?;
    let model_path = r.model_path()?;
    let data_path = r.data_path()?;
    let rho = r.rho(DEFAULT_RHO)?;
    let multiplier = r.multiplier(DEFAULT_MULTIPLIER)?;
    let out_dir = r.out_dir()?;
    r.deny_unused()?;

    let model = load_model(&model_path)?;
    require_1d_model(&model, "triage")?;
    let pairs = read_xy_csv(&data_path, None, None).map_err(data_err)?;

    let mut rows = Vec::with_capacity(pairs.len());
    let (mut normal, mut anomaly, mut unknown) = (0usize, 0usize, 0usize);
    for (i, &(x, y)) in pairs.iter().enumerate() {
        let v = two_stage_detect(&model, &[x], y, rho, multiplier).map_err(|e| match e {
            AnomalyError::BadRho(_) | AnomalyError::BadMultiplier(_) => {
                CliError::Usage(e.to_string())
            }
            AnomalyError::BadObservation(_) => data_err(format!("row {}: {e}", i + 1)),
            other => numerics_err(format!("row {}: {other}", i + 1)),
        })?;
        match v.label {
            TriageLabel::Normal => normal += 1,
            TriageLabel::Anomaly => anomaly += 1,
            TriageLabel::Unknown => unknown += 1,
        }
        rows.push(format!(
            "{},{},{},{},{},{},{}",
            fmt_f(x),
            fmt_f(y),
            fmt_f(v.predicted.mean),
            fmt_f(v.predicted.obs_var.sqrt()),
            fmt_f(v.residual),
            fmt_f(v.knowledge.value),
            v.label
        ));
    }

    let mut guard = OutputGuard::new(&out_dir)?;
    let comments = vec![
        format!("model={}", model_path.display()),
        format!("rho={rho}"),
        format!("multiplier={multiplier}"),
    ];
    let path = guard.write(
        "verdicts.csv",
        &csv_text(&comments, "x,y,mean,obs_std,residual,knowledge,verdict", &rows),
    )?;
    println!(
        "triaged {} points: {normal} normal, {anomaly} anomaly, {unknown} unknown",
        pairs.len()
    );
    println!("wrote {}", path.display());
    finalize(guard, "triage", r.finish())
}

/// `gaps`: find missing stretches in a series, decide which are safe to
/// interpolate, and fill in the accepted ones.
pub fn cmd_gaps(raw: RawArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(raw)?;
    let model_path = r.model_path()?;
    let data_path = r.data_path()?;
    let rho = r.rho(DEFAULT_RHO)?;
    let out_dir = r.out_dir()?;
    r.deny_unused()?;

    let model = load_model(&model_path)?;
    require_1d_model(&model, "gaps")?;
    let series = read_csv(&data_path, &ReadOptions::default()).map_err(data_err)?;
    let spans = find_missing_segments(&series);
    let dt = series.median_dt();

    let mut gap_rows = Vec::with_capacity(spans.len());
    let mut fill_rows = Vec::new();
    let (mut accepted, mut rejected) = (0usize, 0usize);
    for (i, &(start, end)) in spans.iter().enumerate() {
        let count = default_queries_per_gap(end - start, dt);
        let report = assess_gaps(&model, &[(start, end)], rho, count)
            .map_err(task_err)?
            .remove(0);
        gap_rows.push(format!(
            "{i},{},{},{},{},{}",
            fmt_f(start),
            fmt_f(end),
            fmt_f(report.length),
            fmt_f(report.min_knowledge),
            report.decision
        ));
        if let Some(points) = &report.imputed {
            accepted += 1;
            for p in points {
                fill_rows.push(format!(
                    "{i},{},{},{},{}",
                    fmt_f(p.location),
                    fmt_f(p.mean),
                    fmt_f(p.obs_std),
                    fmt_f(p.knowledge)
                ));
            }
        } else {
            rejected += 1;
        }
    }

    let mut guard = OutputGuard::new(&out_dir)?;
    let comments = vec![
        format!("model={}", model_path.display()),
        format!("rho={rho}"),
    ];
    guard.write(
        "gaps.csv",
        &csv_text(
            &comments,
            "gap_index,start,end,length,min_knowledge,decision",
            &gap_rows,
        ),
    )?;
    guard.write(
        "imputed.csv",
        &csv_text(&comments, "gap_index,x,mean,obs_std,knowledge", &fill_rows),
    )?;
    if spans.is_empty() {
        println!("no gaps found in {}", data_path.display());
    } else {
        println!(
            "found {} gaps: {accepted} interpolated, {rejected} rejected",
            spans.len()
        );
    }
    println!("wrote {}", guard.dir().join("gaps.csv").display());
    finalize(guard, "gaps", r.finish())
}

/// `horizon`: scan knowledge forward over a grid and report where it first
/// drops below the floor.
pub fn cmd_horizon(raw: RawArgs) -> Result<(), CliError> {
    let mut r = Resolver::new(raw)?;
    let model_path = r.model_path()?;
    let rho = r.rho(DEFAULT_RHO)?;
    let (from, to, step) = r.grid()?;
    let out_dir = r.out_dir()?;
    r.deny_unused()?;

    let model = load_model(&model_path)?;
    let report = extrapolation_horizon(&model, from, to, step, rho).map_err(task_err)?;

    let horizon_text = match report.horizon {
        Some(t) => format!("{t}"),
        None => "not crossed".to_string(),
    };
    let rows: Vec<String> = report
        .profile
        .iter()
        .map(|p| format!("{},{}", fmt_f(p.time), fmt_f(p.knowledge)))
        .collect();
    let comments = vec![
        format!("model={}", model_path.display()),
        format!("rho={rho}"),
        format!("horizon={horizon_text}"),
    ];

    let mut guard = OutputGuard::new(&out_dir)?;
    let path = guard.write("horizon.csv", &csv_text(&comments, "x,knowledge", &rows))?;
    println!("last training input: {}", report.last_train_time);
    match report.horizon {
        Some(t) => println!("horizon: knowledge first drops below {rho} at x = {t}"),
        None => println!("horizon: knowledge stays at or above {rho} across [{from}, {to}]"),
    }
    println!("wrote {}", path.display());
    finalize(guard, "horizon", r.finish())
}

/// `experiment`: run one of the canned, seeded benchmark studies.
pub fn cmd_experiment(name: &str, raw: RawArgs) -> Result<(), CliError> {
    if !matches!(name, "toy-anomaly" | "forecast-decay" | "gap-triage") {
        return Err(CliError::Usage(format!(
            "unknown experiment `{name}`; expected toy-anomaly, forecast-decay, or gap-triage"
        )));
    }
    let mut r = Resolver::new(raw)?;
    let seed = r.seed()?;
    let out_dir = r.out_dir()?;
    r.record_extra("name", name);
    r.deny_unused()?;

    let mut guard = OutputGuard::new(&out_dir)?;
    let lines = match name {
        "toy-anomaly" => {
            let out = experiments::run_toy_anomaly(seed, &mut guard)?;
            let mut lines = Vec::new();
            for row in &out.sweep {
                let auc = match row.auc {
                    Some(a) => format!("{a:.4}"),
                    None => "undefined (one class admitted)".to_string(),
                };
                lines.push(format!(
                    "rho {:>4}: auc {auc} over {} admitted points",
                    format!("{:.2}", row.rho),
                    row.n_used
                ));
            }
            lines
        }
        "forecast-decay" => {
            let out = experiments::run_forecast_decay(seed, &mut guard)?;
            let mut lines = vec![format!(
                "trained on t < {}, fitted envelope length {:.4}",
                out.cutoff, out.envelope_len
            )];
            for (k, m) in out.period_maxima.iter().enumerate() {
                lines.push(format!("cycle {k} past cutoff: max knowledge {m:.4}"));
            }
            lines.push(match out.horizon {
                Some(t) => format!("horizon at rho 0.5: t = {t:.4}"),
                None => "horizon at rho 0.5: not crossed in the scanned range".to_string(),
            });
            lines.push(format!(
                "knowledge ten envelope lengths out: {:.6}",
                out.g_at_ten_lengths
            ));
            lines
        }
        _ => {
            let out = experiments::run_gap_triage(seed, &mut guard)?;
            let mut lines = Vec::new();
            for (report, rmse) in out.reports.iter().zip(&out.rmse) {
                lines.push(format!(
                    "gap {} [{:.3}, {:.3}): min knowledge {:.4}, {}, rmse vs withheld truth {:.4}",
                    report.gap_index,
                    report.span.0,
                    report.span.1,
                    report.min_knowledge,
                    report.decision,
                    rmse.rmse
                ));
            }
            lines
        }
    };
    for line in &lines {
        println!("{line}");
    }
    println!("outputs in {}", guard.dir().display());
    finalize(guard, "experiment", r.finish())
}
