//! Hyperparameter training by marginal-likelihood ascent.
//!
//! The optimizer is a backtracking gradient ascent over the log-transformed
//! coordinate vector: a step is taken only when it does not decrease the
//! objective, so the reported likelihood never falls below the likelihood at
//! any tried initialization. Multiple restarts draw initial scales from
//! ranges tied to the data (median pairwise distance, output variance);
//! periods and offsets keep their template values at initialization and move
//! only by gradient, since no data-derived range is reliable for them.

use super::{condition, lml_at, Dataset, GprError, GprModel};
use crate::kernels::{HyperParamVector, KernelSpec, ParamRole, Transform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How the observation noise variance is treated during fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoisePolicy {
    /// Optimize jointly with the kernel; `init` seeds the first restart
    /// (default: 1% of the output variance).
    Learn { init: Option<f64> },
    /// Keep the noise variance pinned at this value.
    Fixed(f64),
}

/// Controls for [`fit`]. The defaults suit series of a few hundred points.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Independent optimizer starts; the first begins at the template.
    pub restarts: usize,
    /// Accepted-step budget per restart.
    pub max_iters: usize,
    /// Stop once the gradient infinity norm falls below this.
    pub grad_tol: f64,
    /// Seed for the restart initialization stream.
    pub seed: u64,
    /// z-score the outputs before fitting (recorded, inverted on predict).
    pub normalize: bool,
    pub noise: NoisePolicy,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 5,
            max_iters: 500,
            grad_tol: 1e-5,
            seed: 0,
            normalize: true,
            noise: NoisePolicy::Learn { init: None },
        }
    }
}

/// Fits kernel hyperparameters (and by default the noise variance) to the
/// data by maximizing the log marginal likelihood, starting the tree shape
/// and un-sampled parameters from `template`.
///
/// Deterministic for fixed `(data, template, opts)`. Needs at least two
/// points. Returns the conditioned model for the best restart.
pub fn fit(data: &Dataset, template: &KernelSpec, opts: &FitOptions) -> Result<GprModel, GprError> {
    template.validate()?;
    if data.len() < 2 {
        return Err(GprError::TooFewPoints {
            needed: 2,
            got: data.len(),
        });
    }
    let work = if opts.normalize {
        data.normalized()
    } else {
        data.clone()
    };
    let n = work.len() as f64;
    let mean_y = work.outputs().iter().sum::<f64>() / n;
    let var_y = (work.outputs().iter().map(|y| (y - mean_y).powi(2)).sum::<f64>() / n).max(1e-12);
    let median_dist = work.median_pairwise_distance();

    let noise0 = match opts.noise {
        NoisePolicy::Learn { init } => init.unwrap_or(0.01 * var_y),
        NoisePolicy::Fixed(v) => v,
    };
    let template_vec = HyperParamVector::pack(template, noise0)?;
    let noise_slot = template_vec.len() - 1;
    let frozen: Vec<usize> = match opts.noise {
        NoisePolicy::Fixed(_) => vec![noise_slot],
        NoisePolicy::Learn { .. } => vec![],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let restarts = opts.restarts.max(1);
    let mut best: Option<(f64, HyperParamVector)> = None;
    let mut attempts = Vec::new();

    for restart in 0..restarts {
        let mut start = template_vec.clone();
        if restart > 0 {
            for (i, slot) in start.slots().to_vec().iter().enumerate() {
                if frozen.contains(&i) {
                    continue;
                }
                let range = match slot.role {
                    ParamRole::LengthScale => Some((0.1 * median_dist, 10.0 * median_dist)),
                    ParamRole::Variance => Some((0.1 * var_y, 10.0 * var_y)),
                    ParamRole::NoiseVariance => Some((1e-4 * var_y, var_y)),
                    // No data-derived range; keep the template value.
                    ParamRole::Period | ParamRole::Offset => None,
                };
                if let Some((lo, hi)) = range {
                    debug_assert_eq!(slot.transform, Transform::Log);
                    start.values[i] = rng.gen_range(lo.ln()..hi.ln());
                }
            }
        }
        match ascend(&start, &work, &frozen, opts) {
            Ok((value, vector)) => {
                if best.as_ref().is_none_or(|(b, _)| value > *b) {
                    best = Some((value, vector));
                }
            }
            Err(e) => attempts.push(format!("restart {restart}: {e}")),
        }
    }

    let (_, best_vec) = best.ok_or(GprError::FitFailed { attempts })?;
    let (kernel, noise_var) = best_vec.unpack()?;
    condition(kernel, noise_var, &work)
}

/// Coordinates are clamped here to keep `exp` finite under runaway steps.
const COORD_BOUND: f64 = 30.0;

fn ascend(
    start: &HyperParamVector,
    data: &Dataset,
    frozen: &[usize],
    opts: &FitOptions,
) -> Result<(f64, HyperParamVector), GprError> {
    let mask = |g: &mut Vec<f64>| {
        for &i in frozen {
            g[i] = 0.0;
        }
    };
    let mut v = start.clone();
    let (mut value, mut grad) = lml_at(&v, data)?;
    mask(&mut grad);

    let mut step = 0.1;
    let mut evals = 0usize;
    let eval_budget = 4 * opts.max_iters;
    for _ in 0..opts.max_iters {
        let ginf = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if ginf <= opts.grad_tol || evals >= eval_budget {
            break;
        }
        // Backtrack until the step stops hurting the objective.
        let mut advanced = false;
        while step >= 1e-16 && evals < eval_budget {
            let mut cand = v.clone();
            for (c, g) in cand.values.iter_mut().zip(&grad) {
                *c = (*c + step * g).clamp(-COORD_BOUND, COORD_BOUND);
            }
            evals += 1;
            match lml_at(&cand, data) {
                Ok((cv, mut cg)) if cv >= value => {
                    mask(&mut cg);
                    v = cand;
                    value = cv;
                    grad = cg;
                    step = (step * 1.5).min(1e3);
                    advanced = true;
                    break;
                }
                _ => step *= 0.5,
            }
        }
        if !advanced {
            break;
        }
    }
    Ok((value, v))
}
