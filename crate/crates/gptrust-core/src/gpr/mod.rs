//! Gaussian process regression: conditioning, prediction, and training.
//!
//! A [`GprModel`] is a kernel, a noise variance, and a training set, with
//! the Cholesky factor of `K + noise_var I` and the weight vector
//! `alpha = (K + noise_var I)^-1 y` cached at construction. Prediction and
//! scoring never refactor.
//!
//! Outputs may be z-score normalized (the default during [`fit`]); the
//! normalization record travels with the model and every public prediction
//! is reported in original output units.

mod fit;
mod persist;

pub use fit::{fit, FitOptions, NoisePolicy};
pub use persist::MODEL_FORMAT;

use crate::kernels::{HyperParamVector, KernelError, KernelSpec};
use crate::linalg::{self, CholFactor, LinalgError};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GprError {
    #[error("inputs and outputs disagree in length: {inputs} vs {outputs}")]
    LengthMismatch { inputs: usize, outputs: usize },
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("training inputs mix dimensions: point 0 has {expected}, point {index} has {got}")]
    MixedDimensions {
        expected: usize,
        index: usize,
        got: usize,
    },
    #[error("query dimension {got} does not match training dimension {expected}")]
    QueryDimension { expected: usize, got: usize },
    #[error("noise variance must be finite and nonnegative, got {0}")]
    BadNoise(f64),
    #[error("need at least {needed} training points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{source} (a common cause is duplicate training inputs with noise_var = 0)")]
    Conditioning {
        #[source]
        source: LinalgError,
    },
    #[error("every restart failed: {}", attempts.join("; "))]
    FitFailed { attempts: Vec<String> },
    #[error("model file error: {0}")]
    Persistence(String),
}

/// Affine record mapping stored outputs back to original units:
/// `original = mean + scale * stored`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputNorm {
    pub mean: f64,
    pub scale: f64,
}

/// A training set: points in `R^d` with one scalar output each.
#[derive(Debug, Clone)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    norm: Option<OutputNorm>,
}

impl Dataset {
    /// Builds a dataset, rejecting non-finite values, mixed input
    /// dimensions, and length mismatches. Empty is allowed.
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self, GprError> {
        if inputs.len() != outputs.len() {
            return Err(GprError::LengthMismatch {
                inputs: inputs.len(),
                outputs: outputs.len(),
            });
        }
        let dim = inputs.first().map(Vec::len);
        for (i, p) in inputs.iter().enumerate() {
            if p.len() != dim.unwrap_or(0) {
                return Err(GprError::MixedDimensions {
                    expected: dim.unwrap_or(0),
                    index: i,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(GprError::NonFinite {
                    what: "inputs",
                    index: i,
                });
            }
        }
        if let Some(i) = outputs.iter().position(|v| !v.is_finite()) {
            return Err(GprError::NonFinite {
                what: "outputs",
                index: i,
            });
        }
        Ok(Dataset {
            inputs,
            outputs,
            norm: None,
        })
    }

    /// Convenience constructor for one-dimensional inputs.
    pub fn from_1d(xs: &[f64], ys: &[f64]) -> Result<Self, GprError> {
        Dataset::new(xs.iter().map(|&x| vec![x]).collect(), ys.to_vec())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Input dimension, or `None` for an empty dataset.
    pub fn dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn normalization(&self) -> Option<OutputNorm> {
        self.norm
    }

    /// Returns a copy with z-scored outputs and the affine record composed
    /// onto any existing one. A constant output column keeps scale 1 so the
    /// transform stays invertible.
    pub fn normalized(&self) -> Dataset {
        let n = self.outputs.len().max(1) as f64;
        let mean = self.outputs.iter().sum::<f64>() / n;
        let var = self.outputs.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let outputs = self.outputs.iter().map(|y| (y - mean) / scale).collect();
        let prev = self.norm.unwrap_or(OutputNorm { mean: 0.0, scale: 1.0 });
        Dataset {
            inputs: self.inputs.clone(),
            outputs,
            norm: Some(OutputNorm {
                mean: prev.mean + prev.scale * mean,
                scale: prev.scale * scale,
            }),
        }
    }

    pub(crate) fn with_norm(mut self, norm: Option<OutputNorm>) -> Dataset {
        self.norm = norm;
        self
    }

    /// Median pairwise Euclidean distance between inputs; 1.0 for fewer than
    /// two distinct points. Used to scale length-scale initialization.
    pub fn median_pairwise_distance(&self) -> f64 {
        let n = self.inputs.len();
        let mut dists = Vec::with_capacity(n.saturating_sub(1) * n / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let d2: f64 = self.inputs[i]
                    .iter()
                    .zip(&self.inputs[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                dists.push(d2.sqrt());
            }
        }
        dists.retain(|d| *d > 0.0);
        if dists.is_empty() {
            return 1.0;
        }
        dists.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
        dists[dists.len() / 2]
    }
}

/// Gaussian predictive distribution at one query point, in original output
/// units.
#[derive(Debug, Clone, Copy)]
pub struct PredictiveDistribution {
    pub mean: f64,
    /// Variance of the latent function value (no observation noise).
    pub latent_var: f64,
    /// Variance of a new observation: `latent_var` plus noise.
    pub obs_var: f64,
}

/// A conditioned Gaussian process ready for prediction and scoring.
#[derive(Debug, Clone)]
pub struct GprModel {
    kernel: KernelSpec,
    noise_var: f64,
    train_inputs: Vec<Vec<f64>>,
    train_outputs: Vec<f64>,
    norm: Option<OutputNorm>,
    pub(crate) chol: CholFactor,
    alpha: DVector<f64>,
}

/// Conditions a Gaussian process on a dataset, producing a [`GprModel`].
///
/// `data` may be empty, yielding a prior-only model. `noise_var` applies in
/// the units of the stored outputs (i.e. normalized units when the dataset
/// carries a normalization record).
pub fn condition(
    kernel: KernelSpec,
    noise_var: f64,
    data: &Dataset,
) -> Result<GprModel, GprError> {
    kernel.validate()?;
    if !noise_var.is_finite() || noise_var < 0.0 {
        return Err(GprError::BadNoise(noise_var));
    }
    let n = data.len();
    if n == 0 {
        return Ok(GprModel {
            kernel,
            noise_var,
            train_inputs: Vec::new(),
            train_outputs: Vec::new(),
            norm: data.norm,
            chol: CholFactor::empty(),
            alpha: DVector::zeros(0),
        });
    }
    let mut k = kernel.gram(&data.inputs)?;
    for i in 0..n {
        k[(i, i)] += noise_var;
    }
    let chol = chol_or_conditioning_err(&k)?;
    let y = DVector::from_column_slice(&data.outputs);
    let alpha = linalg::solve_spd_vec(&chol, &y).expect("dimensions match by construction");
    Ok(GprModel {
        kernel,
        noise_var,
        train_inputs: data.inputs.clone(),
        train_outputs: data.outputs.clone(),
        norm: data.norm,
        chol,
        alpha,
    })
}

fn chol_or_conditioning_err(k: &DMatrix<f64>) -> Result<CholFactor, GprError> {
    linalg::chol_jittered(k, linalg::DEFAULT_BASE_JITTER)
        .map_err(|source| GprError::Conditioning { source })
}

impl GprModel {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Noise variance in stored-output units (normalized units when a
    /// normalization record is present).
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Noise variance converted to original output units.
    pub fn noise_var_output_units(&self) -> f64 {
        self.noise_var * self.output_scale().powi(2)
    }

    pub fn train_inputs(&self) -> &[Vec<f64>] {
        &self.train_inputs
    }

    pub fn train_outputs(&self) -> &[f64] {
        &self.train_outputs
    }

    pub fn n_train(&self) -> usize {
        self.train_inputs.len()
    }

    pub fn normalization(&self) -> Option<OutputNorm> {
        self.norm
    }

    /// Diagonal jitter the conditioning step added to factorize the
    /// training covariance; 0.0 in the healthy case.
    pub fn conditioning_jitter(&self) -> f64 {
        self.chol.jitter_used()
    }

    fn output_shift(&self) -> f64 {
        self.norm.map_or(0.0, |n| n.mean)
    }

    pub(crate) fn output_scale(&self) -> f64 {
        self.norm.map_or(1.0, |n| n.scale)
    }

    fn check_query_dim(&self, q: &[f64]) -> Result<(), GprError> {
        if let Some(first) = self.train_inputs.first() {
            if q.len() != first.len() {
                return Err(GprError::QueryDimension {
                    expected: first.len(),
                    got: q.len(),
                });
            }
        }
        Ok(())
    }

    /// Cross-covariance vector between a query and the training inputs.
    pub(crate) fn kx(&self, q: &[f64]) -> Result<DVector<f64>, GprError> {
        self.check_query_dim(q)?;
        let mut v = DVector::zeros(self.train_inputs.len());
        for (i, xi) in self.train_inputs.iter().enumerate() {
            v[i] = self.kernel.eval(q, xi)?;
        }
        Ok(v)
    }

    /// Posterior predictive distribution at each query point.
    ///
    /// The latent variance is clamped to `[0, k(x, x)]`; the observation
    /// variance adds the noise floor, so it is never below the noise level.
    pub fn predict(&self, queries: &[Vec<f64>]) -> Result<Vec<PredictiveDistribution>, GprError> {
        let shift = self.output_shift();
        let s2 = self.output_scale().powi(2);
        queries
            .iter()
            .map(|q| {
                let kxx = self.kernel.eval(q, q)?;
                let (mean, latent) = if self.train_inputs.is_empty() {
                    (0.0, kxx)
                } else {
                    let kx = self.kx(q)?;
                    let mean = kx.dot(&self.alpha);
                    let explained = linalg::quad_form(&self.chol, &kx)
                        .expect("dimensions match by construction");
                    (mean, (kxx - explained).clamp(0.0, kxx))
                };
                Ok(PredictiveDistribution {
                    mean: shift + self.output_scale() * mean,
                    latent_var: s2 * latent,
                    obs_var: s2 * (latent + self.noise_var),
                })
            })
            .collect()
    }

    /// Shorthand for a single query point.
    pub fn predict_one(&self, query: &[f64]) -> Result<PredictiveDistribution, GprError> {
        Ok(self.predict(&[query.to_vec()])?[0])
    }
}

/// Log marginal likelihood of the data under the given kernel and noise,
/// together with its gradient over [`HyperParamVector`] coordinates
/// (kernel slots in order, then `ln(noise_var)` last).
pub fn log_marginal_likelihood(
    kernel: &KernelSpec,
    noise_var: f64,
    data: &Dataset,
) -> Result<(f64, Vec<f64>), GprError> {
    kernel.validate()?;
    if !noise_var.is_finite() || noise_var < 0.0 {
        return Err(GprError::BadNoise(noise_var));
    }
    let n = data.len();
    if n == 0 {
        return Err(GprError::TooFewPoints { needed: 1, got: 0 });
    }
    let (mut k, kernel_grads) = kernel.gram_with_grads(&data.inputs)?;
    for i in 0..n {
        k[(i, i)] += noise_var;
    }
    let chol = chol_or_conditioning_err(&k)?;
    let y = DVector::from_column_slice(&data.outputs);
    let alpha = linalg::solve_spd_vec(&chol, &y).expect("dimensions match by construction");

    let value = -0.5 * y.dot(&alpha)
        - 0.5 * linalg::logdet(&chol)
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // d lml / d theta = 1/2 tr((alpha alpha' - M^-1) dM/d theta).
    let minv = linalg::solve_spd(&chol, &DMatrix::identity(n, n))
        .expect("dimensions match by construction");
    let mut grad = Vec::with_capacity(kernel_grads.len() + 1);
    for g in &kernel_grads {
        let data_term = (g * &alpha).dot(&alpha);
        let trace_term = minv.iter().zip(g.iter()).map(|(a, b)| a * b).sum::<f64>();
        grad.push(0.5 * (data_term - trace_term));
    }
    // Noise slot: dM/d ln(noise_var) = noise_var * I.
    grad.push(0.5 * noise_var * (alpha.norm_squared() - minv.trace()));
    Ok((value, grad))
}

/// Evaluates the marginal likelihood directly from vector coordinates.
pub(crate) fn lml_at(
    vector: &HyperParamVector,
    data: &Dataset,
) -> Result<(f64, Vec<f64>), GprError> {
    let (kernel, noise_var) = vector.unpack()?;
    log_marginal_likelihood(&kernel, noise_var, data)
}

#[cfg(test)]
mod tests;
