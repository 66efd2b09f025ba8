//! The knowledge score: how much of the prior variance at a query the
//! training data removes.
//!
//! For a model with kernel `k`, training inputs `X`, and noise variance
//! `s2`, the score at `x` is
//!
//! ```text
//! G(x, D) = k(x)' (K + s2 I)^-1 k(x) / k(x, x)
//! ```
//!
//! which equals `(prior_var - posterior_var) / prior_var`. The denominator
//! is the prior variance at the query itself, so the `[0, 1]` range holds
//! for non-stationary kernels too. The score never reads the training
//! outputs: it measures where the model knows, not what it predicts.

use crate::gpr::{GprError, GprModel};
use crate::linalg;
use thiserror::Error;

/// Values within this band outside `[0, 1]` are treated as round-off and
/// clamped; anything further out is reported as an inconsistency.
const CLAMP_BAND: f64 = 1e-10;

/// Prior variances at or below this are considered degenerate.
const MIN_PRIOR_VAR: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("prior variance at the query is {prior_var:e}; the kernel assigns this point (essentially) no prior uncertainty")]
    DegeneratePrior { prior_var: f64 },
    #[error("variance ratio {value} is outside [0, 1] beyond round-off; the kernel matrix is numerically inconsistent")]
    Inconsistent { value: f64 },
    #[error(transparent)]
    Gpr(#[from] GprError),
}

/// A knowledge score together with the variances it was formed from, in
/// original output units. `value = (prior_var - posterior_var) / prior_var`.
#[derive(Debug, Clone, Copy)]
pub struct KnowledgeScore {
    /// Fraction of prior variance removed by the data, in `[0, 1]`.
    pub value: f64,
    pub prior_var: f64,
    pub posterior_var: f64,
}

/// Computes the knowledge score at one query point.
///
/// An empty model scores 0 everywhere: with no data, nothing is known
/// beyond the prior.
pub fn knowledge_score(model: &GprModel, query: &[f64]) -> Result<KnowledgeScore, KnowledgeError> {
    let kxx = model.kernel().eval(query, query).map_err(GprError::from)?;
    if !(kxx > MIN_PRIOR_VAR) {
        return Err(KnowledgeError::DegeneratePrior { prior_var: kxx });
    }
    let s2 = model.output_scale().powi(2);
    if model.n_train() == 0 {
        return Ok(KnowledgeScore {
            value: 0.0,
            prior_var: s2 * kxx,
            posterior_var: s2 * kxx,
        });
    }
    let kx = model.kx(query)?;
    let explained = linalg::quad_form(&model.chol, &kx).expect("dimensions match by construction");
    let raw = explained / kxx;
    if !(-CLAMP_BAND..=1.0 + CLAMP_BAND).contains(&raw) {
        return Err(KnowledgeError::Inconsistent { value: raw });
    }
    Ok(KnowledgeScore {
        value: raw.clamp(0.0, 1.0),
        prior_var: s2 * kxx,
        posterior_var: s2 * (kxx - explained).max(0.0),
    })
}

/// Knowledge scores over a batch of query points, in input order.
pub fn knowledge_profile(
    model: &GprModel,
    queries: &[Vec<f64>],
) -> Result<Vec<KnowledgeScore>, KnowledgeError> {
    queries.iter().map(|q| knowledge_score(model, q)).collect()
}
