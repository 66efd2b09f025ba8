//! Gaussian process regression with an explicit measure of how much the
//! training data actually constrains each prediction.
//!
//! The central quantity is the *knowledge score* `G(x, D)`: the fraction of
//! the prior variance at a query point `x` that conditioning on the data `D`
//! removes. `G = 0` means the model is guessing from its prior alone;
//! `G = 1` means the data pin the latent function down completely. The score
//! depends only on the query location, the training locations, the kernel,
//! and the noise level, never on the observed values, so it can gate
//! downstream decisions without leaking the quantity being predicted.
//!
//! On top of the regression engine the crate provides:
//!
//! * anomaly detection with a reject option: points whose score falls below
//!   a floor `rho` are labeled `Unknown` instead of being forced into a
//!   normal/anomaly call,
//! * extrapolation horizons: how far beyond the data a forecast stays above
//!   the score floor,
//! * gap triage for time series with missing stretches: interpolate only the
//!   gaps the model demonstrably bridges,
//! * CSV ingestion and seeded synthetic benchmark generators.

pub mod anomaly;
pub mod dataio;
pub mod gpr;
pub mod kernels;
pub mod knowledge;
pub mod linalg;
pub mod tasks;

pub use gpr::{condition, fit, Dataset, FitOptions, GprModel, PredictiveDistribution};
pub use kernels::{parse_kernel, HyperParamVector, KernelSpec};
pub use knowledge::{knowledge_profile, knowledge_score, KnowledgeScore};
