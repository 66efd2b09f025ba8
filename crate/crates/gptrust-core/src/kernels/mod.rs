//! Covariance kernels and their compositions.
//!
//! A [`KernelSpec`] is an immutable expression tree: four base kernels
//! combined by n-ary sums and products. Evaluation is pure, so specs can be
//! shared freely. For gradient-based training the tree flattens into a
//! [`HyperParamVector`], a fixed-order vector of (mostly log-transformed)
//! hyperparameters; [`KernelSpec::gram_with_grads`] returns the Gram matrix
//! together with its derivative with respect to every vector coordinate.
//!
//! Specs have a one-line text form (`rbf(var=1.0, len=0.5)`,
//! `sum(periodic(...), linear(...))`, ...) produced by `Display` and read
//! back by [`parse_kernel`].

mod parse;

pub use parse::parse_kernel;

use nalgebra::DMatrix;
use thiserror::Error;

/// Errors from kernel construction, parsing, or evaluation.
#[derive(Debug, Error)]
pub enum KernelError {
    #[error("input dimension mismatch: {left} vs {right} coordinates")]
    DimensionMismatch { left: usize, right: usize },
    #[error("kernel parameter `{name}` must be strictly positive and finite, got {value}")]
    BadParam { name: &'static str, value: f64 },
    #[error("`{combinator}` needs at least two children, got {got}")]
    TooFewChildren { combinator: &'static str, got: usize },
    #[error("kernel expression error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("hyperparameter vector has {got} entries, kernel needs {expected}")]
    VectorLength { expected: usize, got: usize },
}

/// A covariance function over `R^d`, as an expression tree.
///
/// All distance-based kernels are isotropic with a single shared length
/// scale per node. Scale parameters (variances, length scales, periods) must
/// be strictly positive; the linear kernel's `offset` may be any finite real.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `var * exp(-|x - y|^2 / (2 len^2))`: smooth local similarity.
    Rbf { var: f64, len: f64 },
    /// `var * exp(-2 sum_i sin^2(pi (x_i - y_i) / period) / len^2)`: exact
    /// repetition. The sine acts per coordinate (the product of 1-D periodic
    /// kernels), which keeps the Gram matrix positive semidefinite in every
    /// input dimension; over 1-D inputs it is the familiar
    /// `exp(-2 sin^2(pi |x - y| / period) / len^2)`.
    Periodic { var: f64, period: f64, len: f64 },
    /// Periodic similarity damped by an RBF envelope, so repetition fades
    /// with separation: the [`KernelSpec::Periodic`] form with length scale
    /// `plen`, times `exp(-|x - y|^2 / (2 len^2))`.
    LocallyPeriodic {
        var: f64,
        period: f64,
        /// Length scale of the RBF envelope.
        len: f64,
        /// Length scale inside the periodic factor.
        plen: f64,
    },
    /// `var * (x - offset) . (y - offset)`: linear trends through `offset`.
    Linear { var: f64, offset: f64 },
    Sum(Vec<KernelSpec>),
    Product(Vec<KernelSpec>),
}

/// How a hyperparameter is embedded in a [`HyperParamVector`] coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// Coordinate is `ln(param)`; enforces positivity under optimization.
    Log,
    /// Coordinate is the parameter itself (location parameters only).
    Identity,
}

/// What kind of quantity a hyperparameter is, used to pick sensible random
/// initialization ranges during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Variance,
    LengthScale,
    Period,
    Offset,
    NoiseVariance,
}

/// One coordinate of a [`HyperParamVector`].
#[derive(Debug, Clone)]
pub struct ParamSlot {
    /// Diagnostic name, e.g. `sum[1].rbf.len` or `noise_var`.
    pub name: String,
    pub role: ParamRole,
    pub transform: Transform,
}

/// A kernel tree plus observation noise, flattened to one real vector.
///
/// Coordinates follow a preorder walk of the tree (each node's parameters in
/// declaration order) with `ln(noise_var)` appended last. All coordinates are
/// log-transformed except the linear kernel's `offset`, which is a location
/// rather than a scale and may be negative. The layout carries enough
/// structure to rebuild the kernel tree, so pack/unpack loses nothing beyond the
/// sub-ulp rounding of `ln`/`exp`.
#[derive(Debug, Clone)]
pub struct HyperParamVector {
    pub values: Vec<f64>,
    slots: Vec<ParamSlot>,
    shape: KernelSpec,
}

impl KernelSpec {
    /// Checks positivity/finiteness of every parameter and combinator arity.
    pub fn validate(&self) -> Result<(), KernelError> {
        fn pos(name: &'static str, value: f64) -> Result<(), KernelError> {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(KernelError::BadParam { name, value })
            }
        }
        match self {
            KernelSpec::Rbf { var, len } => {
                pos("var", *var)?;
                pos("len", *len)
            }
            KernelSpec::Periodic { var, period, len } => {
                pos("var", *var)?;
                pos("period", *period)?;
                pos("len", *len)
            }
            KernelSpec::LocallyPeriodic {
                var,
                period,
                len,
                plen,
            } => {
                pos("var", *var)?;
                pos("period", *period)?;
                pos("len", *len)?;
                pos("plen", *plen)
            }
            KernelSpec::Linear { var, offset } => {
                pos("var", *var)?;
                if offset.is_finite() {
                    Ok(())
                } else {
                    Err(KernelError::BadParam {
                        name: "offset",
                        value: *offset,
                    })
                }
            }
            KernelSpec::Sum(children) | KernelSpec::Product(children) => {
                if children.len() < 2 {
                    return Err(KernelError::TooFewChildren {
                        combinator: match self {
                            KernelSpec::Sum(_) => "sum",
                            _ => "product",
                        },
                        got: children.len(),
                    });
                }
                children.iter().try_for_each(KernelSpec::validate)
            }
        }
    }

    /// Evaluates `k(x, y)` for two points of equal dimension.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        if x.len() != y.len() {
            return Err(KernelError::DimensionMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// Cross-covariance matrix `K[i][j] = k(xs[i], ys[j])`.
    ///
    /// Either side may be empty; the result then has a zero dimension.
    pub fn cross(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<DMatrix<f64>, KernelError> {
        check_dims(xs)?;
        check_dims(ys)?;
        if let (Some(x0), Some(y0)) = (xs.first(), ys.first()) {
            if x0.len() != y0.len() {
                return Err(KernelError::DimensionMismatch {
                    left: x0.len(),
                    right: y0.len(),
                });
            }
        }
        Ok(DMatrix::from_fn(xs.len(), ys.len(), |i, j| {
            self.eval_unchecked(&xs[i], &ys[j])
        }))
    }

    /// Symmetric Gram matrix over one point set.
    pub fn gram(&self, xs: &[Vec<f64>]) -> Result<DMatrix<f64>, KernelError> {
        check_dims(xs)?;
        let n = xs.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval_unchecked(&xs[i], &xs[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }

    /// Gram matrix plus its derivative with respect to every kernel
    /// coordinate of the hyperparameter vector (noise excluded), in slot
    /// order. Every returned matrix is symmetric.
    pub fn gram_with_grads(
        &self,
        xs: &[Vec<f64>],
    ) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>), KernelError> {
        check_dims(xs)?;
        let n = xs.len();
        let p = self.n_params();
        let mut k = DMatrix::zeros(n, n);
        let mut grads = vec![DMatrix::zeros(n, n); p];
        let mut buf = vec![0.0; p];
        for i in 0..n {
            for j in i..n {
                let v = self.eval_grad_unchecked(&xs[i], &xs[j], &mut buf);
                k[(i, j)] = v;
                k[(j, i)] = v;
                for (g, &dv) in grads.iter_mut().zip(buf.iter()) {
                    g[(i, j)] = dv;
                    g[(j, i)] = dv;
                }
            }
        }
        Ok((k, grads))
    }

    /// Number of hyperparameters in this tree (noise not included).
    pub fn n_params(&self) -> usize {
        match self {
            KernelSpec::Rbf { .. } | KernelSpec::Linear { .. } => 2,
            KernelSpec::Periodic { .. } => 3,
            KernelSpec::LocallyPeriodic { .. } => 4,
            KernelSpec::Sum(cs) | KernelSpec::Product(cs) => {
                cs.iter().map(KernelSpec::n_params).sum()
            }
        }
    }

    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelSpec::Rbf { var, len } => var * (-sqdist(x, y) / (2.0 * len * len)).exp(),
            KernelSpec::Periodic { var, period, len } => {
                var * (-2.0 * sin_sq_sum(x, y, *period) / (len * len)).exp()
            }
            KernelSpec::LocallyPeriodic {
                var,
                period,
                len,
                plen,
            } => {
                let s2 = sin_sq_sum(x, y, *period);
                var * (-2.0 * s2 / (plen * plen)).exp()
                    * (-sqdist(x, y) / (2.0 * len * len)).exp()
            }
            KernelSpec::Linear { var, offset } => {
                var * x
                    .iter()
                    .zip(y)
                    .map(|(a, b)| (a - offset) * (b - offset))
                    .sum::<f64>()
            }
            KernelSpec::Sum(cs) => cs.iter().map(|c| c.eval_unchecked(x, y)).sum(),
            KernelSpec::Product(cs) => cs.iter().map(|c| c.eval_unchecked(x, y)).product(),
        }
    }

    /// Evaluates `k(x, y)` and fills `out` with the derivative of the value
    /// with respect to each vector coordinate this subtree owns.
    fn eval_grad_unchecked(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> f64 {
        match self {
            KernelSpec::Rbf { var: _, len } => {
                let d2 = sqdist(x, y);
                let k = self.eval_unchecked(x, y);
                out[0] = k;
                out[1] = k * d2 / (len * len);
                k
            }
            KernelSpec::Periodic { var: _, period, len } => {
                let k = self.eval_unchecked(x, y);
                out[0] = k;
                out[1] = k * 2.0 * u_sin_2u_sum(x, y, *period) / (len * len);
                out[2] = k * 4.0 * sin_sq_sum(x, y, *period) / (len * len);
                k
            }
            KernelSpec::LocallyPeriodic {
                var: _,
                period,
                len,
                plen,
            } => {
                let k = self.eval_unchecked(x, y);
                out[0] = k;
                out[1] = k * 2.0 * u_sin_2u_sum(x, y, *period) / (plen * plen);
                out[2] = k * sqdist(x, y) / (len * len);
                out[3] = k * 4.0 * sin_sq_sum(x, y, *period) / (plen * plen);
                k
            }
            KernelSpec::Linear { var, offset } => {
                let k = self.eval_unchecked(x, y);
                out[0] = k;
                // d/d offset of var * sum_j (x_j - c)(y_j - c); identity slot.
                out[1] = var
                    * x.iter()
                        .zip(y)
                        .map(|(a, b)| 2.0 * offset - a - b)
                        .sum::<f64>();
                k
            }
            KernelSpec::Sum(cs) => {
                let mut total = 0.0;
                let mut off = 0;
                for c in cs {
                    let p = c.n_params();
                    total += c.eval_grad_unchecked(x, y, &mut out[off..off + p]);
                    off += p;
                }
                total
            }
            KernelSpec::Product(cs) => {
                let mut vals = Vec::with_capacity(cs.len());
                let mut off = 0;
                for c in cs {
                    let p = c.n_params();
                    vals.push(c.eval_grad_unchecked(x, y, &mut out[off..off + p]));
                    off += p;
                }
                // Scale each child's gradient block by the product of the
                // other children's values; prefix/suffix products stay exact
                // when some child value is 0.
                let n = cs.len();
                let mut prefix = vec![1.0; n + 1];
                for i in 0..n {
                    prefix[i + 1] = prefix[i] * vals[i];
                }
                let mut suffix = vec![1.0; n + 1];
                for i in (0..n).rev() {
                    suffix[i] = suffix[i + 1] * vals[i];
                }
                let mut off = 0;
                for (i, c) in cs.iter().enumerate() {
                    let p = c.n_params();
                    let others = prefix[i] * suffix[i + 1];
                    for g in &mut out[off..off + p] {
                        *g *= others;
                    }
                    off += p;
                }
                prefix[n]
            }
        }
    }

    fn collect_slots(&self, path: &str, slots: &mut Vec<ParamSlot>) {
        let push = |slots: &mut Vec<ParamSlot>, kind: &str, name: &str, role, transform| {
            let full = if path.is_empty() {
                format!("{kind}.{name}")
            } else {
                format!("{path}.{kind}.{name}")
            };
            slots.push(ParamSlot {
                name: full,
                role,
                transform,
            });
        };
        match self {
            KernelSpec::Rbf { .. } => {
                push(slots, "rbf", "var", ParamRole::Variance, Transform::Log);
                push(slots, "rbf", "len", ParamRole::LengthScale, Transform::Log);
            }
            KernelSpec::Periodic { .. } => {
                push(slots, "periodic", "var", ParamRole::Variance, Transform::Log);
                push(slots, "periodic", "period", ParamRole::Period, Transform::Log);
                push(slots, "periodic", "len", ParamRole::LengthScale, Transform::Log);
            }
            KernelSpec::LocallyPeriodic { .. } => {
                push(slots, "locper", "var", ParamRole::Variance, Transform::Log);
                push(slots, "locper", "period", ParamRole::Period, Transform::Log);
                push(slots, "locper", "len", ParamRole::LengthScale, Transform::Log);
                push(slots, "locper", "plen", ParamRole::LengthScale, Transform::Log);
            }
            KernelSpec::Linear { .. } => {
                push(slots, "linear", "var", ParamRole::Variance, Transform::Log);
                push(slots, "linear", "offset", ParamRole::Offset, Transform::Identity);
            }
            KernelSpec::Sum(cs) | KernelSpec::Product(cs) => {
                let kind = match self {
                    KernelSpec::Sum(_) => "sum",
                    _ => "product",
                };
                for (i, c) in cs.iter().enumerate() {
                    let child_path = if path.is_empty() {
                        format!("{kind}[{i}]")
                    } else {
                        format!("{path}.{kind}[{i}]")
                    };
                    c.collect_slots(&child_path, slots);
                }
            }
        }
    }

    fn param_values(&self, out: &mut Vec<f64>) {
        match self {
            KernelSpec::Rbf { var, len } => out.extend([*var, *len]),
            KernelSpec::Periodic { var, period, len } => out.extend([*var, *period, *len]),
            KernelSpec::LocallyPeriodic {
                var,
                period,
                len,
                plen,
            } => out.extend([*var, *period, *len, *plen]),
            KernelSpec::Linear { var, offset } => out.extend([*var, *offset]),
            KernelSpec::Sum(cs) | KernelSpec::Product(cs) => {
                cs.iter().for_each(|c| c.param_values(out))
            }
        }
    }

    fn rebuild(&self, params: &mut std::slice::Iter<'_, f64>) -> KernelSpec {
        let mut next = || *params.next().expect("length checked by caller");
        match self {
            KernelSpec::Rbf { .. } => KernelSpec::Rbf {
                var: next(),
                len: next(),
            },
            KernelSpec::Periodic { .. } => KernelSpec::Periodic {
                var: next(),
                period: next(),
                len: next(),
            },
            KernelSpec::LocallyPeriodic { .. } => KernelSpec::LocallyPeriodic {
                var: next(),
                period: next(),
                len: next(),
                plen: next(),
            },
            KernelSpec::Linear { .. } => KernelSpec::Linear {
                var: next(),
                offset: next(),
            },
            KernelSpec::Sum(cs) => {
                KernelSpec::Sum(cs.iter().map(|c| c.rebuild(params)).collect())
            }
            KernelSpec::Product(cs) => {
                KernelSpec::Product(cs.iter().map(|c| c.rebuild(params)).collect())
            }
        }
    }
}

impl HyperParamVector {
    /// Flattens a kernel spec plus noise variance into vector form.
    pub fn pack(spec: &KernelSpec, noise_var: f64) -> Result<Self, KernelError> {
        spec.validate()?;
        if !noise_var.is_finite() || noise_var < 0.0 {
            return Err(KernelError::BadParam {
                name: "noise_var",
                value: noise_var,
            });
        }
        let mut slots = Vec::with_capacity(spec.n_params() + 1);
        spec.collect_slots("", &mut slots);
        let mut raw = Vec::with_capacity(slots.len());
        spec.param_values(&mut raw);
        let mut values: Vec<f64> = slots
            .iter()
            .zip(raw.iter())
            .map(|(slot, &v)| match slot.transform {
                Transform::Log => v.ln(),
                Transform::Identity => v,
            })
            .collect();
        slots.push(ParamSlot {
            name: "noise_var".to_string(),
            role: ParamRole::NoiseVariance,
            transform: Transform::Log,
        });
        // noise_var = 0 maps to -inf and back without loss.
        values.push(noise_var.ln());
        Ok(HyperParamVector {
            values,
            slots,
            shape: spec.clone(),
        })
    }

    /// Rebuilds `(kernel, noise_var)` from the current coordinate values.
    pub fn unpack(&self) -> Result<(KernelSpec, f64), KernelError> {
        if self.values.len() != self.slots.len() {
            return Err(KernelError::VectorLength {
                expected: self.slots.len(),
                got: self.values.len(),
            });
        }
        let raw: Vec<f64> = self
            .slots
            .iter()
            .zip(self.values.iter())
            .map(|(slot, &v)| match slot.transform {
                Transform::Log => v.exp(),
                Transform::Identity => v,
            })
            .collect();
        let (kernel_raw, noise) = raw.split_at(raw.len() - 1);
        let spec = self.shape.rebuild(&mut kernel_raw.iter());
        spec.validate()?;
        Ok((spec, noise[0]))
    }

    /// Slot metadata in coordinate order; the last slot is always the noise.
    pub fn slots(&self) -> &[ParamSlot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn sqdist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `sum_i sin^2(pi |x_i - y_i| / period)`, the separation measure of the
/// periodic kernels. Per-coordinate (rather than through the Euclidean norm)
/// so the resulting kernel stays positive semidefinite beyond one dimension.
fn sin_sq_sum(x: &[f64], y: &[f64], period: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let s = (std::f64::consts::PI * (a - b).abs() / period).sin();
            s * s
        })
        .sum()
}

/// `sum_i u_i sin(2 u_i)` with `u_i = pi |x_i - y_i| / period`; the factor the
/// period's log-gradient needs.
fn u_sin_2u_sum(x: &[f64], y: &[f64], period: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let u = std::f64::consts::PI * (a - b).abs() / period;
            u * (2.0 * u).sin()
        })
        .sum()
}

fn check_dims(points: &[Vec<f64>]) -> Result<(), KernelError> {
    if let Some(first) = points.first() {
        for p in points {
            if p.len() != first.len() {
                return Err(KernelError::DimensionMismatch {
                    left: first.len(),
                    right: p.len(),
                });
            }
        }
    }
    Ok(())
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelSpec::Rbf { var, len } => write!(f, "rbf(var={var:?}, len={len:?})"),
            KernelSpec::Periodic { var, period, len } => {
                write!(f, "periodic(var={var:?}, period={period:?}, len={len:?})")
            }
            KernelSpec::LocallyPeriodic {
                var,
                period,
                len,
                plen,
            } => write!(
                f,
                "locper(var={var:?}, period={period:?}, len={len:?}, plen={plen:?})"
            ),
            KernelSpec::Linear { var, offset } => {
                write!(f, "linear(var={var:?}, offset={offset:?})")
            }
            KernelSpec::Sum(cs) | KernelSpec::Product(cs) => {
                let name = match self {
                    KernelSpec::Sum(_) => "sum",
                    _ => "product",
                };
                write!(f, "{name}(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}
