//! Shared test support: seeded random model generators and a deliberately
//! naive dense-algebra oracle.
//!
//! The oracle conditions a joint Gaussian the textbook way, with plain
//! `Vec<Vec<f64>>` arithmetic and Gauss-Jordan inversion. It shares no code
//! with the production solver paths (no nalgebra, no Cholesky), so
//! agreement between the two is meaningful evidence rather than an
//! identity.

use gptrust_core::{Dataset, KernelSpec};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed-algorithm seeded RNG so every suite draws the same cases forever.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws log-uniformly from `[lo, hi]`; both bounds must be positive.
pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    assert!(lo > 0.0 && hi > lo, "log_uniform needs 0 < lo < hi");
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// A random leaf kernel with parameters in numerically comfortable ranges.
pub fn random_leaf<R: Rng>(rng: &mut R) -> KernelSpec {
    match rng.gen_range(0..4u32) {
        0 => KernelSpec::Rbf {
            var: log_uniform(rng, 0.3, 3.0),
            len: log_uniform(rng, 0.3, 3.0),
        },
        1 => KernelSpec::Periodic {
            var: log_uniform(rng, 0.3, 3.0),
            period: log_uniform(rng, 0.5, 2.0),
            len: log_uniform(rng, 0.3, 3.0),
        },
        2 => KernelSpec::LocallyPeriodic {
            var: log_uniform(rng, 0.3, 3.0),
            period: log_uniform(rng, 0.5, 2.0),
            len: log_uniform(rng, 0.3, 3.0),
            plen: log_uniform(rng, 0.3, 3.0),
        },
        _ => KernelSpec::Linear {
            var: log_uniform(rng, 0.3, 3.0),
            offset: rng.gen_range(-1.0..1.0),
        },
    }
}

/// A random kernel tree: leaves at depth 0, otherwise a chance of a sum or
/// product over two or three shallower trees.
pub fn random_kernel<R: Rng>(rng: &mut R, max_depth: usize) -> KernelSpec {
    if max_depth == 0 || rng.gen_bool(0.6) {
        return random_leaf(rng);
    }
    let n = rng.gen_range(2..=3usize);
    let children: Vec<KernelSpec> = (0..n).map(|_| random_kernel(rng, max_depth - 1)).collect();
    if rng.gen_bool(0.5) {
        KernelSpec::Sum(children)
    } else {
        KernelSpec::Product(children)
    }
}

/// `n` points drawn uniformly from `[lo, hi]^dim`.
pub fn random_points<R: Rng>(rng: &mut R, n: usize, dim: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(lo..hi)).collect())
        .collect()
}

/// A random dataset over `[-2, 2]^dim` with outputs in `[-2, 2]`.
pub fn random_dataset<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Dataset {
    let inputs = random_points(rng, n, dim, -2.0, 2.0);
    let outputs = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Dataset::new(inputs, outputs).expect("generated values are finite")
}

/// Inverts a square matrix by Gauss-Jordan elimination with partial
/// pivoting. Returns `None` for a singular (or numerically hopeless) input.
pub fn gauss_jordan_invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut aug: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (i, row) in a.iter().enumerate() {
        assert_eq!(row.len(), n, "matrix must be square");
        let mut r = row.clone();
        r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
        aug.push(r);
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                aug[i][col]
                    .abs()
                    .partial_cmp(&aug[j][col].abs())
                    .expect("finite entries")
            })
            .expect("non-empty range");
        if aug[pivot][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot);
        let d = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = aug[row][col];
            if f == 0.0 {
                continue;
            }
            for k in 0..2 * n {
                let scaled = f * aug[col][k];
                aug[row][k] -= scaled;
            }
        }
    }
    Some(aug.into_iter().map(|mut r| r.split_off(n)).collect())
}

/// Textbook joint-Gaussian conditioning at one query point.
///
/// Builds the dense covariance of (training outputs, query value) from the
/// kernel, adds `noise_var + jitter` to the training diagonal, and reads
/// the conditional mean and latent variance off the inverse. Inputs are
/// taken in raw units; the caller is responsible for matching whatever
/// normalization the model under test applies (or for disabling it).
pub fn oracle_predict(
    kernel: &KernelSpec,
    noise_var: f64,
    jitter: f64,
    xs: &[Vec<f64>],
    ys: &[f64],
    query: &[f64],
) -> Option<(f64, f64)> {
    let n = xs.len();
    let kqq = kernel.eval(query, query).expect("valid kernel and points");
    if n == 0 {
        return Some((0.0, kqq));
    }
    let mut cov = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            cov[i][j] = kernel.eval(&xs[i], &xs[j]).expect("valid kernel and points");
        }
        cov[i][i] += noise_var + jitter;
    }
    let inv = gauss_jordan_invert(&cov)?;
    let kq: Vec<f64> = xs
        .iter()
        .map(|x| kernel.eval(x, query).expect("valid kernel and points"))
        .collect();
    let mut w = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            w[i] += inv[i][j] * kq[j];
        }
    }
    let mean = w.iter().zip(ys).map(|(wi, yi)| wi * yi).sum();
    let latent = kqq - w.iter().zip(&kq).map(|(wi, ki)| wi * ki).sum::<f64>();
    Some((mean, latent))
}

/// Symmetric central difference `(f(x+h) - f(x-h)) / 2h`.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_identity() {
        let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(gauss_jordan_invert(&eye), Some(eye.clone()));
    }

    #[test]
    fn inverts_hand_checked_two_by_two() {
        // [[4, 7], [2, 6]] has determinant 10.
        let a = vec![vec![4.0, 7.0], vec![2.0, 6.0]];
        let inv = gauss_jordan_invert(&a).expect("nonsingular");
        let expected = [[0.6, -0.7], [-0.2, 0.4]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((inv[i][j] - expected[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_singular_matrix() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert_eq!(gauss_jordan_invert(&a), None);
    }

    #[test]
    fn oracle_matches_single_point_formula() {
        let kernel = KernelSpec::Rbf { var: 1.0, len: 1.0 };
        let xs = vec![vec![0.0]];
        let ys = [2.0];
        let q = [1.0];
        let (mean, latent) =
            oracle_predict(&kernel, 0.5, 0.0, &xs, &ys, &q).expect("nonsingular");
        let k = (-0.5f64).exp();
        assert!((mean - k * 2.0 / 1.5).abs() < 1e-14);
        assert!((latent - (1.0 - k * k / 1.5)).abs() < 1e-14);
    }

    #[test]
    fn central_diff_differentiates_a_parabola() {
        let d = central_diff(|x| x * x, 3.0, 1e-6);
        assert!((d - 6.0).abs() < 1e-8);
    }

    #[test]
    fn generators_are_reproducible() {
        let mut a = rng(7);
        let mut b = rng(7);
        assert_eq!(
            format!("{:?}", random_kernel(&mut a, 2)),
            format!("{:?}", random_kernel(&mut b, 2))
        );
        assert_eq!(random_points(&mut a, 3, 2, -1.0, 1.0), random_points(&mut b, 3, 2, -1.0, 1.0));
    }
}
