//! Matrix-free linear operators and the measurement ensembles.

mod compose;
mod counting;
mod fwht;
mod gaussian;
mod structured;
mod wavelet;

pub use compose::{compose_measurement, Composed};
pub use counting::{ApplyCounts, Counted};
pub use fwht::{fwht, fwht_in_place};
pub use gaussian::{make_gaussian_operator, GaussianOperator};
pub use structured::{geometric_singular_values, make_structured_operator, StructuredOperator};
pub use wavelet::{WaveletFamily, WaveletTransform};

/// A real linear map `R^cols -> R^rows` given by its forward and adjoint action.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn forward(&self, x: &[f64]) -> Vec<f64>;
    fn adjoint(&self, y: &[f64]) -> Vec<f64>;
}

/// A `rows x cols` operator (`rows <= cols`) with an explicit SVD
/// `A = U [diag(s) | 0] V^T`.
///
/// The right factor is exposed through its first `rows` columns only (the
/// row space); callers handle the null space as the orthogonal complement.
pub trait SvdOperator: LinearOperator {
    /// Nonincreasing, length `rows`.
    fn singular_values(&self) -> &[f64];
    /// `U c`, length `rows`.
    fn left(&self, c: &[f64]) -> Vec<f64>;
    /// `U^T y`, length `rows`.
    fn left_t(&self, y: &[f64]) -> Vec<f64>;
    /// `V_r c` for row-space coordinates `c`, length `cols`.
    fn right(&self, c: &[f64]) -> Vec<f64>;
    /// `V_r^T x`, length `rows`.
    fn right_t(&self, x: &[f64]) -> Vec<f64>;
}

impl<T: LinearOperator + ?Sized> LinearOperator for std::sync::Arc<T> {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (**self).forward(x)
    }
    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        (**self).adjoint(y)
    }
}

impl<T: SvdOperator + ?Sized> SvdOperator for std::sync::Arc<T> {
    fn singular_values(&self) -> &[f64] {
        (**self).singular_values()
    }
    fn left(&self, c: &[f64]) -> Vec<f64> {
        (**self).left(c)
    }
    fn left_t(&self, y: &[f64]) -> Vec<f64> {
        (**self).left_t(y)
    }
    fn right(&self, c: &[f64]) -> Vec<f64> {
        (**self).right(c)
    }
    fn right_t(&self, x: &[f64]) -> Vec<f64> {
        (**self).right_t(x)
    }
}

#[cfg(test)]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[cfg(test)]
pub(crate) mod checks {
    //! Shared property checks for every `SvdOperator`.
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn randn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    pub fn assert_svd_operator<A: SvdOperator + ?Sized>(op: &A, trials: usize, tol: f64) {
        let (m, n) = (op.rows(), op.cols());
        let s = op.singular_values();
        assert_eq!(s.len(), m);
        assert!(s.windows(2).all(|w| w[0] >= w[1]), "singular values not sorted");
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
        for _ in 0..trials {
            let u = randn(&mut rng, m);
            let v = randn(&mut rng, n);
            // Adjoint consistency.
            let lhs = dot(&u, &op.forward(&v));
            let rhs = dot(&op.adjoint(&u), &v);
            let scale = norm_sq(&u).sqrt() * norm_sq(&v).sqrt() + 1.0;
            assert!((lhs - rhs).abs() <= tol * scale, "adjoint mismatch {lhs} vs {rhs}");

            // Reconstruction U diag(s) V^T v == forward(v).
            let coords = op.right_t(&v);
            let scaled: Vec<f64> = coords.iter().zip(s).map(|(c, s)| c * s).collect();
            let recon = op.left(&scaled);
            let direct = op.forward(&v);
            let fscale = norm_sq(&direct).sqrt().max(1.0);
            assert!(max_abs_diff(&recon, &direct) <= tol * fscale, "svd reconstruction");

            // Orthogonality of both factors.
            let c = randn(&mut rng, m);
            assert!(max_abs_diff(&op.right_t(&op.right(&c)), &c) <= tol);
            assert!(max_abs_diff(&op.left_t(&op.left(&c)), &c) <= tol);
            assert!(max_abs_diff(&op.left(&op.left_t(&c)), &c) <= tol);
        }
    }
}
