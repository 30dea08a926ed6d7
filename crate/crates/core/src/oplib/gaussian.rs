//! Dense i.i.d. Gaussian ensemble with a cached thin SVD.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par};
use rand_distr::{Distribution, StandardNormal};

use super::{LinearOperator, SvdOperator};
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

pub struct GaussianOperator {
    matrix: Mat<f64>,
    u: Mat<f64>,
    v: Mat<f64>,
    singular_values: Vec<f64>,
}

/// `m x n` matrix with i.i.d. `N(0, 1/m)` entries, drawn row by row from the
/// seed's matrix stream. The thin SVD is computed once here.
pub fn make_gaussian_operator(m: usize, n: usize, seed: u64) -> Result<GaussianOperator> {
    if m == 0 || m > n {
        return Err(Error::UnsupportedShape { rows: m, cols: n });
    }
    let std = 1.0 / (m as f64).sqrt();
    let mut rng = stream_rng(seed, stream::GAUSSIAN_MATRIX);
    let entries: Vec<f64> =
        (0..m * n).map(|_| std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect();
    let matrix = Mat::from_fn(m, n, |i, j| entries[i * n + j]);
    drop(entries);
    GaussianOperator::from_matrix(matrix)
}

impl GaussianOperator {
    /// Wraps an arbitrary dense `m x n` matrix (`m <= n`).
    pub fn from_matrix(matrix: Mat<f64>) -> Result<Self> {
        let (m, n) = (matrix.nrows(), matrix.ncols());
        if m == 0 || m > n {
            return Err(Error::UnsupportedShape { rows: m, cols: n });
        }
        let svd = matrix.thin_svd().map_err(|_| Error::Svd)?;
        let singular_values = svd.S().column_vector().iter().copied().collect();
        Ok(Self { u: svd.U().to_owned(), v: svd.V().to_owned(), matrix, singular_values })
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.matrix.as_ref()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }
}

fn matvec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.ncols(), x.len(), "matvec: dimension mismatch");
    let mut out = vec![0.0; a.nrows()];
    let rows = a.nrows();
    matmul(
        MatMut::from_column_major_slice_mut(&mut out, rows, 1),
        Accum::Replace,
        a,
        MatRef::from_column_major_slice(x, x.len(), 1),
        1.0,
        Par::Seq,
    );
    out
}

impl LinearOperator for GaussianOperator {
    fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        matvec(self.matrix.as_ref(), x)
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        matvec(self.matrix.as_ref().transpose(), y)
    }
}

impl SvdOperator for GaussianOperator {
    fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    fn left(&self, c: &[f64]) -> Vec<f64> {
        matvec(self.u.as_ref(), c)
    }

    fn left_t(&self, y: &[f64]) -> Vec<f64> {
        matvec(self.u.as_ref().transpose(), y)
    }

    fn right(&self, c: &[f64]) -> Vec<f64> {
        matvec(self.v.as_ref(), c)
    }

    fn right_t(&self, x: &[f64]) -> Vec<f64> {
        matvec(self.v.as_ref().transpose(), x)
    }
}
