use std::sync::Arc;

use super::{LinearOperator, SvdOperator, WaveletTransform};
use crate::error::{dim_err, Result};

/// `A = Phi Psi^T`, acting on wavelet coefficients. Shares the singular values
/// and left factor of `Phi`; the right factor becomes `Psi V`.
#[derive(Clone)]
pub struct Composed {
    phi: Arc<dyn SvdOperator>,
    psi: WaveletTransform,
}

pub fn compose_measurement(phi: Arc<dyn SvdOperator>, psi: WaveletTransform) -> Result<Composed> {
    if phi.cols() != psi.len() {
        return Err(dim_err(format!(
            "operator has {} columns but the wavelet acts on {} pixels",
            phi.cols(),
            psi.len()
        )));
    }
    Ok(Composed { phi, psi })
}

impl Composed {
    pub fn wavelet(&self) -> &WaveletTransform {
        &self.psi
    }

    pub fn inner(&self) -> &Arc<dyn SvdOperator> {
        &self.phi
    }
}

impl LinearOperator for Composed {
    fn rows(&self) -> usize {
        self.phi.rows()
    }

    fn cols(&self) -> usize {
        self.phi.cols()
    }

    fn forward(&self, v: &[f64]) -> Vec<f64> {
        self.phi.forward(&self.psi.inverse(v))
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        self.psi.forward(&self.phi.adjoint(y))
    }
}

impl SvdOperator for Composed {
    fn singular_values(&self) -> &[f64] {
        self.phi.singular_values()
    }

    fn left(&self, c: &[f64]) -> Vec<f64> {
        self.phi.left(c)
    }

    fn left_t(&self, y: &[f64]) -> Vec<f64> {
        self.phi.left_t(y)
    }

    fn right(&self, c: &[f64]) -> Vec<f64> {
        self.psi.forward(&self.phi.right(c))
    }

    fn right_t(&self, v: &[f64]) -> Vec<f64> {
        self.phi.right_t(&self.psi.inverse(v))
    }
}
