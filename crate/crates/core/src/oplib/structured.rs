//! Fast ill-conditioned ensemble `[diag(s) | 0] P F D`: random signs `D`, the
//! orthonormal Hadamard transform `F`, a uniform permutation `P` and a
//! geometric singular-value profile `s`. Nothing is stored densely.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{fwht_in_place, LinearOperator, SvdOperator};
use crate::error::{dim_err, Error, Result};
use crate::rng::{stream, stream_rng};

/// `s_i = c * rho^i` with `rho = cond^(-1/(m-1))` and `c` chosen so that
/// `sum s_i^2 = n`.
pub fn geometric_singular_values(m: usize, cond: f64, n: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(dim_err("need at least one singular value"));
    }
    if !cond.is_finite() || cond < 1.0 {
        return Err(Error::Domain(format!("condition number {cond} must be >= 1")));
    }
    let profile: Vec<f64> = if m == 1 {
        vec![1.0]
    } else {
        let denom = (m - 1) as f64;
        (0..m).map(|i| cond.powf(-(i as f64) / denom)).collect()
    };
    let energy: f64 = profile.iter().map(|p| p * p).sum();
    let scale = (n as f64 / energy).sqrt();
    Ok(profile.into_iter().map(|p| scale * p).collect())
}

#[derive(Debug, Clone)]
pub struct StructuredOperator {
    rows: usize,
    cols: usize,
    signs: Vec<f64>,
    /// Row-space coordinate `i` reads transform coordinate `perm[i]`.
    perm: Vec<usize>,
    singular_values: Vec<f64>,
}

pub fn make_structured_operator(m: usize, n: usize, cond: f64, seed: u64) -> Result<StructuredOperator> {
    if n == 0 || !n.is_power_of_two() {
        return Err(dim_err(format!("structured operator needs a power-of-two width, got {n}")));
    }
    if m == 0 || m > n {
        return Err(Error::UnsupportedShape { rows: m, cols: n });
    }
    let singular_values = geometric_singular_values(m, cond, n)?;

    let mut sign_rng = stream_rng(seed, stream::SIGNS);
    let signs = (0..n).map(|_| if sign_rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream_rng(seed, stream::PERMUTATION));

    Ok(StructuredOperator { rows: m, cols: n, signs, perm, singular_values })
}

impl StructuredOperator {
    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }
}

impl LinearOperator for StructuredOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut c = self.right_t(x);
        c.iter_mut().zip(&self.singular_values).for_each(|(v, s)| *v *= s);
        c
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let scaled: Vec<f64> = y.iter().zip(&self.singular_values).map(|(v, s)| v * s).collect();
        self.right(&scaled)
    }
}

impl SvdOperator for StructuredOperator {
    fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    fn left(&self, c: &[f64]) -> Vec<f64> {
        c.to_vec()
    }

    fn left_t(&self, y: &[f64]) -> Vec<f64> {
        y.to_vec()
    }

    fn right(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.rows);
        let mut z = vec![0.0; self.cols];
        for (&p, &v) in self.perm.iter().zip(c) {
            z[p] = v;
        }
        fwht_in_place(&mut z).expect("power-of-two width");
        z.iter_mut().zip(&self.signs).for_each(|(v, d)| *v *= d);
        z
    }

    fn right_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut z: Vec<f64> = x.iter().zip(&self.signs).map(|(v, d)| v * d).collect();
        fwht_in_place(&mut z).expect("power-of-two width");
        self.perm[..self.rows].iter().map(|&p| z[p]).collect()
    }
}
