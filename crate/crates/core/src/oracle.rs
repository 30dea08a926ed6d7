//! Slow dense reference computations used to cross-check the fast paths
//! (unit tests, the acceptance suite and `dvamp selftest`). Nothing here calls
//! the fast transforms it is meant to check.

use crate::oplib::{LinearOperator, StructuredOperator, SvdOperator};

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        self.data.chunks_exact(self.cols).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn mul_t_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.data.chunks_exact(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        out
    }

    /// `A^T A`.
    pub fn gram(&self) -> Dense {
        let n = self.cols;
        let mut g = Dense::zeros(n, n);
        for row in self.data.chunks_exact(n) {
            for i in 0..n {
                if row[i] == 0.0 {
                    continue;
                }
                for j in 0..n {
                    g.data[i * n + j] += row[i] * row[j];
                }
            }
        }
        g
    }
}

/// Sylvester Hadamard matrix scaled to be orthonormal.
pub fn hadamard(n: usize) -> Dense {
    assert!(n.is_power_of_two());
    let scale = 1.0 / (n as f64).sqrt();
    let mut h = Dense::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            h.data[i * n + j] = if (i & j).count_ones() % 2 == 0 { scale } else { -scale };
        }
    }
    h
}

/// Builds `[diag(s) | 0] P F D` entry by entry from the operator's sign,
/// permutation and singular-value data.
pub fn structured_dense(op: &StructuredOperator) -> Dense {
    let (m, n) = (op.rows(), op.cols());
    let h = hadamard(n);
    let s = op.singular_values();
    let mut out = Dense::zeros(m, n);
    for i in 0..m {
        let p = op.permutation()[i];
        for j in 0..n {
            out.data[i * n + j] = s[i] * h.at(p, j) * op.signs()[j];
        }
    }
    out
}

/// Dense matrix of any operator, column by column from basis vectors.
pub fn materialize<A: LinearOperator + ?Sized>(op: &A) -> Dense {
    let (m, n) = (op.rows(), op.cols());
    let mut out = Dense::zeros(m, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = op.forward(&e);
        e[j] = 0.0;
        for i in 0..m {
            out.data[i * n + j] = col[i];
        }
    }
    out
}

/// Cholesky solve of a symmetric positive-definite system.
pub fn solve_spd(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = a.rows;
    assert_eq!(a.cols, n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.at(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                assert!(sum > 0.0, "matrix not positive definite");
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] -= l[i * n + k] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] -= l[k * n + i] * z[k];
        }
        z[i] /= l[i * n + i];
    }
    z
}

fn lmmse_system(a: &Dense, gamma_w: f64, gamma2: f64) -> Dense {
    let mut sys = a.gram();
    sys.data.iter_mut().for_each(|v| *v *= gamma_w);
    for i in 0..a.cols {
        sys.data[i * a.cols + i] += gamma2;
    }
    sys
}

/// Solves `(gw A^T A + g2 I) x = gw A^T y + g2 r2` directly.
pub fn lmmse_dense(a: &Dense, y: &[f64], r2: &[f64], gamma_w: f64, gamma2: f64) -> Vec<f64> {
    let sys = lmmse_system(a, gamma_w, gamma2);
    let rhs: Vec<f64> = a.mul_t_vec(y).iter().zip(r2).map(|(u, r)| gamma_w * u + gamma2 * r).collect();
    solve_spd(&sys, &rhs)
}

/// `(g2 / N) tr[(gw A^T A + g2 I)^{-1}]` via N dense solves.
pub fn lmmse_divergence_dense(a: &Dense, gamma_w: f64, gamma2: f64) -> f64 {
    let n = a.cols;
    let sys = lmmse_system(a, gamma_w, gamma2);
    let mut trace = 0.0;
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        trace += solve_spd(&sys, &e)[j];
        e[j] = 0.0;
    }
    gamma2 * trace / n as f64
}

/// SURE risk of soft thresholding at `lambda`, evaluated directly.
pub fn sure_risk(r: &[f64], sigma: f64, lambda: f64) -> f64 {
    let n = r.len() as f64;
    let kept = r.iter().filter(|v| v.abs() > lambda).count() as f64;
    let clipped: f64 = r.iter().map(|v| (v * v).min(lambda * lambda)).sum();
    -n * sigma * sigma + clipped + 2.0 * sigma * sigma * kept
}

/// Minimizer of [`sure_risk`] over `points` evenly spaced thresholds on
/// `[0, max |r|]`.
pub fn sure_grid_minimizer(r: &[f64], sigma: f64, points: usize) -> (f64, f64) {
    let top = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (0..points)
        .map(|k| {
            let lambda = top * k as f64 / (points - 1) as f64;
            (lambda, sure_risk(r, sigma, lambda))
        })
        .fold((0.0, f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// Central finite-difference divergence `(1/N) sum_i dD_i/dr_i`.
pub fn fd_divergence(map: impl Fn(&[f64]) -> Vec<f64>, r: &[f64], h: f64) -> f64 {
    let mut probe = r.to_vec();
    let mut total = 0.0;
    for i in 0..r.len() {
        probe[i] = r[i] + h;
        let up = map(&probe)[i];
        probe[i] = r[i] - h;
        let down = map(&probe)[i];
        probe[i] = r[i];
        total += (up - down) / (2.0 * h);
    }
    total / r.len() as f64
}

/// Dense reference of one LMMSE message update given any SVD operator:
/// returns `(x2, alpha2)`.
pub fn lmmse_reference<A: SvdOperator + ?Sized>(
    op: &A,
    y: &[f64],
    r2: &[f64],
    gamma_w: f64,
    gamma2: f64,
) -> (Vec<f64>, f64) {
    let a = materialize(op);
    (lmmse_dense(&a, y, r2, gamma_w, gamma2), lmmse_divergence_dense(&a, gamma_w, gamma2))
}
