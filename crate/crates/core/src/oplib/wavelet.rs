//! Separable 2-D orthonormal discrete wavelet transform with periodic
//! extension. Coefficients are stored in the usual pyramid layout: after `L`
//! levels the approximation band occupies the top-left `side >> L` square of
//! the row-major coefficient image.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveletFamily {
    Haar,
    /// 4-tap Daubechies.
    Db2,
}

impl WaveletFamily {
    fn lowpass(self) -> Vec<f64> {
        match self {
            WaveletFamily::Haar => vec![1.0 / SQRT_2, 1.0 / SQRT_2],
            WaveletFamily::Db2 => {
                let r3 = 3f64.sqrt();
                let d = 4.0 * SQRT_2;
                vec![(1.0 + r3) / d, (3.0 + r3) / d, (3.0 - r3) / d, (1.0 - r3) / d]
            }
        }
    }
}

impl fmt::Display for WaveletFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WaveletFamily::Haar => "haar",
            WaveletFamily::Db2 => "db2",
        })
    }
}

impl FromStr for WaveletFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(WaveletFamily::Haar),
            "db2" => Ok(WaveletFamily::Db2),
            other => Err(Error::Config(format!("unknown wavelet family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WaveletTransform {
    side: usize,
    levels: usize,
    family: WaveletFamily,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl WaveletTransform {
    pub fn new(side: usize, levels: usize, family: WaveletFamily) -> Result<Self> {
        if side < 4 || !side.is_power_of_two() {
            return Err(dim_err(format!("wavelet side {side} must be a power of two >= 4")));
        }
        let max_levels = side.trailing_zeros() as usize - 2;
        if levels > max_levels {
            return Err(dim_err(format!("{levels} levels requested but side {side} allows at most {max_levels}")));
        }
        let lo = family.lowpass();
        let taps = lo.len();
        // Quadrature mirror: g[k] = (-1)^k h[L-1-k].
        let hi = (0..taps).map(|k| if k % 2 == 0 { lo[taps - 1 - k] } else { -lo[taps - 1 - k] }).collect();
        Ok(Self { side, levels, family, lo, hi })
    }

    /// db2 with `log2(side) - 3` levels (at least one).
    pub fn default_for_side(side: usize) -> Result<Self> {
        if side < 4 || !side.is_power_of_two() {
            return Err(dim_err(format!("wavelet side {side} must be a power of two >= 4")));
        }
        let levels = (side.trailing_zeros() as usize).saturating_sub(3).max(1);
        Self::new(side, levels, WaveletFamily::Db2)
    }

    /// db2 at the deepest level allowed for `side` (`log2(side) - 2`). The
    /// sparsifying basis for wavelet-domain recovery: deeper decompositions
    /// leave fewer large coarse coefficients and recover better.
    pub fn max_depth(side: usize) -> Result<Self> {
        if side < 8 || !side.is_power_of_two() {
            return Err(dim_err(format!("wavelet side {side} must be a power of two >= 8")));
        }
        Self::new(side, side.trailing_zeros() as usize - 2, WaveletFamily::Db2)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn family(&self) -> WaveletFamily {
        self.family
    }

    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Side length of the coarsest approximation band.
    pub fn approx_side(&self) -> usize {
        self.side >> self.levels
    }

    /// True when coefficient `index` (row-major) lies in the approximation band.
    pub fn is_approx(&self, index: usize) -> bool {
        let a = self.approx_side();
        index / self.side < a && index % self.side < a
    }

    pub fn forward(&self, image: &[f64]) -> Vec<f64> {
        assert_eq!(image.len(), self.len(), "wavelet_forward: image length");
        let mut data = image.to_vec();
        let mut scratch = vec![0.0; self.side];
        let mut n = self.side;
        for _ in 0..self.levels {
            self.pass_2d(&mut data, n, &mut scratch, Self::analyze);
            n /= 2;
        }
        data
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len(), "wavelet_inverse: coefficient length");
        let mut data = coeffs.to_vec();
        if self.levels == 0 {
            return data;
        }
        let mut scratch = vec![0.0; self.side];
        let mut n = self.side >> (self.levels - 1);
        for _ in 0..self.levels {
            self.pass_2d(&mut data, n, &mut scratch, Self::synthesize);
            n *= 2;
        }
        data
    }

    /// Applies a 1-D routine along the rows then the columns of the top-left
    /// `n x n` block. Row and column passes commute, so the same order serves
    /// analysis and synthesis.
    fn pass_2d(&self, data: &mut [f64], n: usize, scratch: &mut [f64], op: fn(&Self, &[f64], &mut [f64])) {
        let side = self.side;
        let mut line = vec![0.0; n];
        for row in 0..n {
            let start = row * side;
            line.copy_from_slice(&data[start..start + n]);
            op(self, &line, &mut scratch[..n]);
            data[start..start + n].copy_from_slice(&scratch[..n]);
        }
        for col in 0..n {
            for (row, v) in line.iter_mut().enumerate() {
                *v = data[row * side + col];
            }
            op(self, &line, &mut scratch[..n]);
            for (row, v) in scratch[..n].iter().enumerate() {
                data[row * side + col] = *v;
            }
        }
    }

    fn analyze(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let half = n / 2;
        for k in 0..half {
            let mut a = 0.0;
            let mut d = 0.0;
            for (j, (&h, &g)) in self.lo.iter().zip(&self.hi).enumerate() {
                let v = x[(2 * k + j) % n];
                a += h * v;
                d += g * v;
            }
            out[k] = a;
            out[half + k] = d;
        }
    }

    fn synthesize(&self, c: &[f64], out: &mut [f64]) {
        let n = c.len();
        let half = n / 2;
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..half {
            let (a, d) = (c[k], c[half + k]);
            for (j, (&h, &g)) in self.lo.iter().zip(&self.hi).enumerate() {
                out[(2 * k + j) % n] += h * a + g * d;
            }
        }
    }
}
