//! Translation-invariant (cycle-spun) wavelet hard thresholding.
//!
//! The built-in image denoiser: for each of `shifts` diagonal circular shifts,
//! transform, zero detail coefficients with magnitude at most `k * sigma`,
//! invert and unshift, then average. The approximation band is never touched.
//! Its divergence comes from [`mc_divergence`].

use super::{mc_divergence, Denoiser, DenoiserResult, ProbeSettings};
use crate::error::{dim_err, Error, Result};
use crate::oplib::WaveletTransform;

pub const DEFAULT_SHIFTS: usize = 8;
pub const DEFAULT_MULTIPLIER: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct TiWaveletDenoiser {
    shifts: usize,
    multiplier: f64,
    probes: ProbeSettings,
}

impl TiWaveletDenoiser {
    pub fn new(shifts: usize, multiplier: f64, probes: ProbeSettings) -> Result<Self> {
        if shifts == 0 {
            return Err(Error::Config("shift count must be at least 1".into()));
        }
        if !(multiplier > 0.0 && multiplier.is_finite()) {
            return Err(Error::Config(format!("threshold multiplier {multiplier} must be positive")));
        }
        probes.validate()?;
        Ok(Self { shifts, multiplier, probes })
    }

    /// The denoised image alone (no divergence).
    pub fn apply(&self, r: &[f64], sigma: f64) -> Result<Vec<f64>> {
        let wavelet = wavelet_for(r.len())?;
        Ok(self.cycle_spin(&wavelet, r, self.multiplier * sigma))
    }

    fn cycle_spin(&self, wavelet: &WaveletTransform, r: &[f64], threshold: f64) -> Vec<f64> {
        let side = wavelet.side();
        let mut acc = vec![0.0; r.len()];
        let mut shifted = vec![0.0; r.len()];
        // Fixed shift order keeps the accumulation bit-reproducible.
        for k in 0..self.shifts {
            let k = k % side;
            for i in 0..side {
                for j in 0..side {
                    shifted[((i + k) % side) * side + (j + k) % side] = r[i * side + j];
                }
            }
            let mut coeffs = wavelet.forward(&shifted);
            for (idx, c) in coeffs.iter_mut().enumerate() {
                if !wavelet.is_approx(idx) && c.abs() <= threshold {
                    *c = 0.0;
                }
            }
            let back = wavelet.inverse(&coeffs);
            for i in 0..side {
                for j in 0..side {
                    acc[i * side + j] += back[((i + k) % side) * side + (j + k) % side];
                }
            }
        }
        let inv = 1.0 / self.shifts as f64;
        acc.iter_mut().for_each(|v| *v *= inv);
        acc
    }
}

fn wavelet_for(len: usize) -> Result<WaveletTransform> {
    let side = (len as f64).sqrt().round() as usize;
    if side * side != len {
        return Err(dim_err(format!("ti-wavelet denoiser needs a square image, got {len} pixels")));
    }
    WaveletTransform::default_for_side(side)
}

impl Denoiser for TiWaveletDenoiser {
    fn denoise(&self, r: &[f64], sigma: f64, seed: u64) -> Result<DenoiserResult> {
        if !(sigma >= 0.0) {
            return Err(Error::Domain(format!("noise level {sigma} must be non-negative")));
        }
        let wavelet = wavelet_for(r.len())?;
        if sigma == 0.0 {
            return Ok(DenoiserResult { estimate: r.to_vec(), divergence: 1.0 });
        }
        let threshold = self.multiplier * sigma;
        let estimate = self.cycle_spin(&wavelet, r, threshold);
        let divergence = mc_divergence(
            |x| Ok(self.cycle_spin(&wavelet, x, threshold)),
            r,
            &estimate,
            self.probes.probes,
            self.probes.step_for(r),
            seed,
        )?;
        Ok(DenoiserResult { estimate, divergence })
    }
}
