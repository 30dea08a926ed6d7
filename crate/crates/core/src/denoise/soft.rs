use super::{Denoiser, DenoiserResult};
use crate::error::{Error, Result};

/// Elementwise soft threshold with its exact divergence `#{|r_i| > lambda} / N`.
pub fn soft_threshold(r: &[f64], lambda: f64) -> Result<DenoiserResult> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("threshold {lambda} must be non-negative")));
    }
    let mut kept = 0usize;
    let estimate = r
        .iter()
        .map(|&v| {
            if v.abs() > lambda {
                kept += 1;
                v - lambda.copysign(v)
            } else {
                0.0
            }
        })
        .collect();
    let divergence = if r.is_empty() { 0.0 } else { kept as f64 / r.len() as f64 };
    Ok(DenoiserResult { estimate, divergence })
}

/// Threshold minimizing Stein's unbiased risk estimate
/// `-N s^2 + sum min(r_i^2, l^2) + 2 s^2 #{|r_i| > l}` over `{0} U {|r_i|}`.
/// Ties resolve to the smallest threshold.
pub fn sure_threshold(r: &[f64], sigma: f64) -> f64 {
    let n = r.len();
    if n == 0 || sigma == 0.0 {
        return 0.0;
    }
    let var = sigma * sigma;
    let mut mags: Vec<f64> = r.iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);

    // lambda = 0
    let nonzero = mags.iter().filter(|&&m| m > 0.0).count();
    let mut best = (0.0, 2.0 * var * nonzero as f64);

    // Risk without the constant -N s^2, evaluated at the end of each tie run.
    let mut prefix = 0.0;
    for (idx, &lambda) in mags.iter().enumerate() {
        prefix += lambda * lambda;
        if idx + 1 < n && mags[idx + 1] == lambda {
            continue;
        }
        let above = (n - idx - 1) as f64;
        let risk = prefix + above * (lambda * lambda + 2.0 * var);
        if risk < best.1 {
            best = (lambda, risk);
        }
    }
    best.0
}

pub fn sure_tuned_soft_threshold(r: &[f64], sigma: f64) -> Result<DenoiserResult> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!("noise level {sigma} must be non-negative")));
    }
    soft_threshold(r, sure_threshold(r, sigma))
}

/// Soft threshold at a fixed multiple of the noise level.
#[derive(Debug, Clone, Copy)]
pub struct SoftThreshold {
    multiplier: f64,
}

impl SoftThreshold {
    pub fn new(multiplier: f64) -> Result<Self> {
        if !(multiplier > 0.0 && multiplier.is_finite()) {
            return Err(Error::Config(format!("threshold multiplier {multiplier} must be positive")));
        }
        Ok(Self { multiplier })
    }
}

impl Denoiser for SoftThreshold {
    fn denoise(&self, r: &[f64], sigma: f64, _seed: u64) -> Result<DenoiserResult> {
        soft_threshold(r, self.multiplier * sigma)
    }
}

/// Soft threshold with the threshold re-tuned by SURE on every call.
#[derive(Debug, Clone, Copy, Default)]
pub struct SureSoftThreshold;

impl Denoiser for SureSoftThreshold {
    fn denoise(&self, r: &[f64], sigma: f64, _seed: u64) -> Result<DenoiserResult> {
        sure_tuned_soft_threshold(r, sigma)
    }
}
