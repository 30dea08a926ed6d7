//! Monte Carlo divergence for black-box denoisers.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSettings {
    pub probes: usize,
    /// Finite-difference step; `None` uses [`default_step`].
    pub step: Option<f64>,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self { probes: 1, step: None }
    }
}

impl ProbeSettings {
    pub fn validate(&self) -> Result<()> {
        if self.probes == 0 {
            return Err(Error::Config("probe count must be at least 1".into()));
        }
        match self.step {
            Some(s) if !(s > 0.0 && s.is_finite()) => Err(Error::Config(format!("probe step {s} must be positive"))),
            _ => Ok(()),
        }
    }

    pub fn step_for(&self, r: &[f64]) -> f64 {
        self.step.unwrap_or_else(|| default_step(r))
    }
}

/// `max(||r||_inf, 1) * 1e-3`.
pub fn default_step(r: &[f64]) -> f64 {
    r.iter().fold(1.0f64, |m, v| m.max(v.abs())) * 1e-3
}

/// `(1/K) sum_k eta_k^T [D(r + eps eta_k) - D(r)] / (eps N)` with Rademacher
/// probes `eta_k` drawn from the seed's probe stream. `base` is `D(r)`.
pub fn mc_divergence<F>(denoise: F, r: &[f64], base: &[f64], probes: usize, eps: f64, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if probes == 0 {
        return Err(Error::Domain("need at least one probe".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("probe step {eps} must be positive")));
    }
    let n = r.len();
    assert_eq!(base.len(), n, "mc_divergence: base estimate length");
    let mut rng = stream_rng(seed, stream::PROBES);
    let mut eta = vec![0.0; n];
    let mut shifted = vec![0.0; n];
    let mut total = 0.0;
    for _ in 0..probes {
        for ((e, s), &v) in eta.iter_mut().zip(shifted.iter_mut()).zip(r) {
            *e = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            *s = v + eps * *e;
        }
        let out = denoise(&shifted)?;
        total += eta.iter().zip(out.iter().zip(base)).map(|(e, (o, b))| e * (o - b)).sum::<f64>();
    }
    Ok(total / (eps * n as f64 * probes as f64))
}
