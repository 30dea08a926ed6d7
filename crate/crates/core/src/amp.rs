//! AMP / D-AMP.
//!
//! Each iteration forms the pseudo-measurement `r = x + A^T z`, denoises it at
//! the effective noise level `sigma_t = ||z|| / sqrt(M)`, and updates the
//! residual with the Onsager term `(N/M) <D'> z`. One forward and one adjoint
//! application of `A` per iteration.

use std::time::Instant;

use thiserror::Error;

use crate::denoise::Denoiser;
use crate::error::{dim_err, Error, Result};
use crate::oplib::{norm_sq, LinearOperator};
use crate::rng::derive_seed;
use crate::{RunOutcome, Truth};

/// `sigma_t > DIVERGENCE_RATIO * sigma_0` counts as divergence.
pub const DIVERGENCE_RATIO: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmpRecord {
    pub sigma: f64,
    pub residual_norm: f64,
    /// Divergence reported by the denoiser for the step that produced this
    /// record (`None` for the initial record).
    pub divergence: Option<f64>,
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub sigma: f64,
    pub iter: usize,
    pub trace: Vec<AmpRecord>,
}

#[derive(Debug, Error)]
pub enum AmpStepError {
    #[error("non-finite values at iteration {}", .last.iter + 1)]
    NonFinite { last: Box<AmpState> },
    #[error(transparent)]
    Denoiser(#[from] Error),
}

fn effective_sigma(z: &[f64]) -> (f64, f64) {
    let norm = norm_sq(z).sqrt();
    (norm / (z.len() as f64).sqrt(), norm)
}

pub fn amp_init<A: LinearOperator + ?Sized>(a: &A, y: &[f64]) -> Result<AmpState> {
    if y.len() != a.rows() || a.rows() == 0 {
        return Err(dim_err(format!("operator has {} rows but y has length {}", a.rows(), y.len())));
    }
    let (sigma, residual_norm) = effective_sigma(y);
    Ok(AmpState {
        x: vec![0.0; a.cols()],
        z: y.to_vec(),
        sigma,
        iter: 0,
        trace: vec![AmpRecord { sigma, residual_norm, divergence: None, psnr: None }],
    })
}

/// One AMP iteration. `seed` is handed to the denoiser.
pub fn amp_iterate<A, D>(state: &AmpState, a: &A, y: &[f64], denoiser: &D, seed: u64) -> Result<AmpState, AmpStepError>
where
    A: LinearOperator + ?Sized,
    D: Denoiser + ?Sized,
{
    let (m, n) = (a.rows(), a.cols());
    let back = a.adjoint(&state.z);
    let r: Vec<f64> = state.x.iter().zip(&back).map(|(x, b)| x + b).collect();
    let out = denoiser.denoise(&r, state.sigma, seed)?;
    let alpha = out.divergence;
    let x = out.estimate;
    if x.len() != n {
        return Err(Error::Dimension(format!("denoiser returned {} values, expected {n}", x.len())).into());
    }

    let ax = a.forward(&x);
    let onsager = (n as f64 / m as f64) * alpha;
    let z: Vec<f64> = y.iter().zip(&ax).zip(&state.z).map(|((yi, axi), zi)| yi - axi + onsager * zi).collect();
    let (sigma, residual_norm) = effective_sigma(&z);

    if !(alpha.is_finite() && sigma.is_finite() && x.iter().all(|v| v.is_finite())) {
        return Err(AmpStepError::NonFinite { last: Box::new(state.clone()) });
    }

    let mut trace = state.trace.clone();
    trace.push(AmpRecord { sigma, residual_norm, divergence: Some(alpha), psnr: None });
    Ok(AmpState { x, z, sigma, iter: state.iter + 1, trace })
}

/// Runs up to `iters` iterations, stopping early on divergence
/// (non-finite values, or `sigma_t > 1e6 sigma_0`). Denoiser seeds are derived
/// from `seed` and the iteration index. Only denoiser failures are errors.
pub fn amp_run<A, D>(
    a: &A,
    y: &[f64],
    denoiser: &D,
    iters: usize,
    seed: u64,
    truth: Option<&Truth>,
) -> Result<(RunOutcome, AmpState)>
where
    A: LinearOperator + ?Sized,
    D: Denoiser + ?Sized,
{
    if iters == 0 {
        return Err(Error::Config("iteration count must be at least 1".into()));
    }
    let mut state = amp_init(a, y)?;
    let sigma0 = state.sigma;
    let mut psnr = Vec::new();
    let record_psnr = |state: &mut AmpState, psnr: &mut Vec<f64>| {
        if let Some(t) = truth {
            let p = t.psnr(&state.x);
            psnr.push(p);
            if let Some(rec) = state.trace.last_mut() {
                rec.psnr = Some(p);
            }
        }
    };
    record_psnr(&mut state, &mut psnr);

    let mut elapsed = 0.0;
    let mut diverged = false;
    for t in 0..iters {
        let start = Instant::now();
        let step = amp_iterate(&state, a, y, denoiser, derive_seed(seed, t as u64));
        elapsed += start.elapsed().as_secs_f64();
        match step {
            Ok(next) => {
                state = next;
                record_psnr(&mut state, &mut psnr);
                if state.sigma > DIVERGENCE_RATIO * sigma0 {
                    diverged = true;
                    break;
                }
            }
            Err(AmpStepError::NonFinite { last }) => {
                state = *last;
                diverged = true;
                break;
            }
            Err(AmpStepError::Denoiser(e)) => return Err(e),
        }
    }

    let outcome = RunOutcome { estimate: state.x.clone(), psnr, seconds: elapsed, diverged, iterations: state.iter };
    Ok((outcome, state))
}
