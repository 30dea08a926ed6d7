//! VAMP / D-VAMP with EM tuning of the noise precision.
//!
//! Two stages exchange extrinsic messages `(r, gamma)`:
//!
//! * denoising: `x1 = D(r1; 1/sqrt(gamma1))`, `a1 = <D'>`,
//!   `gamma2 = gamma1 (1 - a1) / a1`, `r2 = (x1 - a1 r1) / (1 - a1)`;
//! * LMMSE: `x2 = (gw A^T A + gamma2 I)^{-1} (gw A^T y + gamma2 r2)`,
//!   diagonalized by the SVD of `A`, then the same extrinsic update back to
//!   `(r1, gamma1)`.
//!
//! Per iteration the operator is touched three times: `U^T y`, `V^T r2` and
//! one `V` application.

use std::time::Instant;

use crate::denoise::Denoiser;
use crate::error::{dim_err, Error, Result};
use crate::oplib::{norm_sq, SvdOperator};
use crate::rng::derive_seed;
use crate::{RunOutcome, Truth};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VampConfig {
    /// Damping factor in (0, 1]; 1 means no damping.
    pub damping: f64,
    pub max_iters: usize,
    pub auto_tune_noise: bool,
    /// Starting (or, without auto-tuning, fixed) noise precision.
    pub initial_gamma_w: Option<f64>,
    pub precision_bounds: (f64, f64),
    /// Bounds applied to the denoiser divergence before forming messages.
    pub divergence_bounds: (f64, f64),
    pub init: VampInit,
}

impl Default for VampConfig {
    fn default() -> Self {
        Self {
            damping: 1.0,
            max_iters: 10,
            auto_tune_noise: true,
            initial_gamma_w: None,
            precision_bounds: (1e-11, 1e11),
            divergence_bounds: (1e-8, 1.0 - 1e-8),
            init: VampInit::default(),
        }
    }
}

/// 0.7 below a condition number of 100, 0.5 from there on.
pub fn default_damping(cond: f64) -> f64 {
    if cond < 100.0 {
        0.7
    } else {
        0.5
    }
}

impl VampConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("damping {} must lie in (0, 1]", self.damping)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("iteration count must be at least 1".into()));
        }
        let (lo, hi) = self.precision_bounds;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Config(format!("bad precision bounds ({lo}, {hi})")));
        }
        let (lo, hi) = self.divergence_bounds;
        if !(lo > 0.0 && lo < hi && hi < 1.0) {
            return Err(Error::Config(format!("bad divergence bounds ({lo}, {hi})")));
        }
        if let Some(g) = self.initial_gamma_w {
            if !(g > 0.0) {
                return Err(Error::Config(format!("noise precision {g} must be positive")));
            }
        } else if !self.auto_tune_noise {
            return Err(Error::Config("a noise precision is required when auto-tuning is off".into()));
        }
        Ok(())
    }

    fn clamp_precision(&self, v: f64) -> (f64, bool) {
        let (lo, hi) = self.precision_bounds;
        let c = v.clamp(lo, hi);
        (c, c != v)
    }
}

/// Which safeguards fired during an iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClampEvents {
    pub gamma1: bool,
    pub gamma2: bool,
    pub gamma_w: bool,
    pub divergence: bool,
}

impl ClampEvents {
    pub fn any_precision(&self) -> bool {
        self.gamma1 || self.gamma2 || self.gamma_w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VampRecord {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_w: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub psnr_x1: Option<f64>,
    pub psnr_x2: Option<f64>,
    pub clamped: ClampEvents,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VampState {
    pub r1: Vec<f64>,
    pub gamma1: f64,
    pub x1: Vec<f64>,
    pub r2: Vec<f64>,
    pub gamma2: f64,
    pub x2: Vec<f64>,
    pub gamma_w: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub iter: usize,
    pub trace: Vec<VampRecord>,
    /// `||y - A x2||^2` from the latest LMMSE step, computed spectrally.
    pub residual_sq: Option<f64>,
    /// Clamp events accumulated since the last trace record.
    pub pending: ClampEvents,
}

impl VampState {
    fn record(&self) -> VampRecord {
        VampRecord {
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            gamma_w: self.gamma_w,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            psnr_x1: None,
            psnr_x2: None,
            clamped: self.pending,
        }
    }

    fn all_finite(&self) -> bool {
        [self.gamma1, self.gamma2, self.gamma_w].iter().all(|v| v.is_finite())
            && [&self.r1, &self.x1, &self.r2, &self.x2].iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// How the first denoiser input `(r1, gamma1)` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VampInit {
    /// `r1 = A^T y`, `gamma1 = M / ||y||^2`. Only calibrated when `A^T A`
    /// is close to a multiple of a projection (condition number near 1).
    BackProjection,
    /// One LMMSE half-step from the prior message `r2 = 0`,
    /// `gamma2 = sum s_i^2 / ||y||^2` (inverse per-coefficient signal
    /// energy). The resulting `(r1, gamma1)` is an extrinsic message, so its
    /// precision is consistent for any singular value spread.
    #[default]
    Lmmse,
}

pub fn vamp_init<A: SvdOperator + ?Sized>(a: &A, y: &[f64], config: &VampConfig) -> Result<VampState> {
    config.validate()?;
    let (m, n) = (a.rows(), a.cols());
    if y.len() != m {
        return Err(dim_err(format!("operator has {m} rows but y has length {}", y.len())));
    }
    let energy = norm_sq(y);
    let inverse_energy = if energy > 0.0 { m as f64 / energy } else { f64::INFINITY };
    let (gamma1, g1_clamped) = if energy > 0.0 { config.clamp_precision(inverse_energy) } else { (1.0, false) };
    let (gamma_w, gw_clamped) = config.clamp_precision(config.initial_gamma_w.unwrap_or(inverse_energy));
    let mut state = VampState {
        r1: vec![0.0; n],
        gamma1,
        x1: vec![0.0; n],
        r2: vec![0.0; n],
        gamma2: gamma1,
        x2: vec![0.0; n],
        gamma_w,
        alpha1: 1.0,
        alpha2: 1.0,
        iter: 0,
        trace: Vec::new(),
        residual_sq: None,
        pending: ClampEvents { gamma1: g1_clamped, gamma_w: gw_clamped, ..Default::default() },
    };
    if energy > 0.0 {
        match config.init {
            VampInit::BackProjection => state.r1 = a.adjoint(y),
            VampInit::Lmmse => {
                let spectral: f64 = a.singular_values().iter().map(|s| s * s).sum();
                let (gamma2, clamped) = config.clamp_precision(spectral / energy);
                state.gamma2 = gamma2;
                state.pending.gamma2 = clamped;
                state.pending.gamma1 = false;
                vamp_lmmse_step(&mut state, a, y, &VampConfig { damping: 1.0, ..*config });
            }
        }
    }
    state.trace.push(state.record());
    state.pending = ClampEvents::default();
    Ok(state)
}

/// Damps a precision on the standard-deviation scale,
/// `(theta / sqrt(new) + (1 - theta) / sqrt(old))^-2`. Blending precisions
/// directly lets one overconfident step dominate the average.
fn damp_precision(theta: f64, new: f64, old: f64) -> f64 {
    (theta / new.sqrt() + (1.0 - theta) / old.sqrt()).powi(-2)
}

/// Denoising stage: updates `x1`, `alpha1`, `r2`, `gamma2`.
pub fn vamp_denoise_step<D: Denoiser + ?Sized>(
    state: &mut VampState,
    denoiser: &D,
    config: &VampConfig,
    seed: u64,
) -> Result<()> {
    let sigma = 1.0 / state.gamma1.sqrt();
    let out = denoiser.denoise(&state.r1, sigma, seed)?;
    if out.estimate.len() != state.r1.len() {
        return Err(dim_err(format!("denoiser returned {} values, expected {}", out.estimate.len(), state.r1.len())));
    }
    let (lo, hi) = config.divergence_bounds;
    let alpha = out.divergence.clamp(lo, hi);
    // NaN divergences pass through clamp unchanged; they are caught by the
    // finiteness check in the driver.
    state.pending.divergence |= alpha != out.divergence;

    let eta = state.gamma1 / alpha;
    let gamma2_new = eta - state.gamma1;
    let r2_new: Vec<f64> =
        out.estimate.iter().zip(&state.r1).map(|(x, r)| (eta * x - state.gamma1 * r) / gamma2_new).collect();

    let theta = config.damping;
    let (r2, gamma2) = if state.iter == 0 || theta == 1.0 {
        (r2_new, gamma2_new)
    } else {
        let r2 = r2_new.iter().zip(&state.r2).map(|(new, old)| theta * new + (1.0 - theta) * old).collect();
        (r2, damp_precision(theta, gamma2_new, state.gamma2))
    };
    let (gamma2, clamped) = config.clamp_precision(gamma2);
    state.pending.gamma2 |= clamped;
    state.x1 = out.estimate;
    state.alpha1 = alpha;
    state.r2 = r2;
    state.gamma2 = gamma2;
    Ok(())
}

/// LMMSE stage through the SVD: updates `x2`, `alpha2`, `r1`, `gamma1` and
/// caches the residual energy for the EM update.
pub fn vamp_lmmse_step<A: SvdOperator + ?Sized>(state: &mut VampState, a: &A, y: &[f64], config: &VampConfig) {
    let (m, n) = (a.rows(), a.cols());
    let s = a.singular_values();
    let (gw, g2) = (state.gamma_w, state.gamma2);

    let uty = a.left_t(y);
    let t = a.right_t(&state.r2);
    let d: Vec<f64> = s.iter().map(|si| 1.0 / (gw * si * si + g2)).collect();
    let coords: Vec<f64> = (0..m).map(|i| d[i] * (gw * s[i] * uty[i] + g2 * t[i])).collect();
    let delta: Vec<f64> = coords.iter().zip(&t).map(|(c, t)| c - t).collect();
    let x2: Vec<f64> = state.r2.iter().zip(a.right(&delta)).map(|(r, v)| r + v).collect();

    // Null-space coordinates of x2 equal those of r2 and carry variance 1/g2.
    let alpha2 = (g2 / n as f64) * (d.iter().sum::<f64>() + (n - m) as f64 / g2);
    let eta = g2 / alpha2;
    let gamma1_new = eta - g2;
    let r1_new: Vec<f64> = x2.iter().zip(&state.r2).map(|(x, r)| (eta * x - g2 * r) / gamma1_new).collect();

    let theta = config.damping;
    let (r1, gamma1) = if theta == 1.0 {
        (r1_new, gamma1_new)
    } else {
        let r1 = r1_new.iter().zip(&state.r1).map(|(new, old)| theta * new + (1.0 - theta) * old).collect();
        (r1, damp_precision(theta, gamma1_new, state.gamma1))
    };
    let (gamma1, clamped) = config.clamp_precision(gamma1);
    state.pending.gamma1 |= clamped;

    state.residual_sq = Some(uty.iter().zip(&coords).zip(s).map(|((u, c), si)| (u - si * c).powi(2)).sum());
    state.x2 = x2;
    state.alpha2 = alpha2;
    state.r1 = r1;
    state.gamma1 = gamma1;
}

/// One EM fixed-point sweep for the noise precision:
/// `1/gw = (||y - A x2||^2 + sum s_i^2 / (gw s_i^2 + gamma2)) / M`.
/// Returns the clamped value and whether the clamp fired.
pub fn em_update_noise_precision<A: SvdOperator + ?Sized>(
    state: &VampState,
    a: &A,
    y: &[f64],
    config: &VampConfig,
) -> (f64, bool) {
    let residual = state.residual_sq.unwrap_or_else(|| {
        let ax = a.forward(&state.x2);
        y.iter().zip(&ax).map(|(a, b)| (a - b).powi(2)).sum()
    });
    let (gw, g2) = (state.gamma_w, state.gamma2);
    let trace: f64 = a.singular_values().iter().map(|s| s * s / (gw * s * s + g2)).sum();
    let variance = (residual + trace) / a.rows() as f64;
    config.clamp_precision(1.0 / variance)
}

/// Runs `config.max_iters` iterations (denoise, LMMSE, optional EM). Stops
/// early only if a non-finite value appears; the last finite `x1` is
/// returned. Only denoiser failures are errors.
pub fn vamp_run<A, D>(
    a: &A,
    y: &[f64],
    denoiser: &D,
    config: &VampConfig,
    seed: u64,
    truth: Option<&Truth>,
) -> Result<(RunOutcome, VampState)>
where
    A: SvdOperator + ?Sized,
    D: Denoiser + ?Sized,
{
    let mut state = vamp_init(a, y, config)?;
    let mut psnr = Vec::new();
    let annotate = |state: &mut VampState, psnr: &mut Vec<f64>| {
        if let Some(t) = truth {
            let p1 = t.psnr(&state.x1);
            psnr.push(p1);
            let p2 = if state.iter > 0 { Some(t.psnr(&state.x2)) } else { None };
            if let Some(rec) = state.trace.last_mut() {
                rec.psnr_x1 = Some(p1);
                rec.psnr_x2 = p2;
            }
        }
    };
    annotate(&mut state, &mut psnr);

    let mut elapsed = 0.0;
    let mut diverged = false;
    for t in 0..config.max_iters {
        let previous = state.clone();
        let start = Instant::now();
        vamp_denoise_step(&mut state, denoiser, config, derive_seed(seed, t as u64))?;
        vamp_lmmse_step(&mut state, a, y, config);
        if config.auto_tune_noise {
            let (gw, clamped) = em_update_noise_precision(&state, a, y, config);
            state.gamma_w = gw;
            state.pending.gamma_w |= clamped;
        }
        elapsed += start.elapsed().as_secs_f64();

        if !(state.all_finite() && state.alpha1.is_finite()) {
            state = previous;
            diverged = true;
            break;
        }
        state.iter += 1;
        let rec = state.record();
        state.trace.push(rec);
        state.pending = ClampEvents::default();
        annotate(&mut state, &mut psnr);
    }

    let outcome = RunOutcome { estimate: state.x1.clone(), psnr, seconds: elapsed, diverged, iterations: state.iter };
    Ok((outcome, state))
}
