//! Oracle checks runnable from the command line: fast operators and the
//! LMMSE stage against dense linear algebra, denoiser divergences against
//! finite differences, transform invariants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::denoise::{soft_threshold, sure_threshold};
use crate::oplib::{fwht, make_gaussian_operator, make_structured_operator, norm_sq, LinearOperator, SvdOperator};
use crate::oplib::{WaveletFamily, WaveletTransform};
use crate::oracle::{fd_divergence, hadamard, lmmse_reference, structured_dense, sure_grid_minimizer, sure_risk};
use crate::vamp::{vamp_init, vamp_lmmse_step, VampConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error against the tolerance.
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check { name, passed: worst <= tol, detail: format!("max error {worst:.3e} (tolerance {tol:.0e})") }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn structured_vs_dense(trials: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for (m, n) in [(8, 16), (16, 32)] {
        for seed in 0..trials as u64 {
            let cond = [1.0, 10.0, 1e4][seed as usize % 3];
            let op = make_structured_operator(m, n, cond, seed).expect("valid shape");
            let dense = structured_dense(&op);
            let x = uniform(&mut rng, n, 1.0);
            let y = uniform(&mut rng, m, 1.0);
            worst = worst.max(max_abs_diff(&op.forward(&x), &dense.mul_vec(&x)));
            worst = worst.max(max_abs_diff(&op.adjoint(&y), &dense.mul_t_vec(&y)));
        }
    }
    check("structured operator vs dense", worst, 1e-10)
}

/// LMMSE estimate and its divergence against dense solves.
pub fn lmmse_vs_dense(trials: usize) -> [Check; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut worst_x, mut worst_alpha) = (0.0f64, 0.0f64);
    for (m, n) in [(8, 16), (16, 32)] {
        for seed in 0..trials as u64 {
            let op: Box<dyn SvdOperator> = if seed % 2 == 0 {
                Box::new(make_structured_operator(m, n, 100.0, seed).expect("valid shape"))
            } else {
                Box::new(make_gaussian_operator(m, n, seed).expect("valid shape"))
            };
            let y = uniform(&mut rng, m, 1.0);
            let cfg = VampConfig { auto_tune_noise: false, initial_gamma_w: Some(1.0), ..Default::default() };
            let mut state = vamp_init(op.as_ref(), &y, &cfg).expect("valid state");
            state.r2 = uniform(&mut rng, n, 1.0);
            state.gamma2 = 10f64.powf(rng.gen_range(-2.0..2.0));
            state.gamma_w = 10f64.powf(rng.gen_range(-2.0..3.0));
            let (x_ref, alpha_ref) = lmmse_reference(op.as_ref(), &y, &state.r2, state.gamma_w, state.gamma2);
            vamp_lmmse_step(&mut state, op.as_ref(), &y, &cfg);
            worst_x = worst_x.max(max_abs_diff(&state.x2, &x_ref));
            worst_alpha = worst_alpha.max((state.alpha2 - alpha_ref).abs());
        }
    }
    [
        check("LMMSE estimate vs dense solve", worst_x, 1e-8),
        check("LMMSE divergence vs dense trace", worst_alpha, 1e-10),
    ]
}

pub fn soft_divergence_vs_fd(trials: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let lambda = rng.gen_range(0.1..1.0);
        // Keep inputs away from the kinks at +-lambda so differences are exact.
        let r: Vec<f64> = uniform(&mut rng, 64, 3.0)
            .into_iter()
            .map(|v| if (v.abs() - lambda).abs() < 1e-3 { v + 0.01 } else { v })
            .collect();
        let analytic = soft_threshold(&r, lambda).expect("finite input").divergence;
        let fd = fd_divergence(|x| soft_threshold(x, lambda).expect("finite input").estimate, &r, 1e-6);
        worst = worst.max((analytic - fd).abs());
    }
    check("soft-threshold divergence vs finite differences", worst, 1e-6)
}

/// The SURE threshold must do at least as well as the best point of a dense
/// grid of candidates.
pub fn sure_vs_grid(trials: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let sigma = rng.gen_range(0.2..2.0);
        let r: Vec<f64> = (0..200)
            .map(|i| {
                let signal = if i % 10 == 0 { rng.gen_range(-8.0..8.0) } else { 0.0 };
                signal + sigma * rng.gen_range(-1.7..1.7)
            })
            .collect();
        let lambda = sure_threshold(&r, sigma);
        let (_, grid_risk) = sure_grid_minimizer(&r, sigma, 20_001);
        let excess = sure_risk(&r, sigma, lambda) - grid_risk;
        worst = worst.max(excess / norm_sq(&r));
    }
    check("SURE threshold vs dense grid (relative excess risk)", worst, 1e-12)
}

pub fn fwht_invariants(trials: usize) -> [Check; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let (mut worst_inv, mut worst_orth) = (0.0f64, 0.0f64);
    for k in 0..trials {
        let n = 1 << (1 + k % 9);
        let x = uniform(&mut rng, n, 10.0);
        let hx = fwht(&x).expect("power of two");
        worst_inv = worst_inv.max(max_abs_diff(&fwht(&hx).expect("power of two"), &x));
        worst_orth = worst_orth.max((norm_sq(&hx) - norm_sq(&x)).abs() / norm_sq(&x));
        if n <= 64 {
            worst_orth = worst_orth.max(max_abs_diff(&hx, &hadamard(n).mul_vec(&x)));
        }
    }
    [check("FWHT self-inverse", worst_inv, 1e-10), check("FWHT orthonormal", worst_orth, 1e-10)]
}

pub fn wavelet_invariants(trials: usize) -> [Check; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let (mut worst_rt, mut worst_parseval) = (0.0f64, 0.0f64);
    for k in 0..trials {
        let side: usize = [8, 16, 32, 64][k % 4];
        let family = if k % 2 == 0 { WaveletFamily::Db2 } else { WaveletFamily::Haar };
        let max_levels = side.trailing_zeros() as usize - 2;
        let w = WaveletTransform::new(side, 1 + k % max_levels, family).expect("valid transform");
        let x = uniform(&mut rng, side * side, 255.0);
        let c = w.forward(&x);
        worst_rt = worst_rt.max(max_abs_diff(&w.inverse(&c), &x));
        worst_parseval = worst_parseval.max((norm_sq(&c) - norm_sq(&x)).abs() / norm_sq(&x));
    }
    [check("wavelet round trip", worst_rt, 1e-10), check("wavelet Parseval", worst_parseval, 1e-10)]
}

/// Oracle equivalence checks.
pub fn oracle_checks() -> Vec<Check> {
    let mut v = vec![structured_vs_dense(20)];
    v.extend(lmmse_vs_dense(20));
    v.push(soft_divergence_vs_fd(20));
    v.push(sure_vs_grid(20));
    v
}

/// Transform invariant checks.
pub fn transform_checks() -> Vec<Check> {
    let mut v = fwht_invariants(20).to_vec();
    v.extend(wavelet_invariants(20));
    v
}

pub fn run_selftest() -> Vec<Check> {
    let mut v = oracle_checks();
    v.extend(transform_checks());
    v
}
