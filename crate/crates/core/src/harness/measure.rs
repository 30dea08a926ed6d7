use rand_distr::{Distribution, StandardNormal};

use crate::error::{dim_err, Result};
use crate::oplib::{norm_sq, LinearOperator};
use crate::rng::{stream, stream_rng};

pub const PEAK: f64 = 255.0;
/// Reported PSNR is capped here; exact recovery would otherwise be infinite.
pub const PSNR_CAP: f64 = 200.0;

/// `10 log10(255^2 N / ||x_hat - x0||^2)`; `+inf` when the images coincide.
pub fn psnr(x_hat: &[f64], x0: &[f64]) -> Result<f64> {
    if x_hat.len() != x0.len() || x0.is_empty() {
        return Err(dim_err(format!("cannot compare {} pixels with {}", x_hat.len(), x0.len())));
    }
    let err: f64 = x_hat.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(10.0 * (PEAK * PEAK * x0.len() as f64 / err).log10())
}

/// Caps a PSNR for reporting. NaN maps to `-inf` so it can never look good.
pub fn report_psnr(p: f64) -> f64 {
    if p.is_nan() {
        f64::NEG_INFINITY
    } else {
        p.min(PSNR_CAP)
    }
}

/// `y = Phi x0 + w` with `w ~ N(0, s2 I)` and
/// `s2 = ||Phi x0||^2 10^(-snr/10) / M`. `None` means noiseless.
/// Returns `(y, s2)`.
pub fn synthesize_measurements<A: LinearOperator + ?Sized>(
    phi: &A,
    x0: &[f64],
    snr_db: Option<f64>,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    if x0.len() != phi.cols() {
        return Err(dim_err(format!("operator has {} columns but x0 has length {}", phi.cols(), x0.len())));
    }
    let mut y = phi.forward(x0);
    let Some(snr) = snr_db else { return Ok((y, 0.0)) };
    let variance = norm_sq(&y) * 10f64.powf(-snr / 10.0) / y.len() as f64;
    let sd = variance.sqrt();
    let mut rng = stream_rng(seed, stream::NOISE);
    for v in y.iter_mut() {
        let w: f64 = StandardNormal.sample(&mut rng);
        *v += sd * w;
    }
    Ok((y, variance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oplib::make_structured_operator;

    #[test]
    fn psnr_closed_forms() {
        let x0: Vec<f64> = (0..64).map(|i| i as f64).collect();
        assert_eq!(psnr(&x0, &x0).unwrap(), f64::INFINITY);
        assert_eq!(report_psnr(psnr(&x0, &x0).unwrap()), PSNR_CAP);
        let plus1: Vec<f64> = x0.iter().map(|v| v + 1.0).collect();
        assert!((psnr(&plus1, &x0).unwrap() - 48.130_803_608_679_1).abs() < 1e-9);
        let plus255: Vec<f64> = x0.iter().map(|v| v + 255.0).collect();
        assert!(psnr(&plus255, &x0).unwrap().abs() < 1e-12);
        assert!(psnr(&x0[..3], &x0).is_err());
    }

    #[test]
    fn noiseless_is_exact() {
        let op = make_structured_operator(32, 64, 10.0, 1).unwrap();
        let x0: Vec<f64> = (0..64).map(|i| (i * 3 % 17) as f64).collect();
        let (y, s2) = synthesize_measurements(&op, &x0, None, 5).unwrap();
        assert_eq!(y, op.forward(&x0));
        assert_eq!(s2, 0.0);
    }

    fn snr_samples(snr: f64) -> Vec<(f64, f64)> {
        let op = make_structured_operator(4096, 8192, 1.0, 1).unwrap();
        let x0: Vec<f64> = (0..8192).map(|i| ((i * 7) % 255) as f64).collect();
        let clean = op.forward(&x0);
        (0..100)
            .map(|seed| {
                let (y, _) = synthesize_measurements(&op, &x0, Some(snr), seed).unwrap();
                let noise: f64 = y.iter().zip(&clean).map(|(a, b)| (a - b).powi(2)).sum();
                (noise, norm_sq(&clean))
            })
            .collect()
    }

    #[test]
    fn zero_db_noise_energy() {
        let samples = snr_samples(0.0);
        let ratio = samples.iter().map(|(n, s)| n / s).sum::<f64>() / samples.len() as f64;
        assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn empirical_snr_at_32_db() {
        for (noise, signal) in snr_samples(32.0) {
            let snr = 10.0 * (signal / noise).log10();
            assert!((snr - 32.0).abs() <= 0.5, "{snr}");
        }
    }

    #[test]
    fn noise_is_seeded() {
        let op = make_structured_operator(16, 32, 1.0, 1).unwrap();
        let x0 = vec![1.0; 32];
        let a = synthesize_measurements(&op, &x0, Some(10.0), 3).unwrap();
        assert_eq!(a, synthesize_measurements(&op, &x0, Some(10.0), 3).unwrap());
        assert_ne!(a.0, synthesize_measurements(&op, &x0, Some(10.0), 4).unwrap().0);
    }
}
