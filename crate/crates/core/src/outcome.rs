use crate::harness::psnr;
use crate::oplib::WaveletTransform;

/// Ground truth for PSNR monitoring. When `wavelet` is set the algorithm runs
/// on wavelet coefficients and estimates are inverse-transformed first.
#[derive(Debug, Clone)]
pub struct Truth {
    pub image: Vec<f64>,
    pub wavelet: Option<WaveletTransform>,
}

impl Truth {
    pub fn image(image: Vec<f64>) -> Self {
        Self { image, wavelet: None }
    }

    pub fn wavelet(image: Vec<f64>, wavelet: WaveletTransform) -> Self {
        Self { image, wavelet: Some(wavelet) }
    }

    pub fn to_image(&self, estimate: &[f64]) -> Vec<f64> {
        match &self.wavelet {
            Some(w) => w.inverse(estimate),
            None => estimate.to_vec(),
        }
    }

    pub fn psnr(&self, estimate: &[f64]) -> f64 {
        match &self.wavelet {
            Some(w) => psnr(&w.inverse(estimate), &self.image),
            None => psnr(estimate, &self.image),
        }
        .expect("estimate and truth have equal length")
    }
}

/// Result of one `amp_run` / `vamp_run`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Final (or last finite) estimate, in the algorithm's domain.
    pub estimate: Vec<f64>,
    /// PSNR per iteration including the initial point; empty without truth.
    pub psnr: Vec<f64>,
    pub seconds: f64,
    pub diverged: bool,
    /// Iterations actually completed.
    pub iterations: usize,
}

impl RunOutcome {
    pub fn final_psnr(&self) -> Option<f64> {
        self.psnr.last().copied()
    }
}
