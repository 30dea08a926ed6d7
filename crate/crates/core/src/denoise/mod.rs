//! Denoisers for the AMP / VAMP denoising stage.
//!
//! A denoiser maps a pseudo-measurement `r = x + N(0, sigma^2 I)` to an
//! estimate of `x` together with its divergence `(1/N) sum_i dD_i/dr_i`,
//! which the algorithms need for their Onsager / extrinsic corrections.

mod external;
mod mc;
mod soft;
mod ti_wavelet;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

pub use external::{protocol, ExternalDenoiser, DEFAULT_TIMEOUT, MAGIC};
pub use mc::{default_step, mc_divergence, ProbeSettings};
pub use soft::{soft_threshold, sure_threshold, sure_tuned_soft_threshold, SoftThreshold, SureSoftThreshold};
pub use ti_wavelet::{TiWaveletDenoiser, DEFAULT_MULTIPLIER, DEFAULT_SHIFTS};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserResult {
    pub estimate: Vec<f64>,
    pub divergence: f64,
}

pub trait Denoiser: Send + Sync {
    /// Denoises `r` at noise level `sigma`. `seed` keys any randomness the
    /// denoiser needs (Monte Carlo probes); analytic denoisers ignore it.
    fn denoise(&self, r: &[f64], sigma: f64, seed: u64) -> Result<DenoiserResult>;
}

impl<F> Denoiser for F
where
    F: Fn(&[f64], f64, u64) -> Result<DenoiserResult> + Send + Sync,
{
    fn denoise(&self, r: &[f64], sigma: f64, seed: u64) -> Result<DenoiserResult> {
        self(r, sigma, seed)
    }
}

/// Configuration-level description of a denoiser.
#[derive(Debug, Clone, PartialEq)]
pub enum DenoiserSpec {
    /// Soft threshold at `multiplier * sigma`.
    SoftThreshold {
        multiplier: f64,
    },
    SureSoftThreshold,
    TiWavelet {
        shifts: usize,
        multiplier: f64,
        probes: ProbeSettings,
    },
    External {
        path: PathBuf,
        timeout: Duration,
        probes: ProbeSettings,
    },
}

impl DenoiserSpec {
    pub fn ti_wavelet() -> Self {
        DenoiserSpec::TiWavelet {
            shifts: DEFAULT_SHIFTS,
            multiplier: DEFAULT_MULTIPLIER,
            probes: ProbeSettings::default(),
        }
    }

    pub fn external(path: impl Into<PathBuf>) -> Self {
        DenoiserSpec::External { path: path.into(), timeout: DEFAULT_TIMEOUT, probes: ProbeSettings::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            DenoiserSpec::SoftThreshold { multiplier } => positive("threshold multiplier", *multiplier),
            DenoiserSpec::SureSoftThreshold => Ok(()),
            DenoiserSpec::TiWavelet { shifts, multiplier, probes } => {
                if *shifts == 0 {
                    return Err(Error::Config("shift count must be at least 1".into()));
                }
                positive("threshold multiplier", *multiplier)?;
                probes.validate()
            }
            DenoiserSpec::External { timeout, probes, .. } => {
                if timeout.is_zero() {
                    return Err(Error::Config("external denoiser timeout must be positive".into()));
                }
                probes.validate()
            }
        }
    }

    pub fn build(&self) -> Result<Box<dyn Denoiser>> {
        self.validate()?;
        Ok(match self {
            DenoiserSpec::SoftThreshold { multiplier } => Box::new(SoftThreshold::new(*multiplier)?),
            DenoiserSpec::SureSoftThreshold => Box::new(SureSoftThreshold),
            DenoiserSpec::TiWavelet { shifts, multiplier, probes } => {
                Box::new(TiWaveletDenoiser::new(*shifts, *multiplier, *probes)?)
            }
            DenoiserSpec::External { path, timeout, probes } => {
                Box::new(ExternalDenoiser::new(path.clone(), *timeout, *probes)?)
            }
        })
    }
}

impl fmt::Display for DenoiserSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenoiserSpec::SoftThreshold { multiplier } => write!(f, "soft:{multiplier}"),
            DenoiserSpec::SureSoftThreshold => write!(f, "sure"),
            DenoiserSpec::TiWavelet { shifts, multiplier, probes } => {
                write!(f, "ti-wavelet:shifts={shifts},k={multiplier},probes={}", probes.probes)?;
                if let Some(step) = probes.step {
                    write!(f, ",step={step}")?;
                }
                Ok(())
            }
            DenoiserSpec::External { path, timeout, .. } => {
                write!(f, "external:{}:timeout={}", path.display(), timeout.as_secs_f64())
            }
        }
    }
}

/// Parses `soft[:k]`, `sure`, `ti-wavelet[:shifts=8,k=3,probes=1,step=..]`
/// and `external:<path>[:timeout=secs]`.
impl FromStr for DenoiserSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let bad = |what: &str| Error::Config(format!("denoiser `{s}`: {what}"));
        let spec = match kind {
            "soft" | "soft-threshold" => {
                let multiplier = match args {
                    Some(a) => a.parse().map_err(|_| bad("multiplier is not a number"))?,
                    None => 1.0,
                };
                DenoiserSpec::SoftThreshold { multiplier }
            }
            "sure" | "sure-soft-threshold" => DenoiserSpec::SureSoftThreshold,
            "ti-wavelet" | "ti" => {
                let mut spec = DenoiserSpec::ti_wavelet();
                if let (Some(args), DenoiserSpec::TiWavelet { shifts, multiplier, probes }) = (args, &mut spec) {
                    for kv in args.split(',').filter(|kv| !kv.is_empty()) {
                        let (key, value) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                        let num = || value.parse::<f64>().map_err(|_| bad("value is not a number"));
                        match key.trim() {
                            "shifts" => *shifts = value.parse().map_err(|_| bad("shifts is not an integer"))?,
                            "k" => *multiplier = num()?,
                            "probes" => probes.probes = value.parse().map_err(|_| bad("probes is not an integer"))?,
                            "step" => probes.step = Some(num()?),
                            other => return Err(bad(&format!("unknown key `{other}`"))),
                        }
                    }
                }
                spec
            }
            "external" => {
                let args = args.filter(|a| !a.is_empty()).ok_or_else(|| bad("missing executable path"))?;
                let (path, timeout) = match args.rsplit_once(":timeout=") {
                    Some((p, t)) => {
                        let secs: f64 = t.parse().map_err(|_| bad("timeout is not a number"))?;
                        (p, Duration::from_secs_f64(secs))
                    }
                    None => (args, DEFAULT_TIMEOUT),
                };
                DenoiserSpec::External { path: path.into(), timeout, probes: ProbeSettings::default() }
            }
            other => return Err(bad(&format!("unknown kind `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_specs() {
        assert_eq!("sure".parse::<DenoiserSpec>().unwrap(), DenoiserSpec::SureSoftThreshold);
        assert_eq!("soft:2.5".parse::<DenoiserSpec>().unwrap(), DenoiserSpec::SoftThreshold { multiplier: 2.5 });
        match "ti-wavelet:shifts=4,k=2.5".parse::<DenoiserSpec>().unwrap() {
            DenoiserSpec::TiWavelet { shifts, multiplier, .. } => {
                assert_eq!(shifts, 4);
                assert_eq!(multiplier, 2.5);
            }
            other => panic!("{other:?}"),
        }
        match "external:/opt/bm3d:timeout=5".parse::<DenoiserSpec>().unwrap() {
            DenoiserSpec::External { path, timeout, .. } => {
                assert_eq!(path, PathBuf::from("/opt/bm3d"));
                assert_eq!(timeout, Duration::from_secs(5));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn display_round_trips() {
        for s in ["sure", "soft:1.5", "ti-wavelet:shifts=8,k=3,probes=2", "external:/x/y:timeout=60"] {
            let spec: DenoiserSpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<DenoiserSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn validation() {
        assert!("soft:0".parse::<DenoiserSpec>().is_err());
        assert!("soft:-1".parse::<DenoiserSpec>().is_err());
        assert!("ti-wavelet:shifts=0".parse::<DenoiserSpec>().is_err());
        assert!("ti-wavelet:probes=0".parse::<DenoiserSpec>().is_err());
        assert!("external".parse::<DenoiserSpec>().is_err());
        assert!("bm3d".parse::<DenoiserSpec>().is_err());
    }
}
