use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::denoise::DenoiserSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    L1Amp,
    L1Vamp,
    DAmp,
    DVamp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::L1Amp, Algorithm::L1Vamp, Algorithm::DAmp, Algorithm::DVamp];

    /// ℓ1 variants run on wavelet coefficients with a SURE-tuned soft
    /// threshold; the others run on pixels with the configured denoiser.
    pub fn is_l1(self) -> bool {
        matches!(self, Algorithm::L1Amp | Algorithm::L1Vamp)
    }

    pub fn is_vamp(self) -> bool {
        matches!(self, Algorithm::L1Vamp | Algorithm::DVamp)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::L1Amp => "l1-amp",
            Algorithm::L1Vamp => "l1-vamp",
            Algorithm::DAmp => "d-amp",
            Algorithm::DVamp => "d-vamp",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.to_string() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}` (l1-amp, l1-vamp, d-amp, d-vamp)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ensemble {
    Gaussian,
    Structured,
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ensemble::Gaussian => "gaussian",
            Ensemble::Structured => "structured",
        })
    }
}

impl FromStr for Ensemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(Ensemble::Gaussian),
            "structured" => Ok(Ensemble::Structured),
            other => Err(Error::Config(format!("unknown ensemble `{other}` (gaussian, structured)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Noiseless,
    SnrDb(f64),
}

impl Noise {
    pub fn snr_db(self) -> Option<f64> {
        match self {
            Noise::Noiseless => None,
            Noise::SnrDb(s) => Some(s),
        }
    }
}

/// Noiseless is written as `inf`.
impl fmt::Display for Noise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Noise::Noiseless => f.write_str("inf"),
            Noise::SnrDb(s) => write!(f, "{s}"),
        }
    }
}

/// One grid cell: everything needed to run its trials.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub ensemble: Ensemble,
    pub ratio: f64,
    pub cond: f64,
    pub noise: Noise,
    pub iters: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub images: Vec<PathBuf>,
    pub denoiser: DenoiserSpec,
    /// `None` selects the default for the condition number.
    pub damping: Option<f64>,
    pub auto_tune: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(Error::Config(format!("sampling ratio {} must lie in (0, 1]", self.ratio)));
        }
        if !(self.cond >= 1.0 && self.cond.is_finite()) {
            return Err(Error::Config(format!("condition number {} must be at least 1", self.cond)));
        }
        if self.ensemble == Ensemble::Gaussian && self.cond != 1.0 {
            return Err(Error::Config("the condition number only applies to the structured ensemble".into()));
        }
        if self.trials == 0 || self.iters == 0 {
            return Err(Error::Config("trials and iterations must be at least 1".into()));
        }
        if let Noise::SnrDb(s) = self.noise {
            if !s.is_finite() {
                return Err(Error::Config(format!("SNR {s} dB is not finite")));
            }
        }
        if let Some(d) = self.damping {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::Config(format!("damping {d} must lie in (0, 1]")));
            }
        }
        if self.images.is_empty() {
            return Err(Error::Config("no images given".into()));
        }
        self.denoiser.validate()
    }

    /// Seed of trial `t`.
    pub fn trial_seed(&self, t: usize) -> u64 {
        self.base_seed.wrapping_add(t as u64)
    }

    /// Short hex digest identifying the cell configuration.
    pub fn digest(&self) -> String {
        let text = format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{:?}|{}|{:?}|{}",
            self.algorithm,
            self.ensemble,
            self.ratio,
            self.cond,
            self.noise,
            self.iters,
            self.trials,
            self.base_seed,
            self.images,
            self.denoiser,
            self.damping,
            self.auto_tune
        );
        Sha256::digest(text.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A grid of cells: the cartesian product of the list-valued axes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub algorithms: Vec<Algorithm>,
    pub ensembles: Vec<Ensemble>,
    pub ratios: Vec<f64>,
    pub conds: Vec<f64>,
    pub noises: Vec<Noise>,
    pub iters: usize,
    pub trials: usize,
    pub base_seed: u64,
    pub images: Vec<PathBuf>,
    pub denoiser: DenoiserSpec,
    pub damping: Option<f64>,
    pub auto_tune: bool,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    /// When false the runtime column is left empty so output bytes depend
    /// only on the configuration.
    pub timing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            algorithms: vec![Algorithm::L1Vamp],
            ensembles: vec![Ensemble::Structured],
            ratios: vec![0.1],
            conds: vec![1.0],
            noises: vec![Noise::SnrDb(32.0)],
            iters: 10,
            trials: 1,
            base_seed: 0,
            images: Vec::new(),
            denoiser: DenoiserSpec::ti_wavelet(),
            damping: None,
            auto_tune: true,
            workers: None,
            timing: true,
        }
    }
}

impl SweepConfig {
    /// Cells in grid order: algorithm, ensemble, ratio, cond, noise (last
    /// varies fastest). The Gaussian ensemble ignores the condition axis
    /// and always pairs with `cond = 1`.
    pub fn cells(&self) -> Result<Vec<ExperimentConfig>> {
        let mut cells = Vec::new();
        for &algorithm in &self.algorithms {
            for &ensemble in &self.ensembles {
                for &ratio in &self.ratios {
                    let conds = if ensemble == Ensemble::Gaussian { &[1.0][..] } else { &self.conds[..] };
                    for &cond in conds {
                        for &noise in &self.noises {
                            let cell = ExperimentConfig {
                                algorithm,
                                ensemble,
                                ratio,
                                cond,
                                noise,
                                iters: self.iters,
                                trials: self.trials,
                                base_seed: self.base_seed,
                                images: self.images.clone(),
                                denoiser: self.denoiser.clone(),
                                damping: self.damping,
                                auto_tune: self.auto_tune,
                            };
                            cell.validate()?;
                            cells.push(cell);
                        }
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::Config("the grid is empty".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Contents of a TOML configuration file. Keys mirror the command-line
/// flags with dashes replaced by underscores; list-valued axes accept a
/// scalar or an array.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub algorithm: Option<OneOrMany<String>>,
    pub ensemble: Option<OneOrMany<String>>,
    pub ratio: Option<OneOrMany<f64>>,
    pub cond: Option<OneOrMany<f64>>,
    pub snr_db: Option<OneOrMany<f64>>,
    pub noiseless: Option<bool>,
    pub iters: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub images: Option<OneOrMany<PathBuf>>,
    pub denoiser: Option<String>,
    pub external_denoiser: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub damping: Option<f64>,
    pub no_auto_tune: Option<bool>,
    pub no_timing: Option<bool>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Expands image arguments: directories contribute their `.pgm` files in
/// name order, files are taken as given.
pub fn expand_images(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(Error::Config(format!("no .pgm files in {}", p.display())));
            }
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}
