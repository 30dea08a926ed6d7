use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dvamp::denoise::DenoiserSpec;
use dvamp::harness::{
    build_operator, expand_images, load_images, measurement_count, recover, report_psnr, run_sweep, run_trace,
    save_pgm, selftest, Algorithm, ConfigFile, Ensemble, GrayImage, Noise, RunSettings, SweepConfig,
};
use dvamp::oplib::WaveletTransform;
use dvamp::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Compressive image recovery with AMP / VAMP and plug-in denoisers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recover one image and write the estimate as PGM.
    Recover(Common),
    /// Run a grid of experiments; one CSV row per cell.
    Sweep(Common),
    /// Per-iteration PSNR for every cell of a grid.
    Trace(Common),
    /// Run the oracle self-checks.
    Selftest,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML file with the same keys as the flags (dashes become underscores).
    #[arg(long)]
    config: Option<PathBuf>,
    /// l1-amp, l1-vamp, d-amp or d-vamp (comma-separated for sweeps).
    #[arg(long, value_delimiter = ',')]
    algorithm: Vec<Algorithm>,
    /// gaussian or structured.
    #[arg(long, value_delimiter = ',')]
    ensemble: Vec<Ensemble>,
    /// Sampling ratio M/N.
    #[arg(long, value_delimiter = ',')]
    ratio: Vec<f64>,
    /// Condition number (structured ensemble).
    #[arg(long, value_delimiter = ',')]
    cond: Vec<f64>,
    /// Measurement SNR in dB.
    #[arg(long, value_delimiter = ',', conflicts_with = "noiseless")]
    snr_db: Vec<f64>,
    #[arg(long)]
    noiseless: bool,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial t uses seed + t.
    #[arg(long)]
    seed: Option<u64>,
    /// PGM files or directories of PGM files.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    images: Vec<PathBuf>,
    /// soft[:k], sure, ti-wavelet[:shifts=8,k=3,probes=1], external:<path>[:timeout=secs]
    #[arg(long)]
    denoiser: Option<DenoiserSpec>,
    /// Shorthand for --denoiser external:<path>.
    #[arg(long, conflicts_with = "denoiser")]
    external_denoiser: Option<PathBuf>,
    /// Output CSV (sweep, trace) or PGM (recover); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// VAMP damping in (0, 1]; defaults to 0.7 below condition number 100, else 0.5.
    #[arg(long)]
    damping: Option<f64>,
    /// Use the true noise precision (1e11 when noiseless) instead of EM tuning.
    #[arg(long)]
    no_auto_tune: bool,
    /// Leave the runtime column empty (byte-reproducible output).
    #[arg(long)]
    no_timing: bool,
}

fn parse_all<T: std::str::FromStr<Err = Error>>(values: Vec<String>) -> Result<Vec<T>> {
    values.iter().map(|s| s.parse()).collect()
}

fn pick<T>(flag: Vec<T>, file: Option<Vec<T>>, default: Vec<T>) -> Vec<T> {
    if !flag.is_empty() {
        flag
    } else {
        file.unwrap_or(default)
    }
}

impl Common {
    /// Merges defaults, the config file and the flags (in that order of
    /// precedence, lowest first). Returns the sweep and the output path.
    fn resolve(self) -> Result<(SweepConfig, Option<PathBuf>)> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let d = SweepConfig::default();

        let file_algorithms = file.algorithm.map(|v| parse_all(v.into_vec())).transpose()?;
        let file_ensembles = file.ensemble.map(|v| parse_all(v.into_vec())).transpose()?;
        let noises = if self.noiseless {
            vec![Noise::Noiseless]
        } else if !self.snr_db.is_empty() {
            self.snr_db.iter().map(|&s| Noise::SnrDb(s)).collect()
        } else if file.noiseless == Some(true) {
            vec![Noise::Noiseless]
        } else if let Some(s) = file.snr_db {
            s.into_vec().into_iter().map(Noise::SnrDb).collect()
        } else {
            d.noises.clone()
        };

        let denoiser = if let Some(p) = self.external_denoiser {
            DenoiserSpec::external(p)
        } else if let Some(spec) = self.denoiser {
            spec
        } else if let Some(p) = file.external_denoiser {
            DenoiserSpec::external(p)
        } else if let Some(s) = file.denoiser {
            s.parse()?
        } else {
            d.denoiser.clone()
        };

        let images = pick(self.images, file.images.map(|v| v.into_vec()), Vec::new());
        let sweep = SweepConfig {
            algorithms: pick(self.algorithm, file_algorithms, d.algorithms.clone()),
            ensembles: pick(self.ensemble, file_ensembles, d.ensembles.clone()),
            ratios: pick(self.ratio, file.ratio.map(|v| v.into_vec()), d.ratios.clone()),
            conds: pick(self.cond, file.cond.map(|v| v.into_vec()), d.conds.clone()),
            noises,
            iters: self.iters.or(file.iters).unwrap_or(d.iters),
            trials: self.trials.or(file.trials).unwrap_or(d.trials),
            base_seed: self.seed.or(file.seed).unwrap_or(d.base_seed),
            images: expand_images(&images)?,
            denoiser,
            damping: self.damping.or(file.damping),
            auto_tune: !(self.no_auto_tune || file.no_auto_tune == Some(true)),
            workers: self.workers.or(file.workers),
            timing: !(self.no_timing || file.no_timing == Some(true)),
        };
        Ok((sweep, self.out.or(file.out)))
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn single<T: Copy + std::fmt::Display>(name: &str, values: &[T]) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => Err(Error::Config(format!("recover takes exactly one {name}"))),
    }
}

fn cmd_recover(common: Common) -> Result<()> {
    let (sweep, out) = common.resolve()?;
    if sweep.images.len() != 1 {
        return Err(Error::Config("recover takes exactly one image".into()));
    }
    let ensemble = single("ensemble", &sweep.ensembles)?;
    let settings = RunSettings {
        algorithm: single("algorithm", &sweep.algorithms)?,
        noise: single("noise level", &sweep.noises)?,
        iters: sweep.iters,
        cond: if ensemble == Ensemble::Gaussian { 1.0 } else { single("condition number", &sweep.conds)? },
        damping: sweep.damping,
        auto_tune: sweep.auto_tune,
    };
    // Reuse the sweep validation for a one-cell grid.
    sweep.cells()?;
    let loaded = load_images(&sweep.images)?;
    let n = loaded.side * loaded.side;
    let m = measurement_count(single("ratio", &sweep.ratios)?, n);
    let phi = build_operator(ensemble, m, n, settings.cond, sweep.base_seed)?;
    let wavelet = WaveletTransform::max_depth(loaded.side)?;
    let denoiser = sweep.denoiser.build()?;
    let x0 = &loaded.images[0];
    let rec = recover(&phi, &wavelet, &x0.pixels, &settings, denoiser.as_ref(), sweep.base_seed)?;

    let mut err = io::stderr().lock();
    for (t, p) in rec.outcome.psnr.iter().enumerate() {
        writeln!(err, "iteration {t:>3}: {:.3} dB", report_psnr(*p))?;
    }
    if rec.outcome.diverged {
        writeln!(err, "diverged after {} iterations", rec.outcome.iterations)?;
    }
    if let Some(g) = rec.gamma_w {
        writeln!(err, "noise precision estimate {g:.6e}")?;
    }
    let image = GrayImage::new(x0.width, x0.height, rec.image)?;
    match out {
        Some(p) => save_pgm(&image, p)?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(&dvamp::harness::encode_pgm(&image))?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Recover(common) => cmd_recover(common)?,
        Command::Sweep(common) => {
            let (sweep, out) = common.resolve()?;
            run_sweep(&sweep, open_output(&out)?)?;
        }
        Command::Trace(common) => {
            let (sweep, out) = common.resolve()?;
            run_trace(&sweep, open_output(&out)?)?;
        }
        Command::Selftest => {
            let mut ok = true;
            for c in selftest::run_selftest() {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
