use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{Algorithm, Ensemble, ExperimentConfig, Noise, SweepConfig};
use super::measure::{report_psnr, synthesize_measurements};
use super::pgm::{load_pgm, GrayImage};
use crate::amp::amp_run;
use crate::denoise::{Denoiser, SureSoftThreshold};
use crate::error::{Error, Result};
use crate::oplib::{
    compose_measurement, make_gaussian_operator, make_structured_operator, SvdOperator, WaveletTransform,
};
use crate::rng::derive_seed;
use crate::vamp::{default_damping, vamp_run, VampConfig};
use crate::{RunOutcome, Truth};

/// Noise precision for noiseless data when EM tuning is off (the upper
/// precision clamp).
pub const NOISELESS_PRECISION: f64 = 1e11;

pub const SWEEP_HEADER: &str =
    "algorithm,ensemble,ratio,cond,snr_db,iters,mean_psnr_db,std_psnr_db,mean_runtime_s,diverged_count";
pub const TRACE_HEADER: &str = "algorithm,ensemble,ratio,cond,snr_db,iteration,mean_psnr_db,std_psnr_db,runs";

/// Labels for seeds derived from a per-image seed.
const SOLVER_LABEL: u64 = 0x5017;

pub fn measurement_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64).round() as usize).clamp(1, n)
}

pub fn build_operator(ensemble: Ensemble, m: usize, n: usize, cond: f64, seed: u64) -> Result<Arc<dyn SvdOperator>> {
    Ok(match ensemble {
        Ensemble::Gaussian => Arc::new(make_gaussian_operator(m, n, seed)?),
        Ensemble::Structured => Arc::new(make_structured_operator(m, n, cond, seed)?),
    })
}

/// Per-run settings shared by `recover` and the sweep runner.
#[derive(Debug, Clone, Copy)]
pub struct RunSettings {
    pub algorithm: Algorithm,
    pub noise: Noise,
    pub iters: usize,
    pub cond: f64,
    pub damping: Option<f64>,
    pub auto_tune: bool,
}

impl RunSettings {
    pub fn from_cell(cell: &ExperimentConfig) -> Self {
        Self {
            algorithm: cell.algorithm,
            noise: cell.noise,
            iters: cell.iters,
            cond: cell.cond,
            damping: cell.damping,
            auto_tune: cell.auto_tune,
        }
    }

    pub fn vamp_config(&self, noise_variance: f64) -> VampConfig {
        let (auto_tune_noise, initial_gamma_w) = match self.noise {
            Noise::Noiseless if self.auto_tune => (true, None),
            Noise::Noiseless => (false, Some(NOISELESS_PRECISION)),
            Noise::SnrDb(_) if self.auto_tune => (true, None),
            Noise::SnrDb(_) => (false, Some((1.0 / noise_variance).min(NOISELESS_PRECISION))),
        };
        VampConfig {
            damping: self.damping.unwrap_or_else(|| default_damping(self.cond)),
            max_iters: self.iters,
            auto_tune_noise,
            initial_gamma_w,
            ..VampConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub outcome: RunOutcome,
    /// Estimate in the pixel domain.
    pub image: Vec<f64>,
    pub noise_variance: f64,
    /// Final noise precision (VAMP only).
    pub gamma_w: Option<f64>,
}

/// Measures `x0` through `phi` and recovers it. ℓ1 algorithms work on the
/// wavelet coefficients of the image with a SURE-tuned soft threshold;
/// denoiser-based ones work on pixels with `denoiser`.
pub fn recover(
    phi: &Arc<dyn SvdOperator>,
    wavelet: &WaveletTransform,
    x0: &[f64],
    settings: &RunSettings,
    denoiser: &dyn Denoiser,
    seed: u64,
) -> Result<Recovery> {
    let (y, noise_variance) = synthesize_measurements(phi.as_ref(), x0, settings.noise.snr_db(), seed)?;
    let solver_seed = derive_seed(seed, SOLVER_LABEL);

    let composed;
    let (a, den, truth): (&dyn SvdOperator, &dyn Denoiser, Truth) = if settings.algorithm.is_l1() {
        composed = compose_measurement(phi.clone(), wavelet.clone())?;
        (&composed, &SureSoftThreshold, Truth::wavelet(x0.to_vec(), wavelet.clone()))
    } else {
        (phi.as_ref(), denoiser, Truth::image(x0.to_vec()))
    };

    let (outcome, gamma_w) = if settings.algorithm.is_vamp() {
        let cfg = settings.vamp_config(noise_variance);
        let (outcome, state) = vamp_run(a, &y, den, &cfg, solver_seed, Some(&truth))?;
        (outcome, Some(state.gamma_w))
    } else {
        let (outcome, _) = amp_run(a, &y, den, settings.iters, solver_seed, Some(&truth))?;
        (outcome, None)
    };
    let image = truth.to_image(&outcome.estimate);
    Ok(Recovery { outcome, image, noise_variance, gamma_w })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub image: PathBuf,
    pub trial: usize,
    /// Trial seed (`base_seed + trial`).
    pub seed: u64,
    pub final_psnr: f64,
    /// Including the initial point; shorter than `iters + 1` after divergence.
    pub psnr: Vec<f64>,
    pub seconds: f64,
    pub diverged: bool,
    pub gamma_w: Option<f64>,
    pub noise_variance: f64,
    pub digest: String,
}

pub struct LoadedImages {
    pub paths: Vec<PathBuf>,
    pub images: Vec<GrayImage>,
    pub side: usize,
}

pub fn load_images(paths: &[PathBuf]) -> Result<LoadedImages> {
    let images = paths.iter().map(load_pgm).collect::<Result<Vec<_>>>()?;
    let first = images.first().ok_or_else(|| Error::Config("no images given".into()))?;
    let side = first.square_side()?;
    for (img, path) in images.iter().zip(paths) {
        if img.square_side()? != side {
            return Err(Error::Config(format!("{} is not {side}x{side} like the first image", path.display())));
        }
    }
    Ok(LoadedImages { paths: paths.to_vec(), images, side })
}

/// Everything sharing one measurement matrix: (ensemble, ratio, cond, trial).
struct Unit {
    ensemble: Ensemble,
    ratio: f64,
    cond: f64,
    trial: usize,
    cells: Vec<usize>,
}

fn plan_units(cells: &[ExperimentConfig]) -> Vec<Unit> {
    let mut units: Vec<Unit> = Vec::new();
    let trials = cells.first().map_or(0, |c| c.trials);
    for (idx, cell) in cells.iter().enumerate() {
        for trial in 0..trials {
            let found = units.iter_mut().find(|u| {
                u.ensemble == cell.ensemble && u.ratio == cell.ratio && u.cond == cell.cond && u.trial == trial
            });
            match found {
                Some(u) => u.cells.push(idx),
                None => units.push(Unit {
                    ensemble: cell.ensemble,
                    ratio: cell.ratio,
                    cond: cell.cond,
                    trial,
                    cells: vec![idx],
                }),
            }
        }
    }
    units
}

fn run_unit(
    unit: &Unit,
    cells: &[ExperimentConfig],
    images: &LoadedImages,
    wavelet: &WaveletTransform,
    denoiser: &dyn Denoiser,
) -> Result<Vec<(usize, TrialResult)>> {
    let n = images.side * images.side;
    let m = measurement_count(unit.ratio, n);
    let trial_seed = cells[unit.cells[0]].trial_seed(unit.trial);
    let phi = build_operator(unit.ensemble, m, n, unit.cond, trial_seed)?;
    let mut out = Vec::new();
    for &idx in &unit.cells {
        let cell = &cells[idx];
        let settings = RunSettings::from_cell(cell);
        let digest = cell.digest();
        for (k, (img, path)) in images.images.iter().zip(&images.paths).enumerate() {
            let seed = derive_seed(trial_seed, k as u64);
            let rec = recover(&phi, wavelet, &img.pixels, &settings, denoiser, seed)?;
            out.push((
                idx,
                TrialResult {
                    image: path.clone(),
                    trial: unit.trial,
                    seed: trial_seed,
                    final_psnr: rec.outcome.final_psnr().unwrap_or(f64::NAN),
                    psnr: rec.outcome.psnr,
                    seconds: rec.outcome.seconds,
                    diverged: rec.outcome.diverged,
                    gamma_w: rec.gamma_w,
                    noise_variance: rec.noise_variance,
                    digest: digest.clone(),
                },
            ));
        }
    }
    Ok(out)
}

/// Runs every trial of every cell. Results per cell are in (trial, image)
/// order; a cell whose trials did not all complete is `Err`.
pub fn run_grid(config: &SweepConfig) -> Result<(Vec<ExperimentConfig>, Vec<Result<Vec<TrialResult>>>)> {
    let cells = config.cells()?;
    let images = load_images(&config.images)?;
    let wavelet = WaveletTransform::max_depth(images.side)?;
    let needs_denoiser = cells.iter().any(|c| !c.algorithm.is_l1());
    let denoiser: Box<dyn Denoiser> =
        if needs_denoiser { config.denoiser.build()? } else { Box::new(SureSoftThreshold) };
    let units = plan_units(&cells);

    let workers = config.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outputs: Vec<Result<Vec<(usize, TrialResult)>>> =
        pool.install(|| units.par_iter().map(|u| run_unit(u, &cells, &images, &wavelet, denoiser.as_ref())).collect());

    let mut per_cell: Vec<Result<Vec<TrialResult>>> = cells.iter().map(|_| Ok(Vec::new())).collect();
    for (unit, output) in units.iter().zip(outputs) {
        match output {
            Ok(results) => {
                for (idx, r) in results {
                    if let Ok(v) = &mut per_cell[idx] {
                        v.push(r);
                    }
                }
            }
            Err(e) => {
                let msg = e.to_string();
                let mut first = Some(e);
                for &idx in &unit.cells {
                    if per_cell[idx].is_ok() {
                        per_cell[idx] = Err(first.take().unwrap_or_else(|| Error::Config(msg.clone())));
                    }
                }
            }
        }
    }
    for v in per_cell.iter_mut().flatten() {
        v.sort_by_key(|r| r.trial);
    }
    Ok((cells, per_cell))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: ExperimentConfig,
    pub mean_psnr: f64,
    /// Population standard deviation over images x trials.
    pub std_psnr: f64,
    /// Mean solver wall-clock per image run.
    pub mean_runtime: f64,
    /// Trials in which at least one image run diverged.
    pub diverged_count: usize,
    pub trials: Vec<TrialResult>,
}

impl SweepRow {
    pub fn new(cell: ExperimentConfig, trials: Vec<TrialResult>) -> Self {
        let psnrs: Vec<f64> = trials.iter().map(|t| report_psnr(t.final_psnr)).collect();
        let (mean_psnr, std_psnr) = mean_std(&psnrs);
        let mean_runtime = trials.iter().map(|t| t.seconds).sum::<f64>() / trials.len().max(1) as f64;
        let mut diverged: Vec<usize> = trials.iter().filter(|t| t.diverged).map(|t| t.trial).collect();
        diverged.dedup();
        Self { cell, mean_psnr, std_psnr, mean_runtime, diverged_count: diverged.len(), trials }
    }

    pub fn csv_line(&self, timing: bool) -> String {
        let c = &self.cell;
        let runtime = if timing { format!("{:.6}", self.mean_runtime) } else { String::new() };
        format!(
            "{},{},{},{},{},{},{:.4},{:.4},{},{}",
            c.algorithm,
            c.ensemble,
            c.ratio,
            c.cond,
            c.noise,
            c.iters,
            self.mean_psnr,
            self.std_psnr,
            runtime,
            self.diverged_count
        )
    }
}

/// Runs the grid and writes one CSV row per cell in grid order. If a cell
/// fails, the rows before it are still written and flushed before the error
/// is returned.
pub fn run_sweep<W: Write>(config: &SweepConfig, mut out: W) -> Result<Vec<SweepRow>> {
    let (cells, results) = run_grid(config)?;
    writeln!(out, "{SWEEP_HEADER}")?;
    let mut rows = Vec::new();
    for (cell, result) in cells.into_iter().zip(results) {
        match result {
            Ok(trials) => {
                let row = SweepRow::new(cell, trials);
                writeln!(out, "{}", row.csv_line(config.timing))?;
                rows.push(row);
            }
            Err(e) => {
                out.flush()?;
                return Err(e);
            }
        }
    }
    out.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub mean_psnr: f64,
    pub std_psnr: f64,
    /// Runs that reached this iteration.
    pub runs: usize,
}

pub fn trace_points(trials: &[TrialResult], iters: usize) -> Vec<TracePoint> {
    (0..=iters)
        .map(|i| {
            let values: Vec<f64> = trials.iter().filter_map(|t| t.psnr.get(i)).map(|&p| report_psnr(p)).collect();
            let (mean_psnr, std_psnr) = mean_std(&values);
            TracePoint { iteration: i, mean_psnr, std_psnr, runs: values.len() }
        })
        .collect()
}

/// Runs the grid and writes the per-iteration PSNR of every cell, averaged
/// over images and trials.
pub fn run_trace<W: Write>(config: &SweepConfig, mut out: W) -> Result<Vec<(ExperimentConfig, Vec<TracePoint>)>> {
    let (cells, results) = run_grid(config)?;
    writeln!(out, "{TRACE_HEADER}")?;
    let mut series = Vec::new();
    for (cell, result) in cells.into_iter().zip(results) {
        let trials = match result {
            Ok(t) => t,
            Err(e) => {
                out.flush()?;
                return Err(e);
            }
        };
        let points = trace_points(&trials, cell.iters);
        for p in &points {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.4},{:.4},{}",
                cell.algorithm,
                cell.ensemble,
                cell.ratio,
                cell.cond,
                cell.noise,
                p.iteration,
                p.mean_psnr,
                p.std_psnr,
                p.runs
            )?;
        }
        series.push((cell, points));
    }
    out.flush()?;
    Ok(series)
}

/// File name stem used when writing recovered images.
pub fn image_stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::pgm::save_pgm;

    fn synthetic_image(side: usize, phase: f64) -> GrayImage {
        let pixels = (0..side * side)
            .map(|k| {
                let (i, j) = ((k / side) as f64, (k % side) as f64);
                let smooth = 128.0 + 60.0 * ((i + phase) / 5.0).sin() * (j / 7.0).cos();
                let edge = if i > side as f64 / 2.0 && j > side as f64 / 3.0 { 40.0 } else { 0.0 };
                (smooth + edge).round().clamp(0.0, 255.0)
            })
            .collect();
        GrayImage::new(side, side, pixels).unwrap()
    }

    fn write_images(dir: &Path, count: usize, side: usize) -> Vec<PathBuf> {
        (0..count)
            .map(|k| {
                let p = dir.join(format!("img{k}.pgm"));
                save_pgm(&synthetic_image(side, k as f64 * 3.0), &p).unwrap();
                p
            })
            .collect()
    }

    #[test]
    fn measurement_counts() {
        assert_eq!(measurement_count(0.1, 16384), 1638);
        assert_eq!(measurement_count(0.5, 4096), 2048);
        assert_eq!(measurement_count(1e-9, 64), 1);
        assert_eq!(measurement_count(1.0, 64), 64);
    }

    #[test]
    fn vamp_settings_by_noise() {
        let mut s = RunSettings {
            algorithm: Algorithm::L1Vamp,
            noise: Noise::Noiseless,
            iters: 5,
            cond: 1e4,
            damping: None,
            auto_tune: true,
        };
        let c = s.vamp_config(0.0);
        assert_eq!((c.auto_tune_noise, c.initial_gamma_w, c.damping), (true, None, 0.5));
        s.auto_tune = false;
        let c = s.vamp_config(0.0);
        assert_eq!((c.auto_tune_noise, c.initial_gamma_w), (false, Some(1e11)));
        s.auto_tune = true;
        s.noise = Noise::SnrDb(32.0);
        assert_eq!(s.vamp_config(4.0).initial_gamma_w, None);
        s.auto_tune = false;
        s.damping = Some(0.5);
        let c = s.vamp_config(4.0);
        assert_eq!((c.auto_tune_noise, c.initial_gamma_w, c.damping), (false, Some(0.25), 0.5));
    }

    #[test]
    fn single_cell_sweep_schema() {
        let dir = tempfile::tempdir().unwrap();
        let images = write_images(dir.path(), 1, 16);
        let config = SweepConfig { images, iters: 3, workers: Some(1), ..Default::default() };
        let mut buf = Vec::new();
        let rows = run_sweep(&config, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], SWEEP_HEADER);
        assert_eq!(lines[1].split(',').count(), 10);
        assert!(lines[1].starts_with("l1-vamp,structured,0.1,1,32,3,"));
        assert_eq!(rows[0].trials.len(), 1);
        assert!(rows[0].trials[0].psnr.len() <= 4);
    }

    #[test]
    fn sweep_bytes_do_not_depend_on_workers() {
        let dir = tempfile::tempdir().unwrap();
        let images = write_images(dir.path(), 2, 16);
        let base = SweepConfig {
            algorithms: vec![Algorithm::L1Amp, Algorithm::DVamp],
            conds: vec![1.0, 100.0],
            ratios: vec![0.3, 0.5],
            trials: 2,
            iters: 4,
            images,
            timing: false,
            ..Default::default()
        };
        let run = |workers| {
            let mut buf = Vec::new();
            run_sweep(&SweepConfig { workers: Some(workers), ..base.clone() }, &mut buf).unwrap();
            buf
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(1));
        let text = String::from_utf8(one).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
        assert!(text.lines().skip(1).all(|l| l.split(',').nth(8) == Some("")));
    }

    #[test]
    fn trace_series_length() {
        let dir = tempfile::tempdir().unwrap();
        let images = write_images(dir.path(), 1, 16);
        let config = SweepConfig {
            algorithms: vec![Algorithm::DVamp],
            ensembles: vec![Ensemble::Gaussian],
            ratios: vec![0.3, 0.6],
            noises: vec![Noise::Noiseless],
            iters: 5,
            images,
            workers: Some(1),
            ..Default::default()
        };
        let mut buf = Vec::new();
        let series = run_trace(&config, &mut buf).unwrap();
        assert_eq!(series.len(), 2);
        for (_, points) in &series {
            assert_eq!(points.len(), 6);
            assert!(points.iter().all(|p| p.runs == 1));
        }
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 12);
        assert_eq!(text.lines().next().unwrap(), TRACE_HEADER);
    }

    #[test]
    fn wavelet_path_is_inverse_of_coefficients() {
        let img = synthetic_image(16, 0.0);
        let wavelet = WaveletTransform::max_depth(16).unwrap();
        let phi = build_operator(Ensemble::Structured, 128, 256, 1.0, 3).unwrap();
        let settings = RunSettings {
            algorithm: Algorithm::L1Vamp,
            noise: Noise::SnrDb(30.0),
            iters: 5,
            cond: 1.0,
            damping: None,
            auto_tune: true,
        };
        let rec = recover(&phi, &wavelet, &img.pixels, &settings, &SureSoftThreshold, 9).unwrap();
        assert_eq!(rec.image, wavelet.inverse(&rec.outcome.estimate));
        assert!(rec.gamma_w.is_some());
    }

    #[test]
    fn mismatched_images_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.pgm");
        let b = dir.path().join("b.pgm");
        save_pgm(&synthetic_image(16, 0.0), &a).unwrap();
        save_pgm(&synthetic_image(32, 0.0), &b).unwrap();
        assert!(load_images(&[a.clone(), b]).is_err());
        let c = dir.path().join("c.pgm");
        save_pgm(&GrayImage::new(12, 12, vec![0.0; 144]).unwrap(), &c).unwrap();
        assert!(matches!(load_images(&[c]), Err(Error::UnsupportedShape { .. })));
    }
}
