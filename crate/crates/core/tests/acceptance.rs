//! Acceptance run: one PASS / FAIL / SKIP line per criterion, nonzero exit
//! if any criterion fails.
//!
//! Optional inputs through the environment:
//! - `DVAMP_REFERENCE_IMAGES`: directory with the six reference test images at
//!   128x128, enabling the absolute PSNR checks.
//! - `DVAMP_BM3D`: path to an external BM3D denoiser speaking the subprocess
//!   protocol, enabling the BM3D robustness check.
//!
//! Lines starting with INFO are diagnostics and never fail the run.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use dvamp::denoise::{DenoiserSpec, SureSoftThreshold};
use dvamp::harness::{
    build_operator, expand_images, load_images, measurement_count, recover, run_sweep, selftest,
    synthesize_measurements, Algorithm, Ensemble, Noise, RunSettings, SweepConfig, SweepRow,
};
use dvamp::oplib::{compose_measurement, make_structured_operator, Counted, SvdOperator, WaveletTransform};
use dvamp::vamp::{default_damping, VampConfig};
use dvamp::{amp::amp_run, vamp::vamp_run};

const CONDS: [f64; 5] = [1.0, 10.0, 100.0, 1e3, 1e4];
const RATIOS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

struct Report {
    failed: bool,
}

impl Report {
    fn line(&mut self, id: &str, passed: bool, detail: String) {
        println!("{} criterion {id}: {detail}", if passed { "PASS" } else { "FAIL" });
        self.failed |= !passed;
    }

    fn skip(&mut self, id: &str, detail: &str) {
        println!("SKIP criterion {id}: {detail}");
    }
}

fn data_images(side: usize) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../data/images/{side}"))
}

fn row<'a>(rows: &'a [SweepRow], algorithm: Algorithm, ratio: f64, cond: f64) -> &'a SweepRow {
    rows.iter()
        .find(|r| r.cell.algorithm == algorithm && r.cell.ratio == ratio && r.cell.cond == cond)
        .expect("cell present")
}

fn sweep(
    algorithms: &[Algorithm],
    ensemble: Ensemble,
    ratios: &[f64],
    conds: &[f64],
    noise: Noise,
    iters: usize,
    images: PathBuf,
) -> SweepConfig {
    SweepConfig {
        algorithms: algorithms.to_vec(),
        ensembles: vec![ensemble],
        ratios: ratios.to_vec(),
        conds: conds.to_vec(),
        noises: vec![noise],
        iters,
        trials: 10,
        images: expand_images(&[images]).expect("images present"),
        timing: false,
        ..SweepConfig::default()
    }
}

fn checks(report: &mut Report, id: &str, list: Vec<selftest::Check>) {
    let mut ok = true;
    for c in &list {
        println!("    {} {}: {}", if c.passed { "ok" } else { "FAILED" }, c.name, c.detail);
        ok &= c.passed;
    }
    report.line(id, ok, format!("{} checks", list.len()));
}

/// Robustness across condition numbers on the structured ensemble.
fn robustness(report: &mut Report) {
    let cfg = sweep(
        &[Algorithm::L1Amp, Algorithm::L1Vamp],
        Ensemble::Structured,
        &[0.1],
        &CONDS,
        Noise::SnrDb(32.0),
        10,
        data_images(128),
    );
    let start = Instant::now();
    let rows = run_sweep(&cfg, std::io::sink()).expect("sweep runs");
    let elapsed = start.elapsed();
    for r in &rows {
        println!("    {}", r.csv_line(false));
    }

    let amp_broken = CONDS[1..].iter().all(|&c| row(&rows, Algorithm::L1Amp, 0.1, c).diverged_count == 10);
    let vamp_finite = CONDS.iter().all(|&c| {
        row(&rows, Algorithm::L1Vamp, 0.1, c).diverged_count == 0
            && row(&rows, Algorithm::L1Vamp, 0.1, c).mean_psnr.is_finite()
    });
    let v1 = row(&rows, Algorithm::L1Vamp, 0.1, 1.0).mean_psnr;
    let v4 = row(&rows, Algorithm::L1Vamp, 0.1, 1e4).mean_psnr;
    let fast = elapsed < Duration::from_secs(300);
    report.line(
        "3",
        amp_broken && vamp_finite && v4 >= v1 - 4.0 && fast,
        format!(
            "l1-AMP diverged 10/10 at cond >= 10: {amp_broken}; l1-VAMP finite: {vamp_finite}; \
             l1-VAMP {v1:.2} dB at cond 1 vs {v4:.2} dB at cond 1e4 (drop {:.2} dB, limit 4); {:.1} s",
            v1 - v4,
            elapsed.as_secs_f64()
        ),
    );

    let a1 = row(&rows, Algorithm::L1Amp, 0.1, 1.0).mean_psnr;
    report.line(
        "4",
        (a1 - v1).abs() <= 0.5,
        format!("l1-AMP {a1:.2} dB vs l1-VAMP {v1:.2} dB at cond 1 (gap {:.2}, limit 0.5)", (a1 - v1).abs()),
    );

    match std::env::var_os("DVAMP_REFERENCE_IMAGES") {
        Some(dir) => {
            let cfg = SweepConfig {
                conds: vec![1.0],
                images: expand_images(&[PathBuf::from(dir)]).expect("images present"),
                ..cfg
            };
            let rows = run_sweep(&cfg, std::io::sink()).expect("sweep runs");
            let a = row(&rows, Algorithm::L1Amp, 0.1, 1.0).mean_psnr;
            let v = row(&rows, Algorithm::L1Vamp, 0.1, 1.0).mean_psnr;
            report.line(
                "4 (reference images)",
                (a - 17.3).abs() <= 2.0 && (v - 17.4).abs() <= 2.0,
                format!("l1-AMP {a:.2} dB (target 17.3), l1-VAMP {v:.2} dB (target 17.4), tolerance 2 dB"),
            );
        }
        None => report.skip("4 (reference images)", "DVAMP_REFERENCE_IMAGES not set"),
    }
}

/// Noiseless Gaussian rate sweep with the built-in denoiser.
fn rate_sweep(report: &mut Report) {
    let cfg = sweep(
        &[Algorithm::L1Amp, Algorithm::L1Vamp, Algorithm::DVamp],
        Ensemble::Gaussian,
        &RATIOS,
        &[1.0],
        Noise::Noiseless,
        30,
        data_images(64),
    );
    let rows = run_sweep(&cfg, std::io::sink()).expect("sweep runs");
    for r in &rows {
        println!("    {}", r.csv_line(false));
    }
    let means = |alg| RATIOS.iter().map(|&q| row(&rows, alg, q, 1.0).mean_psnr).collect::<Vec<_>>();
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    let (amp, vamp) = (means(Algorithm::L1Amp), means(Algorithm::L1Vamp));
    let fmt = |v: &[f64]| v.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>().join(" ");
    report.line(
        "5",
        increasing(&amp) && increasing(&vamp),
        format!("l1-AMP [{}] l1-VAMP [{}] over ratios 0.1..0.5", fmt(&amp), fmt(&vamp)),
    );

    let gaps: Vec<(f64, f64)> = [0.2, 0.5]
        .iter()
        .map(|&q| (q, row(&rows, Algorithm::DVamp, q, 1.0).mean_psnr - row(&rows, Algorithm::L1Vamp, q, 1.0).mean_psnr))
        .collect();
    report.line(
        "6",
        gaps.iter().all(|&(_, g)| g >= 2.0),
        gaps.iter().map(|(q, g)| format!("D-VAMP minus l1-VAMP at {q}: {g:.2} dB")).collect::<Vec<_>>().join("; ")
            + " (need >= 2)",
    );

    match std::env::var_os("DVAMP_REFERENCE_IMAGES") {
        Some(dir) => {
            let cfg = SweepConfig {
                algorithms: vec![Algorithm::L1Amp, Algorithm::L1Vamp],
                images: expand_images(&[PathBuf::from(dir)]).expect("images present"),
                ..cfg
            };
            let rows = run_sweep(&cfg, std::io::sink()).expect("sweep runs");
            let targets = [
                (Algorithm::L1Amp, [17.7, 20.2, 22.4, 24.6, 27.0]),
                (Algorithm::L1Vamp, [17.6, 20.2, 22.4, 24.8, 27.2]),
            ];
            let mut ok = true;
            let mut detail = Vec::new();
            for (alg, t) in targets {
                for (q, target) in RATIOS.iter().zip(t) {
                    let p = row(&rows, alg, *q, 1.0).mean_psnr;
                    ok &= (p - target).abs() <= 2.0;
                    detail.push(format!("{alg}@{q} {p:.2}/{target}"));
                }
            }
            report.line("5 (reference images)", ok, detail.join(" "));
        }
        None => report.skip("5 (reference images)", "DVAMP_REFERENCE_IMAGES not set"),
    }

    match std::env::var_os("DVAMP_BM3D") {
        Some(path) => {
            let cfg = SweepConfig {
                algorithms: vec![Algorithm::DAmp, Algorithm::DVamp],
                ensembles: vec![Ensemble::Structured],
                ratios: vec![0.1],
                conds: vec![10.0],
                noises: vec![Noise::SnrDb(32.0)],
                iters: 10,
                images: expand_images(&[data_images(128)]).expect("images present"),
                denoiser: DenoiserSpec::external(PathBuf::from(path)),
                ..cfg
            };
            let rows = run_sweep(&cfg, std::io::sink()).expect("sweep runs");
            let amp = row(&rows, Algorithm::DAmp, 0.1, 10.0);
            let vamp = row(&rows, Algorithm::DVamp, 0.1, 10.0);
            report.line(
                "5 (BM3D)",
                amp.diverged_count == amp.cell.trials && vamp.diverged_count == 0 && vamp.mean_psnr.is_finite(),
                format!(
                    "cond 10: D-AMP diverged {}/{}, D-VAMP {:.2} dB with {} divergences",
                    amp.diverged_count, amp.cell.trials, vamp.mean_psnr, vamp.diverged_count
                ),
            );
        }
        None => report.skip("5 (BM3D)", "DVAMP_BM3D not set"),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Operator applications and wall-clock per iteration, from the difference
/// between runs of `k` and `2k` iterations.
fn cost_parity(report: &mut Report) {
    const SIDE: usize = 128;
    const K: usize = 5;
    let n = SIDE * SIDE;
    let m = measurement_count(0.1, n);
    let wavelet = WaveletTransform::max_depth(SIDE).expect("power of two");
    let x0 = dvamp::harness::load_pgm(data_images(128).join("camera.pgm")).expect("image loads").pixels;

    let (mut amp_counts, mut vamp_counts) = (Vec::new(), Vec::new());
    let (mut amp_times, mut vamp_times) = (Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let counted = Arc::new(Counted::new(make_structured_operator(m, n, 1.0, seed).expect("valid shape")));
        let phi: Arc<dyn SvdOperator> = counted.clone();
        let (y, _) = synthesize_measurements(phi.as_ref(), &x0, Some(32.0), seed).expect("measurements");
        let a = compose_measurement(phi, wavelet.clone()).expect("shapes agree");
        let vcfg = |iters| VampConfig { max_iters: iters, damping: default_damping(1.0), ..VampConfig::default() };

        let amp_at = |iters| {
            counted.reset();
            let t = Instant::now();
            amp_run(&a, &y, &SureSoftThreshold, iters, seed, None).expect("amp runs");
            (t.elapsed().as_secs_f64(), counted.counts())
        };
        let (t1, c1) = amp_at(K);
        let (t2, c2) = amp_at(2 * K);
        amp_counts.push((c2.dense() - c1.dense()) as f64 / K as f64);
        amp_times.push((t2 - t1) / K as f64);

        let vamp_at = |iters| {
            counted.reset();
            let t = Instant::now();
            vamp_run(&a, &y, &SureSoftThreshold, &vcfg(iters), seed, None).expect("vamp runs");
            (t.elapsed().as_secs_f64(), counted.counts())
        };
        let (t1, c1) = vamp_at(K);
        let (t2, c2) = vamp_at(2 * K);
        vamp_counts.push((c2.factors() + c2.dense() - c1.factors() - c1.dense()) as f64 / K as f64);
        vamp_times.push((t2 - t1) / K as f64);
    }
    let counts_ok = amp_counts.iter().all(|&c| c == 2.0) && vamp_counts.iter().all(|&c| c == 3.0);
    let (ta, tv) = (median(amp_times), median(vamp_times));
    report.line(
        "7",
        counts_ok && tv <= 2.0 * ta,
        format!(
            "applications per iteration AMP {:?} VAMP {:?}; median time per iteration AMP {:.2} ms, VAMP {:.2} ms (ratio {:.2}, limit 2)",
            amp_counts, vamp_counts, ta * 1e3, tv * 1e3, tv / ta
        ),
    );
}

/// Keeps the largest `keep` fraction of wavelet coefficients.
fn wavelet_sparse(x: &[f64], wavelet: &WaveletTransform, keep: f64) -> Vec<f64> {
    let mut c = wavelet.forward(x);
    let mut mags: Vec<f64> = c.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let threshold = mags[(keep * c.len() as f64) as usize];
    c.iter_mut().filter(|v| v.abs() <= threshold).for_each(|v| *v = 0.0);
    wavelet.inverse(&c)
}

/// The generative noise precision is only the EM target when the signal
/// follows the sparse model, so the check runs on wavelet-sparse versions of
/// the test images. Natural images are reported alongside: there the
/// residual also carries the signal the l1 prior fails to capture.
fn em_tuning(report: &mut Report) {
    let loaded = load_images(&expand_images(&[data_images(64)]).expect("images present")).expect("images load");
    let n = loaded.side * loaded.side;
    let wavelet = WaveletTransform::max_depth(loaded.side).expect("power of two");
    let settings = RunSettings {
        algorithm: Algorithm::L1Vamp,
        noise: Noise::SnrDb(32.0),
        iters: 30,
        cond: 1.0,
        damping: None,
        auto_tune: true,
    };
    let (mut sparse, mut natural) = (Vec::new(), Vec::new());
    for seed in 0..10u64 {
        let phi = build_operator(Ensemble::Gaussian, measurement_count(0.5, n), n, 1.0, seed).expect("operator");
        for (k, img) in loaded.images.iter().enumerate() {
            let run_seed = 1000 * seed + k as u64;
            for (x0, out) in
                [(wavelet_sparse(&img.pixels, &wavelet, 0.05), &mut sparse), (img.pixels.clone(), &mut natural)]
            {
                let rec = recover(&phi, &wavelet, &x0, &settings, &SureSoftThreshold, run_seed).expect("recovery runs");
                out.push(rec.gamma_w.expect("vamp reports gamma_w") * rec.noise_variance);
            }
        }
    }
    let range = |v: &[f64]| v.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let (lo, hi) = range(&sparse);
    report.line(
        "8",
        sparse.iter().all(|r| (0.5..=2.0).contains(r)),
        format!(
            "wavelet-sparse images: estimated / true noise precision over {} runs in [{lo:.3}, {hi:.3}] (need [0.5, 2])",
            sparse.len()
        ),
    );
    let (lo, hi) = range(&natural);
    println!("INFO criterion 8 (natural images): estimated / true noise precision in [{lo:.3}, {hi:.3}]");
}

fn cli(args: &[&str]) -> Vec<u8> {
    let o = Command::new(env!("CARGO_BIN_EXE_dvamp")).args(args).output().expect("binary runs");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o.stdout
}

fn determinism(report: &mut Report) {
    let images = data_images(64).display().to_string();
    let base = [
        "--algorithm",
        "l1-amp,l1-vamp,d-vamp",
        "--ensemble",
        "structured,gaussian",
        "--ratio",
        "0.2,0.4",
        "--cond",
        "1,1000",
        "--snr-db",
        "30",
        "--iters",
        "5",
        "--trials",
        "3",
        "--no-timing",
        "--images",
        &images,
    ];
    let mut identical = true;
    for cmd in ["sweep", "trace"] {
        let outputs: Vec<Vec<u8>> = ["1", "3", "3"]
            .iter()
            .map(|w| {
                let mut args = vec![cmd];
                args.extend(base);
                args.extend(["--workers", w]);
                cli(&args)
            })
            .collect();
        identical &= outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty();
    }
    report.line(
        "9",
        identical,
        format!("sweep and trace bytes identical across runs with 1 and 3 workers: {identical}"),
    );
}

fn main() -> ExitCode {
    let mut report = Report { failed: false };
    checks(&mut report, "1", selftest::oracle_checks());
    checks(&mut report, "2", selftest::transform_checks());
    robustness(&mut report);
    rate_sweep(&mut report);
    cost_parity(&mut report);
    em_tuning(&mut report);
    determinism(&mut report);
    if report.failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
