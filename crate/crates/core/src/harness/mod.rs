//! Experiment harness: PGM images, measurement synthesis at a target SNR,
//! seeded multi-trial sweeps and per-iteration traces written as CSV.
//!
//! Seeding: trial `t` of a sweep uses seed `base_seed + t` for its
//! measurement matrix; image `k` of that trial derives its noise and solver
//! seeds from the trial seed and `k`. Trials run on a worker pool, but rows
//! are emitted in grid order, so output bytes only depend on the config
//! (with `timing` off; wall-clock is inherently not reproducible).

mod config;
mod experiment;
mod measure;
mod pgm;
pub mod selftest;

pub use config::{expand_images, Algorithm, ConfigFile, Ensemble, ExperimentConfig, Noise, OneOrMany, SweepConfig};
pub use experiment::{
    build_operator, image_stem, load_images, measurement_count, recover, run_grid, run_sweep, run_trace, trace_points,
    LoadedImages, Recovery, RunSettings, SweepRow, TracePoint, TrialResult, NOISELESS_PRECISION, SWEEP_HEADER,
    TRACE_HEADER,
};
pub use measure::{psnr, report_psnr, synthesize_measurements, PEAK, PSNR_CAP};
pub use pgm::{encode_pgm, load_pgm, parse_pgm, save_pgm, GrayImage};
