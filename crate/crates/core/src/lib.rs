//! Compressive image recovery with approximate message passing.
//!
//! * [`oplib`]: matrix-free measurement operators with explicit SVDs, the
//!   orthonormal Hadamard and wavelet transforms.
//! * [`denoise`]: the denoiser interface (soft thresholding, SURE tuning,
//!   cycle-spun wavelet shrinkage, out-of-process denoisers) and Monte Carlo
//!   divergence estimation.
//! * [`amp`] / [`vamp`]: the AMP and VAMP recursions, usable with any denoiser.
//! * [`harness`]: image I/O, measurement synthesis, seeded sweeps and traces.

pub mod amp;
pub mod denoise;
pub mod error;
pub mod harness;
pub mod oplib;
pub mod oracle;
pub mod rng;
pub mod vamp;

mod outcome;

pub use error::{DenoiserError, Error, Result};
pub use outcome::{RunOutcome, Truth};
