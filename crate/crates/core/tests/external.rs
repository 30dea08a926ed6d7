//! External denoiser protocol against the `dnz-echo` peer.

use std::path::PathBuf;
use std::time::Duration;

use dvamp::denoise::{Denoiser, DenoiserSpec, ExternalDenoiser, ProbeSettings, DEFAULT_TIMEOUT};
use dvamp::DenoiserError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn echo_path() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_dnz-echo"))
}

fn echo(args: &[&str], timeout: Duration) -> ExternalDenoiser {
    ExternalDenoiser::new(echo_path(), timeout, ProbeSettings::default()).unwrap().with_args(args.iter().copied())
}

fn image(side: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..side * side).map(|_| rng.gen_range(0.0..255.0f32) as f64).collect()
}

#[test]
fn round_trip_128_is_exact_for_f32_pixels() {
    let d = echo(&[], DEFAULT_TIMEOUT);
    let r = image(128, 1);
    assert_eq!(d.call(&r, 12.5).unwrap(), r);
    // The process is reused for the next call.
    let r2 = image(128, 2);
    assert_eq!(d.call(&r2, 3.0).unwrap(), r2);
}

#[test]
fn echo_divergence_is_one() {
    let d = echo(&[], DEFAULT_TIMEOUT);
    for seed in 0..5 {
        let r = image(64, 10 + seed);
        let res = d.denoise(&r, 5.0, seed).unwrap();
        assert_eq!(res.estimate, r);
        assert!((res.divergence - 1.0).abs() <= 0.02, "{}", res.divergence);
    }
}

#[test]
fn scaled_peer_divergence_is_the_scale() {
    let d = echo(&["--scale", "0.5"], DEFAULT_TIMEOUT);
    let r = image(32, 3);
    let res = d.denoise(&r, 5.0, 7).unwrap();
    assert!((res.divergence - 0.5).abs() <= 0.01, "{}", res.divergence);
}

#[test]
fn malformed_header_is_a_protocol_error() {
    let d = echo(&["--bad-magic"], DEFAULT_TIMEOUT);
    assert!(matches!(d.call(&image(16, 0), 1.0), Err(DenoiserError::Protocol(_))));
}

#[test]
fn wrong_size_is_a_protocol_error() {
    let d = echo(&["--wrong-size"], DEFAULT_TIMEOUT);
    assert!(matches!(d.call(&image(16, 0), 1.0), Err(DenoiserError::Protocol(_))));
}

#[test]
fn slow_peer_times_out() {
    let d = echo(&["--delay-ms", "3000"], Duration::from_millis(200));
    match d.call(&image(8, 0), 1.0) {
        Err(DenoiserError::Timeout(t)) => assert_eq!(t, Duration::from_millis(200)),
        other => panic!("expected timeout, got {other:?}"),
    }
}

#[test]
fn non_square_input_rejected() {
    let d = echo(&[], DEFAULT_TIMEOUT);
    assert!(matches!(d.call(&[1.0; 12], 1.0), Err(DenoiserError::Input(_))));
}

#[test]
fn spec_string_builds_external_denoiser() {
    let spec: DenoiserSpec = format!("external:{}:timeout=5", echo_path().display()).parse().unwrap();
    let d = spec.build().unwrap();
    let r = image(16, 4);
    let res = d.denoise(&r, 2.0, 0).unwrap();
    assert_eq!(res.estimate, r);
}
