//! Inputs shared by the kernel benchmarks.

use bciwall::simulation::{generate_piecewise_gaussian, VarianceProfile};
use bciwall::Recording;

pub const SAMPLE_RATE_HZ: f64 = 250.0;

/// Unit-variance white noise.
pub fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    generate_piecewise_gaussian(&VarianceProfile::uniform(1.0, n).expect("n > 0"), n, seed).expect("profile covers n")
}

/// A recording of `seconds` whose variance quadruples in its second half.
pub fn two_level_recording(seconds: f64) -> Recording {
    let n = (seconds * SAMPLE_RATE_HZ) as usize;
    let profile = VarianceProfile::from_lengths(&[(n / 2, 1.0), (n - n / 2, 4.0)]).expect("n >= 2");
    let samples = generate_piecewise_gaussian(&profile, n, 1).expect("profile covers n");
    Recording::new(samples, SAMPLE_RATE_HZ).expect("finite samples")
}
