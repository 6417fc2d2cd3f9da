//! Workloads shared by the benchmarks.

use std::path::PathBuf;

use optisense_core::seed::derive;
use optisense_core::{Plane, QuantWeight, TernaryCode};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures"))
}

/// Reproducible ternary activations.
pub fn codes(seed: u64, n: usize) -> Vec<TernaryCode> {
    (0..n)
        .map(|i| TernaryCode::from_value((derive(seed, &[i as u64]) % 3) as u8).expect("code < 3"))
        .collect()
}

/// Reproducible signed weights with `bits` magnitude bits.
pub fn weights(seed: u64, n: usize, bits: u8) -> Vec<QuantWeight> {
    let span = 2 * ((1i64 << bits) - 1) + 1;
    (0..n)
        .map(|i| {
            let v = (derive(seed, &[i as u64, 1]) % span as u64) as i64 - (span - 1) / 2;
            QuantWeight::new(v as i32, bits).expect("in range")
        })
        .collect()
}

pub fn code_plane(seed: u64, width: usize, height: usize) -> Plane<TernaryCode> {
    Plane::from_vec(width, height, codes(seed, width * height)).expect("sizes agree")
}
