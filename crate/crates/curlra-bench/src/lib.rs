//! Benchmark-only crate; see the `benches/` targets.
//!
//! Shared fixtures for the criterion benchmarks live here so both bench
//! targets draw identical inputs.

use curlra::gen::{gen_factor_gaussian, FactorKind};
use curlra::mat::Mat;
use curlra::rng;

/// Perturbed factor-Gaussian benchmark input of expected rank `r`.
pub fn bench_input(n: usize, r: usize, seed: u64) -> Mat<f64> {
    gen_factor_gaussian(
        n,
        n,
        r,
        FactorKind::Scaled { sigma: 1.0 },
        1e-10,
        &mut rng::seeded(seed),
    )
    .expect("valid generator parameters")
    .w
}
