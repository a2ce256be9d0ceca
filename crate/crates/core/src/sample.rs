//! Random instances for benchmarks and randomized tests.

use rand::distr::OpenClosed01;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::types::{BoxBounds, LogitVector};

/// Standard deviation of the sampled logits.
pub const LOGIT_STD: f64 = 3.0;

/// Logits `~ N(0, 3²)`, upper bounds `b ~ U(0, 1]` rescaled by
/// `1 / min(1, Σ b)` and clamped to one, lower bounds `a ~ U(0, 1/K)` then
/// `a ← min(a, b)`.
pub fn bench_instance<R: Rng + ?Sized>(rng: &mut R, k: usize) -> (LogitVector, BoxBounds) {
    let x = logits(rng, k);
    let mut b: Vec<f64> = (0..k).map(|_| rng.sample(OpenClosed01)).collect();
    let total: f64 = b.iter().sum();
    let scale = total.min(1.0);
    for v in &mut b {
        *v = (*v / scale).min(1.0);
    }
    let a: Vec<f64> = b
        .iter()
        .map(|&bk| rng.random_range(0.0..1.0 / k as f64).min(bk))
        .collect();
    let bounds = BoxBounds::from_vecs(a, b).expect("sampled bounds are feasible");
    (x, bounds)
}

/// Logits `~ N(0, 3²)`.
pub fn logits<R: Rng + ?Sized>(rng: &mut R, k: usize) -> LogitVector {
    let normal = Normal::new(0.0, LOGIT_STD).expect("valid normal");
    LogitVector::new(normal.sample_iter(rng).take(k).collect()).expect("finite samples")
}

/// Scalar bounds `a ~ U(0, 1/K)`, `b ~ U(1/K, 1]`, so `(a·1, b·1)` is feasible.
pub fn scalar_bounds<R: Rng + ?Sized>(rng: &mut R, k: usize) -> (f64, f64) {
    let inv = 1.0 / k as f64;
    let a = rng.random_range(0.0..inv);
    let b = inv + (1.0 - inv) * rng.sample::<f64, _>(OpenClosed01);
    (a, b)
}
