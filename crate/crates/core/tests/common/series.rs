//! Simulated series for the diagnostic tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn random_walk(n: usize, seed: u64) -> Vec<f64> {
    normals(n, seed)
        .into_iter()
        .scan(0.0, |acc, e| {
            *acc += e;
            Some(*acc)
        })
        .collect()
}

/// GARCH(1,1) with omega 0.05, alpha 0.1, beta 0.85.
pub fn garch(n: usize, seed: u64) -> Vec<f64> {
    garch_with(n, seed, 0.05, 0.1, 0.85)
}

/// GARCH(1,1) with normal innovations after a 500-step burn-in.
pub fn garch_with(n: usize, seed: u64, omega: f64, alpha: f64, beta: f64) -> Vec<f64> {
    let e = normals(n + 500, seed);
    let mut s2: f64 = omega / (1.0 - alpha - beta);
    let mut out = Vec::with_capacity(n);
    let mut prev: f64 = 0.0;
    for (t, z) in e.into_iter().enumerate() {
        s2 = omega + alpha * prev * prev + beta * s2;
        prev = s2.sqrt() * z;
        if t >= 500 {
            out.push(prev);
        }
    }
    out
}
