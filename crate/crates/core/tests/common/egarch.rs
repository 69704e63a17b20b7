//! Scalar EGARCH-M reference recursion and fixture builders.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use turmoil_core::egarch::EgarchMParams;
use turmoil_core::gnd::SkewGndParams;
use turmoil_core::returns::{DummySeries, ReturnSeries};

use super::SkewOracle;

pub struct Naive {
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    pub loglik: f64,
}

/// Plain scalar recursion with the oracle density and a quadrature E|z|.
pub fn naive_filter(p: &EgarchMParams, r: &[f64], d: &[u8], log_h2_0: f64) -> Naive {
    let law = SkewOracle::new(p.innovation.nu, p.innovation.s);
    let e_abs = law.expected_abs();
    let mut out = Naive { h: vec![], z: vec![], loglik: 0.0 };
    let mut lnh2 = log_h2_0;
    let mut zp = 0.0;
    for t in 1..r.len() {
        let dt = if d[t] == 1 { 1.0 } else { 0.0 };
        lnh2 = p.omega + p.v1 * dt + p.alpha1 * zp + p.gamma1 * (f64::abs(zp) - e_abs) + p.beta1 * lnh2;
        let h = lnh2.exp().sqrt();
        let z = (r[t] - p.mu - p.m1 * dt - p.phi1 * r[t - 1] - p.lambda * h) / h;
        out.loglik += law.pdf(z).ln() - h.ln();
        out.h.push(h);
        out.z.push(z);
        zp = z;
    }
    out
}

pub fn sample_var(r: &[f64]) -> f64 {
    super::var(r)
}

pub fn bernoulli_dummy(dates: &[chrono::NaiveDate], p: f64, seed: u64) -> DummySeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DummySeries::new(dates.to_vec(), dates.iter().map(|_| u8::from(rng.gen::<f64>() < p)).collect()).unwrap()
}

pub fn blank(n: usize) -> ReturnSeries {
    ReturnSeries::from_values("X", super::start_date(), vec![0.0; n]).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng) -> EgarchMParams {
    EgarchMParams {
        mu: rng.gen_range(-0.3..0.3),
        m1: rng.gen_range(-3.0..0.0),
        phi1: rng.gen_range(-0.2..0.2),
        lambda: rng.gen_range(-0.1..0.4),
        omega: rng.gen_range(-0.1..0.1),
        v1: rng.gen_range(0.0..0.8),
        alpha1: rng.gen_range(-0.2..0.0),
        gamma1: rng.gen_range(0.0..0.2),
        beta1: rng.gen_range(0.8..0.97),
        innovation: SkewGndParams { nu: rng.gen_range(1.0..2.5), s: rng.gen_range(0.9..1.1) },
    }
}
