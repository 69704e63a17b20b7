//! Generalised normal distribution (GND) kernels.
//!
//! The symmetric GND with location `mu`, scale `delta` and shape `nu` has
//! density `nu / (2 delta Γ(1/nu)) exp(-|(x - mu)/delta|^nu)`; `nu = 1` is the
//! Laplace law and `nu = 2` a normal kernel with variance `delta²/2`.
//!
//! The skewed variant applies Fernández–Steel inverse-scale skewing with
//! parameter `s` (`s = 1` is symmetric) to the unit GND and re-standardizes
//! the result to zero mean and unit variance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;

/// Location, scale and shape of one GND.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GndParams {
    pub mu: f64,
    pub delta: f64,
    pub nu: f64,
}

impl GndParams {
    pub fn new(mu: f64, delta: f64, nu: f64) -> Result<Self> {
        let p = Self { mu, delta, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::InvalidParameter(format!("GND location {} is not finite", self.mu)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!("GND scale {} must be positive", self.delta)));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::InvalidParameter(format!("GND shape {} must be positive", self.nu)));
        }
        Ok(())
    }

    /// `ln nu - ln(2 delta Γ(1/nu))`, the log-density at the mode.
    pub fn log_norm(&self) -> f64 {
        log_norm(self.delta, self.nu)
    }

    pub fn variance(&self) -> f64 {
        gnd_variance(self.delta, self.nu)
    }

    pub fn stdev(&self) -> f64 {
        self.variance().sqrt()
    }
}

#[inline]
pub(crate) fn log_norm(delta: f64, nu: f64) -> f64 {
    nu.ln() - LN_2 - delta.ln() - ln_gamma(1.0 / nu)
}

/// GND log-density at `x`.
pub fn gnd_logpdf(x: f64, p: &GndParams) -> f64 {
    p.log_norm() - ((x - p.mu).abs() / p.delta).powf(p.nu)
}

/// `delta² Γ(3/nu) / Γ(1/nu)`.
pub fn gnd_variance(delta: f64, nu: f64) -> f64 {
    delta * delta * (ln_gamma(3.0 / nu) - ln_gamma(1.0 / nu)).exp()
}

/// `E|X - mu| = delta Γ(2/nu) / Γ(1/nu)`.
pub fn gnd_abs_moment(p: &GndParams) -> f64 {
    p.delta * (ln_gamma(2.0 / p.nu) - ln_gamma(1.0 / p.nu)).exp()
}

/// One unit-scale GND magnitude `|U|`, via `G^{1/nu}` with `G ~ Gamma(1/nu, 1)`.
fn unit_magnitude<R: Rng + ?Sized>(gamma: &Gamma<f64>, inv_nu: f64, rng: &mut R) -> f64 {
    gamma.sample(rng).powf(inv_nu)
}

/// Draw `n` i.i.d. GND variates from an explicit RNG.
pub fn gnd_sample_with<R: Rng + ?Sized>(p: &GndParams, n: usize, rng: &mut R) -> Vec<f64> {
    let inv_nu = 1.0 / p.nu;
    let gamma = Gamma::new(inv_nu, 1.0).expect("shape validated positive");
    (0..n)
        .map(|_| {
            let m = unit_magnitude(&gamma, inv_nu, rng);
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            p.mu + p.delta * sign * m
        })
        .collect()
}

/// Draw `n` i.i.d. GND variates; the same `seed` always yields the same draws.
pub fn gnd_sample(p: &GndParams, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gnd_sample_with(p, n, &mut rng)
}

/// Shape and skewness of the standardized skewed GND.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewGndParams {
    pub nu: f64,
    pub s: f64,
}

impl SkewGndParams {
    pub fn new(nu: f64, s: f64) -> Result<Self> {
        let p = Self { nu, s };
        p.validate()?;
        Ok(p)
    }

    pub fn symmetric(nu: f64) -> Result<Self> {
        Self::new(nu, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(Error::InvalidParameter(format!("skewed GND shape {} must be positive", self.nu)));
        }
        if !(self.s.is_finite() && self.s > 0.0) {
            return Err(Error::InvalidParameter(format!("skewed GND skewness {} must be positive", self.s)));
        }
        Ok(())
    }
}

/// Precomputed constants of a standardized skewed GND. Build once per
/// parameter value and evaluate many points.
#[derive(Debug, Clone, Copy)]
pub struct SkewGnd {
    params: SkewGndParams,
    /// Mean of the unstandardized two-piece variable.
    shift: f64,
    /// Standard deviation of the unstandardized two-piece variable.
    scale: f64,
    log_const: f64,
    expected_abs: f64,
}

impl SkewGnd {
    pub fn new(params: SkewGndParams) -> Self {
        let SkewGndParams { nu, s } = params;
        let lg1 = ln_gamma(1.0 / nu);
        // Absolute moments of the unit GND: E|U| and E|U|²
        let m1 = (ln_gamma(2.0 / nu) - lg1).exp();
        let m2 = (ln_gamma(3.0 / nu) - lg1).exp();
        let inv = 1.0 / s;
        let shift = m1 * (s - inv);
        let second = m2 * (s * s - 1.0 + inv * inv);
        let scale = (second - shift * shift).sqrt();
        let log_const = scale.ln() + LN_2 - (s + inv).ln() + nu.ln() - LN_2 - lg1;
        let expected_abs = two_piece_mean_abs_dev(nu, s, m1, shift) / scale;
        Self { params, shift, scale, log_const, expected_abs }
    }

    pub fn params(&self) -> SkewGndParams {
        self.params
    }

    #[inline]
    pub fn logpdf(&self, z: f64) -> f64 {
        let x = self.shift + self.scale * z;
        let u = if x >= 0.0 { x / self.params.s } else { x * self.params.s };
        self.log_const - u.abs().powf(self.params.nu)
    }

    /// `E|z|` under the standardized law.
    pub fn expected_abs(&self) -> f64 {
        self.expected_abs
    }

    /// Map an unstandardized two-piece draw to the standardized scale.
    #[inline]
    fn standardize(&self, x: f64) -> f64 {
        (x - self.shift) / self.scale
    }
}

/// `E|X - m|` for the Fernández–Steel two-piece unit GND with mean `m`.
///
/// Uses `E|X - m| = 2 E[(m - X)^+]` and the regularized lower incomplete gamma
/// function for the partial moments of the positive branch. For `s < 1` the
/// law is reflected (`X -> -X`, `s -> 1/s`) so `m >= 0` always holds.
fn two_piece_mean_abs_dev(nu: f64, s: f64, m1: f64, shift: f64) -> f64 {
    let (s, m) = if s < 1.0 { (1.0 / s, -shift) } else { (s, shift) };
    let c = 2.0 / (s + 1.0 / s);
    let negative_branch = c / s * (0.5 * m + 0.5 * m1 / s);
    let positive_branch = if m > 0.0 {
        let a = m / s;
        let t = a.powf(nu);
        // P(a, 0) = 0 and P(a, ∞) = 1; statrs rejects both endpoints
        let p = |shape: f64| if t <= 0.0 { 0.0 } else if t == f64::INFINITY { 1.0 } else { gamma_lr(shape, t) };
        let g0 = 0.5 * p(1.0 / nu);
        let g1 = 0.5 * m1 * p(2.0 / nu);
        c * s * (m * g0 - s * g1)
    } else {
        0.0
    };
    2.0 * (negative_branch + positive_branch)
}

/// Log-density of the standardized skewed GND at `z`.
pub fn sgnd_logpdf(z: f64, p: &SkewGndParams) -> f64 {
    SkewGnd::new(*p).logpdf(z)
}

/// `E|z|` of the standardized skewed GND (closed form).
pub fn sgnd_expected_abs(p: &SkewGndParams) -> f64 {
    SkewGnd::new(*p).expected_abs()
}

/// Draw standardized skewed-GND variates from an explicit RNG.
pub fn sgnd_sample_with<R: Rng + ?Sized>(p: &SkewGndParams, n: usize, rng: &mut R) -> Vec<f64> {
    let law = SkewGnd::new(*p);
    let inv_nu = 1.0 / p.nu;
    let gamma = Gamma::new(inv_nu, 1.0).expect("shape validated positive");
    let p_pos = p.s * p.s / (1.0 + p.s * p.s);
    (0..n)
        .map(|_| {
            let m = unit_magnitude(&gamma, inv_nu, rng);
            let x = if rng.gen::<f64>() < p_pos { m * p.s } else { -m / p.s };
            law.standardize(x)
        })
        .collect()
}

/// Draw `n` standardized skewed-GND variates with a fixed seed.
pub fn sgnd_sample(p: &SkewGndParams, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sgnd_sample_with(p, n, &mut rng)
}
