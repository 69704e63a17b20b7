//! EGARCH(1,1)-in-mean with an AR(1) term and an exogenous turmoil dummy in
//! both the mean and the log-variance equation:
//!
//! ```text
//! r_t       = μ + m₁ D_t + φ₁ r_{t-1} + λ h_t + ε_t
//! ln h_t²   = ω + v₁ D_t + α₁ z_{t-1} + γ₁ (|z_{t-1}| - E|z|) + β₁ ln h_{t-1}²
//! z_t       = ε_t / h_t  ~  standardized skewed GND(ν, s)
//! ```
//!
//! The first observation only supplies the AR lag. The recursion starts from
//! `ln h_0² = ln(sample variance)` (or a caller-supplied value) with
//! `z_0 = 0`, and the likelihood accumulates from the second observation on.

use chrono::NaiveDate;
use log::warn;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as NormalDist};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::diagnostics::significance_stars;
use crate::error::{Error, Result};
use crate::gnd::{sgnd_sample, SkewGnd, SkewGndParams};
use crate::optim::{bfgs, numerical_gradient, numerical_hessian, BfgsOptions, BfgsResult};
use crate::returns::{DummySeries, ReturnSeries};
use crate::stats;

pub const N_PARAMS: usize = 11;
pub const PARAM_NAMES: [&str; N_PARAMS] =
    ["mu", "m1", "phi1", "lambda", "omega", "v1", "alpha1", "gamma1", "beta1", "nu", "s"];
/// `β₁ = BETA_SCALE · tanh(x)` keeps the persistence strictly inside (-1, 1).
pub const BETA_SCALE: f64 = 0.9999;
/// Lower bound of the innovation shape under the optimizer transform.
pub const NU_FLOOR: f64 = 0.3;
pub const MIN_OBS: usize = 250;
pub const WARN_OBS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgarchMParams {
    pub mu: f64,
    pub m1: f64,
    pub phi1: f64,
    pub lambda: f64,
    pub omega: f64,
    pub v1: f64,
    pub alpha1: f64,
    pub gamma1: f64,
    pub beta1: f64,
    #[serde(flatten)]
    pub innovation: SkewGndParams,
}

impl EgarchMParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta1.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("|beta1| = {} must be below 1", self.beta1.abs())));
        }
        if self.to_vec().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("EGARCH-M parameters must be finite".into()));
        }
        self.innovation.validate()
    }

    /// Parameters in [`PARAM_NAMES`] order.
    pub fn to_vec(&self) -> [f64; N_PARAMS] {
        [
            self.mu,
            self.m1,
            self.phi1,
            self.lambda,
            self.omega,
            self.v1,
            self.alpha1,
            self.gamma1,
            self.beta1,
            self.innovation.nu,
            self.innovation.s,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        assert_eq!(v.len(), N_PARAMS, "EGARCH-M parameter vector has {N_PARAMS} entries");
        Self {
            mu: v[0],
            m1: v[1],
            phi1: v[2],
            lambda: v[3],
            omega: v[4],
            v1: v[5],
            alpha1: v[6],
            gamma1: v[7],
            beta1: v[8],
            innovation: SkewGndParams { nu: v[9], s: v[10] },
        }
    }

    /// Map to the unconstrained optimizer space.
    pub fn unconstrain(&self) -> [f64; N_PARAMS] {
        let mut v = self.to_vec();
        v[8] = (self.beta1 / BETA_SCALE).atanh();
        v[9] = (self.innovation.nu - NU_FLOOR).ln();
        v[10] = self.innovation.s.ln();
        v
    }

    /// Inverse of [`EgarchMParams::unconstrain`]; every real vector maps to a
    /// valid parameter set.
    pub fn constrain(raw: &[f64]) -> Self {
        let mut v = raw.to_vec();
        v[8] = BETA_SCALE * raw[8].tanh();
        v[9] = NU_FLOOR + raw[9].exp();
        v[10] = raw[10].exp();
        Self::from_slice(&v)
    }

    /// DAX estimates from the published conditional mean / volatility tables
    /// (the AR coefficient is not reported and is set to zero).
    pub fn dax_reference() -> Self {
        Self {
            mu: -0.0887,
            m1: -2.6587,
            phi1: 0.0,
            lambda: 0.2083,
            omega: -0.0320,
            v1: 0.4841,
            alpha1: -0.1123,
            gamma1: 0.1121,
            beta1: 0.9389,
            innovation: SkewGndParams { nu: 1.4890, s: 1.0295 },
        }
    }

    /// MIBESG estimates from the same tables (AR coefficient set to zero).
    pub fn mibesg_reference() -> Self {
        Self {
            mu: -0.1461,
            m1: -2.7715,
            phi1: 0.0,
            lambda: 0.2704,
            omega: -0.0238,
            v1: 0.7009,
            alpha1: -0.1221,
            gamma1: 0.1024,
            beta1: 0.8856,
            innovation: SkewGndParams { nu: 1.8833, s: 0.9965 },
        }
    }
}

/// How the log-variance recursion is started.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum VarianceInit {
    /// `ln h_0²` = log of the sample variance of the returns.
    #[default]
    SampleVariance,
    /// A given `ln h_0²`.
    Fixed(f64),
}

impl VarianceInit {
    fn log_h2_0(&self, r: &[f64]) -> f64 {
        match *self {
            VarianceInit::SampleVariance => stats::sample_variance(r).ln(),
            VarianceInit::Fixed(v) => v,
        }
    }
}

/// Filtered series for observations `1..T` (the first observation is the
/// presample AR lag).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub dates: Vec<NaiveDate>,
    /// Conditional standard deviation.
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    pub eps: Vec<f64>,
    pub loglik: f64,
}

impl FilterOutput {
    pub fn peak_volatility(&self) -> f64 {
        self.h.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `(h, z, eps, loglik)` from the recursion.
type RecursionOutput = (Vec<f64>, Vec<f64>, Vec<f64>, f64);

/// Core recursion on raw slices.
fn recursion(
    params: &EgarchMParams,
    r: &[f64],
    d: &[u8],
    log_h2_0: f64,
    keep_paths: bool,
) -> Result<RecursionOutput> {
    let law = SkewGnd::new(params.innovation);
    let e_abs = law.expected_abs();
    let n = r.len();
    let cap = if keep_paths { n.saturating_sub(1) } else { 0 };
    let (mut hs, mut zs, mut es) = (Vec::with_capacity(cap), Vec::with_capacity(cap), Vec::with_capacity(cap));
    let mut lnh2 = log_h2_0;
    let mut z_prev = 0.0;
    let mut ll = 0.0;
    for t in 1..n {
        let dt = d[t] as f64;
        lnh2 = params.omega
            + params.v1 * dt
            + params.alpha1 * z_prev
            + params.gamma1 * (z_prev.abs() - e_abs)
            + params.beta1 * lnh2;
        let h = (0.5 * lnh2).exp();
        let eps = r[t] - params.mu - params.m1 * dt - params.phi1 * r[t - 1] - params.lambda * h;
        let z = eps / h;
        let contrib = law.logpdf(z) - 0.5 * lnh2;
        if !(lnh2.is_finite() && h > 0.0 && h.is_finite() && z.is_finite() && contrib.is_finite()) {
            return Err(Error::NonFiniteRecursion { t });
        }
        ll += contrib;
        z_prev = z;
        if keep_paths {
            hs.push(h);
            zs.push(z);
            es.push(eps);
        }
    }
    Ok((hs, zs, es, ll))
}

fn check_aligned(returns: &ReturnSeries, dummy: &DummySeries) -> Result<()> {
    if returns.dates() != dummy.dates() {
        return Err(Error::MisalignedDummy(format!(
            "returns have {} dates, dummy has {}, or the date vectors differ",
            returns.len(),
            dummy.len()
        )));
    }
    Ok(())
}

/// Run the mean and log-variance recursions and accumulate the log-likelihood.
pub fn filter(
    params: &EgarchMParams,
    returns: &ReturnSeries,
    dummy: &DummySeries,
    init: VarianceInit,
) -> Result<FilterOutput> {
    check_aligned(returns, dummy)?;
    params.validate()?;
    if returns.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: returns.len() });
    }
    let r = returns.values();
    let (h, z, eps, loglik) = recursion(params, r, dummy.values(), init.log_h2_0(r), true)?;
    Ok(FilterOutput { dates: returns.dates()[1..].to_vec(), h, z, eps, loglik })
}

/// Negative log-likelihood as a function of the unconstrained parameter
/// vector, prepared once per data set.
#[derive(Debug, Clone)]
pub struct Likelihood {
    r: Vec<f64>,
    d: Vec<u8>,
    log_h2_0: f64,
}

impl Likelihood {
    pub fn new(returns: &ReturnSeries, dummy: &DummySeries, init: VarianceInit) -> Result<Self> {
        check_aligned(returns, dummy)?;
        let r = returns.values().to_vec();
        Ok(Self { log_h2_0: init.log_h2_0(&r), r, d: dummy.values().to_vec() })
    }

    /// `-loglik` at natural parameters; `+∞` if the recursion fails.
    pub fn neg_loglik_natural(&self, params: &EgarchMParams) -> f64 {
        if params.validate().is_err() {
            return f64::INFINITY;
        }
        match recursion(params, &self.r, &self.d, self.log_h2_0, false) {
            Ok((_, _, _, ll)) => -ll,
            Err(_) => f64::INFINITY,
        }
    }

    /// `-loglik` at the constrained image of `raw`; `+∞` if the recursion fails.
    pub fn neg_loglik(&self, raw: &[f64]) -> f64 {
        if raw.len() != N_PARAMS || raw.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        self.neg_loglik_natural(&EgarchMParams::constrain(raw))
    }

    pub fn gradient(&self, raw: &[f64], step: f64) -> Vec<f64> {
        numerical_gradient(&|x: &[f64]| self.neg_loglik(x), raw, step)
    }
}

/// Negative log-likelihood of an unconstrained parameter vector with the
/// default (sample-variance) initialization.
pub fn neg_loglik(raw: &[f64], returns: &ReturnSeries, dummy: &DummySeries) -> Result<f64> {
    if raw.len() != N_PARAMS {
        return Err(Error::InvalidParameter(format!("expected {N_PARAMS} parameters, got {}", raw.len())));
    }
    Ok(Likelihood::new(returns, dummy, VarianceInit::SampleVariance)?.neg_loglik(raw))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgarchFitOptions {
    pub bfgs: BfgsOptions,
    /// Relative step of the central-difference Hessian.
    pub hessian_step: f64,
    /// Seeds the perturbation of the fallback restart.
    pub seed: u64,
    pub init: VarianceInit,
}

impl Default for EgarchFitOptions {
    fn default() -> Self {
        Self { bfgs: BfgsOptions::default(), hessian_step: 1e-4, seed: 0, init: VarianceInit::SampleVariance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgarchFitReport {
    pub ticker: String,
    pub params: EgarchMParams,
    /// Per parameter in [`PARAM_NAMES`] order; `None` where the inverse
    /// Hessian is unavailable or its diagonal is not positive.
    pub std_errors: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub restarted: bool,
    pub n_obs: usize,
    pub peak_volatility: f64,
}

impl EgarchFitReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Significance stars for parameter `i` (`**` 1%, `*` 5%).
    pub fn stars(&self, i: usize) -> &'static str {
        self.p_values[i].map_or("", significance_stars)
    }
}

/// Starting values: sample mean intercept, zero turmoil and AR terms,
/// `ω = ln(var)(1 - 0.95)`, `α₁ = -0.05`, `γ₁ = 0.1`, `β₁ = 0.95`, `ν = 1.5`, `s = 1`.
pub fn default_start(returns: &ReturnSeries) -> EgarchMParams {
    let r = returns.values();
    EgarchMParams {
        mu: stats::mean(r),
        m1: 0.0,
        phi1: 0.0,
        lambda: 0.0,
        omega: stats::sample_variance(r).ln() * (1.0 - 0.95),
        v1: 0.0,
        alpha1: -0.05,
        gamma1: 0.1,
        beta1: 0.95,
        innovation: SkewGndParams { nu: 1.5, s: 1.0 },
    }
}

/// Maximum-likelihood fit by BFGS on the unconstrained parameters, with
/// standard errors from the inverse central-difference Hessian in the
/// natural parameterization and two-sided normal p-values.
pub fn fit_egarch_m(
    returns: &ReturnSeries,
    dummy: &DummySeries,
    init: Option<EgarchMParams>,
    opts: &EgarchFitOptions,
) -> Result<EgarchFitReport> {
    check_aligned(returns, dummy)?;
    let n = returns.len();
    if n < MIN_OBS {
        return Err(Error::TooShort { needed: MIN_OBS, got: n });
    }
    if n < WARN_OBS {
        warn!("{}: only {n} observations; EGARCH-M estimates may be unreliable", returns.ticker());
    }
    let start = init.unwrap_or_else(|| default_start(returns));
    start.validate()?;
    let lik = Likelihood::new(returns, dummy, opts.init)?;
    let objective = |x: &[f64]| lik.neg_loglik(x);

    let x0 = start.unconstrain();
    let mut best: BfgsResult = bfgs(&objective, &x0, &opts.bfgs);
    let mut restarted = false;
    if !best.converged() {
        restarted = true;
        let base = if best.fx.is_finite() { best.x.clone() } else { x0.to_vec() };
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let noise = NormalDist::new(0.0, 0.05).expect("valid normal");
        let perturbed: Vec<f64> = base.iter().map(|v| v + noise.sample(&mut rng)).collect();
        let second = bfgs(&objective, &perturbed, &opts.bfgs);
        if second.converged() || second.fx < best.fx {
            best = second;
        }
    }
    if !best.fx.is_finite() {
        return Err(Error::NonFiniteLikelihood(format!("{}: no finite likelihood found", returns.ticker())));
    }

    let params = EgarchMParams::constrain(&best.x);
    let natural = |v: &[f64]| lik.neg_loglik_natural(&EgarchMParams::from_slice(v));
    let theta = params.to_vec();
    let hess = numerical_hessian(&natural, &theta, opts.hessian_step);
    let (std_errors, p_values) = standard_errors(&hess, &theta);

    let filtered = filter(&params, returns, dummy, opts.init)?;
    Ok(EgarchFitReport {
        ticker: returns.ticker().to_string(),
        params,
        std_errors,
        p_values,
        loglik: -best.fx,
        converged: best.converged(),
        iterations: best.iterations,
        grad_norm: best.grad_norm,
        restarted,
        n_obs: n,
        peak_volatility: filtered.peak_volatility(),
    })
}

fn standard_errors(hess: &DMatrix<f64>, theta: &[f64]) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let n = theta.len();
    let Some(cov) = (hess.iter().all(|v| v.is_finite()))
        .then(|| hess.clone().try_inverse())
        .flatten()
    else {
        return (vec![None; n], vec![None; n]);
    };
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let se: Vec<Option<f64>> =
        (0..n).map(|i| cov[(i, i)]).map(|v| (v.is_finite() && v > 0.0).then(|| v.sqrt())).collect();
    let p = se
        .iter()
        .zip(theta)
        .map(|(s, &th)| s.map(|s| (2.0 * normal.sf((th / s).abs())).clamp(0.0, 1.0)))
        .collect();
    (se, p)
}

/// A simulated path with the generating conditional volatilities and
/// innovations for observations `1..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub returns: ReturnSeries,
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    /// Log-variance the recursion started from; pass as
    /// [`VarianceInit::Fixed`] to reproduce `h` and `z` by filtering.
    pub log_h2_0: f64,
}

/// Simulate `t_len` returns on the dates of `dummy`, starting the
/// log-variance at `ω / (1 - β₁)`.
pub fn simulate_egarch_m(
    params: &EgarchMParams,
    dummy: &DummySeries,
    t_len: usize,
    seed: u64,
) -> Result<SimulatedPath> {
    params.validate()?;
    if dummy.len() != t_len {
        return Err(Error::MisalignedDummy(format!("dummy has {} values, T = {t_len}", dummy.len())));
    }
    if t_len < 2 {
        return Err(Error::TooShort { needed: 2, got: t_len });
    }
    let draws = sgnd_sample(&params.innovation, t_len, seed);
    let law = SkewGnd::new(params.innovation);
    let e_abs = law.expected_abs();
    let d = dummy.values();
    let log_h2_0 = params.omega / (1.0 - params.beta1);

    let h0 = (0.5 * log_h2_0).exp();
    let mut r = Vec::with_capacity(t_len);
    r.push(params.mu + params.m1 * d[0] as f64 + params.lambda * h0 + h0 * draws[0]);
    let mut hs = Vec::with_capacity(t_len - 1);
    let mut zs = Vec::with_capacity(t_len - 1);
    let mut lnh2 = log_h2_0;
    let mut z_prev = 0.0;
    for t in 1..t_len {
        let dt = d[t] as f64;
        lnh2 = params.omega
            + params.v1 * dt
            + params.alpha1 * z_prev
            + params.gamma1 * (z_prev.abs() - e_abs)
            + params.beta1 * lnh2;
        let h = (0.5 * lnh2).exp();
        let z = draws[t];
        let rt = params.mu + params.m1 * dt + params.phi1 * r[t - 1] + params.lambda * h + h * z;
        if !rt.is_finite() {
            return Err(Error::NonFiniteRecursion { t });
        }
        r.push(rt);
        hs.push(h);
        zs.push(z);
        z_prev = z;
    }
    let returns = ReturnSeries::new("SIM", dummy.dates().to_vec(), r)?;
    Ok(SimulatedPath { returns, h: hs, z: zs, log_h2_0 })
}

/// One row of the turmoil impact table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub index: String,
    pub m1: f64,
    pub m1_stars: String,
    pub v1: f64,
    pub v1_stars: String,
    pub peak_volatility: f64,
    pub converged: bool,
}

/// Turmoil effects on the mean (`m₁`) and volatility (`v₁`) with
/// significance stars, plus the peak filtered volatility per index.
pub fn turmoil_impact_summary(fits: &[EgarchFitReport]) -> Result<Vec<ImpactRow>> {
    if fits.is_empty() {
        return Err(Error::InvalidParameter("impact summary needs at least one fit".into()));
    }
    Ok(fits
        .iter()
        .map(|f| ImpactRow {
            index: f.ticker.clone(),
            m1: f.params.m1,
            m1_stars: f.stars(1).to_string(),
            v1: f.params.v1,
            v1_stars: f.stars(5).to_string(),
            peak_volatility: f.peak_volatility,
            converged: f.converged,
        })
        .collect())
}
