//! Mixtures of generalised normal distributions (MGND): EM estimation and
//! posterior-mode regime classification.
//!
//! The E-step evaluates `π_k p(r_t | θ_k)` in log space with max-subtraction.
//! The M-step sets `π_k` to the mean responsibility and maximizes each
//! component's responsibility-weighted log-likelihood. For fixed `(μ, ν)` the
//! optimal scale has the closed form `δ^ν = ν Σ w |r - μ|^ν / Σ w`, so the
//! inner Nelder–Mead search runs over `(μ, ln ν)` only. The simplex starts at
//! the current estimate, which makes every M-step non-decreasing in the
//! expected complete-data log-likelihood and the observed log-likelihood
//! monotone across iterations.

use chrono::NaiveDate;
use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gnd::{gnd_variance, log_norm, GndParams};
use crate::optim::nelder_mead;
use crate::par;
use crate::returns::{DummySeries, ReturnSeries};
use crate::stats;

pub const NU_MIN: f64 = 0.3;
pub const NU_MAX: f64 = 5.0;
pub const MIN_WEIGHT: f64 = 1e-4;
/// Scale floor as a fraction of the sample standard deviation.
pub const SCALE_FLOOR_FRACTION: f64 = 1e-4;
/// Allowed decrease of the observed log-likelihood between EM iterations.
pub const MONOTONE_SLACK: f64 = 1e-8;

/// One weighted mixture component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub pi: f64,
    pub mu: f64,
    pub delta: f64,
    pub nu: f64,
}

impl MixtureComponent {
    pub fn gnd(&self) -> GndParams {
        GndParams { mu: self.mu, delta: self.delta, nu: self.nu }
    }

    /// Component standard deviation `δ sqrt(Γ(3/ν)/Γ(1/ν))`.
    pub fn sigma(&self) -> f64 {
        gnd_variance(self.delta, self.nu).sqrt()
    }

    #[inline]
    fn log_weight_norm(&self) -> f64 {
        self.pi.ln() + log_norm(self.delta, self.nu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgndParams {
    pub components: Vec<MixtureComponent>,
}

impl MgndParams {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let p = Self { components };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidParameter("mixture needs at least one component".into()));
        }
        let mut total = 0.0;
        for (k, c) in self.components.iter().enumerate() {
            if !(c.pi.is_finite() && c.pi > 0.0) {
                return Err(Error::InvalidParameter(format!("component {k}: weight {} must be positive", c.pi)));
            }
            c.gnd().validate().map_err(|e| Error::InvalidParameter(format!("component {k}: {e}")))?;
            total += c.pi;
        }
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Mixture density at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        self.components.iter().map(|c| c.pi * crate::gnd::gnd_logpdf(x, &c.gnd()).exp()).sum()
    }

    /// Reorder components; `order[i]` is the old index placed at position `i`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self { components: order.iter().map(|&i| self.components[i]).collect() }
    }
}

/// `ln(π_k p(r | θ_k))` for every component, written into `out`.
#[inline]
fn log_weighted(r: f64, comps: &[MixtureComponent], consts: &[f64], out: &mut [f64]) {
    for (k, c) in comps.iter().enumerate() {
        out[k] = consts[k] - ((r - c.mu).abs() / c.delta).powf(c.nu);
    }
}

/// Row-major posteriors (stride K) and the observed-data log-likelihood.
fn e_step(values: &[f64], params: &MgndParams) -> (Vec<f64>, f64) {
    let comps = &params.components;
    let k = comps.len();
    let consts: Vec<f64> = comps.iter().map(MixtureComponent::log_weight_norm).collect();
    let rows = par::map_slice(values, |&r| {
        let mut row = vec![0.0; k];
        log_weighted(r, comps, &consts, &mut row);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
        (row, m + s.ln())
    });
    let mut post = Vec::with_capacity(values.len() * k);
    let mut ll = 0.0;
    for (row, l) in rows {
        post.extend_from_slice(&row);
        ll += l;
    }
    (post, ll)
}

/// Observed-data log-likelihood of the mixture.
pub fn mixture_loglik(values: &[f64], params: &MgndParams) -> f64 {
    e_step(values, params).1
}

/// Posterior probabilities of each component for every return.
pub fn responsibilities(returns: &ReturnSeries, params: &MgndParams) -> Vec<Vec<f64>> {
    let k = params.k();
    let (post, _) = e_step(returns.values(), params);
    post.chunks(k).map(<[f64]>::to_vec).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitStrategy {
    /// Split at the 85th percentile of `|r - median|` into core and tail
    /// groups and moment-match each with `ν = 2`.
    TailQuantile,
    /// Random responsibilities, several restarts, best log-likelihood wins.
    RandomRestarts { restarts: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub init: InitStrategy,
    /// Relative log-likelihood change that stops the iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Nelder–Mead iterations per component per M-step.
    pub inner_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { init: InitStrategy::TailQuantile, tol: 1e-6, max_iter: 500, inner_iter: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgndFitReport {
    pub params: MgndParams,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub loglik_path: Vec<f64>,
    /// Per component: shape estimate sits on the `[NU_MIN, NU_MAX]` boundary.
    pub nu_at_boundary: Vec<bool>,
}

impl MgndFitReport {
    /// Largest decrease between consecutive log-likelihood values (0 if monotone).
    pub fn max_loglik_decrease(&self) -> f64 {
        self.loglik_path.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fit a K-component MGND by EM.
pub fn fit_mgnd(returns: &ReturnSeries, k: usize, opts: &EmOptions) -> Result<MgndFitReport> {
    fit_mgnd_values(returns.values(), k, opts)
}

pub fn fit_mgnd_values(values: &[f64], k: usize, opts: &EmOptions) -> Result<MgndFitReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if values.len() < 10 * k {
        return Err(Error::TooShort { needed: 10 * k, got: values.len() });
    }
    let sd = stats::sample_variance(values).sqrt();
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::DegenerateComponent { component: 0, reason: "returns have zero dispersion".into() });
    }
    let floor = SCALE_FLOOR_FRACTION * sd;
    match opts.init {
        InitStrategy::TailQuantile => {
            let init = tail_quantile_init(values, k)?;
            run_em(values, init, floor, opts)
        }
        InitStrategy::RandomRestarts { restarts, seed } => {
            let mut best: Option<MgndFitReport> = None;
            let mut last_err = None;
            for i in 0..restarts.max(1) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                let post = random_responsibilities(values.len(), k, &mut rng);
                let attempt = m_step_from_moments(values, &post, k, floor)
                    .and_then(|init| run_em(values, init, floor, opts));
                match attempt {
                    Ok(rep) => {
                        if best.as_ref().is_none_or(|b| rep.loglik > b.loglik) {
                            best = Some(rep);
                        }
                    }
                    Err(e) => {
                        debug!("restart {i} failed: {e}");
                        last_err = Some(e);
                    }
                }
            }
            best.ok_or_else(|| last_err.expect("at least one restart ran"))
        }
    }
}

fn random_responsibilities(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut post = Vec::with_capacity(n * k);
    for _ in 0..n {
        let row: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let s: f64 = row.iter().sum();
        post.extend(row.into_iter().map(|v| v / s));
    }
    post
}

/// Moment-matched normal-kernel (`ν = 2`) components from weights.
fn m_step_from_moments(values: &[f64], post: &[f64], k: usize, floor: f64) -> Result<MgndParams> {
    let n = values.len() as f64;
    let mut comps = Vec::with_capacity(k);
    for j in 0..k {
        let w: f64 = (0..values.len()).map(|t| post[t * k + j]).sum();
        let mu = (0..values.len()).map(|t| post[t * k + j] * values[t]).sum::<f64>() / w;
        let var = (0..values.len()).map(|t| post[t * k + j] * (values[t] - mu).powi(2)).sum::<f64>() / w;
        comps.push(MixtureComponent { pi: w / n, mu, delta: (2.0 * var).sqrt().max(floor), nu: 2.0 });
    }
    normalize_weights(&mut comps);
    MgndParams::new(comps)
}

fn normalize_weights(comps: &mut [MixtureComponent]) {
    let total: f64 = comps.iter().map(|c| c.pi).sum();
    for c in comps.iter_mut() {
        c.pi /= total;
    }
}

/// Core/tail split on `|r - median|`: the bottom 85% form the first group and
/// the top 15% are cut into `k - 1` further bands of increasing distance.
fn tail_quantile_init(values: &[f64], k: usize) -> Result<MgndParams> {
    let sorted = stats::sorted_copy(values);
    let median = stats::quantile_sorted(&sorted, 0.5);
    let dist: Vec<f64> = values.iter().map(|r| (r - median).abs()).collect();
    let sorted_dist = stats::sorted_copy(&dist);
    let mut cuts = vec![f64::NEG_INFINITY];
    if k > 1 {
        for j in 0..k - 1 {
            let q = 0.85 + 0.15 * j as f64 / (k - 1) as f64;
            cuts.push(stats::quantile_sorted(&sorted_dist, q));
        }
    }
    cuts.push(f64::INFINITY);

    let mut comps = Vec::with_capacity(k);
    for j in 0..k {
        let group: Vec<f64> = values
            .iter()
            .zip(&dist)
            .filter(|(_, &d)| {
                if j == 0 {
                    d <= cuts[1]
                } else {
                    d > cuts[j] && d <= cuts[j + 1]
                }
            })
            .map(|(r, _)| *r)
            .collect();
        if group.len() < 2 {
            return Err(Error::DegenerateComponent {
                component: j,
                reason: "initial group has fewer than two observations".into(),
            });
        }
        let mu = stats::mean(&group);
        let var = group.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / group.len() as f64;
        if var <= 0.0 {
            return Err(Error::DegenerateComponent { component: j, reason: "initial group has zero variance".into() });
        }
        comps.push(MixtureComponent {
            pi: group.len() as f64 / values.len() as f64,
            mu,
            delta: (2.0 * var).sqrt(),
            nu: 2.0,
        });
    }
    normalize_weights(&mut comps);
    MgndParams::new(comps)
}

/// Responsibility-weighted component log-likelihood with the scale profiled
/// out, as a function of `(μ, ν)`. Returns the value and the scale used.
fn profiled_q(values: &[f64], weights: &[f64], wsum: f64, mu: f64, nu: f64, floor: f64) -> (f64, f64) {
    let s = par::sum_range(values.len(), |t| {
        let w = weights[t];
        if w == 0.0 {
            0.0
        } else {
            w * (values[t] - mu).abs().powf(nu)
        }
    });
    let delta_hat = (nu * s / wsum).powf(1.0 / nu);
    let delta = delta_hat.max(floor);
    let fit_term = if delta_hat >= floor { wsum / nu } else { s / delta.powf(nu) };
    let q = wsum * (nu.ln() - std::f64::consts::LN_2 - delta.ln() - ln_gamma(1.0 / nu)) - fit_term;
    (q, delta)
}

fn m_step(
    values: &[f64],
    post: &[f64],
    current: &MgndParams,
    floor: f64,
    inner_iter: usize,
) -> Result<MgndParams> {
    let k = current.k();
    let n = values.len();
    let mut comps = Vec::with_capacity(k);
    for (j, cur) in current.components.iter().enumerate() {
        let weights: Vec<f64> = (0..n).map(|t| post[t * k + j]).collect();
        let wsum: f64 = weights.iter().sum();
        let pi = wsum / n as f64;
        if !(pi >= MIN_WEIGHT) {
            return Err(Error::DegenerateComponent {
                component: j,
                reason: format!("mixing weight {pi:.3e} fell below {MIN_WEIGHT:e}"),
            });
        }
        let objective = |x: &[f64]| {
            let nu = x[1].exp().clamp(NU_MIN, NU_MAX);
            -profiled_q(values, &weights, wsum, x[0], nu, floor).0
        };
        let start = [cur.mu, cur.nu.clamp(NU_MIN, NU_MAX).ln()];
        let res = nelder_mead(objective, &start, &[0.1 * cur.delta, 0.1], inner_iter, 1e-14);
        let mu = res.x[0];
        let nu = res.x[1].exp().clamp(NU_MIN, NU_MAX);
        let (_, delta) = profiled_q(values, &weights, wsum, mu, nu, floor);
        if delta <= floor {
            return Err(Error::DegenerateComponent {
                component: j,
                reason: format!("scale {delta:.3e} collapsed to the floor {floor:.3e}"),
            });
        }
        comps.push(MixtureComponent { pi, mu, delta, nu });
    }
    normalize_weights(&mut comps);
    MgndParams::new(comps)
}

fn run_em(values: &[f64], init: MgndParams, floor: f64, opts: &EmOptions) -> Result<MgndFitReport> {
    let mut params = init;
    let (mut post, mut ll) = e_step(values, &params);
    if !ll.is_finite() {
        return Err(Error::NonFiniteLikelihood("at the initial estimate".into()));
    }
    let mut path = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        params = m_step(values, &post, &params, floor, opts.inner_iter)?;
        let (p, l) = e_step(values, &params);
        if !l.is_finite() {
            return Err(Error::NonFiniteLikelihood(format!("at EM iteration {iterations}")));
        }
        post = p;
        let rel = (l - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        ll = l;
        path.push(ll);
        if rel < opts.tol {
            converged = true;
            break;
        }
    }
    let nu_at_boundary = params
        .components
        .iter()
        .map(|c| c.nu <= NU_MIN * (1.0 + 1e-6) || c.nu >= NU_MAX * (1.0 - 1e-6))
        .collect();
    let report = MgndFitReport { params, loglik: ll, iterations, converged, loglik_path: path, nu_at_boundary };
    let dec = report.max_loglik_decrease();
    debug_assert!(dec <= MONOTONE_SLACK * ll.abs().max(1.0), "EM log-likelihood decreased by {dec}");
    Ok(report)
}

/// Index of the turmoil component of a two-component mixture: the larger
/// component standard deviation, ties (within 1e-12) broken by the smaller
/// shape, then the lower index.
pub fn identify_turmoil_component(params: &MgndParams) -> Result<usize> {
    if params.k() != 2 {
        return Err(Error::Unsupported(format!(
            "turmoil identification needs exactly 2 components, got {}",
            params.k()
        )));
    }
    let (a, b) = (&params.components[0], &params.components[1]);
    let (sa, sb) = (a.sigma(), b.sigma());
    if (sa - sb).abs() > 1e-12 * sa.max(sb).max(1.0) {
        return Ok(if sb > sa { 1 } else { 0 });
    }
    Ok(if b.nu < a.nu { 1 } else { 0 })
}

/// Per-date posteriors, hard labels and the derived turmoil dummy.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeClassification {
    pub dates: Vec<NaiveDate>,
    pub posteriors: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub turmoil_index: usize,
    pub dummy: DummySeries,
}

impl RegimeClassification {
    /// Mean posterior probability of the turmoil component.
    pub fn mean_turmoil_posterior(&self) -> f64 {
        self.posteriors.iter().map(|p| p[self.turmoil_index]).sum::<f64>() / self.posteriors.len() as f64
    }
}

/// First index of the row maximum.
pub fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Assign each return to the component with the highest posterior
/// probability (exact ties go to the lower index).
pub fn classify(returns: &ReturnSeries, params: &MgndParams) -> Result<RegimeClassification> {
    params.validate()?;
    let turmoil_index = identify_turmoil_component(params)?;
    let posteriors = responsibilities(returns, params);
    let labels: Vec<usize> = posteriors.iter().map(|row| argmax_first(row)).collect();
    let dummy_values = labels.iter().map(|&l| u8::from(l == turmoil_index)).collect();
    let dummy = DummySeries::new(returns.dates().to_vec(), dummy_values)?;
    Ok(RegimeClassification {
        dates: returns.dates().to_vec(),
        posteriors,
        labels,
        turmoil_index,
        dummy,
    })
}

/// Mixture density on an even grid, with each component's weighted density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub components: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn trapezoid_mass(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
            .sum()
    }
}

pub fn density_grid(params: &MgndParams, lo: f64, hi: f64, points: usize) -> Result<DensityGrid> {
    if !(lo < hi) || points < 2 {
        return Err(Error::InvalidParameter("density grid needs lo < hi and at least two points".into()));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let x: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    let components: Vec<Vec<f64>> = params
        .components
        .iter()
        .map(|c| {
            let g = c.gnd();
            x.iter().map(|&v| c.pi * crate::gnd::gnd_logpdf(v, &g).exp()).collect()
        })
        .collect();
    let density = (0..points).map(|i| components.iter().map(|c| c[i]).sum()).collect();
    Ok(DensityGrid { x, density, components })
}

/// A grid range covering the data and `width` component standard deviations
/// around every component location.
pub fn default_grid_range(params: &MgndParams, values: &[f64], width: f64) -> (f64, f64) {
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for c in &params.components {
        lo = lo.min(c.mu - width * c.sigma());
        hi = hi.max(c.mu + width * c.sigma());
    }
    (lo, hi)
}

/// Draw `n` values from the mixture, returning the values and the generating
/// component of each draw.
pub fn sample_mgnd(params: &MgndParams, n: usize, seed: u64) -> (Vec<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cum: Vec<f64> = params
        .components
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.pi;
            Some(*acc)
        })
        .collect();
    let mut values = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        let k = cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1);
        values.push(crate::gnd::gnd_sample_with(&params.components[k].gnd(), 1, &mut rng)[0]);
        labels.push(k);
    }
    (values, labels)
}
