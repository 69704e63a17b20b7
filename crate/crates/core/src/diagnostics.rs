//! Preliminary hypothesis tests on return series: Jarque–Bera normality,
//! augmented Dickey–Fuller unit root (constant, no trend) and Engle's ARCH-LM.

use nalgebra::{DMatrix, DVector};
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::returns::ReturnSeries;
use crate::stats;

pub const DEFAULT_ARCH_LM_LAGS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub lags: Option<usize>,
    pub reject_1pct: bool,
}

impl TestResult {
    fn new(statistic: f64, p_value: f64, lags: Option<usize>) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self { statistic, p_value, lags, reject_1pct: p_value < 0.01 }
    }

    /// `**` at 1%, `*` at 5%, empty otherwise.
    pub fn stars(&self) -> &'static str {
        significance_stars(self.p_value)
    }
}

pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

fn chi2_sf(x: f64, df: usize) -> f64 {
    let chi = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    if x <= 0.0 {
        1.0
    } else {
        chi.sf(x)
    }
}

/// `n (S²/6 + K²/24)` from sample skewness `S` and excess kurtosis `K`.
pub fn jarque_bera_statistic(n: usize, skewness: f64, excess_kurtosis: f64) -> f64 {
    n as f64 * (skewness * skewness / 6.0 + excess_kurtosis * excess_kurtosis / 24.0)
}

pub fn jarque_bera(returns: &ReturnSeries) -> Result<TestResult> {
    jarque_bera_values(returns.values())
}

pub fn jarque_bera_values(xs: &[f64]) -> Result<TestResult> {
    if xs.len() < 8 {
        return Err(Error::TooShort { needed: 8, got: xs.len() });
    }
    let s = crate::returns::summary_of(xs)?;
    let (Some(skew), Some(kurt)) = (s.skewness, s.excess_kurtosis) else {
        return Err(Error::InvalidParameter("Jarque-Bera undefined for a constant series".into()));
    };
    let jb = jarque_bera_statistic(xs.len(), skew, kurt);
    Ok(TestResult::new(jb, chi2_sf(jb, 2), None))
}

/// Ordinary least squares through the normal equations.
struct Ols {
    beta: DVector<f64>,
    ssr: f64,
    xtx_inv: DMatrix<f64>,
}

fn ols(xtx: DMatrix<f64>, xty: DVector<f64>, yty: f64, context: &'static str) -> Result<Ols> {
    let chol = xtx.cholesky().ok_or(Error::SingularMatrix(context))?;
    let beta = chol.solve(&xty);
    let ssr = (yty - beta.dot(&xty)).max(0.0);
    let xtx_inv = chol.inverse();
    if !beta.iter().all(|b| b.is_finite()) {
        return Err(Error::SingularMatrix(context));
    }
    Ok(Ols { beta, ssr, xtx_inv })
}

/// Cross products of `[y | X]` over rows `rows`, where `row(t)` fills the
/// regressors for observation `t`.
fn cross_products<F: Fn(usize, &mut [f64]) -> f64>(
    rows: std::ops::Range<usize>,
    k: usize,
    row: F,
) -> (DMatrix<f64>, DVector<f64>, f64) {
    let mut xtx = DMatrix::zeros(k, k);
    let mut xty = DVector::zeros(k);
    let mut yty = 0.0;
    let mut x = vec![0.0; k];
    for t in rows {
        let y = row(t, &mut x);
        yty += y * y;
        for i in 0..k {
            xty[i] += x[i] * y;
            for j in 0..=i {
                xtx[(i, j)] += x[i] * x[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            xtx[(j, i)] = xtx[(i, j)];
        }
    }
    (xtx, xty, yty)
}

/// `⌊12 (n/100)^{1/4}⌋`.
pub fn schwert_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

#[derive(Debug, Deserialize)]
struct MacKinnonTable {
    tau_max: f64,
    tau_min: f64,
    tau_star: f64,
    small_p: Vec<f64>,
    large_p: Vec<f64>,
}

static MACKINNON: Lazy<MacKinnonTable> = Lazy::new(|| {
    serde_json::from_str(include_str!("../data/mackinnon_tau_c.json")).expect("bundled MacKinnon table parses")
});

/// Approximate p-value of the constant-only ADF t-statistic.
pub fn mackinnon_p_value(tau: f64) -> f64 {
    let tab = &*MACKINNON;
    if tau > tab.tau_max {
        return 1.0;
    }
    if tau < tab.tau_min {
        return 0.0;
    }
    let coefs = if tau <= tab.tau_star { &tab.small_p } else { &tab.large_p };
    let z = coefs.iter().rev().fold(0.0, |acc, c| acc * tau + c);
    Normal::new(0.0, 1.0).expect("standard normal").cdf(z)
}

/// Augmented Dickey–Fuller test with a constant. The lag order is chosen by
/// AIC over `0..=max_lag` on a common sample, then the regression is refit on
/// all usable observations. `max_lag = None` uses the Schwert rule.
pub fn adf_test(returns: &ReturnSeries, max_lag: Option<usize>) -> Result<TestResult> {
    adf_test_values(returns.values(), max_lag)
}

pub fn adf_test_values(y: &[f64], max_lag: Option<usize>) -> Result<TestResult> {
    let n = y.len();
    let max_lag = max_lag.unwrap_or_else(|| schwert_max_lag(n));
    if n < 25 + max_lag {
        return Err(Error::TooShort { needed: 25 + max_lag, got: n });
    }
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    // Δy index i corresponds to y index i + 1.
    let fill = |i: usize, x: &mut [f64]| {
        x[0] = 1.0;
        x[1] = y[i];
        for (j, slot) in x[2..].iter_mut().enumerate() {
            *slot = dy[i - 1 - j];
        }
        dy[i]
    };

    let kmax = max_lag + 2;
    let (xtx, xty, yty) = cross_products(max_lag..dy.len(), kmax, fill);
    let nobs = (dy.len() - max_lag) as f64;
    let mut best_lag = 0;
    let mut best_aic = f64::INFINITY;
    for p in 0..=max_lag {
        let k = p + 2;
        let fit = ols(
            xtx.view((0, 0), (k, k)).into_owned(),
            xty.rows(0, k).into_owned(),
            yty,
            "ADF lag selection",
        )?;
        let aic = nobs * (fit.ssr / nobs).ln() + 2.0 * k as f64;
        if aic < best_aic {
            best_aic = aic;
            best_lag = p;
        }
    }

    let k = best_lag + 2;
    let (xtx, xty, yty) = cross_products(best_lag..dy.len(), k, fill);
    let nobs = dy.len() - best_lag;
    let fit = ols(xtx, xty, yty, "ADF regression")?;
    let sigma2 = fit.ssr / (nobs - k) as f64;
    let se = (sigma2 * fit.xtx_inv[(1, 1)]).sqrt();
    let tau = fit.beta[1] / se;
    if !tau.is_finite() {
        return Err(Error::SingularMatrix("ADF regression"));
    }
    Ok(TestResult::new(tau, mackinnon_p_value(tau), Some(best_lag)))
}

/// Engle's ARCH-LM test on demeaned returns: `n_eff R²` from regressing
/// squared deviations on `lags` of their own lags, referred to `χ²(lags)`.
pub fn arch_lm(returns: &ReturnSeries, lags: usize) -> Result<TestResult> {
    arch_lm_values(returns.values(), lags)
}

pub fn arch_lm_values(xs: &[f64], lags: usize) -> Result<TestResult> {
    if lags == 0 {
        return Err(Error::InvalidParameter("ARCH-LM needs at least one lag".into()));
    }
    if xs.len() < 5 * lags {
        return Err(Error::TooShort { needed: 5 * lags, got: xs.len() });
    }
    let m = stats::mean(xs);
    let u: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let k = lags + 1;
    let (xtx, xty, yty) = cross_products(lags..u.len(), k, |t, x| {
        x[0] = 1.0;
        for j in 1..=lags {
            x[j] = u[t - j];
        }
        u[t]
    });
    let n_eff = u.len() - lags;
    let ybar = xty[0] / n_eff as f64;
    let sst = yty - n_eff as f64 * ybar * ybar;
    if !(sst > 0.0) {
        return Err(Error::SingularMatrix("ARCH-LM regression (constant squared deviations)"));
    }
    let fit = ols(xtx, xty, yty, "ARCH-LM regression")?;
    let r2 = (1.0 - fit.ssr / sst).clamp(0.0, 1.0);
    let stat = n_eff as f64 * r2;
    Ok(TestResult::new(stat, chi2_sf(stat, lags), Some(lags)))
}
