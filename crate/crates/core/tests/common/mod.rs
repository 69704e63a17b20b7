//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerical kernels; the submodules only use its data
//! types to hold inputs.
#![allow(dead_code, clippy::excessive_precision)]

pub mod egarch;
pub mod mixture;
pub mod series;

use chrono::NaiveDate;

/// ln Γ(x) for x > 0 by upward recurrence to x >= 15 and the Stirling series.
pub fn ln_gamma(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < 15.0 {
        shift -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli terms B_{2k} / (2k (2k - 1) x^{2k-1})
    let series = inv
        * (1.0 / 12.0
            - inv2
                * (1.0 / 360.0
                    - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 * (1.0 / 1188.0 - inv2 * 691.0 / 360360.0)))));
    shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) on [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol.max(1e-15 * v.abs()) || depth > 60 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    rec(f, a, b, tol, 0)
}

/// Integral over the real line, split at the given interior break points
/// (kinks of the integrand) and truncated where the integrand has decayed.
pub fn integrate_real<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], reach: f64, tol: f64) -> f64 {
    let mut pts: Vec<f64> = breaks.to_vec();
    pts.sort_by(|a, b| a.total_cmp(b));
    let lo = pts[0] - reach;
    let hi = pts[pts.len() - 1] + reach;
    let mut all = vec![lo];
    all.extend(pts);
    all.push(hi);
    all.windows(2).map(|w| integrate(f, w[0], w[1], tol)).sum()
}

/// GND density written out independently.
pub fn gnd_pdf(x: f64, mu: f64, delta: f64, nu: f64) -> f64 {
    nu / (2.0 * delta * gamma(1.0 / nu)) * (-((x - mu).abs() / delta).powf(nu)).exp()
}

/// Standardized Fernández–Steel skewed GND density, with its own moment
/// computation (closed-form gamma ratios via the Stirling gamma above).
pub struct SkewOracle {
    pub nu: f64,
    pub s: f64,
    m: f64,
    sd: f64,
}

impl SkewOracle {
    pub fn new(nu: f64, s: f64) -> Self {
        let m1 = gamma(2.0 / nu) / gamma(1.0 / nu);
        let m2 = gamma(3.0 / nu) / gamma(1.0 / nu);
        let m = m1 * (s - 1.0 / s);
        let var = m2 * (s * s + 1.0 / (s * s) - 1.0) - m * m;
        Self { nu, s, m, sd: var.sqrt() }
    }

    fn base(&self, x: f64) -> f64 {
        let c = 2.0 / (self.s + 1.0 / self.s);
        let u = if x >= 0.0 { x / self.s } else { x * self.s };
        c * gnd_pdf(u, 0.0, 1.0, self.nu)
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.sd * self.base(self.m + self.sd * z)
    }

    /// Location of the density kink in z units.
    pub fn kink(&self) -> f64 {
        -self.m / self.sd
    }

    pub fn expected_abs(&self) -> f64 {
        integrate_real(&|z: f64| z.abs() * self.pdf(z), &[self.kink(), 0.0], 60.0, 1e-13)
    }
}

pub fn start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 10, 18).unwrap()
}

/// Kolmogorov–Smirnov 1% critical value (asymptotic).
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

pub fn ks_statistic<C: Fn(f64) -> f64>(sample: &[f64], cdf: C) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}
