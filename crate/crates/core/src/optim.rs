//! Minimizers used by the estimators: Nelder–Mead for the low-dimensional EM
//! M-step and BFGS with central-difference gradients for EGARCH-M likelihoods.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Central-difference gradient with per-coordinate step `h * max(1, |x_i|)`.
pub fn numerical_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let hi = h * x[i].abs().max(1.0);
            xp[i] = x[i] + hi;
            let up = f(&xp);
            xp[i] = x[i] - hi;
            let down = f(&xp);
            xp[i] = x[i];
            (up - down) / (2.0 * hi)
        })
        .collect()
}

/// Central-difference Hessian with per-coordinate step `h * max(1, |x_i|)`.
pub fn numerical_hessian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let steps: Vec<f64> = x.iter().map(|v| h * v.abs().max(1.0)).collect();
    let f0 = f(x);
    let mut hess = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for i in 0..n {
        let hi = steps[i];
        xp[i] = x[i] + hi;
        let up = f(&xp);
        xp[i] = x[i] - hi;
        let down = f(&xp);
        xp[i] = x[i];
        hess[(i, i)] = (up - 2.0 * f0 + down) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let mut eval = |si: f64, sj: f64| {
                xp[i] = x[i] + si * hi;
                xp[j] = x[j] + sj * hj;
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * hi * hj);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
}

/// Minimize `f` starting from a simplex `x0 + steps[i] e_i`.
///
/// The starting point is a simplex vertex and the best vertex never gets
/// worse, so `fx <= f(x0)` always holds.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    max_iter: usize,
    ftol: f64,
) -> NelderMeadResult {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| nan_to_inf(f(v))).collect();
    let mut iterations = 0;

    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = (values[n] - values[0]).abs();
        if spread <= ftol * (values[0].abs() + ftol) {
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };

        let xr = along(-1.0);
        let fr = nan_to_inf(f(&xr));
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = nan_to_inf(f(&xe));
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(-0.5);
                let fc = nan_to_inf(f(&xc));
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = nan_to_inf(f(&xc));
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = nan_to_inf(f(&simplex[i]));
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    NelderMeadResult { x: simplex[best].clone(), fx: values[best], iterations }
}

fn nan_to_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BfgsOptions {
    /// Converged when the infinity norm of the gradient drops below this.
    pub gtol: f64,
    /// Also converged when the relative step and relative objective change
    /// both fall below these.
    pub xtol: f64,
    pub ftol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step for gradients.
    pub fd_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { gtol: 1e-5, xtol: 1e-10, ftol: 1e-13, max_iter: 1000, fd_step: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    GradientNorm,
    StepSize,
    LineSearchFailed,
    MaxIterations,
    NonFiniteStart,
}

#[derive(Debug, Clone)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

impl BfgsResult {
    pub fn converged(&self) -> bool {
        matches!(self.termination, Termination::GradientNorm | Termination::StepSize)
    }
}

/// BFGS on the inverse Hessian with backtracking Armijo line search and
/// central-difference gradients.
pub fn bfgs<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], opts: &BfgsOptions) -> BfgsResult {
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let obj = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut x = DVector::from_column_slice(x0);
    let mut fx = obj(x.as_slice());
    if !fx.is_finite() {
        return BfgsResult {
            x: x0.to_vec(),
            fx,
            grad_norm: f64::INFINITY,
            iterations: 0,
            evaluations: evals.get(),
            termination: Termination::NonFiniteStart,
        };
    }
    let mut g = DVector::from_vec(numerical_gradient(&obj, x.as_slice(), opts.fd_step));
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut first_step = true;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let gnorm = g.amax();
        if gnorm < opts.gtol {
            termination = Termination::GradientNorm;
            break;
        }
        iterations += 1;

        let mut dir = -(&hinv * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            hinv = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = g.dot(&dir);
        }
        if first_step {
            // keep the first trial step modest in parameter space
            let scale = 1.0 / dir.amax().max(1.0);
            dir *= scale;
            slope *= scale;
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-14 {
            let trial = &x + alpha * &dir;
            let ft = obj(trial.as_slice());
            if ft.is_finite() && ft <= fx + 1e-4 * alpha * slope {
                accepted = Some((trial, ft));
                break;
            }
            alpha *= if ft.is_finite() { 0.5 } else { 0.1 };
        }
        let Some((x_new, f_new)) = accepted else {
            if first_step {
                termination = Termination::LineSearchFailed;
                break;
            }
            // retry once from steepest descent
            hinv = DMatrix::identity(n, n);
            first_step = true;
            continue;
        };

        let g_new = DVector::from_vec(numerical_gradient(&obj, x_new.as_slice(), opts.fd_step));
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        let rel_step = s.amax() / (1.0 + x.amax());
        let rel_f = (fx - f_new).abs() / (1.0 + fx.abs());

        if sy > 1e-12 * s.norm() * y.norm() {
            if first_step {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (s hy' + hy s') + (rho^2 yHy + rho) s s'
            hinv -= rho * (&s * hy.transpose() + &hy * s.transpose());
            hinv += (rho * rho * yhy + rho) * (&s * s.transpose());
        }
        first_step = false;
        x = x_new;
        fx = f_new;
        g = g_new;

        if rel_step < opts.xtol && rel_f < opts.ftol {
            termination = Termination::StepSize;
            break;
        }
    }
    if termination == Termination::MaxIterations && g.amax() < opts.gtol {
        termination = Termination::GradientNorm;
    }
    BfgsResult {
        grad_norm: g.amax(),
        x: x.as_slice().to_vec(),
        fx,
        iterations,
        evaluations: evals.get(),
        termination,
    }
}
