//! Mixture reference values and a brute-force posterior-mode classifier.

use turmoil_core::mgnd::{MgndParams, MixtureComponent};

pub fn table_a3() -> MgndParams {
    MgndParams::new(vec![
        MixtureComponent { pi: 0.8502, mu: 0.1141, delta: 0.7351, nu: 1.3123 },
        MixtureComponent { pi: 0.1498, mu: -0.4408, delta: 2.0158, nu: 1.7998 },
    ])
    .unwrap()
}

pub fn brute_force_label(x: f64, p: &MgndParams) -> usize {
    let w: Vec<f64> = p.components.iter().map(|c| c.pi * super::gnd_pdf(x, c.mu, c.delta, c.nu)).collect();
    let mut best = 0;
    for k in 1..w.len() {
        if w[k] > w[best] {
            best = k;
        }
    }
    best
}

/// Probability mass the mixture puts on points classified as turmoil.
pub fn turmoil_classification_rate(p: &MgndParams, turmoil: usize) -> f64 {
    let c = &p.components;
    let f = |x: f64| {
        let w: Vec<f64> = c.iter().map(|c| c.pi * super::gnd_pdf(x, c.mu, c.delta, c.nu)).collect();
        if brute_force_label(x, p) == turmoil {
            w.iter().sum()
        } else {
            0.0
        }
    };
    // locate the decision boundaries on a fine grid, then integrate piecewise
    let mut breaks = vec![];
    let mut prev = brute_force_label(-60.0, p);
    let mut x = -60.0;
    while x < 60.0 {
        let next = x + 1e-3;
        let l = brute_force_label(next, p);
        if l != prev {
            let (mut a, mut b) = (x, next);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if brute_force_label(m, p) == prev {
                    a = m;
                } else {
                    b = m;
                }
            }
            breaks.push(0.5 * (a + b));
            prev = l;
        }
        x = next;
    }
    breaks.push(c[0].mu);
    breaks.push(c[1].mu);
    super::integrate_real(&f, &breaks, 60.0, 1e-12)
}
