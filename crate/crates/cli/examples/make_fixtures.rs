//! Regenerate the synthetic fixture set in `crates/cli/fixtures`.
//!
//! The benchmark is a draw from a two-component GND mixture; each target is
//! an EGARCH-M path driven by the benchmark's generating regime labels.
//! Prices start at 1000 and compound the simulated percent log-returns. A few
//! dates are removed from some files and one close is written as `n/a` so
//! ingestion and calendar alignment have something to do.
//!
//!     cargo run -p turmoil-cli --example make_fixtures

use std::fs;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use turmoil_core::egarch::{simulate_egarch_m, EgarchMParams};
use turmoil_core::gnd::SkewGndParams;
use turmoil_core::mgnd::{sample_mgnd, MgndParams, MixtureComponent};
use turmoil_core::DummySeries;

#[allow(clippy::too_many_arguments)]
fn egarch(mu: f64, m1: f64, lambda: f64, omega: f64, v1: f64, a: f64, g: f64, b: f64, nu: f64, s: f64) -> EgarchMParams {
    EgarchMParams {
        mu,
        m1,
        phi1: 0.0,
        lambda,
        omega,
        v1,
        alpha1: a,
        gamma1: g,
        beta1: b,
        innovation: SkewGndParams { nu, s },
    }
}

struct Target {
    ticker: &'static str,
    kind: &'static str,
    market: &'static str,
    params: EgarchMParams,
    missing: &'static [&'static str],
    na: &'static [&'static str],
}

fn business_days(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    start.iter_days().take_while(|d| *d <= end).filter(|d| d.weekday().number_from_monday() <= 5).collect()
}

fn write_prices(path: &Path, dates: &[NaiveDate], returns: &[f64], missing: &[&str], na: &[&str]) {
    let mut body = String::from("Date,Close\n");
    let mut price = 1000.0f64;
    for (i, d) in dates.iter().enumerate() {
        if i > 0 {
            price *= (returns[i - 1] / 100.0).exp();
        }
        let key = d.to_string();
        if missing.contains(&key.as_str()) {
            continue;
        }
        if na.contains(&key.as_str()) {
            body.push_str(&format!("{key},n/a\n"));
        } else {
            body.push_str(&format!("{key},{price}\n"));
        }
    }
    fs::write(path, body).unwrap();
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    fs::create_dir_all(dir.join("data")).unwrap();
    let dates = business_days(NaiveDate::from_ymd_opt(2021, 10, 18).unwrap(), NaiveDate::from_ymd_opt(2024, 2, 19).unwrap());
    let n = dates.len() - 1;

    let mixture = MgndParams::new(vec![
        MixtureComponent { pi: 0.8502, mu: 0.1141, delta: 0.7351, nu: 1.3123 },
        MixtureComponent { pi: 0.1498, mu: -0.4408, delta: 2.0158, nu: 1.7998 },
    ])
    .unwrap();
    let (bench, labels) = sample_mgnd(&mixture, n, 20211018);
    write_prices(&dir.join("data/STOXX50E.csv"), &dates, &bench, &["2022-12-26"], &[]);

    let dummy = DummySeries::new(dates[1..].to_vec(), labels.iter().map(|&l| l as u8).collect()).unwrap();
    let targets = [
        Target {
            ticker: "DAX",
            kind: "traditional",
            market: "Germany",
            params: egarch(-0.0887, -2.6587, 0.2083, -0.0320, 0.4841, -0.1123, 0.1121, 0.9389, 1.4890, 1.0295),
            missing: &["2022-04-15", "2023-05-01"],
            na: &[],
        },
        Target {
            ticker: "DAX3ESGK",
            kind: "esg",
            market: "Germany",
            params: egarch(-0.0404, -2.6888, 0.1428, -0.0215, 0.3940, -0.1051, 0.1147, 0.9536, 1.3553, 1.0330),
            missing: &["2022-04-15"],
            na: &[],
        },
        Target {
            ticker: "CAC40",
            kind: "traditional",
            market: "France",
            params: egarch(-0.1690, -2.6935, 0.3117, -0.0435, 0.5934, -0.1420, 0.0546, 0.9105, 1.6868, 1.0558),
            missing: &[],
            na: &[],
        },
        Target {
            ticker: "CAC40ESG",
            kind: "esg",
            market: "France",
            params: egarch(-0.0633, -2.2656, 0.1713, -0.0384, 0.6434, -0.1554, 0.0798, 0.9102, 1.7020, 1.0066),
            missing: &[],
            na: &["2022-06-01"],
        },
        Target {
            ticker: "FTSEMIB",
            kind: "traditional",
            market: "Italy",
            params: egarch(-0.1476, -2.7659, 0.2795, -0.0255, 0.6166, -0.1129, 0.0863, 0.9026, 1.8300, 0.9999),
            missing: &["2023-08-15"],
            na: &[],
        },
        Target {
            ticker: "MIBESG",
            kind: "esg",
            market: "Italy",
            params: egarch(-0.1461, -2.7715, 0.2704, -0.0238, 0.7009, -0.1221, 0.1024, 0.8856, 1.8833, 0.9965),
            missing: &[],
            na: &[],
        },
    ];

    let mut toml = String::from(
        "# Synthetic fixture set written by `cargo run -p turmoil-cli --example make_fixtures`.\n\
         seed = 20240219\noutput_dir = \"out\"\nk = 2\n\n\
         [window]\nstart = \"2021-10-18\"\nend = \"2024-02-19\"\n\n\
         [benchmark]\nticker = \"STOXX50E\"\npath = \"data/STOXX50E.csv\"\nkind = \"traditional\"\nmarket = \"Eurozone\"\n",
    );
    for (i, t) in targets.iter().enumerate() {
        let path = simulate_egarch_m(&t.params, &dummy, n, 100 + i as u64).unwrap();
        write_prices(&dir.join(format!("data/{}.csv", t.ticker)), &dates, path.returns.values(), t.missing, t.na);
        toml.push_str(&format!(
            "\n[[targets]]\nticker = \"{}\"\npath = \"data/{}.csv\"\nkind = \"{}\"\nmarket = \"{}\"\n",
            t.ticker, t.ticker, t.kind, t.market
        ));
    }
    toml.push_str("\n[tests]\narch_lm_lags = 12\n");
    fs::write(dir.join("pipeline.toml"), toml).unwrap();
    println!("wrote fixtures to {}", dir.display());
}
