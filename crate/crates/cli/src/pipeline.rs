//! The four pipeline stages. Each reads its inputs from, and writes its
//! outputs to, the output directory:
//!
//! ```text
//! out/
//!   returns/<TICKER>.csv        date,return
//!   load_report.csv
//!   summary.csv
//!   detect/mgnd_fit.json
//!   detect/dummy.csv            date,turmoil
//!   detect/regimes.csv
//!   detect/density_grid.csv
//!   tests.csv
//!   tests_failures.csv
//!   fits/<TICKER>.json
//!   fits/mean_table.csv
//!   fits/variance_table.csv
//!   fits/impact.csv
//!   fits/volatility/<TICKER>.csv  date,h
//!   fits/failures.csv
//! ```
//!
//! Floats are written with shortest round-trip formatting and undefined
//! values as `NA`, so every table parses back to the exact values.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use turmoil_core::diagnostics::{adf_test, arch_lm, jarque_bera, TestResult};
use turmoil_core::egarch::{
    filter, fit_egarch_m, turmoil_impact_summary, EgarchFitOptions, EgarchFitReport, VarianceInit, PARAM_NAMES,
};
use turmoil_core::mgnd::{classify, default_grid_range, density_grid, fit_mgnd, EmOptions, InitStrategy, MgndFitReport};
use turmoil_core::optim::BfgsOptions;
use turmoil_core::returns::{align, load_prices, log_returns, summary_stats};
use turmoil_core::{par, DummySeries, ReturnSeries};

use crate::config::{EmInit, IndexSpec, PipelineConfig};
use crate::seeds;

/// Points in the emitted mixture density grid.
pub const GRID_POINTS: usize = 4001;
/// Grid half-width in component standard deviations.
pub const GRID_WIDTH: f64 = 10.0;

const NA: &str = "NA";

/// How a stage ended when it did not fail outright.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StageOutcome {
    /// Tickers whose per-index work failed.
    pub failed: Vec<String>,
}

impl StageOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failed.is_empty() {
            0
        } else {
            2
        }
    }

    fn merge(mut self, other: StageOutcome) -> Self {
        self.failed.extend(other.failed);
        self
    }
}

/// File locations under the output directory.
#[derive(Debug, Clone)]
pub struct OutputLayout {
    root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn returns_dir(&self) -> PathBuf {
        self.root.join("returns")
    }

    pub fn returns_file(&self, ticker: &str) -> PathBuf {
        self.returns_dir().join(format!("{ticker}.csv"))
    }

    pub fn load_report(&self) -> PathBuf {
        self.root.join("load_report.csv")
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.csv")
    }

    pub fn detect_dir(&self) -> PathBuf {
        self.root.join("detect")
    }

    pub fn mgnd_fit(&self) -> PathBuf {
        self.detect_dir().join("mgnd_fit.json")
    }

    pub fn dummy(&self) -> PathBuf {
        self.detect_dir().join("dummy.csv")
    }

    pub fn regimes(&self) -> PathBuf {
        self.detect_dir().join("regimes.csv")
    }

    pub fn density_grid(&self) -> PathBuf {
        self.detect_dir().join("density_grid.csv")
    }

    pub fn tests(&self) -> PathBuf {
        self.root.join("tests.csv")
    }

    pub fn tests_failures(&self) -> PathBuf {
        self.root.join("tests_failures.csv")
    }

    pub fn fits_dir(&self) -> PathBuf {
        self.root.join("fits")
    }

    pub fn fit_report(&self, ticker: &str) -> PathBuf {
        self.fits_dir().join(format!("{ticker}.json"))
    }

    pub fn mean_table(&self) -> PathBuf {
        self.fits_dir().join("mean_table.csv")
    }

    pub fn variance_table(&self) -> PathBuf {
        self.fits_dir().join("variance_table.csv")
    }

    pub fn impact(&self) -> PathBuf {
        self.fits_dir().join("impact.csv")
    }

    pub fn volatility_dir(&self) -> PathBuf {
        self.fits_dir().join("volatility")
    }

    pub fn volatility(&self, ticker: &str) -> PathBuf {
        self.volatility_dir().join(format!("{ticker}.csv"))
    }

    pub fn fit_failures(&self) -> PathBuf {
        self.fits_dir().join("failures.csv")
    }
}

/// Shortest round-trip representation, in exponent form for very small or
/// very large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), num)
}

fn write_table<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_failures(path: &Path, failures: &[(String, String)]) -> Result<()> {
    write_table(path, &["index", "error"], failures.iter().map(|(t, e)| vec![t.clone(), e.clone()]))
}

fn read_returns(layout: &OutputLayout, ticker: &str) -> Result<ReturnSeries> {
    let path = layout.returns_file(ticker);
    ReturnSeries::read_csv(&path, ticker).with_context(|| format!("reading returns {}", path.display()))
}

/// Format an error with its full cause chain on one line.
fn chain(e: &anyhow::Error) -> String {
    format!("{e:#}")
}

// ---------------------------------------------------------------- ingest

/// Load every configured CSV, compute percent log-returns, apply the date
/// window and persist returns plus load and summary tables. Any load failure
/// is fatal, after every file has been tried.
pub fn ingest(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let out = OutputLayout::new(&cfg.output_dir);
    let csv_layout = cfg.csv.layout();
    let specs: Vec<&IndexSpec> = cfg.all_indices().collect();

    let loaded = par::map_slice(&specs, |s| -> Result<_> {
        let (prices, report) = load_prices(&s.path, &s.ticker, &csv_layout)?;
        let returns = log_returns(&prices)?.window(cfg.window.start, cfg.window.end);
        if returns.is_empty() {
            bail!("no returns inside the configured window");
        }
        Ok((returns, report))
    });
    let problems: Vec<String> = specs
        .iter()
        .zip(&loaded)
        .filter_map(|(s, r)| r.as_ref().err().map(|e| format!("{} ({}): {}", s.ticker, s.path.display(), chain(e))))
        .collect();
    if !problems.is_empty() {
        for p in &problems {
            log::error!("{p}");
        }
        bail!("ingest failed for {} of {} files:\n  {}", problems.len(), specs.len(), problems.join("\n  "));
    }
    let loaded: Vec<_> = loaded.into_iter().map(|r| r.expect("errors handled above")).collect();

    fs::create_dir_all(out.returns_dir())?;
    let mut load_rows = Vec::new();
    let mut summary_rows = Vec::new();
    for (s, (returns, report)) in specs.iter().zip(&loaded) {
        returns.write_csv(&out.returns_file(&s.ticker))?;
        if report.rows_dropped > 0 {
            warn!("{}: dropped {} rows ({})", s.ticker, report.rows_dropped, report.dropped_dates.join(", "));
        }
        load_rows.push(vec![
            s.ticker.clone(),
            report.rows_read.to_string(),
            report.rows_kept.to_string(),
            report.rows_dropped.to_string(),
            report.dropped_dates.join(";"),
        ]);
        let role = if std::ptr::eq(*s, &cfg.benchmark) { "benchmark" } else { "target" };
        let mut row = vec![s.ticker.clone(), role.into(), s.kind.to_string(), s.market.clone()];
        match summary_stats(returns) {
            Ok(st) => row.extend([
                st.n.to_string(),
                num(st.mean),
                num(st.stdev),
                opt_num(st.skewness),
                opt_num(st.excess_kurtosis),
                opt_num(st.raw_kurtosis),
            ]),
            Err(e) => {
                warn!("{}: summary statistics undefined: {e}", s.ticker);
                row.push(returns.len().to_string());
                row.extend(std::iter::repeat_n(NA.to_string(), 5));
            }
        }
        summary_rows.push(row);
    }
    write_table(
        &out.load_report(),
        &["index", "rows_read", "rows_kept", "rows_dropped", "dropped_dates"],
        load_rows,
    )?;
    write_table(
        &out.summary(),
        &["index", "role", "type", "market", "n", "mean", "stdev", "skewness", "excess_kurtosis", "raw_kurtosis"],
        summary_rows,
    )?;
    info!("ingest: wrote {} return series", specs.len());
    Ok(StageOutcome::default())
}

// ---------------------------------------------------------------- detect

/// Contents of `detect/mgnd_fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub benchmark: String,
    pub n_obs: usize,
    pub k: usize,
    pub turmoil_component: usize,
    /// Share of dates labelled turmoil.
    pub turmoil_proportion: f64,
    pub mean_turmoil_posterior: f64,
    pub fit: MgndFitReport,
}

pub fn em_options(cfg: &PipelineConfig) -> EmOptions {
    let init = match cfg.em.init {
        EmInit::TailQuantile => InitStrategy::TailQuantile,
        EmInit::Random => InitStrategy::RandomRestarts { restarts: cfg.em.restarts, seed: seeds::detect_seed(cfg.seed) },
    };
    EmOptions { init, tol: cfg.em.tol, max_iter: cfg.em.max_iter, inner_iter: cfg.em.inner_iter }
}

/// Fit the mixture to the benchmark, label each date and write the dummy,
/// per-date regimes and the density grid.
pub fn detect(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let out = OutputLayout::new(&cfg.output_dir);
    let ticker = &cfg.benchmark.ticker;
    let bench = read_returns(&out, ticker)?;
    let fit = fit_mgnd(&bench, cfg.k, &em_options(cfg)).with_context(|| format!("mixture fit on {ticker}"))?;
    if !fit.converged {
        warn!("{ticker}: EM stopped after {} iterations without meeting the tolerance", fit.iterations);
    }
    for (j, at) in fit.nu_at_boundary.iter().enumerate() {
        if *at {
            warn!("{ticker}: component {j} shape is at its bound");
        }
    }
    let cls = classify(&bench, &fit.params).with_context(|| format!("regime classification on {ticker}"))?;
    let k = fit.params.k();

    fs::create_dir_all(out.detect_dir())?;
    cls.dummy.write_csv(&out.dummy())?;

    let mut header = vec!["date".to_string(), "return".to_string()];
    header.extend((0..k).map(|j| format!("posterior_{j}")));
    header.extend(["label".to_string(), "turmoil".to_string()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..bench.len()).map(|i| {
        let mut row = vec![bench.dates()[i].to_string(), num(bench.values()[i])];
        row.extend(cls.posteriors[i].iter().map(|&p| num(p)));
        row.push(cls.labels[i].to_string());
        row.push(cls.dummy.values()[i].to_string());
        row
    });
    write_table(&out.regimes(), &header, rows)?;

    let (lo, hi) = default_grid_range(&fit.params, bench.values(), GRID_WIDTH);
    let grid = density_grid(&fit.params, lo, hi, GRID_POINTS)?;
    let mut header = vec!["x".to_string(), "density".to_string()];
    header.extend((0..k).map(|j| format!("component_{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..grid.x.len()).map(|i| {
        let mut row = vec![num(grid.x[i]), num(grid.density[i])];
        row.extend(grid.components.iter().map(|c| num(c[i])));
        row
    });
    write_table(&out.density_grid(), &header, rows)?;

    let report = DetectReport {
        benchmark: ticker.clone(),
        n_obs: bench.len(),
        k,
        turmoil_component: cls.turmoil_index,
        turmoil_proportion: cls.dummy.proportion(),
        mean_turmoil_posterior: cls.mean_turmoil_posterior(),
        fit,
    };
    fs::write(out.mgnd_fit(), serde_json::to_string_pretty(&report)? + "\n")?;
    info!(
        "detect: {ticker} turmoil component {}, {} of {} dates flagged",
        report.turmoil_component,
        cls.dummy.values().iter().filter(|&&v| v == 1).count(),
        bench.len()
    );
    Ok(StageOutcome::default())
}

// ---------------------------------------------------------------- tests

struct TestRow {
    jb: TestResult,
    adf: TestResult,
    arch: TestResult,
}

fn test_cells(r: &TestResult) -> [String; 3] {
    [num(r.statistic), r.stars().to_string(), num(r.p_value)]
}

/// Jarque–Bera, ADF and ARCH-LM on every target. A failing index is
/// recorded in `tests_failures.csv` and the others still run.
pub fn tests(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let out = OutputLayout::new(&cfg.output_dir);
    let results = par::map_slice(&cfg.targets, |s| -> Result<TestRow> {
        let r = read_returns(&out, &s.ticker)?;
        Ok(TestRow {
            jb: jarque_bera(&r).context("Jarque-Bera")?,
            adf: adf_test(&r, cfg.tests.adf_max_lag).context("ADF")?,
            arch: arch_lm(&r, cfg.tests.arch_lm_lags).context("ARCH-LM")?,
        })
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (s, res) in cfg.targets.iter().zip(results) {
        match res {
            Ok(t) => {
                let mut row = vec![s.ticker.clone()];
                row.extend(test_cells(&t.jb));
                row.extend(test_cells(&t.adf));
                row.push(t.adf.lags.map_or_else(|| NA.into(), |l| l.to_string()));
                row.extend(test_cells(&t.arch));
                row.push(t.arch.lags.map_or_else(|| NA.into(), |l| l.to_string()));
                rows.push(row);
            }
            Err(e) => {
                warn!("tests: {} failed: {}", s.ticker, chain(&e));
                failures.push((s.ticker.clone(), chain(&e)));
            }
        }
    }
    if rows.is_empty() {
        bail!("tests failed for every target:\n  {}", fmt_failures(&failures));
    }
    write_table(
        &out.tests(),
        &[
            "index",
            "jb",
            "jb_stars",
            "jb_p",
            "adf",
            "adf_stars",
            "adf_p",
            "adf_lags",
            "arch_lm",
            "arch_lm_stars",
            "arch_lm_p",
            "arch_lm_lags",
        ],
        rows,
    )?;
    write_failures(&out.tests_failures(), &failures)?;
    Ok(StageOutcome { failed: failures.into_iter().map(|(t, _)| t).collect() })
}

fn fmt_failures(f: &[(String, String)]) -> String {
    f.iter().map(|(t, e)| format!("{t}: {e}")).collect::<Vec<_>>().join("\n  ")
}

// ---------------------------------------------------------------- fit

pub fn egarch_options(cfg: &PipelineConfig, ticker: &str) -> EgarchFitOptions {
    EgarchFitOptions {
        bfgs: BfgsOptions { gtol: cfg.egarch.gtol, max_iter: cfg.egarch.max_iter, ..BfgsOptions::default() },
        hessian_step: cfg.egarch.hessian_step,
        seed: seeds::fit_seed(cfg.seed, ticker),
        init: VarianceInit::SampleVariance,
    }
}

struct FitOutput {
    report: EgarchFitReport,
    dates: Vec<chrono::NaiveDate>,
    h: Vec<f64>,
}

fn log_dropped(ticker: &str, side: &str, before: &ReturnSeries, after: &ReturnSeries) {
    let kept: BTreeSet<_> = after.dates().iter().collect();
    let dropped: Vec<String> =
        before.dates().iter().filter(|d| !kept.contains(d)).map(|d| d.to_string()).collect();
    if !dropped.is_empty() {
        info!("fit: {ticker}: aligning dropped {} {side} dates: {}", dropped.len(), dropped.join(", "));
    }
}

fn fit_one(cfg: &PipelineConfig, out: &OutputLayout, bench: &ReturnSeries, dummy: &DummySeries, s: &IndexSpec) -> Result<FitOutput> {
    let raw = read_returns(out, &s.ticker)?;
    let aligned = align(&[bench.clone(), raw.clone()]).context("aligning with the benchmark calendar")?;
    log_dropped(&s.ticker, "target", &raw, &aligned[1]);
    log_dropped(&s.ticker, "benchmark", bench, &aligned[0]);
    let returns = aligned.into_iter().nth(1).expect("two aligned series");
    let d = dummy.aligned_to(&returns).context("aligning the turmoil dummy")?;
    let opts = egarch_options(cfg, &s.ticker);
    let report = fit_egarch_m(&returns, &d, None, &opts).context("EGARCH-M estimation")?;
    if !report.converged {
        warn!("fit: {}: optimizer did not converge (gradient norm {})", s.ticker, report.grad_norm);
    }
    let filtered = filter(&report.params, &returns, &d, opts.init)?;
    Ok(FitOutput { report, dates: filtered.dates, h: filtered.h })
}

fn coef_header(names: &[&str]) -> Vec<String> {
    let mut h = vec!["index".to_string(), "type".to_string(), "market".to_string()];
    for n in names {
        h.extend([n.to_string(), format!("{n}_se"), format!("{n}_p"), format!("{n}_stars")]);
    }
    h.extend(["loglik".to_string(), "n_obs".to_string(), "converged".to_string()]);
    h
}

fn coef_row(s: &IndexSpec, rep: &EgarchFitReport, names: &[&str]) -> Vec<String> {
    let values = rep.params.to_vec();
    let mut row = vec![s.ticker.clone(), s.kind.to_string(), s.market.clone()];
    for n in names {
        let i = PARAM_NAMES.iter().position(|p| p == n).expect("known parameter");
        row.extend([num(values[i]), opt_num(rep.std_errors[i]), opt_num(rep.p_values[i]), rep.stars(i).to_string()]);
    }
    row.extend([num(rep.loglik), rep.n_obs.to_string(), rep.converged.to_string()]);
    row
}

const MEAN_PARAMS: [&str; 4] = ["mu", "m1", "phi1", "lambda"];
const VARIANCE_PARAMS: [&str; 7] = ["omega", "v1", "alpha1", "gamma1", "beta1", "nu", "s"];

/// EGARCH-M fit for every target against the detected dummy. Failures are
/// recorded in `fits/failures.csv` and the remaining targets still run.
pub fn fit(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let out = OutputLayout::new(&cfg.output_dir);
    let bench = read_returns(&out, &cfg.benchmark.ticker)?;
    let dummy = DummySeries::read_csv(&out.dummy())
        .with_context(|| format!("reading turmoil dummy {} (run detect first)", out.dummy().display()))?;
    if dummy.dates() != bench.dates() {
        bail!("turmoil dummy does not cover the benchmark dates; rerun detect");
    }

    let results = par::map_slice(&cfg.targets, |s| fit_one(cfg, &out, &bench, &dummy, s));

    fs::create_dir_all(out.volatility_dir())?;
    let mut ok: Vec<(&IndexSpec, EgarchFitReport)> = Vec::new();
    let mut failures = Vec::new();
    for (s, res) in cfg.targets.iter().zip(results) {
        match res {
            Ok(f) => {
                fs::write(out.fit_report(&s.ticker), f.report.to_json()? + "\n")?;
                write_table(
                    &out.volatility(&s.ticker),
                    &["date", "h"],
                    f.dates.iter().zip(&f.h).map(|(d, h)| vec![d.to_string(), num(*h)]),
                )?;
                ok.push((s, f.report));
            }
            Err(e) => {
                warn!("fit: {} failed: {}", s.ticker, chain(&e));
                // leave no stale artifacts from an earlier run
                for stale in [out.fit_report(&s.ticker), out.volatility(&s.ticker)] {
                    if stale.exists() {
                        fs::remove_file(stale)?;
                    }
                }
                failures.push((s.ticker.clone(), chain(&e)));
            }
        }
    }
    write_failures(&out.fit_failures(), &failures)?;
    if ok.is_empty() {
        bail!("EGARCH-M fit failed for every target:\n  {}", fmt_failures(&failures));
    }

    let h = coef_header(&MEAN_PARAMS);
    write_table(
        &out.mean_table(),
        &h.iter().map(String::as_str).collect::<Vec<_>>(),
        ok.iter().map(|(s, r)| coef_row(s, r, &MEAN_PARAMS)),
    )?;
    let h = coef_header(&VARIANCE_PARAMS);
    write_table(
        &out.variance_table(),
        &h.iter().map(String::as_str).collect::<Vec<_>>(),
        ok.iter().map(|(s, r)| coef_row(s, r, &VARIANCE_PARAMS)),
    )?;

    let reports: Vec<EgarchFitReport> = ok.iter().map(|(_, r)| r.clone()).collect();
    let impact = turmoil_impact_summary(&reports)?;
    write_table(
        &out.impact(),
        &["index", "type", "market", "m1", "m1_stars", "v1", "v1_stars", "peak_volatility", "converged"],
        ok.iter().zip(impact).map(|((s, _), row)| {
            vec![
                row.index,
                s.kind.to_string(),
                s.market.clone(),
                num(row.m1),
                row.m1_stars,
                num(row.v1),
                row.v1_stars,
                num(row.peak_volatility),
                row.converged.to_string(),
            ]
        }),
    )?;
    info!("fit: {} of {} targets estimated", ok.len(), cfg.targets.len());
    Ok(StageOutcome { failed: failures.into_iter().map(|(t, _)| t).collect() })
}

/// All four stages in order. Ingest and detect failures are fatal; tests and
/// fit report per-index failures and the run continues.
pub fn run_all(cfg: &PipelineConfig) -> Result<StageOutcome> {
    ingest(cfg)?;
    detect(cfg)?;
    let t = tests(cfg)?;
    let f = fit(cfg)?;
    Ok(t.merge(f))
}
