//! Pipeline configuration: a TOML file, with every CLI flag able to
//! override its key.
//!
//! ```toml
//! seed = 20240219
//! output_dir = "out"
//! k = 2
//!
//! [window]                     # inclusive, applied to return dates
//! start = "2021-10-18"
//! end = "2024-02-19"
//!
//! [csv]                        # optional, these are the defaults
//! date_column = "Date"
//! price_column = "Close"
//! date_format = "%Y-%m-%d"
//!
//! [benchmark]
//! ticker = "STOXX50E"
//! path = "data/stoxx50e.csv"   # relative to the config file
//!
//! [[targets]]
//! ticker = "DAX"
//! path = "data/dax.csv"
//! kind = "traditional"         # or "esg"
//! market = "Germany"
//!
//! [tests]
//! arch_lm_lags = 12
//! adf_max_lag = 18             # omit for the Schwert rule
//!
//! [em]
//! tol = 1e-6
//! max_iter = 500
//! inner_iter = 30
//! init = "tail-quantile"       # or "random"
//! restarts = 5
//!
//! [egarch]
//! gtol = 1e-5
//! max_iter = 1000
//! hessian_step = 1e-4
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use turmoil_core::returns::CsvLayout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    #[default]
    Traditional,
    Esg,
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexKind::Traditional => "traditional",
            IndexKind::Esg => "esg",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSpec {
    pub ticker: String,
    pub path: PathBuf,
    #[serde(default)]
    pub kind: IndexKind,
    #[serde(default)]
    pub market: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl Window {
    /// Parse `START:END`, either side may be empty.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s.split_once(':').with_context(|| format!("window `{s}` is not START:END"))?;
        let date = |v: &str| -> Result<Option<NaiveDate>> {
            let v = v.trim();
            if v.is_empty() {
                return Ok(None);
            }
            NaiveDate::parse_from_str(v, "%Y-%m-%d")
                .map(Some)
                .with_context(|| format!("window date `{v}` is not YYYY-MM-DD"))
        };
        Ok(Self { start: date(a)?, end: date(b)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsvSection {
    pub date_column: String,
    pub price_column: String,
    pub date_format: String,
}

impl Default for CsvSection {
    fn default() -> Self {
        let l = CsvLayout::default();
        Self { date_column: l.date_column, price_column: l.price_column, date_format: l.date_format }
    }
}

impl CsvSection {
    pub fn layout(&self) -> CsvLayout {
        CsvLayout {
            date_column: self.date_column.clone(),
            price_column: self.price_column.clone(),
            date_format: self.date_format.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestsSection {
    pub arch_lm_lags: usize,
    pub adf_max_lag: Option<usize>,
}

impl Default for TestsSection {
    fn default() -> Self {
        Self { arch_lm_lags: turmoil_core::diagnostics::DEFAULT_ARCH_LM_LAGS, adf_max_lag: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EmInit {
    #[default]
    TailQuantile,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmSection {
    pub tol: f64,
    pub max_iter: usize,
    pub inner_iter: usize,
    pub init: EmInit,
    pub restarts: usize,
}

impl Default for EmSection {
    fn default() -> Self {
        let d = turmoil_core::mgnd::EmOptions::default();
        Self { tol: d.tol, max_iter: d.max_iter, inner_iter: d.inner_iter, init: EmInit::TailQuantile, restarts: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EgarchSection {
    pub gtol: f64,
    pub max_iter: usize,
    pub hessian_step: f64,
}

impl Default for EgarchSection {
    fn default() -> Self {
        let d = turmoil_core::egarch::EgarchFitOptions::default();
        Self { gtol: d.bfgs.gtol, max_iter: d.bfgs.max_iter, hessian_step: d.hessian_step }
    }
}

fn default_k() -> usize {
    2
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub window: Window,
    #[serde(default)]
    pub csv: CsvSection,
    pub benchmark: IndexSpec,
    pub targets: Vec<IndexSpec>,
    #[serde(default)]
    pub tests: TestsSection,
    #[serde(default)]
    pub em: EmSection,
    #[serde(default)]
    pub egarch: EgarchSection,
}

/// Command-line values that replace config keys when present.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub adf_max_lag: Option<usize>,
    pub arch_lm_lags: Option<usize>,
    pub window: Option<Window>,
}

impl PipelineConfig {
    /// Read a config file; relative input paths are resolved against its
    /// directory, a relative output directory against the working directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.benchmark.path = base.join(&cfg.benchmark.path);
        for t in &mut cfg.targets {
            t.path = base.join(&t.path);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.k {
            self.k = v;
        }
        if let Some(v) = o.adf_max_lag {
            self.tests.adf_max_lag = Some(v);
        }
        if let Some(v) = o.arch_lm_lags {
            self.tests.arch_lm_lags = v;
        }
        if let Some(v) = o.window {
            self.window = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(s), Some(e)) = (self.window.start, self.window.end) {
            if s >= e {
                bail!("window start {s} must precede end {e}");
            }
        }
        if self.k < 2 {
            bail!("regime detection needs k >= 2, got {}", self.k);
        }
        if self.targets.is_empty() {
            bail!("no target indices configured");
        }
        let mut seen = std::collections::BTreeSet::new();
        for t in std::iter::once(&self.benchmark).chain(&self.targets) {
            if t.ticker.is_empty() || t.ticker.contains(['/', '\\']) {
                bail!("ticker `{}` is not usable as a file name", t.ticker);
            }
            if !seen.insert(t.ticker.as_str()) {
                bail!("ticker `{}` appears more than once", t.ticker);
            }
        }
        if self.tests.arch_lm_lags == 0 {
            bail!("arch_lm_lags must be positive");
        }
        if !(self.em.tol > 0.0) || self.em.max_iter == 0 {
            bail!("em.tol must be positive and em.max_iter nonzero");
        }
        if !(self.egarch.gtol > 0.0) || self.egarch.max_iter == 0 || !(self.egarch.hessian_step > 0.0) {
            bail!("egarch.gtol, egarch.max_iter and egarch.hessian_step must be positive");
        }
        Ok(())
    }

    /// Benchmark first, then targets in config order.
    pub fn all_indices(&self) -> impl Iterator<Item = &IndexSpec> {
        std::iter::once(&self.benchmark).chain(&self.targets)
    }
}
