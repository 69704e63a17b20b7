//! Helpers for driving the `turmoil` binary against fixture configs.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use turmoil_cli::config::PipelineConfig;

pub fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/pipeline.toml")
}

pub fn fixture() -> PipelineConfig {
    PipelineConfig::load(&fixture_config()).unwrap()
}

/// Write `cfg` as TOML into `dir` and return the path.
pub fn write_config(dir: &Path, cfg: &PipelineConfig) -> PathBuf {
    let path = dir.join("pipeline.toml");
    std::fs::write(&path, toml::to_string(cfg).unwrap()).unwrap();
    path
}

pub struct Run {
    pub code: i32,
    pub stderr: String,
}

pub fn turmoil(config: &Path, out: &Path, args: &[&str]) -> Run {
    let o = Command::new(env!("CARGO_BIN_EXE_turmoil"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn turmoil");
    Run { code: o.status.code().unwrap_or(-1), stderr: String::from_utf8_lossy(&o.stderr).into_owned() }
}

/// Rows of a CSV as column-name maps.
pub fn read_rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| header.iter().zip(rec.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

pub fn header(path: &Path) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().map(str::to_string).collect()
}

pub fn column(path: &Path, name: &str) -> Vec<f64> {
    read_rows(path).iter().map(|r| r[name].parse().unwrap()).collect()
}

/// Every file under `root`, relative path to contents.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Write a `Date,Close` price file on consecutive business days.
pub fn write_prices(path: &Path, closes: &[f64]) {
    use chrono::{Datelike, NaiveDate};
    let mut d = NaiveDate::from_ymd_opt(2021, 10, 18).unwrap();
    let mut body = String::from("Date,Close\n");
    for c in closes {
        while d.weekday().number_from_monday() > 5 {
            d = d.succ_opt().unwrap();
        }
        body.push_str(&format!("{d},{c}\n"));
        d = d.succ_opt().unwrap();
    }
    std::fs::write(path, body).unwrap();
}

/// Prices compounding percent log-returns from 1000.
pub fn prices_from_returns(r: &[f64]) -> Vec<f64> {
    let mut p = vec![1000.0];
    for x in r {
        let last = *p.last().unwrap();
        p.push(last * (x / 100.0).exp());
    }
    p
}
