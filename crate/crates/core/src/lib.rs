//! Regime detection and turmoil-impact estimation for daily equity-index returns.
//!
//! The crate is organised bottom-up:
//!
//! - [`returns`]: price ingestion, log-returns, calendar alignment, descriptive statistics.
//! - [`gnd`]: generalised normal density, moments and samplers, plus the standardized
//!   Fernández–Steel skewed variant used as the EGARCH innovation law.
//! - [`mgnd`]: EM fitting of a K-component GND mixture and posterior-mode regime labelling.
//! - [`diagnostics`]: Jarque–Bera, augmented Dickey–Fuller and ARCH-LM tests.
//! - [`egarch`]: EGARCH(1,1)-in-mean with AR(1) and exogenous turmoil dummies.
//! - [`optim`]: the small derivative-free and quasi-Newton optimizers the estimators use.
//! - [`par`]: data-parallel helpers with a sequential fallback (feature `parallel`).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod egarch;
pub mod error;
pub mod gnd;
pub mod mgnd;
pub mod optim;
pub mod par;
pub mod returns;
mod stats;

pub use error::{Error, Result};
pub use returns::{DummySeries, PriceSeries, ReturnSeries, SummaryStats};
