//! Synthesis and analysis of self-similar traffic built from heavy-tailed
//! On/Off sources with Bounded-Pareto rates.
//!
//! Layers, bottom up:
//! - [`distributions`]: Pareto and Bounded-Pareto laws.
//! - [`source`]: one On/Off source, its binned rate trace and stationary marginal.
//! - [`aggregate`]: superposition of N sources and the closed-form N-source marginal.
//! - [`spectrum`]: characteristic functions, the exact On/Off PSD and its low-frequency asymptote.
//! - [`estimators`]: periodogram, autocorrelation, Hurst and tail-index estimators.
//! - [`trace_io`]: CSV trace formats.
//! - [`validation`]: the model-versus-data check battery.
// `!(x > 0.0)` style guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod numeric;
pub mod rng;
pub mod source;
pub mod spectrum;
pub mod trace_io;
pub mod validation;

pub use distributions::{BoundedParetoLaw, ParetoLaw};
pub use error::{Error, Result};
pub use source::{BinnedTrace, RateMode, RenewalTimeline, SourceConfig};
