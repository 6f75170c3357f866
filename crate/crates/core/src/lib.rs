//! Disaggregation of behind-the-meter PV from net load.
//!
//! - [`timeseries`]: uniform series, clear-sky index panels, downsampling.
//! - [`gp`]: spatial Gaussian process over clear-sky index.
//! - [`pv`]: plane-of-array transposition and inverter model.
//! - [`ou`]: jump OU masked-load model, simulation and estimation.
//! - [`disagg`]: statistics-matching calibration and prediction envelopes.
//! - [`io`]: CSV and key=value file formats.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod disagg;
pub mod error;
pub mod gp;
pub mod io;
pub mod optim;
pub mod ou;
pub mod pv;
pub mod timeseries;

pub use error::{Error, Result};
