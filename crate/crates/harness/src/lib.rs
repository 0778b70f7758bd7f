//! Experiment plumbing for the wake-up simulator: config files, sweeps to
//! CSV, exponent fits and the demos behind the `qwake` binary.

pub mod config;
pub mod demo;
pub mod fit;
pub mod sweep;

pub use config::{AlphaSpec, ConfigError, ExperimentConfig, Family, WakeRule};
pub use fit::{compare_advice_levels, fit_exponent, FitError, FitReport, RatioRow};
pub use sweep::{cells, run_cell, run_sweep, sweep_rows, Cell, SweepRow, CSV_HEADER};
