//! Experiment runner behind the `tipsim` binary: replicated cells, grid
//! sweeps, CSV output and theory-vs-simulation checks.

pub mod args;
pub mod experiment;
pub mod report;

pub use experiment::{run_cell, run_sweep, CellOutcome, Extras, Setup, SweepSpec};
pub use report::{validate, write_sweep_csv, CellCheck, Check, Tolerances};
