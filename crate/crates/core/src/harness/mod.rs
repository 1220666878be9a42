//! Fitting the convex-gradient target on the unit square: config, training
//! loops, grid error reports, check suites and the model comparison.

mod checks;
mod config;
mod experiment;
mod grid;
mod target;
mod train;

pub use checks::{run_checks, CheckOptions, CheckReport, Gate, Stats, SuiteResult, SUITES};
pub use config::{
    sample_batch, AdamConfig, Domain, HiddenKind, Icnn1Spec, Icnn2Spec, IcgnSpec, ModelSpec, TrainConfig,
};
pub use experiment::{
    compare, default_contenders, write_run, CompareReport, ModelSummary, REFERENCE_TAU_ICGN, REFERENCE_TAU_ICNN2,
};
pub use grid::{eval_grid, export_report, parse_grid_csv, GridReport, GridSummary, ReportPaths};
pub use target::{min_hessian_eig_on_grid, potential, potential_hessian, target_eval};
pub use train::{adam_step, loss, train, train_icgn, train_icnn, AdamState, RunMetrics, TrainOutcome, Trainable};
