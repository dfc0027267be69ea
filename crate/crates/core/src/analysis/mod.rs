//! Approximation-error metrics, relaxation fits and parameter sweeps.

mod fit;
mod metric;
mod sweep;

pub use fit::{fit_relaxation, fit_relaxation_with, FitModel, FitResult};
pub use metric::{error_metric, error_metric_cumulative, ErrorMetric};
pub use sweep::{
    cell_series, evaluate_cell, run_sweep, CellStatus, SolverPair, SweepCell, SweepConfig, SweepTable, SWEEP_COLUMNS,
};
