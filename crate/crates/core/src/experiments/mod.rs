//! Configuration-driven studies: manufactured-solution verification,
//! control convergence against a fine reference, derivative checks, the
//! discrete inf-sup diagnostic, and CSV/JSON reports.

mod config;
mod infsup;
pub mod manufactured;
mod report;
mod studies;

pub use config::{ExperimentConfig, OutputConfig, SolverConfig, StrategyName, TrackingConfig};
pub use infsup::{infsup_constant, run_infsup_diagnostic, schur_spectrum, SchurSpectrum};
pub use report::{
    emit_report, eoc, Check, ConvergenceRow, ConvergenceTable, DiagnosticReport, Format, InfSupLevel, InfSupReport,
    Report, CSV_HEADER,
};
pub use studies::{
    analytic_velocity_errors, certificate_checks, continuity_defect, gauge_defect, gradient_check, hessian_check,
    optimize_level, run_control_study, run_derivative_checks, run_export_vtk, run_verify_state, transpose_check,
    AnalyticErrors, LevelRun,
};
