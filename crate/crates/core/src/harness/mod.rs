//! Reference oracles, convergence studies and their serialisation.

mod pde;
mod report;
mod study;

pub use pde::{calibrate_drift_sign, pde_fd_oracle, DriftCalibration, PdeConfig, PdeSolution, CALIBRATED_DRIFT_SIGN};
pub use report::{ConvergenceReport, ReportRow, CSV_HEADER, SLOPE_ROW};
pub use study::{convergence_study, fit_slope, nested_mc_oracle, McEstimate, StudyConfig};
