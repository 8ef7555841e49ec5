//! Second-order schemes for decoupled forward-backward SDEs, with the
//! expectation backends, oracles and convergence harness used to test them.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod expectation;
pub mod harness;
pub mod mesh;
pub mod problem;
pub mod schemes;
pub mod strat;

pub use error::{BsdeError, Result};
pub use expectation::{build_backend, BackendConfig, BackendKind, ConditionalExpectation, GridSpec};
pub use harness::{convergence_study, ConvergenceReport, ReportRow, StudyConfig};
pub use mesh::{MeshKind, Partition, DEFAULT_BETA};
pub use problem::{builtin, FbsdeProblem, Smoothness};
pub use schemes::{PsiWeight, SchemeKind, SchemeOptions, TerminalMode, ValueFields};
