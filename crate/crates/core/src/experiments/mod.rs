//! Manufactured-solution convergence studies and their output.

mod elliptic;
mod norms;
mod output;
mod residual;
mod study;

pub use elliptic::{elliptic_convergence_test, elliptic_study, solve_elliptic, EllipticProblem};
pub use norms::{eoc, eoc_with_ratio, error_l2_h1, error_linf_l2, ErrorAccumulator};
pub use output::{
    emit_plot_script, parse_csv, plot_script, to_csv, write_csv, write_report, StudyReport,
    CSV_HEADER,
};
pub use residual::residual_dual_norm_diagnostic;
pub use study::{
    run_convergence_study, run_temporal_study, ConvergenceConfig, ErrorTable, ErrorTableRow,
    ReferenceConfig, ReferenceSolution, StudyFailure, StudyKind,
};
