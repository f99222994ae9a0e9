//! Time integration of `d/dt(M(t)α) + A(α)α = b(t)`: Radau IIA, implicit
//! BDF with Newton or Picard iterations, and linearly implicit BDF.

mod bdf;
mod integrate;
mod integrator;
mod steps;
mod system;
mod tableau;

pub use bdf::{bdf_delta, bdf_gamma, zero_stability, BdfCoefficients, ZeroStability, MAX_BDF_STEPS};
pub use integrate::{
    integrate, integrate_observed, step_count, IntegrateOptions, IntegrationSummary, StartValues,
    Trajectory,
};
pub use integrator::{Integrator, INTEGRATOR_GRAMMAR};
pub use steps::{step_bdf_implicit, step_bdf_linearly_implicit, step_rk_implicit, StepReport};
pub use system::{
    NonlinearSolveConfig, NonlinearStrategy, SemiDiscrete, DENSE_SOLVE_LIMIT,
};
pub use tableau::{check_algebraic_stability, radau_iia, AlgebraicStability, ButcherTableau};
