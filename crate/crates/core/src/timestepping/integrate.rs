use super::integrator::Integrator;
use super::steps::{bdf_implicit_solve, bdf_linear_solve, step_rk_implicit};
use super::system::{NonlinearSolveConfig, SemiDiscrete};
use super::tableau::radau_iia;
use crate::error::{EsfemError, Result};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// How a `k`-step BDF method obtains `α_1..α_{k−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StartValues {
    /// Two-stage Radau IIA steps of the same size.
    #[default]
    Radau2,
    /// Nodal interpolation of the exact solution.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrateOptions {
    pub nonlinear: NonlinearSolveConfig,
    pub start: StartValues,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tau: f64,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub nonlinear_iterations: usize,
}

impl Trajectory {
    pub fn final_value(&self) -> &[f64] {
        self.values.last().expect("trajectory holds the initial value")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationSummary {
    pub steps: usize,
    pub nonlinear_iterations: usize,
}

/// Number of uniform steps of size `tau` covering `[0, t_end]`.
pub fn step_count(tau: f64, t_end: f64) -> Result<usize> {
    if !(tau > 0.0) || !(t_end > 0.0) {
        return Err(EsfemError::InvalidArgument(format!(
            "need tau > 0 and T > 0, got tau = {tau}, T = {t_end}"
        )));
    }
    let steps = (t_end / tau).round();
    if steps < 1.0 || (steps * tau - t_end).abs() > 1e-9 * t_end {
        return Err(EsfemError::InvalidArgument(format!(
            "tau = {tau} does not divide T = {t_end}"
        )));
    }
    Ok(steps as usize)
}

/// Runs the integrator over `[0, t_end]` and records every step.
pub fn integrate(
    sys: &SemiDiscrete<'_>,
    integrator: Integrator,
    tau: f64,
    t_end: f64,
    initial: &[f64],
    options: &IntegrateOptions,
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    let summary = integrate_observed(sys, integrator, tau, t_end, initial, options, |_, t, a| {
        times.push(t);
        values.push(a.to_vec());
    })?;
    Ok(Trajectory {
        tau,
        times,
        values,
        nonlinear_iterations: summary.nonlinear_iterations,
    })
}

/// Like [`integrate`] but hands each accepted `(n, t_n, α_n)`, including
/// `n = 0`, to `observer` instead of storing it.
pub fn integrate_observed(
    sys: &SemiDiscrete<'_>,
    integrator: Integrator,
    tau: f64,
    t_end: f64,
    initial: &[f64],
    options: &IntegrateOptions,
    mut observer: impl FnMut(usize, f64, &[f64]),
) -> Result<IntegrationSummary> {
    options.nonlinear.validate()?;
    let steps = step_count(tau, t_end)?;
    if initial.len() != sys.n_dofs() {
        return Err(EsfemError::DimensionMismatch {
            expected: sys.n_dofs(),
            got: initial.len(),
        });
    }
    let time = |n: usize| n as f64 * tau;
    let wrap = |n: usize| {
        move |e: EsfemError| EsfemError::StepFailed {
            step: n,
            time: time(n),
            source: Box::new(e),
        }
    };
    let config = &options.nonlinear;
    let mut iterations = 0;
    observer(0, 0.0, initial);

    match integrator {
        Integrator::Radau(s) => {
            let tableau = radau_iia(s)?;
            let mut alpha = initial.to_vec();
            for n in 1..=steps {
                let (next, report) =
                    step_rk_implicit(sys, &alpha, time(n - 1), tau, &tableau, config)
                        .map_err(wrap(n))?;
                iterations += report.iterations;
                alpha = next;
                observer(n, time(n), &alpha);
            }
        }
        Integrator::BackwardEuler | Integrator::Bdf(_) | Integrator::LinearlyImplicitBdf(_) => {
            let (k, linear) = match integrator {
                Integrator::Bdf(k) => (k, false),
                Integrator::LinearlyImplicitBdf(k) => (k, true),
                _ => (1, false),
            };
            // (α_j, M(t_j) α_j), oldest first
            let mut history: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::with_capacity(k + 1);
            let m0 = sys.mass(&sys.at(0.0))?;
            history.push_back((initial.to_vec(), m0.spmv(initial)?));

            let starter = radau_iia(2)?;
            for n in 1..k.min(steps + 1) {
                let alpha = match options.start {
                    StartValues::Exact => sys.interpolate_exact(time(n)),
                    StartValues::Radau2 => {
                        let prev = &history.back().unwrap().0;
                        let (next, report) =
                            step_rk_implicit(sys, prev, time(n - 1), tau, &starter, config)
                                .map_err(wrap(n))?;
                        iterations += report.iterations;
                        next
                    }
                };
                let product = sys.mass(&sys.at(time(n)))?.spmv(&alpha)?;
                observer(n, time(n), &alpha);
                history.push_back((alpha, product));
            }

            for n in k..=steps {
                let alphas: Vec<Vec<f64>> = history.iter().map(|h| h.0.clone()).collect();
                let products: Vec<Vec<f64>> = history.iter().map(|h| h.1.clone()).collect();
                let sol = if linear {
                    bdf_linear_solve(sys, &products, &alphas, time(n), tau)
                } else {
                    bdf_implicit_solve(sys, &products, alphas.last().unwrap(), time(n), tau, config)
                }
                .map_err(wrap(n))?;
                iterations += sol.report.iterations;
                let product = sol.mass.spmv(&sol.alpha)?;
                observer(n, time(n), &sol.alpha);
                history.push_back((sol.alpha, product));
                if history.len() > k {
                    history.pop_front();
                }
            }
        }
    }
    Ok(IntegrationSummary {
        steps,
        nonlinear_iterations: iterations,
    })
}
