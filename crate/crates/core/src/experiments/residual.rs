use crate::error::{EsfemError, Result};
use crate::linalg::{cg_solve, dual_norm, CsrMatrix};
use crate::timestepping::SemiDiscrete;

const SOLVER_TOL: f64 = 1e-13;

/// Dual norm `‖r‖_{∗,t}` of the residual of the interpolated exact solution
/// `ĩ`, `r = M⁻¹[d/dt(M ĩ) + A(ĩ)ĩ − b]`, with the time derivative replaced
/// by a central difference of step `tau_fd`.
pub fn residual_dual_norm_diagnostic(sys: &SemiDiscrete<'_>, t: f64, tau_fd: f64) -> Result<f64> {
    if !(tau_fd > 0.0) || !(t - tau_fd >= 0.0) {
        return Err(EsfemError::InvalidArgument(format!(
            "need 0 < tau_fd <= t, got t = {t}, tau_fd = {tau_fd}"
        )));
    }
    let weighted = |s: f64| -> Result<Vec<f64>> {
        sys.mass(&sys.at(s))?.spmv(&sys.interpolate_exact(s))
    };
    let plus = weighted(t + tau_fd)?;
    let minus = weighted(t - tau_fd)?;
    let mesh = sys.at(t);
    let interp = sys.interpolate_exact(t);
    let a = sys.stiffness(&mesh, &interp)?.spmv(&interp)?;
    let b = sys.load(&mesh)?;
    let v: Vec<f64> = (0..a.len())
        .map(|i| (plus[i] - minus[i]) / (2.0 * tau_fd) + a[i] - b[i])
        .collect();
    let m = sys.mass(&mesh)?;
    let s = sys.assembler.stiffness_linear(&mesh)?;
    let r = mass_solve(&m, &v)?;
    dual_norm(&m, &s, &r, SOLVER_TOL)
}

fn mass_solve(m: &CsrMatrix, v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().all(|x| *x == 0.0) {
        return Ok(vec![0.0; v.len()]);
    }
    Ok(cg_solve(m, v, SOLVER_TOL, 10 * v.len() + 100)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ExactSolution, Forcing, Problem};
    use crate::mesh::EvolvingMesh;

    fn diagnostic(level: usize, problem: Problem, tau_fd: f64) -> f64 {
        let mesh = EvolvingMesh::icosphere(level, problem.surface).unwrap();
        let sys = SemiDiscrete::new(problem, &mesh);
        residual_dual_norm_diagnostic(&sys, 0.5, tau_fd).unwrap()
    }

    #[test]
    fn decreases_under_refinement() {
        let values: Vec<f64> = (1..=4)
            .map(|l| diagnostic(l, Problem::default(), 1e-3))
            .collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    #[test]
    fn vanishes_for_zero_problem() {
        let problem = Problem {
            solution: ExactSolution::zero(),
            forcing: Forcing::Zero,
            ..Problem::default()
        };
        assert_eq!(diagnostic(2, problem, 1e-3), 0.0);
    }

    #[test]
    fn time_difference_error_is_second_order() {
        // r(τ) = r₀ + c τ² + O(τ⁴): successive differences shrink by 4
        let r: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&tau| diagnostic(2, Problem::default(), tau))
            .collect();
        let ratio = (r[0] - r[1]) / (r[1] - r[2]);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let problem = Problem::default();
        let mesh = EvolvingMesh::icosphere(1, problem.surface).unwrap();
        let sys = SemiDiscrete::new(problem, &mesh);
        assert!(residual_dual_norm_diagnostic(&sys, 0.5, 0.0).is_err());
        assert!(residual_dual_norm_diagnostic(&sys, 0.01, 0.1).is_err());
    }
}
