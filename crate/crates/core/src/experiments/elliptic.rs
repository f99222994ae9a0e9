use super::study::{ErrorTable, ErrorTableRow, StudyKind};
use crate::assembly::{nodal_interpolant, Assembler};
use crate::error::{EsfemError, Result};
use crate::geometry::{elliptic_rhs, project_tangential, ExactSolution, Problem};
use crate::linalg::{cg_solve, CsrMatrix};
use crate::mesh::{EvolvingMesh, MAX_LEVEL};
use rayon::prelude::*;
use std::ops::RangeInclusive;
use std::time::Instant;

/// Solution and data of `−∇_Γ·(𝒜(ξ)∇_Γw) + w = g` on a frozen surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticProblem {
    pub problem: Problem,
    /// Field frozen inside the coefficient.
    pub xi: ExactSolution,
    pub w: ExactSolution,
}

impl Default for EllipticProblem {
    /// `ξ` the time-dependent exact solution, `w = x₁x₂`.
    fn default() -> Self {
        EllipticProblem {
            problem: Problem::default(),
            xi: ExactSolution::default(),
            w: ExactSolution::DecayingProduct { rate: 0.0 },
        }
    }
}

/// Discrete solution of `(A(ξ_h) + M) w_h = b(g)` on `Γ_h(t)`.
pub fn solve_elliptic(
    data: &EllipticProblem,
    mesh: &EvolvingMesh,
    t: f64,
) -> Result<Vec<f64>> {
    let at = mesh.at(t);
    let assembler = Assembler::new(mesh.triangles(), mesh.n_vertices());
    let spec = data.problem.surface;
    let coefficient = data.problem.coefficient;
    let xi_h = nodal_interpolant(&at, |x, t| data.xi.value(x, t));
    let a = assembler.stiffness_nonlinear(&at, &coefficient, &xi_h)?;
    let m = assembler.mass(&at)?;
    let b = assembler.load(
        &at,
        |x, t| elliptic_rhs(&spec, &coefficient, &data.xi, &data.w, x, t),
        Some(&spec),
    )?;
    let system = CsrMatrix::linear_combination(&[(1.0, &a), (1.0, &m)])?;
    let (w_h, _) = cg_solve(&system, &b, 1e-13, 10 * b.len() + 100)?;
    Ok(w_h)
}

/// `L²` and `H¹`-seminorm errors of the elliptic solve against the lifted
/// exact solution, levels refined by mesh bisection.
pub fn elliptic_convergence_test(levels: RangeInclusive<usize>, t: f64) -> Result<ErrorTable> {
    elliptic_study(&EllipticProblem::default(), levels, t)
}

pub fn elliptic_study(
    data: &EllipticProblem,
    levels: RangeInclusive<usize>,
    t: f64,
) -> Result<ErrorTable> {
    if levels.is_empty() || *levels.end() > MAX_LEVEL {
        return Err(EsfemError::InvalidArgument(format!(
            "levels must be a nonempty range within 0..={MAX_LEVEL}, got {levels:?}"
        )));
    }
    let spec = data.problem.surface;
    let rows: Vec<Result<(ErrorTableRow, f64)>> = levels
        .into_par_iter()
        .map(|level| {
            let start = Instant::now();
            let mesh = EvolvingMesh::icosphere(level, spec)?;
            let w_h = solve_elliptic(data, &mesh, t)?;
            let at = mesh.at(t);
            let assembler = Assembler::new(mesh.triangles(), mesh.n_vertices());
            let l2 = assembler.l2_error(&at, &w_h, |x| data.w.value(x, t), Some(&spec))?;
            let h1 = assembler.h1_seminorm_error(&at, &w_h, &spec, |x| {
                let d = spec.normal_projection_curvature(x, t)?;
                Ok(project_tangential(&d, data.w.jet(x, t).gradient))
            })?;
            let row = ErrorTableRow {
                level,
                dof: mesh.n_vertices(),
                h: at.mesh_size()?,
                tau: 0.0,
                err_linf_l2: l2,
                eoc_linf_l2: None,
                err_l2_h1: h1,
                eoc_l2_h1: None,
            };
            Ok((row, start.elapsed().as_secs_f64()))
        })
        .collect();
    let mut table = ErrorTable::new(StudyKind::Elliptic, 2.0, 2.0);
    for r in rows {
        let (row, seconds) = r?;
        table.rows.push(row);
        table.seconds.push(seconds);
    }
    table.compute_eocs();
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Coefficient;

    #[test]
    fn constants_are_reproduced() {
        let data = EllipticProblem {
            problem: Problem {
                coefficient: Coefficient::Constant(1.0),
                ..Problem::default()
            },
            xi: ExactSolution::default(),
            w: ExactSolution::constant(1.7),
        };
        let mesh = EvolvingMesh::icosphere(2, data.problem.surface).unwrap();
        let w_h = solve_elliptic(&data, &mesh, 0.3).unwrap();
        assert!(w_h.iter().all(|v| (v - 1.7).abs() < 1e-10));
    }

    #[test]
    fn errors_decrease() {
        let table = elliptic_convergence_test(1..=3, 0.5).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert!(table.rows.windows(2).all(|w| w[1].err_linf_l2 < w[0].err_linf_l2));
        assert!(table.rows.windows(2).all(|w| w[1].err_l2_h1 < w[0].err_l2_h1));
    }

    #[test]
    fn rejects_bad_levels() {
        assert!(elliptic_convergence_test(3..=2, 0.5).is_err());
        assert!(elliptic_convergence_test(1..=9, 0.5).is_err());
    }
}
