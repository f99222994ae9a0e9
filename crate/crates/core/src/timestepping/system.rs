use crate::assembly::Assembler;
use crate::error::Result;
use crate::geometry::Problem;
use crate::linalg::{cg_solve, dot, CsrMatrix, DenseMatrix};
use crate::mesh::{EvolvingMesh, MeshAt};
use serde::{Deserialize, Serialize};

/// Nonlinear iteration used inside implicit steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearStrategy {
    /// Exact Jacobian `A(α) + N(α)`.
    #[default]
    Newton,
    /// Frozen coefficient `A(α)`.
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NonlinearSolveConfig {
    pub strategy: NonlinearStrategy,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for NonlinearSolveConfig {
    fn default() -> Self {
        NonlinearSolveConfig {
            strategy: NonlinearStrategy::Newton,
            rel_tol: 1e-10,
            max_iter: 50,
        }
    }
}

impl NonlinearSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || self.max_iter == 0 {
            return Err(crate::EsfemError::InvalidArgument(format!(
                "nonlinear solver needs rel_tol > 0 and max_iter > 0, got {} and {}",
                self.rel_tol, self.max_iter
            )));
        }
        Ok(())
    }
}

/// Systems up to this size use dense LU inside Newton iterations.
pub const DENSE_SOLVE_LIMIT: usize = 600;
const LINEAR_TOL: f64 = 1e-12;

/// The ODE system `d/dt(M(t)α) + A(α)α = b(t)` produced by the spatial
/// discretization of a problem on an evolving mesh.
#[derive(Debug, Clone)]
pub struct SemiDiscrete<'a> {
    pub problem: Problem,
    pub mesh: &'a EvolvingMesh,
    pub assembler: Assembler,
    pub lift_quadrature: bool,
}

impl<'a> SemiDiscrete<'a> {
    pub fn new(problem: Problem, mesh: &'a EvolvingMesh) -> Self {
        SemiDiscrete {
            problem,
            mesh,
            assembler: Assembler::new(mesh.triangles(), mesh.n_vertices()),
            lift_quadrature: false,
        }
    }

    pub fn with_lifted_quadrature(mut self, lift: bool) -> Self {
        self.lift_quadrature = lift;
        self
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn at(&self, t: f64) -> MeshAt<'a> {
        self.mesh.at(t)
    }

    pub fn mass(&self, mesh: &MeshAt<'_>) -> Result<CsrMatrix> {
        self.assembler.mass(mesh)
    }

    pub fn load(&self, mesh: &MeshAt<'_>) -> Result<Vec<f64>> {
        let lift = self.lift_quadrature.then_some(&self.problem.surface);
        self.assembler
            .load(mesh, |x, t| self.problem.rhs(x, t), lift)
    }

    pub fn stiffness(&self, mesh: &MeshAt<'_>, alpha: &[f64]) -> Result<CsrMatrix> {
        self.assembler
            .stiffness_nonlinear(mesh, &self.problem.coefficient, alpha)
    }

    /// `A(α) + N(α)`, or `A(α)` alone when the coefficient is constant or the
    /// strategy is Picard.
    pub fn stiffness_jacobian(
        &self,
        mesh: &MeshAt<'_>,
        alpha: &[f64],
        strategy: NonlinearStrategy,
    ) -> Result<(CsrMatrix, CsrMatrix)> {
        let a = self.stiffness(mesh, alpha)?;
        if strategy == NonlinearStrategy::Picard || self.problem.coefficient.is_constant() {
            return Ok((a.clone(), a));
        }
        let n = self
            .assembler
            .newton_correction(mesh, &self.problem.coefficient, alpha)?;
        let jac = CsrMatrix::linear_combination(&[(1.0, &a), (1.0, &n)])?;
        Ok((a, jac))
    }

    pub fn interpolate_exact(&self, t: f64) -> Vec<f64> {
        self.mesh
            .positions_at(t)
            .into_iter()
            .map(|x| self.problem.exact(x, t))
            .collect()
    }
}

/// `√(vᵀ M⁻¹ v)`.
pub(crate) fn inverse_mass_norm(mass: &CsrMatrix, v: &[f64]) -> Result<f64> {
    let (y, _) = cg_solve(mass, v, LINEAR_TOL, 10 * v.len() + 100)?;
    Ok(dot(v, &y).max(0.0).sqrt())
}

pub(crate) fn solve_spd(matrix: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    Ok(cg_solve(matrix, rhs, LINEAR_TOL, 20 * rhs.len() + 500)?.0)
}

/// Solves a general (nonsymmetric) sparse system.
pub(crate) fn solve_general(matrix: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() <= DENSE_SOLVE_LIMIT {
        let dense: DenseMatrix = matrix.to_dense();
        return dense.lu_solve(rhs);
    }
    Ok(crate::linalg::gmres_solve(matrix, rhs, None, LINEAR_TOL, 60, 20 * rhs.len() + 500)?.0)
}
