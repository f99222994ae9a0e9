use crate::assembly::{discrete_norm_a, discrete_norm_m, Assembler};
use crate::error::{EsfemError, Result};
use crate::geometry::ExactSolution;
use crate::linalg::sub;
use crate::mesh::EvolvingMesh;
use crate::timestepping::Trajectory;

/// Running `max_n |e_n|_M` and `(τ Σ_n |e_n|²_A)^{1/2}` over steps `n ≥ 1`.
#[derive(Debug, Clone)]
pub struct ErrorAccumulator<'a> {
    mesh: &'a EvolvingMesh,
    assembler: Assembler,
    tau: f64,
    linf_l2: f64,
    l2_h1_squared: f64,
    latest: f64,
}

impl<'a> ErrorAccumulator<'a> {
    pub fn new(mesh: &'a EvolvingMesh, tau: f64) -> Self {
        ErrorAccumulator {
            mesh,
            assembler: Assembler::new(mesh.triangles(), mesh.n_vertices()),
            tau,
            linf_l2: 0.0,
            l2_h1_squared: 0.0,
            latest: 0.0,
        }
    }

    /// Adds `α_n − target` at `t_n`; the initial value `n = 0` is ignored.
    pub fn push(&mut self, n: usize, t: f64, alpha: &[f64], target: &[f64]) -> Result<()> {
        if n == 0 {
            return Ok(());
        }
        if alpha.len() != target.len() {
            return Err(EsfemError::DimensionMismatch {
                expected: target.len(),
                got: alpha.len(),
            });
        }
        let ops = self.assembler.operators(&self.mesh.at(t))?;
        let e = sub(alpha, target);
        self.latest = discrete_norm_m(&ops.mass, &e)?;
        self.linf_l2 = self.linf_l2.max(self.latest);
        self.l2_h1_squared += self.tau * discrete_norm_a(&ops.stiffness, &e)?.powi(2);
        Ok(())
    }

    pub fn linf_l2(&self) -> f64 {
        self.linf_l2
    }

    pub fn l2_h1(&self) -> f64 {
        self.l2_h1_squared.sqrt()
    }

    /// `|e_n|_M` of the most recent step.
    pub fn latest_l2(&self) -> f64 {
        self.latest
    }
}

fn accumulate<'a>(
    trajectory: &Trajectory,
    mesh: &'a EvolvingMesh,
    exact: &ExactSolution,
) -> Result<ErrorAccumulator<'a>> {
    if trajectory.values.is_empty() {
        return Err(EsfemError::InvalidArgument("empty trajectory".into()));
    }
    let mut acc = ErrorAccumulator::new(mesh, trajectory.tau);
    for (n, (t, alpha)) in trajectory.times.iter().zip(&trajectory.values).enumerate() {
        let target: Vec<f64> = mesh
            .positions_at(*t)
            .into_iter()
            .map(|x| exact.value(x, *t))
            .collect();
        acc.push(n, *t, alpha, &target)?;
    }
    Ok(acc)
}

/// `max_{n≥1} |α_n − I_h u(t_n)|_{M(t_n)}`.
pub fn error_linf_l2(
    trajectory: &Trajectory,
    mesh: &EvolvingMesh,
    exact: &ExactSolution,
) -> Result<f64> {
    Ok(accumulate(trajectory, mesh, exact)?.linf_l2())
}

/// `(τ Σ_{n≥1} |α_n − I_h u(t_n)|²_{A(t_n)})^{1/2}`.
pub fn error_l2_h1(
    trajectory: &Trajectory,
    mesh: &EvolvingMesh,
    exact: &ExactSolution,
) -> Result<f64> {
    Ok(accumulate(trajectory, mesh, exact)?.l2_h1())
}

/// `log₂(e_{k−1}/e_k)` for consecutive entries.
pub fn eoc(errors: &[f64]) -> Result<Vec<f64>> {
    eoc_with_ratio(errors, 2.0)
}

/// `ln(e_{k−1}/e_k) / ln(ratio)` where `ratio` is the refinement factor of
/// the discretisation parameter between consecutive entries.
pub fn eoc_with_ratio(errors: &[f64], ratio: f64) -> Result<Vec<f64>> {
    if !(ratio > 1.0) {
        return Err(EsfemError::InvalidArgument(format!(
            "refinement ratio must exceed 1, got {ratio}"
        )));
    }
    if let Some((index, &value)) = errors.iter().enumerate().find(|(_, e)| !(**e > 0.0)) {
        return Err(EsfemError::NonPositiveError { index, value });
    }
    Ok(errors
        .windows(2)
        .map(|w| (w[0] / w[1]).ln() / ratio.ln())
        .collect())
}
