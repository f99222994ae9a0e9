use super::norms::{eoc_with_ratio, ErrorAccumulator};
use crate::error::{EsfemError, Result};
use crate::geometry::Problem;
use crate::mesh::{EvolvingMesh, MAX_LEVEL};
use crate::timestepping::{
    integrate_observed, step_count, IntegrateOptions, Integrator, NonlinearSolveConfig,
    SemiDiscrete, StartValues,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;
use std::time::Instant;

/// Discrete solution against which a temporal study measures its errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceConfig {
    pub integrator: Integrator,
    /// Reference step is the finest step of the study divided by this factor.
    pub refinement: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            integrator: Integrator::Radau(3),
            refinement: 8,
        }
    }
}

/// Ladder of `(mesh level, τ)` pairs. Row `l` uses
/// `τ_l = tau0 / tau_refinement^(l − first level)` and either mesh level `l`
/// (spatial study, errors against the exact solution) or the fixed mesh
/// level (temporal study, errors against a fine reference solution).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceConfig {
    pub levels: RangeInclusive<usize>,
    pub tau0: f64,
    pub tau_refinement: usize,
    pub integrator: Integrator,
    #[serde(rename = "T", alias = "t_end")]
    pub t_end: f64,
    pub lift_quadrature: bool,
    pub fixed_level: Option<usize>,
    pub reference: ReferenceConfig,
    pub problem: Problem,
    pub nonlinear: NonlinearSolveConfig,
    pub start: StartValues,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            levels: 1..=4,
            tau0: 0.1,
            tau_refinement: 4,
            integrator: Integrator::BackwardEuler,
            t_end: 1.0,
            lift_quadrature: false,
            fixed_level: None,
            reference: ReferenceConfig::default(),
            problem: Problem::default(),
            nonlinear: NonlinearSolveConfig::default(),
            start: StartValues::default(),
        }
    }
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EsfemError::InvalidArgument(msg));
        if self.levels.is_empty() {
            return bad(format!("empty level range {:?}", self.levels));
        }
        if self.mesh_level(*self.levels.end()) > MAX_LEVEL {
            return bad(format!("mesh levels must lie in 0..={MAX_LEVEL}"));
        }
        if !(self.tau0 > 0.0) {
            return bad(format!("tau0 must be positive, got {}", self.tau0));
        }
        if self.tau_refinement < 1 {
            return bad("tau_refinement must be at least 1".into());
        }
        if self.fixed_level.is_some() && self.tau_refinement < 2 {
            return bad("a temporal study needs tau_refinement >= 2".into());
        }
        if self.reference.refinement < 1 {
            return bad("reference refinement must be at least 1".into());
        }
        self.problem.surface.validate()?;
        self.nonlinear.validate()?;
        for level in self.levels.clone() {
            step_count(self.tau(level), self.t_end)?;
        }
        Ok(())
    }

    pub fn tau(&self, level: usize) -> f64 {
        let k = (level - self.levels.start()) as i32;
        self.tau0 / (self.tau_refinement as f64).powi(k)
    }

    pub fn mesh_level(&self, level: usize) -> usize {
        self.fixed_level.unwrap_or(level)
    }

    pub fn kind(&self) -> StudyKind {
        if self.fixed_level.is_some() {
            StudyKind::Temporal
        } else {
            StudyKind::Spatial
        }
    }

    fn options(&self) -> IntegrateOptions {
        IntegrateOptions {
            nonlinear: self.nonlinear,
            start: self.start,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    /// Mesh and step refined together, errors against the exact solution.
    Spatial,
    /// Fixed mesh, errors against a fine-step reference solution.
    Temporal,
    /// Stationary problem; the two error columns hold `L²` and `H¹` errors.
    Elliptic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTableRow {
    pub level: usize,
    pub dof: usize,
    pub h: f64,
    pub tau: f64,
    pub err_linf_l2: f64,
    pub eoc_linf_l2: Option<f64>,
    pub err_l2_h1: f64,
    pub eoc_l2_h1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyFailure {
    pub level: usize,
    pub error: String,
    pub numerical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub kind: StudyKind,
    /// Order expected in the EOC columns.
    pub expected_order: f64,
    /// Factor by which the refined parameter (h, or τ for temporal studies)
    /// shrinks between rows.
    pub refinement: f64,
    pub rows: Vec<ErrorTableRow>,
    pub failure: Option<StudyFailure>,
    /// `|e_N|_M` at the final time, per row.
    pub final_l2: Vec<f64>,
    /// Wall-clock seconds per row, in row order.
    pub seconds: Vec<f64>,
}

impl ErrorTable {
    pub fn new(kind: StudyKind, expected_order: f64, refinement: f64) -> Self {
        ErrorTable {
            kind,
            expected_order,
            refinement,
            rows: Vec::new(),
            failure: None,
            final_l2: Vec::new(),
            seconds: Vec::new(),
        }
    }

    /// Fills the EOC columns from the error columns; entries stay empty where
    /// an error vanishes.
    pub fn compute_eocs(&mut self) {
        let fill = |errors: Vec<f64>, r: f64| -> Vec<Option<f64>> {
            std::iter::once(None)
                .chain(errors.windows(2).map(|w| eoc_with_ratio(w, r).ok().map(|v| v[0])))
                .collect()
        };
        let r = self.refinement;
        let a = fill(self.rows.iter().map(|row| row.err_linf_l2).collect(), r);
        let b = fill(self.rows.iter().map(|row| row.err_l2_h1).collect(), r);
        for (row, (a, b)) in self.rows.iter_mut().zip(a.into_iter().zip(b)) {
            row.eoc_linf_l2 = a;
            row.eoc_l2_h1 = b;
        }
    }

    /// EOCs of the final-time errors; unaffected by transients near `t = 0`.
    pub fn final_time_eocs(&self) -> Vec<Option<f64>> {
        self.final_l2
            .windows(2)
            .map(|w| eoc_with_ratio(w, self.refinement).ok().map(|v| v[0]))
            .collect()
    }

    pub fn final_eocs(&self) -> Option<(f64, f64)> {
        let last = self.rows.last()?;
        Some((last.eoc_linf_l2?, last.eoc_l2_h1?))
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

struct RowOutcome {
    row: ErrorTableRow,
    final_l2: f64,
    seconds: f64,
}

fn failure(level: usize, e: &EsfemError) -> StudyFailure {
    StudyFailure {
        level,
        error: e.to_string(),
        numerical: e.is_numerical(),
    }
}

/// Integrates with `integrator` and measures errors against `target(n, t_n)`.
fn measured_run(
    sys: &SemiDiscrete<'_>,
    integrator: Integrator,
    tau: f64,
    t_end: f64,
    options: &IntegrateOptions,
    target: impl Fn(usize, f64) -> Vec<f64>,
) -> Result<[f64; 3]> {
    let init = sys.interpolate_exact(0.0);
    let mut acc = ErrorAccumulator::new(sys.mesh, tau);
    let mut measure_error = None;
    integrate_observed(sys, integrator, tau, t_end, &init, options, |n, t, alpha| {
        if measure_error.is_none() {
            if let Err(e) = acc.push(n, t, alpha, &target(n, t)) {
                measure_error = Some(e);
            }
        }
    })?;
    if let Some(e) = measure_error {
        return Err(e);
    }
    Ok([acc.linf_l2(), acc.l2_h1(), acc.latest_l2()])
}

/// Runs the study row by row (rows concurrently on the rayon pool) and
/// assembles the table in level order. A failing row truncates the table.
pub fn run_convergence_study(config: &ConvergenceConfig) -> Result<ErrorTable> {
    config.validate()?;
    if config.fixed_level.is_some() {
        return match ReferenceSolution::compute(config) {
            Ok(reference) => run_temporal_study(config, &reference),
            Err(e) => {
                let mut table = ErrorTable::new(
                    StudyKind::Temporal,
                    config.integrator.order() as f64,
                    config.tau_refinement as f64,
                );
                table.failure = Some(failure(*config.levels.start(), &e));
                Ok(table)
            }
        };
    }
    let outcomes: Vec<Result<RowOutcome>> = config
        .levels
        .clone()
        .into_par_iter()
        .map(|level| spatial_row(config, level))
        .collect();
    let mut table = ErrorTable::new(StudyKind::Spatial, 2.0, 2.0);
    collect_rows(&mut table, config, outcomes);
    Ok(table)
}

fn spatial_row(config: &ConvergenceConfig, level: usize) -> Result<RowOutcome> {
    let start = Instant::now();
    let mesh = EvolvingMesh::icosphere(level, config.problem.surface)?;
    let sys =
        SemiDiscrete::new(config.problem, &mesh).with_lifted_quadrature(config.lift_quadrature);
    let tau = config.tau(level);
    let [linf, l2h1, final_l2] = measured_run(
        &sys,
        config.integrator,
        tau,
        config.t_end,
        &config.options(),
        |_, t| sys.interpolate_exact(t),
    )?;
    Ok(RowOutcome {
        row: ErrorTableRow {
            level,
            dof: mesh.n_vertices(),
            h: mesh.at(0.0).mesh_size()?,
            tau,
            err_linf_l2: linf,
            eoc_linf_l2: None,
            err_l2_h1: l2h1,
            eoc_l2_h1: None,
        },
        final_l2,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Reference trajectory of a temporal study, sampled at every multiple of
/// the finest study step. Several integrators can share one reference.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    mesh: EvolvingMesh,
    tau: f64,
    values: Vec<Vec<f64>>,
    /// Wall-clock seconds spent computing it.
    pub seconds: f64,
}

impl ReferenceSolution {
    pub fn compute(config: &ConvergenceConfig) -> Result<Self> {
        config.validate()?;
        let level = config.fixed_level.ok_or_else(|| {
            EsfemError::InvalidArgument("a reference needs a fixed mesh level".into())
        })?;
        let start = Instant::now();
        let mesh = EvolvingMesh::icosphere(level, config.problem.surface)?;
        let sys = SemiDiscrete::new(config.problem, &mesh)
            .with_lifted_quadrature(config.lift_quadrature);
        let tau_min = config.tau(*config.levels.end());
        let stride = config.reference.refinement;
        let init = sys.interpolate_exact(0.0);
        let mut values = Vec::with_capacity(step_count(tau_min, config.t_end)? + 1);
        integrate_observed(
            &sys,
            config.reference.integrator,
            tau_min / stride as f64,
            config.t_end,
            &init,
            &config.options(),
            |n, _, alpha| {
                if n % stride == 0 {
                    values.push(alpha.to_vec());
                }
            },
        )?;
        Ok(ReferenceSolution {
            tau: tau_min,
            values,
            seconds: start.elapsed().as_secs_f64(),
            mesh,
        })
    }

    pub fn mesh(&self) -> &EvolvingMesh {
        &self.mesh
    }

    /// Value at `n·τ` for a step `τ` that is a multiple of the sampling step.
    pub fn at(&self, n: usize, tau: f64) -> Option<&[f64]> {
        let ratio = (tau / self.tau).round() as usize;
        self.values.get(n * ratio).map(Vec::as_slice)
    }
}

/// Temporal study of `config.integrator` measured against `reference`,
/// which must have been computed for the same mesh, problem and final time.
pub fn run_temporal_study(
    config: &ConvergenceConfig,
    reference: &ReferenceSolution,
) -> Result<ErrorTable> {
    config.validate()?;
    if config.fixed_level.is_none() {
        return Err(EsfemError::InvalidArgument(
            "a temporal study needs a fixed mesh level".into(),
        ));
    }
    let steps = step_count(config.tau(*config.levels.end()), config.t_end)?;
    if reference.values.len() != steps + 1 {
        return Err(EsfemError::DimensionMismatch {
            expected: steps + 1,
            got: reference.values.len(),
        });
    }
    let sys = SemiDiscrete::new(config.problem, &reference.mesh)
        .with_lifted_quadrature(config.lift_quadrature);
    let outcomes: Vec<Result<RowOutcome>> = config
        .levels
        .clone()
        .into_par_iter()
        .map(|level| temporal_row(config, &sys, reference, level))
        .collect();
    let mut table = ErrorTable::new(
        StudyKind::Temporal,
        config.integrator.order() as f64,
        config.tau_refinement as f64,
    );
    collect_rows(&mut table, config, outcomes);
    Ok(table)
}

fn collect_rows(
    table: &mut ErrorTable,
    config: &ConvergenceConfig,
    outcomes: Vec<Result<RowOutcome>>,
) {
    for (level, outcome) in config.levels.clone().zip(outcomes) {
        match outcome {
            Ok(o) => {
                table.rows.push(o.row);
                table.final_l2.push(o.final_l2);
                table.seconds.push(o.seconds);
            }
            Err(e) => {
                table.failure = Some(failure(level, &e));
                break;
            }
        }
    }
    table.compute_eocs();
}

fn temporal_row(
    config: &ConvergenceConfig,
    sys: &SemiDiscrete<'_>,
    reference: &ReferenceSolution,
    level: usize,
) -> Result<RowOutcome> {
    let start = Instant::now();
    let tau = config.tau(level);
    let [linf, l2h1, final_l2] = measured_run(
        sys,
        config.integrator,
        tau,
        config.t_end,
        &config.options(),
        |n, _| reference.at(n, tau).expect("reference covers the study").to_vec(),
    )?;
    Ok(RowOutcome {
        row: ErrorTableRow {
            level,
            dof: sys.n_dofs(),
            h: sys.at(0.0).mesh_size()?,
            tau,
            err_linf_l2: linf,
            eoc_linf_l2: None,
            err_l2_h1: l2h1,
            eoc_l2_h1: None,
        },
        final_l2,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ExactSolution, Forcing};

    fn small(integrator: Integrator) -> ConvergenceConfig {
        ConvergenceConfig {
            levels: 0..=2,
            tau0: 0.1,
            tau_refinement: 2,
            t_end: 0.4,
            integrator,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(ConvergenceConfig::default().validate().is_ok());
        let mut c = ConvergenceConfig::default();
        c.levels = 3..=2;
        assert!(c.validate().is_err());
        c = ConvergenceConfig::default();
        c.tau0 = 0.0;
        assert!(c.validate().is_err());
        c = ConvergenceConfig::default();
        c.levels = 1..=9;
        assert!(c.validate().is_err());
        c = ConvergenceConfig::default();
        c.tau0 = 0.3;
        assert!(c.validate().is_err());
        c = ConvergenceConfig::default();
        c.fixed_level = Some(2);
        c.tau_refinement = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn ladder_of_steps() {
        let c = ConvergenceConfig::default();
        let taus: Vec<f64> = c.levels.clone().map(|l| c.tau(l)).collect();
        assert_eq!(taus, vec![0.1, 0.025, 0.00625, 0.0015625]);
    }

    #[test]
    fn config_json_uses_defaults() {
        let c: ConvergenceConfig = serde_json::from_str(r#"{"integrator": "bdf2"}"#).unwrap();
        assert_eq!(c.integrator, Integrator::Bdf(2));
        assert_eq!(c.tau0, 0.1);
        assert_eq!(c.levels, 1..=4);
        let c: ConvergenceConfig =
            serde_json::from_str(r#"{"levels": {"start": 2, "end": 3}, "T": 0.5}"#).unwrap();
        assert_eq!(c.levels, 2..=3);
        assert_eq!(c.t_end, 0.5);
        let back: ConvergenceConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn spatial_study_rows() {
        let c = ConvergenceConfig {
            levels: 1..=3,
            t_end: 0.4,
            ..Default::default()
        };
        let table = run_convergence_study(&c).unwrap();
        assert!(table.is_complete());
        assert_eq!(table.rows.len(), 3);
        assert_eq!(
            table.rows.iter().map(|r| r.dof).collect::<Vec<_>>(),
            vec![42, 162, 642]
        );
        assert!(table.rows[0].eoc_linf_l2.is_none());
        assert!(table.rows[1..].iter().all(|r| r.eoc_linf_l2.is_some()));
        assert!(
            table.rows.windows(2).all(|w| w[1].err_linf_l2 < w[0].err_linf_l2),
            "{:?}",
            table.rows
        );
    }

    #[test]
    fn zero_problem_has_zero_errors() {
        let mut c = small(Integrator::Bdf(2));
        c.problem = Problem {
            solution: ExactSolution::zero(),
            forcing: Forcing::Zero,
            ..Problem::default()
        };
        let table = run_convergence_study(&c).unwrap();
        assert!(table.rows.iter().all(|r| r.err_linf_l2 == 0.0 && r.err_l2_h1 == 0.0));
        assert!(table.rows.iter().all(|r| r.eoc_linf_l2.is_none()));
    }

    #[test]
    fn temporal_study_bdf2() {
        let c = ConvergenceConfig {
            levels: 1..=3,
            tau0: 0.05,
            tau_refinement: 2,
            fixed_level: Some(1),
            integrator: Integrator::Bdf(2),
            ..Default::default()
        };
        let table = run_convergence_study(&c).unwrap();
        assert_eq!(table.kind, StudyKind::Temporal);
        let (p, _) = table.final_eocs().unwrap();
        assert!((p - 2.0).abs() < 0.25, "order {p}");
        let q = table.final_time_eocs()[1].unwrap();
        assert!((q - 2.0).abs() < 0.25, "order {q}");
    }

    #[test]
    fn failure_truncates_table() {
        let mut c = small(Integrator::Bdf(2));
        c.nonlinear.max_iter = 1;
        c.nonlinear.rel_tol = 1e-15;
        let table = run_convergence_study(&c).unwrap();
        let failure = table.failure.expect("tight tolerance must fail");
        assert_eq!(failure.level, 0);
        assert!(failure.numerical);
        assert!(failure.error.contains("step"));
        assert!(table.rows.is_empty());
    }

    #[test]
    fn study_is_deterministic() {
        let c = small(Integrator::LinearlyImplicitBdf(2));
        let a = run_convergence_study(&c).unwrap();
        let b = run_convergence_study(&c).unwrap();
        assert_eq!(a.rows, b.rows);
    }
}
