use super::bdf::{bdf_delta, bdf_gamma};
use super::system::{
    inverse_mass_norm, solve_general, solve_spd, NonlinearSolveConfig, NonlinearStrategy,
    SemiDiscrete,
};
use super::tableau::ButcherTableau;
use crate::error::{EsfemError, Result};
use crate::linalg::{axpy, CsrMatrix};

/// Iteration count and residual history of one nonlinear solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

/// A solved BDF step together with `M(t_n)`, which the next steps reuse.
pub(crate) struct BdfSolution {
    pub alpha: Vec<f64>,
    pub mass: CsrMatrix,
    pub report: StepReport,
}

fn check_history(sys: &SemiDiscrete<'_>, history: &[Vec<f64>], tau: f64) -> Result<()> {
    if history.is_empty() {
        return Err(EsfemError::InvalidArgument("BDF history is empty".into()));
    }
    if !(tau > 0.0) {
        return Err(EsfemError::InvalidArgument(format!("step size must be positive, got {tau}")));
    }
    for h in history {
        if h.len() != sys.n_dofs() {
            return Err(EsfemError::DimensionMismatch {
                expected: sys.n_dofs(),
                got: h.len(),
            });
        }
    }
    Ok(())
}

/// `M(t_{n−j}) α_{n−j}` for a history ordered oldest first.
fn mass_products(sys: &SemiDiscrete<'_>, history: &[Vec<f64>], t_n: f64, tau: f64) -> Result<Vec<Vec<f64>>> {
    let k = history.len();
    history
        .iter()
        .enumerate()
        .map(|(i, alpha)| {
            let t = t_n - (k - i) as f64 * tau;
            sys.mass(&sys.at(t))?.spmv(alpha)
        })
        .collect()
}

/// `b(t_n) − (1/τ) Σ_{j≥1} δ_j M_{n−j} α_{n−j}`.
fn bdf_rhs(load: Vec<f64>, products: &[Vec<f64>], delta: &[f64], tau: f64) -> Vec<f64> {
    let k = products.len();
    let mut rhs = load;
    for j in 1..=k {
        axpy(-delta[j] / tau, &products[k - j], &mut rhs);
    }
    rhs
}

/// Fully implicit BDF step:
/// `(δ₀/τ) M_n α + A(α) α = b(t_n) − (1/τ) Σ_{j≥1} δ_j M_{n−j} α_{n−j}`.
///
/// The step number is the history length; `history` is ordered oldest first.
pub fn step_bdf_implicit(
    sys: &SemiDiscrete<'_>,
    history: &[Vec<f64>],
    t_n: f64,
    tau: f64,
    config: &NonlinearSolveConfig,
) -> Result<(Vec<f64>, StepReport)> {
    check_history(sys, history, tau)?;
    let products = mass_products(sys, history, t_n, tau)?;
    let guess = history.last().unwrap();
    let sol = bdf_implicit_solve(sys, &products, guess, t_n, tau, config)?;
    Ok((sol.alpha, sol.report))
}

pub(crate) fn bdf_implicit_solve(
    sys: &SemiDiscrete<'_>,
    products: &[Vec<f64>],
    guess: &[f64],
    t_n: f64,
    tau: f64,
    config: &NonlinearSolveConfig,
) -> Result<BdfSolution> {
    let delta = bdf_delta(products.len())?;
    let mesh = sys.at(t_n);
    let mass = sys.mass(&mesh)?;
    let rhs = bdf_rhs(sys.load(&mesh)?, products, &delta, tau);
    let leading = delta[0] / tau;
    let rhs_norm = inverse_mass_norm(&mass, &rhs)?;

    let mut alpha = guess.to_vec();
    let mut residuals = Vec::new();
    for it in 0..=config.max_iter {
        let (a, jac) = sys.stiffness_jacobian(&mesh, &alpha, config.strategy)?;
        let mut f = a.spmv(&alpha)?;
        axpy(leading, &mass.spmv(&alpha)?, &mut f);
        axpy(-1.0, &rhs, &mut f);
        let fnorm = inverse_mass_norm(&mass, &f)?;
        residuals.push(fnorm);
        if fnorm <= config.rel_tol * rhs_norm {
            return Ok(BdfSolution {
                alpha,
                mass,
                report: StepReport {
                    iterations: it,
                    residuals,
                },
            });
        }
        if it == config.max_iter {
            break;
        }
        match config.strategy {
            NonlinearStrategy::Newton => {
                let j = CsrMatrix::linear_combination(&[(leading, &mass), (1.0, &jac)])?;
                f.iter_mut().for_each(|v| *v = -*v);
                let update = solve_general(&j, &f)?;
                axpy(1.0, &update, &mut alpha);
            }
            NonlinearStrategy::Picard => {
                let k = CsrMatrix::linear_combination(&[(leading, &mass), (1.0, &a)])?;
                alpha = solve_spd(&k, &rhs)?;
            }
        }
    }
    Err(EsfemError::NonlinearSolveFailed {
        iterations: config.max_iter,
        trace: residuals,
    })
}

/// Linearly implicit BDF step: one SPD solve with the coefficient evaluated
/// at the extrapolation `Σ γ_j α_{n−j}`.
pub fn step_bdf_linearly_implicit(
    sys: &SemiDiscrete<'_>,
    history: &[Vec<f64>],
    t_n: f64,
    tau: f64,
) -> Result<Vec<f64>> {
    check_history(sys, history, tau)?;
    let products = mass_products(sys, history, t_n, tau)?;
    Ok(bdf_linear_solve(sys, &products, history, t_n, tau)?.alpha)
}

pub(crate) fn bdf_linear_solve(
    sys: &SemiDiscrete<'_>,
    products: &[Vec<f64>],
    history: &[Vec<f64>],
    t_n: f64,
    tau: f64,
) -> Result<BdfSolution> {
    let k = history.len();
    let delta = bdf_delta(k)?;
    let gamma = bdf_gamma(k)?;
    let mut extrapolated = vec![0.0; sys.n_dofs()];
    for j in 1..=k {
        axpy(gamma[j - 1], &history[k - j], &mut extrapolated);
    }
    let mesh = sys.at(t_n);
    let mass = sys.mass(&mesh)?;
    let rhs = bdf_rhs(sys.load(&mesh)?, products, &delta, tau);
    let a = sys.stiffness(&mesh, &extrapolated)?;
    let matrix = CsrMatrix::linear_combination(&[(delta[0] / tau, &mass), (1.0, &a)])?;
    let alpha = solve_spd(&matrix, &rhs)?;
    Ok(BdfSolution {
        alpha,
        mass,
        report: StepReport {
            iterations: 1,
            residuals: Vec::new(),
        },
    })
}

/// One step of a stiffly accurate implicit Runge–Kutta method.
///
/// With `W = 𝒜⁻¹` (inverse of the coefficient matrix) the stage values solve
/// `(1/τ) Σ_j W_ij (M_nj α_nj − M_n α_n) + A(α_ni) α_ni = b(t_n + c_i τ)`
/// and the step result is the last stage.
pub fn step_rk_implicit(
    sys: &SemiDiscrete<'_>,
    alpha_n: &[f64],
    t_n: f64,
    tau: f64,
    tableau: &ButcherTableau,
    config: &NonlinearSolveConfig,
) -> Result<(Vec<f64>, StepReport)> {
    if alpha_n.len() != sys.n_dofs() {
        return Err(EsfemError::DimensionMismatch {
            expected: sys.n_dofs(),
            got: alpha_n.len(),
        });
    }
    if !tableau.is_stiffly_accurate(1e-14) {
        return Err(EsfemError::InvalidArgument(
            "Runge-Kutta step requires a stiffly accurate tableau".into(),
        ));
    }
    let s = tableau.stages;
    let n = sys.n_dofs();
    let w = tableau.a_inverse()?;
    let p_n = sys.mass(&sys.at(t_n))?.spmv(alpha_n)?;

    let meshes: Vec<_> = tableau.c.iter().map(|c| sys.at(t_n + c * tau)).collect();
    let masses = meshes.iter().map(|m| sys.mass(m)).collect::<Result<Vec<_>>>()?;
    let mut rhs = Vec::with_capacity(s);
    for (i, mesh) in meshes.iter().enumerate() {
        let mut r = sys.load(mesh)?;
        let wsum: f64 = w[i].iter().sum();
        axpy(wsum / tau, &p_n, &mut r);
        rhs.push(r);
    }
    let mut scale2 = 0.0;
    for i in 0..s {
        scale2 += inverse_mass_norm(&masses[i], &rhs[i])?.powi(2);
    }
    let rhs_norm = scale2.sqrt();

    let mut stages: Vec<Vec<f64>> = vec![alpha_n.to_vec(); s];
    let mut residuals = Vec::new();
    for it in 0..=config.max_iter {
        let mut jacobians = Vec::with_capacity(s);
        let mut mass_stage = Vec::with_capacity(s);
        for j in 0..s {
            mass_stage.push(masses[j].spmv(&stages[j])?);
        }
        let mut residual = Vec::with_capacity(s * n);
        let mut norm2 = 0.0;
        for i in 0..s {
            let (a, jac) = sys.stiffness_jacobian(&meshes[i], &stages[i], config.strategy)?;
            let mut f = a.spmv(&stages[i])?;
            for j in 0..s {
                axpy(w[i][j] / tau, &mass_stage[j], &mut f);
            }
            axpy(-1.0, &rhs[i], &mut f);
            norm2 += inverse_mass_norm(&masses[i], &f)?.powi(2);
            residual.extend(f);
            jacobians.push(jac);
        }
        let fnorm = norm2.sqrt();
        residuals.push(fnorm);
        if fnorm <= config.rel_tol * rhs_norm {
            return Ok((
                stages.pop().unwrap(),
                StepReport {
                    iterations: it,
                    residuals,
                },
            ));
        }
        if it == config.max_iter {
            break;
        }
        let mut blocks_owned: Vec<Vec<CsrMatrix>> = Vec::with_capacity(s);
        for i in 0..s {
            let mut row = Vec::with_capacity(s);
            for j in 0..s {
                let block = if i == j {
                    CsrMatrix::linear_combination(&[(w[i][j] / tau, &masses[j]), (1.0, &jacobians[i])])?
                } else {
                    masses[j].scaled(w[i][j] / tau)
                };
                row.push(block);
            }
            blocks_owned.push(row);
        }
        let blocks: Vec<Vec<&CsrMatrix>> = blocks_owned.iter().map(|r| r.iter().collect()).collect();
        let jac = CsrMatrix::from_blocks(&blocks)?;
        residual.iter_mut().for_each(|v| *v = -*v);
        let update = solve_general(&jac, &residual)?;
        for (i, stage) in stages.iter_mut().enumerate() {
            axpy(1.0, &update[i * n..(i + 1) * n], stage);
        }
    }
    Err(EsfemError::NonlinearSolveFailed {
        iterations: config.max_iter,
        trace: residuals,
    })
}
