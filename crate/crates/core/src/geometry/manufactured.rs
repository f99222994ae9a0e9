use super::{project_tangential, surface_divergence, Coefficient, SurfaceSpec};
use crate::error::Result;
use crate::vec3::{dot, Mat3, Vec3};
use serde::{Deserialize, Serialize};

/// Value and ambient derivatives of a scalar field at `(x, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub time_derivative: f64,
    pub gradient: Vec3,
    pub hessian: Mat3,
}

/// Closed-form ambient fields used as exact solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactSolution {
    /// `exp(-rate·t) x₁ x₂`
    DecayingProduct { rate: f64 },
    /// `g·x + c`, time independent
    Affine { gradient: Vec3, offset: f64 },
}

impl Default for ExactSolution {
    fn default() -> Self {
        ExactSolution::DecayingProduct { rate: 6.0 }
    }
}

impl ExactSolution {
    pub fn zero() -> Self {
        ExactSolution::Affine {
            gradient: [0.0; 3],
            offset: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        ExactSolution::Affine {
            gradient: [0.0; 3],
            offset: c,
        }
    }

    pub fn value(&self, x: Vec3, t: f64) -> f64 {
        match *self {
            ExactSolution::DecayingProduct { rate } => (-rate * t).exp() * x[0] * x[1],
            ExactSolution::Affine { gradient, offset } => dot(gradient, x) + offset,
        }
    }

    pub fn jet(&self, x: Vec3, t: f64) -> Jet {
        match *self {
            ExactSolution::DecayingProduct { rate } => {
                let e = (-rate * t).exp();
                Jet {
                    value: e * x[0] * x[1],
                    time_derivative: -rate * e * x[0] * x[1],
                    gradient: [e * x[1], e * x[0], 0.0],
                    hessian: [[0.0, e, 0.0], [e, 0.0, 0.0], [0.0, 0.0, 0.0]],
                }
            }
            ExactSolution::Affine { gradient, offset } => Jet {
                value: dot(gradient, x) + offset,
                time_derivative: 0.0,
                gradient,
                hessian: [[0.0; 3]; 3],
            },
        }
    }
}

/// Source of the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Forcing {
    /// Forcing chosen so that the exact solution solves the problem.
    #[default]
    Manufactured,
    /// Homogeneous problem; the exact solution then only supplies initial data.
    Zero,
}

/// A quasilinear parabolic problem on an evolving surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Problem {
    pub surface: SurfaceSpec,
    pub coefficient: Coefficient,
    pub solution: ExactSolution,
    pub forcing: Forcing,
}

impl Problem {
    /// The oscillating ellipsoid with the Gaussian coefficient and
    /// `u = exp(-6t) x₁ x₂`.
    pub fn benchmark() -> Self {
        Problem::default()
    }

    pub fn exact(&self, x: Vec3, t: f64) -> f64 {
        self.solution.value(x, t)
    }

    pub fn initial_value(&self, x: Vec3) -> f64 {
        self.solution.value(x, 0.0)
    }

    /// `f = ∂•u + u ∇_Γ·v − ∇_Γ·(𝒜(u)∇_Γu)`.
    pub fn rhs(&self, x: Vec3, t: f64) -> Result<f64> {
        if self.forcing == Forcing::Zero {
            return Ok(0.0);
        }
        let jet = self.solution.jet(x, t);
        let data = self.surface.normal_projection_curvature(x, t)?;
        let nu = data.normal;

        let material = jet.time_derivative + dot(data.velocity, jet.gradient);
        let div_v = surface_divergence(&self.surface.velocity_jacobian(t), nu);
        let grad_s = project_tangential(&data, jet.gradient);
        let lap_s = laplace_beltrami(&jet, nu, data.mean_curvature);
        let u = jet.value;
        let diffusion = self.coefficient.value(u) * lap_s
            + self.coefficient.derivative(u) * dot(grad_s, grad_s);
        Ok(material + u * div_v - diffusion)
    }
}

/// `Δ_Γu = Δu − νᵀ(D²u)ν − H ν·∇u`.
fn laplace_beltrami(jet: &Jet, nu: Vec3, mean_curvature: f64) -> f64 {
    let h = &jet.hessian;
    let trace = h[0][0] + h[1][1] + h[2][2];
    let nhn: f64 = (0..3)
        .map(|i| (0..3).map(|j| nu[i] * h[i][j] * nu[j]).sum::<f64>())
        .sum();
    trace - nhn - mean_curvature * dot(nu, jet.gradient)
}

/// `exp(-6t) x₁ x₂`.
pub fn exact_solution(x: Vec3, t: f64) -> f64 {
    ExactSolution::default().value(x, t)
}

pub fn exact_solution_surface_gradient(spec: &SurfaceSpec, x: Vec3, t: f64) -> Result<Vec3> {
    let data = spec.normal_projection_curvature(x, t)?;
    let jet = ExactSolution::default().jet(x, t);
    Ok(project_tangential(&data, jet.gradient))
}

/// Forcing of the benchmark problem on the surface `spec`.
pub fn manufactured_rhs_f(spec: &SurfaceSpec, x: Vec3, t: f64) -> Result<f64> {
    Problem {
        surface: *spec,
        ..Problem::default()
    }
    .rhs(x, t)
}

/// `L(w) = −∇_Γ·(𝒜(ξ)∇_Γw) + w` on the frozen surface `Γ(t)`.
pub fn elliptic_rhs(
    spec: &SurfaceSpec,
    coefficient: &Coefficient,
    xi: &ExactSolution,
    w: &ExactSolution,
    x: Vec3,
    t: f64,
) -> Result<f64> {
    let data = spec.normal_projection_curvature(x, t)?;
    let wj = w.jet(x, t);
    let xj = xi.jet(x, t);
    let grad_w = project_tangential(&data, wj.gradient);
    let grad_xi = project_tangential(&data, xj.gradient);
    let div = coefficient.value(xj.value) * laplace_beltrami(&wj, data.normal, data.mean_curvature)
        + coefficient.derivative(xj.value) * dot(grad_xi, grad_w);
    Ok(wj.value - div)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::{cross, norm, scale, sub};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const H: f64 = 1e-4;

    /// Orthonormal tangent basis at `x` built from the level-set gradient.
    fn tangent_basis(spec: &SurfaceSpec, x: Vec3, t: f64) -> [Vec3; 2] {
        let g = spec.level_set_gradient(x, t);
        let n = scale(g, 1.0 / norm(g));
        let helper = if n[0].abs() < 0.8 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let e1 = cross(n, helper);
        let e1 = scale(e1, 1.0 / norm(e1));
        let e2 = cross(n, e1);
        [e1, e2]
    }

    /// Tangential divergence of an ambient vector field by central differences.
    fn fd_surface_div(field: &dyn Fn(Vec3) -> Vec3, basis: &[Vec3; 2], x: Vec3) -> f64 {
        basis
            .iter()
            .map(|e| {
                let fp = field([x[0] + H * e[0], x[1] + H * e[1], x[2] + H * e[2]]);
                let fm = field([x[0] - H * e[0], x[1] - H * e[1], x[2] - H * e[2]]);
                dot(*e, scale(sub(fp, fm), 0.5 / H))
            })
            .sum()
    }

    /// Forcing computed from finite differences only: material derivative along
    /// the flow, and tangential divergences of the closed-form ambient fields.
    fn fd_rhs(problem: &Problem, x: Vec3, t: f64) -> f64 {
        let spec = &problem.surface;
        let u = |y: Vec3, s: f64| problem.solution.value(y, s);
        let x0 = spec.flow_map_inverse(x, t);
        let material = (u(spec.flow_map(x0, t + H).unwrap(), t + H)
            - u(spec.flow_map(x0, t - H).unwrap(), t - H))
            / (2.0 * H);
        let basis = tangent_basis(spec, x, t);
        let v = |y: Vec3| spec.material_velocity(y, t);
        let div_v = fd_surface_div(&v, &basis, x);
        let flux = |y: Vec3| {
            let g = spec.level_set_gradient(y, t);
            let n = scale(g, 1.0 / norm(g));
            let grad = problem.solution.jet(y, t).gradient;
            let tangential = sub(grad, scale(n, dot(n, grad)));
            scale(tangential, problem.coefficient.value(u(y, t)))
        };
        let div_flux = fd_surface_div(&flux, &basis, x);
        material + u(x, t) * div_v - div_flux
    }

    fn random_surface_point(spec: &SurfaceSpec, rng: &mut ChaCha8Rng, t: f64) -> Vec3 {
        loop {
            let v: Vec3 = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let n = norm(v);
            if n > 1e-3 && n <= 1.0 {
                return spec.flow_map(scale(v, 1.0 / n), t).unwrap();
            }
        }
    }

    #[test]
    fn exact_solution_values() {
        assert_eq!(exact_solution([1.0, 0.0, 0.0], 0.0), 0.0);
        let r = 0.5f64.sqrt();
        assert!((exact_solution([r, r, 0.0], 0.0) - 0.5).abs() < 1e-15);
        assert!((exact_solution([r, r, 0.0], 1.0) - 0.001_239_376_088_333_179).abs() < 1e-12);
    }

    #[test]
    fn surface_gradient_is_tangential() {
        let spec = SurfaceSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let t: f64 = rng.random_range(0.0..1.0);
            let x = random_surface_point(&spec, &mut rng, t);
            let g = exact_solution_surface_gradient(&spec, x, t).unwrap();
            let n = spec.normal_projection_curvature(x, t).unwrap().normal;
            assert!(dot(g, n).abs() < 1e-14);
        }
    }

    #[test]
    fn rhs_at_pole_vanishes() {
        let f = manufactured_rhs_f(&SurfaceSpec::default(), [0.0, 0.0, 1.0], 0.0).unwrap();
        assert!(f.abs() < 1e-15);
    }

    #[test]
    fn rhs_matches_tangential_finite_differences() {
        let problem = Problem::benchmark();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut worst: f64 = 0.0;
        for k in 0..20 {
            let t = 0.025 + 0.05 * k as f64;
            for _ in 0..200 {
                let x = random_surface_point(&problem.surface, &mut rng, t);
                let f = problem.rhs(x, t).unwrap();
                let oracle = fd_rhs(&problem, x, t);
                worst = worst.max((f - oracle).abs());
            }
        }
        assert!(worst < 1e-5, "worst deviation {worst:e}");
        // single-point agreement at the tighter tolerance
        let x = random_surface_point(&problem.surface, &mut rng, 0.3);
        assert!((problem.rhs(x, 0.3).unwrap() - fd_rhs(&problem, x, 0.3)).abs() < 1e-6);
    }

    #[test]
    fn linear_consistency() {
        let problem = Problem {
            coefficient: Coefficient::Constant(1.0),
            solution: ExactSolution::Affine {
                gradient: [0.3, -1.2, 0.7],
                offset: 0.4,
            },
            ..Problem::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 0..10 {
            let t = 0.1 * k as f64 + 0.03;
            for _ in 0..20 {
                let x = random_surface_point(&problem.surface, &mut rng, t);
                let f = problem.rhs(x, t).unwrap();
                // closed form for affine u: Δ_Γu = −H ν·∇u
                let d = problem.surface.normal_projection_curvature(x, t).unwrap();
                let g = [0.3, -1.2, 0.7];
                let lap = -d.mean_curvature * dot(d.normal, g);
                let div_v = surface_divergence(&problem.surface.velocity_jacobian(t), d.normal);
                let u = problem.exact(x, t);
                let closed = dot(d.velocity, g) + u * div_v - lap;
                assert!((f - closed).abs() < 1e-12);
                let fd = fd_rhs(&problem, x, t);
                assert!((f - fd).abs() < 1e-6, "{f} vs {fd}");
            }
        }
    }

    #[test]
    fn zero_forcing() {
        let problem = Problem {
            forcing: Forcing::Zero,
            ..Problem::default()
        };
        assert_eq!(problem.rhs([0.6, 0.8, 0.0], 0.2).unwrap(), 0.0);
    }

    #[test]
    fn elliptic_rhs_of_constant_is_constant() {
        let spec = SurfaceSpec::default();
        let x = spec.flow_map([0.6, 0.0, 0.8], 0.5).unwrap();
        let g = elliptic_rhs(
            &spec,
            &Coefficient::Constant(1.0),
            &ExactSolution::default(),
            &ExactSolution::constant(2.5),
            x,
            0.5,
        )
        .unwrap();
        assert!((g - 2.5).abs() < 1e-15);
    }
}
