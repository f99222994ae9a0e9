//! Closed-form description of the evolving test surface
//! `Γ(t) = { x : x₁²/a(t) + x₂² + x₃² = 1 }`, `a(t) = 1 + A sin(2πt/P)`,
//! together with the manufactured solution and its forcing term.

mod coefficient;
mod manufactured;

pub use coefficient::{coefficient_a, coefficient_a_prime, Coefficient};
pub use manufactured::{
    elliptic_rhs, exact_solution, exact_solution_surface_gradient, manufactured_rhs_f,
    ExactSolution, Forcing, Jet, Problem,
};

use crate::error::{EsfemError, Result};
use crate::vec3::{dot, mat_vec, norm, scale, Mat3, Vec3};
use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const ON_SURFACE_TOL: f64 = 1e-10;
const SINGULAR_GRAD_TOL: f64 = 1e-10;
const PROJECTION_MAX_ITER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    OscillatingEllipsoid,
    UnitSphere,
}

/// Parameters of the evolving surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    pub amplitude: f64,
    pub period: f64,
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        SurfaceSpec {
            kind: SurfaceKind::OscillatingEllipsoid,
            amplitude: 0.25,
            period: 1.0,
        }
    }
}

/// Normal, tangential projection, mean curvature and material velocity at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePointData {
    pub normal: Vec3,
    pub projection: Mat3,
    pub mean_curvature: f64,
    pub velocity: Vec3,
}

impl SurfaceSpec {
    pub fn new(kind: SurfaceKind, amplitude: f64, period: f64) -> Result<Self> {
        let spec = SurfaceSpec {
            kind,
            amplitude,
            period,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn unit_sphere() -> Self {
        SurfaceSpec {
            kind: SurfaceKind::UnitSphere,
            amplitude: 0.0,
            period: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == SurfaceKind::OscillatingEllipsoid {
            if !(self.amplitude.abs() < 1.0) {
                return Err(EsfemError::InvalidArgument(format!(
                    "surface amplitude must satisfy |amplitude| < 1, got {}",
                    self.amplitude
                )));
            }
            if !(self.period > 0.0) {
                return Err(EsfemError::InvalidArgument(format!(
                    "surface period must be positive, got {}",
                    self.period
                )));
            }
        }
        Ok(())
    }

    /// Squared semi-axis along x₁.
    pub fn a(&self, t: f64) -> f64 {
        match self.kind {
            SurfaceKind::UnitSphere => 1.0,
            SurfaceKind::OscillatingEllipsoid => {
                1.0 + self.amplitude * (2.0 * PI * t / self.period).sin()
            }
        }
    }

    pub fn a_prime(&self, t: f64) -> f64 {
        match self.kind {
            SurfaceKind::UnitSphere => 0.0,
            SurfaceKind::OscillatingEllipsoid => {
                let w = 2.0 * PI / self.period;
                self.amplitude * w * (w * t).cos()
            }
        }
    }

    pub fn level_set(&self, x: Vec3, t: f64) -> f64 {
        x[0] * x[0] / self.a(t) + x[1] * x[1] + x[2] * x[2] - 1.0
    }

    pub fn level_set_gradient(&self, x: Vec3, t: f64) -> Vec3 {
        [2.0 * x[0] / self.a(t), 2.0 * x[1], 2.0 * x[2]]
    }

    /// The level-set Hessian is constant in space: `diag(2/a, 2, 2)`.
    pub fn level_set_hessian_diag(&self, t: f64) -> Vec3 {
        [2.0 / self.a(t), 2.0, 2.0]
    }

    /// Maps a point `X` of `Γ(0)` to its position on `Γ(t)`.
    pub fn flow_map(&self, x0: Vec3, t: f64) -> Result<Vec3> {
        let value = self.level_set(x0, 0.0);
        if value.abs() > ON_SURFACE_TOL {
            return Err(EsfemError::NotOnSurface { point: x0, value });
        }
        let s = (self.a(t) / self.a(0.0)).sqrt();
        Ok([s * x0[0], x0[1], x0[2]])
    }

    /// Inverse of [`flow_map`](Self::flow_map), without the on-surface check.
    pub fn flow_map_inverse(&self, x: Vec3, t: f64) -> Vec3 {
        let s = (self.a(0.0) / self.a(t)).sqrt();
        [s * x[0], x[1], x[2]]
    }

    pub fn material_velocity(&self, x: Vec3, t: f64) -> Vec3 {
        [self.a_prime(t) / (2.0 * self.a(t)) * x[0], 0.0, 0.0]
    }

    /// Ambient Jacobian of the velocity field (constant in space).
    pub fn velocity_jacobian(&self, t: f64) -> Mat3 {
        let mut j = [[0.0; 3]; 3];
        j[0][0] = self.a_prime(t) / (2.0 * self.a(t));
        j
    }

    pub fn normal_projection_curvature(&self, x: Vec3, t: f64) -> Result<SurfacePointData> {
        let g = self.level_set_gradient(x, t);
        let gnorm = norm(g);
        if gnorm < SINGULAR_GRAD_TOL {
            return Err(EsfemError::Singular {
                point: x,
                norm: gnorm,
            });
        }
        let nu = scale(g, 1.0 / gnorm);
        let hess = self.level_set_hessian_diag(t);
        // div(∇φ/|∇φ|) = (tr D²φ - νᵀ D²φ ν) / |∇φ|
        let trace: f64 = hess.iter().sum();
        let nhn: f64 = (0..3).map(|i| hess[i] * nu[i] * nu[i]).sum();
        Ok(SurfacePointData {
            normal: nu,
            projection: tangential_projection(nu),
            mean_curvature: (trace - nhn) / gnorm,
            velocity: self.material_velocity(x, t),
        })
    }

    /// Projects `x` onto `Γ(t)` along the surface normal at the foot point.
    ///
    /// Solves `p + λ∇φ(p) = x`, `φ(p) = 0` by damped Newton.
    pub fn closest_point(&self, x: Vec3, t: f64) -> Result<Vec3> {
        let hess = self.level_set_hessian_diag(t);
        let radial = self.level_set(x, t) + 1.0;
        let mut p = if radial > 1e-12 {
            scale(x, 1.0 / radial.sqrt())
        } else {
            x
        };
        let mut lambda = 0.0;

        let residual = |p: Vec3, lambda: f64| -> Vector4<f64> {
            let g = self.level_set_gradient(p, t);
            Vector4::new(
                p[0] + lambda * g[0] - x[0],
                p[1] + lambda * g[1] - x[1],
                p[2] + lambda * g[2] - x[2],
                self.level_set(p, t),
            )
        };
        let scale_x = 1.0 + norm(x);
        let mut f = residual(p, lambda);
        for _ in 0..PROJECTION_MAX_ITER {
            let fnorm = f.norm();
            if fnorm <= 1e-15 * scale_x {
                return Ok(p);
            }
            let g = self.level_set_gradient(p, t);
            let mut jac = Matrix4::zeros();
            for i in 0..3 {
                jac[(i, i)] = 1.0 + lambda * hess[i];
                jac[(i, 3)] = g[i];
                jac[(3, i)] = g[i];
            }
            let step = jac
                .lu()
                .solve(&(-f))
                .ok_or(EsfemError::ProjectionFailed {
                    iterations: 0,
                    residual: fnorm,
                })?;
            let mut damping = 1.0;
            let mut accepted = false;
            while damping >= 1e-4 {
                let trial_p = [
                    p[0] + damping * step[0],
                    p[1] + damping * step[1],
                    p[2] + damping * step[2],
                ];
                let trial_lambda = lambda + damping * step[3];
                let trial_f = residual(trial_p, trial_lambda);
                if trial_f.norm() < fnorm {
                    p = trial_p;
                    lambda = trial_lambda;
                    f = trial_f;
                    accepted = true;
                    break;
                }
                damping *= 0.5;
            }
            if !accepted {
                // no descent left: round-off floor
                break;
            }
        }
        let fnorm = f.norm();
        if fnorm <= 1e-13 * scale_x {
            return Ok(p);
        }
        Err(EsfemError::ProjectionFailed {
            iterations: PROJECTION_MAX_ITER,
            residual: fnorm,
        })
    }
}

/// `I - ννᵀ`.
pub fn tangential_projection(nu: Vec3) -> Mat3 {
    let mut p = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            p[i][j] = if i == j { 1.0 } else { 0.0 } - nu[i] * nu[j];
        }
    }
    p
}

/// Tangential component of an ambient vector.
pub fn project_tangential(data: &SurfacePointData, v: Vec3) -> Vec3 {
    mat_vec(&data.projection, v)
}

/// Surface divergence `tr(J) - νᵀ J ν` of an ambient field with Jacobian `J`.
pub fn surface_divergence(jacobian: &Mat3, nu: Vec3) -> f64 {
    let trace = jacobian[0][0] + jacobian[1][1] + jacobian[2][2];
    trace - dot(nu, mat_vec(jacobian, nu))
}
