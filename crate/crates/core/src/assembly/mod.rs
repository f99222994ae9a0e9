//! Piecewise-linear finite element operators on a triangulated surface.
//!
//! All matrices share one sparsity pattern per mesh topology. Element
//! contributions are scattered into it in element order, so assembly is
//! bit-reproducible.

mod quadrature;

pub use quadrature::QuadratureRule;

use crate::error::{EsfemError, Result};
use crate::geometry::{Coefficient, SurfaceSpec};
use crate::linalg::CsrMatrix;
use crate::mesh::MeshAt;
use crate::vec3::{barycentric, cross, dot, norm, scale, sub, Vec3};
use std::collections::BTreeSet;

/// Area and constant tangential basis gradients of one flat triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub area: f64,
    pub grads: [Vec3; 3],
}

impl ElementGeometry {
    pub fn new(index: usize, p: &[Vec3; 3]) -> Result<Self> {
        let n = cross(sub(p[1], p[0]), sub(p[2], p[0]));
        let twice_area = norm(n);
        if !(twice_area > 0.0) {
            return Err(EsfemError::DegenerateTriangle {
                index,
                area: 0.5 * twice_area,
            });
        }
        let unit = scale(n, 1.0 / twice_area);
        let grad = |a: Vec3, b: Vec3| scale(cross(unit, sub(b, a)), 1.0 / twice_area);
        Ok(ElementGeometry {
            area: 0.5 * twice_area,
            grads: [grad(p[1], p[2]), grad(p[2], p[0]), grad(p[0], p[1])],
        })
    }

    /// `∇_{Γ_h} Σ αᵢ λᵢ` on this element.
    pub fn gradient_of(&self, local: [f64; 3]) -> Vec3 {
        let mut g = [0.0; 3];
        for (gi, a) in self.grads.iter().zip(local) {
            for d in 0..3 {
                g[d] += a * gi[d];
            }
        }
        g
    }
}

/// Mass, linear stiffness and time of one mesh snapshot.
#[derive(Debug, Clone)]
pub struct FemOperators {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub time: f64,
}

/// Sparsity pattern and element scatter map for a fixed topology.
#[derive(Debug, Clone)]
pub struct Assembler {
    n: usize,
    triangles: Vec<[usize; 3]>,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    scatter: Vec<[usize; 9]>,
    /// Rule for solution-dependent coefficients.
    pub rule: QuadratureRule,
    /// Rule for load vectors.
    pub load_rule: QuadratureRule,
}

impl Assembler {
    pub fn new(triangles: &[[usize; 3]], n_vertices: usize) -> Self {
        let mut neighbours = vec![BTreeSet::new(); n_vertices];
        for t in triangles {
            for &a in t {
                for &b in t {
                    neighbours[a].insert(b);
                }
            }
        }
        let mut row_offsets = Vec::with_capacity(n_vertices + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        for set in &neighbours {
            col_indices.extend(set.iter().copied());
            row_offsets.push(col_indices.len());
        }
        let position = |r: usize, c: usize| -> usize {
            let row = &col_indices[row_offsets[r]..row_offsets[r + 1]];
            row_offsets[r] + row.binary_search(&c).expect("pattern contains element couplings")
        };
        let scatter = triangles
            .iter()
            .map(|t| {
                let mut s = [0; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        s[3 * a + b] = position(t[a], t[b]);
                    }
                }
                s
            })
            .collect();
        Assembler {
            n: n_vertices,
            triangles: triangles.to_vec(),
            row_offsets,
            col_indices,
            scatter,
            rule: QuadratureRule::edge_midpoint(),
            load_rule: QuadratureRule::six_point(),
        }
    }

    pub fn for_mesh(mesh: &MeshAt<'_>) -> Self {
        Assembler::new(mesh.triangles, mesh.n_vertices())
    }

    pub fn n_dofs(&self) -> usize {
        self.n
    }

    fn empty(&self) -> CsrMatrix {
        CsrMatrix {
            nrows: self.n,
            ncols: self.n,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: vec![0.0; self.col_indices.len()],
        }
    }

    fn check_mesh(&self, mesh: &MeshAt<'_>) -> Result<()> {
        if mesh.n_vertices() != self.n {
            return Err(EsfemError::DimensionMismatch {
                expected: self.n,
                got: mesh.n_vertices(),
            });
        }
        Ok(())
    }

    fn check_len(&self, v: &[f64], per_node: usize) -> Result<()> {
        if v.len() != per_node * self.n {
            return Err(EsfemError::DimensionMismatch {
                expected: per_node * self.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Element loop; `local` fills a row-major 3×3 element matrix.
    fn assemble_matrix(
        &self,
        mesh: &MeshAt<'_>,
        mut local: impl FnMut(usize, &ElementGeometry, &mut [f64; 9]),
    ) -> Result<CsrMatrix> {
        self.check_mesh(mesh)?;
        let mut out = self.empty();
        let mut element = [0.0; 9];
        for (e, scatter) in self.scatter.iter().enumerate() {
            let geo = ElementGeometry::new(e, &mesh.corners(e))?;
            element.fill(0.0);
            local(e, &geo, &mut element);
            for (k, &pos) in scatter.iter().enumerate() {
                out.values[pos] += element[k];
            }
        }
        Ok(out)
    }

    pub fn mass(&self, mesh: &MeshAt<'_>) -> Result<CsrMatrix> {
        self.assemble_matrix(mesh, |_, geo, m| {
            let off = geo.area / 12.0;
            for a in 0..3 {
                for b in 0..3 {
                    m[3 * a + b] = if a == b { 2.0 * off } else { off };
                }
            }
        })
    }

    pub fn stiffness_linear(&self, mesh: &MeshAt<'_>) -> Result<CsrMatrix> {
        self.assemble_matrix(mesh, |_, geo, m| {
            for a in 0..3 {
                for b in 0..3 {
                    m[3 * a + b] = geo.area * dot(geo.grads[a], geo.grads[b]);
                }
            }
        })
    }

    pub fn operators(&self, mesh: &MeshAt<'_>) -> Result<FemOperators> {
        Ok(FemOperators {
            mass: self.mass(mesh)?,
            stiffness: self.stiffness_linear(mesh)?,
            time: mesh.time,
        })
    }

    fn local_values(&self, e: usize, alpha: &[f64]) -> [f64; 3] {
        let t = self.triangles[e];
        [alpha[t[0]], alpha[t[1]], alpha[t[2]]]
    }

    /// `A(α)_{kj} = ∫ 𝒜(U_h) ∇χ_j·∇χ_k` with `𝒜(U_h)` sampled at the
    /// quadrature points of [`Self::rule`].
    pub fn stiffness_nonlinear(
        &self,
        mesh: &MeshAt<'_>,
        coefficient: &Coefficient,
        alpha: &[f64],
    ) -> Result<CsrMatrix> {
        self.check_len(alpha, 1)?;
        self.assemble_matrix(mesh, |e, geo, m| {
            let local = self.local_values(e, alpha);
            let mean_coeff: f64 = self
                .rule
                .iter()
                .map(|(l, w)| w * coefficient.value(dot(*l, local)))
                .sum();
            for a in 0..3 {
                for b in 0..3 {
                    m[3 * a + b] = geo.area * mean_coeff * dot(geo.grads[a], geo.grads[b]);
                }
            }
        })
    }

    /// `N(α)_{kj} = ∫ 𝒜'(U_h) χ_j (∇U_h·∇χ_k)`, so that the Jacobian of
    /// `α ↦ A(α)α` is `A(α) + N(α)`.
    pub fn newton_correction(
        &self,
        mesh: &MeshAt<'_>,
        coefficient: &Coefficient,
        alpha: &[f64],
    ) -> Result<CsrMatrix> {
        self.check_len(alpha, 1)?;
        self.assemble_matrix(mesh, |e, geo, m| {
            let local = self.local_values(e, alpha);
            let grad_u = geo.gradient_of(local);
            // weighted means of 𝒜'(U_h) λ_j over the rule
            let mut weighted = [0.0; 3];
            for (l, w) in self.rule.iter() {
                let d = coefficient.derivative(dot(*l, local));
                for j in 0..3 {
                    weighted[j] += w * d * l[j];
                }
            }
            for k in 0..3 {
                let flux = dot(grad_u, geo.grads[k]);
                for j in 0..3 {
                    m[3 * k + j] = geo.area * weighted[j] * flux;
                }
            }
        })
    }

    /// `G_{kj} = ∫ (∇_{Γ_h}·V_h) χ_j χ_k` for nodal velocities laid out vertex-major.
    pub fn gform(&self, mesh: &MeshAt<'_>, velocity: &[f64]) -> Result<CsrMatrix> {
        self.check_len(velocity, 3)?;
        self.assemble_matrix(mesh, |e, geo, m| {
            let t = self.triangles[e];
            let div: f64 = (0..3)
                .map(|a| {
                    let v = [velocity[3 * t[a]], velocity[3 * t[a] + 1], velocity[3 * t[a] + 2]];
                    dot(v, geo.grads[a])
                })
                .sum();
            let off = div * geo.area / 12.0;
            for a in 0..3 {
                for b in 0..3 {
                    m[3 * a + b] = if a == b { 2.0 * off } else { off };
                }
            }
        })
    }

    /// `b_k = Σ_E |E| Σ_q w_q f(x_q, t) λ_k(x_q)` with [`Self::load_rule`].
    ///
    /// Quadrature nodes lie on the flat triangles unless `lift` is given, in
    /// which case they are projected onto the exact surface first.
    pub fn load(
        &self,
        mesh: &MeshAt<'_>,
        f: impl Fn(Vec3, f64) -> Result<f64>,
        lift: Option<&SurfaceSpec>,
    ) -> Result<Vec<f64>> {
        self.check_mesh(mesh)?;
        let mut b = vec![0.0; self.n];
        for (e, t) in self.triangles.iter().enumerate() {
            let p = mesh.corners(e);
            let geo = ElementGeometry::new(e, &p)?;
            let mut local = [0.0; 3];
            for (l, w) in self.load_rule.iter() {
                let mut x = barycentric(&p, *l);
                if let Some(spec) = lift {
                    x = spec.closest_point(x, mesh.time)?;
                }
                let fx = f(x, mesh.time)?;
                for k in 0..3 {
                    local[k] += w * fx * l[k];
                }
            }
            for k in 0..3 {
                b[t[k]] += geo.area * local[k];
            }
        }
        Ok(b)
    }

    /// `(Σ_E |E| Σ_q w_q (U_h − u)²)^{1/2}` with `u` evaluated at the quadrature
    /// nodes (lifted onto the surface when `lift` is given).
    pub fn l2_error(
        &self,
        mesh: &MeshAt<'_>,
        alpha: &[f64],
        exact: impl Fn(Vec3) -> f64,
        lift: Option<&SurfaceSpec>,
    ) -> Result<f64> {
        self.check_len(alpha, 1)?;
        let mut sum = 0.0;
        for e in 0..self.triangles.len() {
            let p = mesh.corners(e);
            let geo = ElementGeometry::new(e, &p)?;
            let local = self.local_values(e, alpha);
            for (l, w) in self.load_rule.iter() {
                let mut x = barycentric(&p, *l);
                if let Some(spec) = lift {
                    x = spec.closest_point(x, mesh.time)?;
                }
                let d = dot(*l, local) - exact(x);
                sum += geo.area * w * d * d;
            }
        }
        Ok(sum.sqrt())
    }

    /// `(Σ_E |E| Σ_q w_q |∇_{Γ_h}U_h − ∇_Γu|²)^{1/2}` where `grad` returns the
    /// surface gradient at a point of `Γ(t)`; nodes are lifted by closest point.
    pub fn h1_seminorm_error(
        &self,
        mesh: &MeshAt<'_>,
        alpha: &[f64],
        spec: &SurfaceSpec,
        grad: impl Fn(Vec3) -> Result<Vec3>,
    ) -> Result<f64> {
        self.check_len(alpha, 1)?;
        let mut sum = 0.0;
        for e in 0..self.triangles.len() {
            let p = mesh.corners(e);
            let geo = ElementGeometry::new(e, &p)?;
            let gh = geo.gradient_of(self.local_values(e, alpha));
            for (l, w) in self.load_rule.iter() {
                let x = spec.closest_point(barycentric(&p, *l), mesh.time)?;
                let d = sub(gh, grad(x)?);
                sum += geo.area * w * dot(d, d);
            }
        }
        Ok(sum.sqrt())
    }
}

pub fn assemble_mass(mesh: &MeshAt<'_>) -> Result<CsrMatrix> {
    Assembler::for_mesh(mesh).mass(mesh)
}

pub fn assemble_stiffness_linear(mesh: &MeshAt<'_>) -> Result<CsrMatrix> {
    Assembler::for_mesh(mesh).stiffness_linear(mesh)
}

pub fn assemble_stiffness_nonlinear(
    mesh: &MeshAt<'_>,
    coefficient: &Coefficient,
    alpha: &[f64],
) -> Result<CsrMatrix> {
    Assembler::for_mesh(mesh).stiffness_nonlinear(mesh, coefficient, alpha)
}

pub fn assemble_newton_correction(
    mesh: &MeshAt<'_>,
    coefficient: &Coefficient,
    alpha: &[f64],
) -> Result<CsrMatrix> {
    Assembler::for_mesh(mesh).newton_correction(mesh, coefficient, alpha)
}

pub fn assemble_load(
    mesh: &MeshAt<'_>,
    f: impl Fn(Vec3, f64) -> Result<f64>,
) -> Result<Vec<f64>> {
    Assembler::for_mesh(mesh).load(mesh, f, None)
}

pub fn assemble_gform(mesh: &MeshAt<'_>, velocity: &[f64]) -> Result<CsrMatrix> {
    Assembler::for_mesh(mesh).gform(mesh, velocity)
}

fn discrete_norm(matrix: &CsrMatrix, z: &[f64]) -> Result<f64> {
    let q = matrix.quadratic_form(z)?;
    let scale: f64 = z.iter().map(|v| v * v).sum::<f64>()
        * matrix.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if q < -1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(EsfemError::NegativeQuadraticForm { value: q });
    }
    Ok(q.max(0.0).sqrt())
}

/// `|z|_M = ‖Z_h‖_{L²(Γ_h)}`.
pub fn discrete_norm_m(mass: &CsrMatrix, z: &[f64]) -> Result<f64> {
    discrete_norm(mass, z)
}

/// `|z|_A = ‖∇_{Γ_h}Z_h‖_{L²(Γ_h)}`.
pub fn discrete_norm_a(stiffness: &CsrMatrix, z: &[f64]) -> Result<f64> {
    discrete_norm(stiffness, z)
}

pub fn nodal_interpolant(mesh: &MeshAt<'_>, f: impl Fn(Vec3, f64) -> f64) -> Vec<f64> {
    mesh.positions.iter().map(|&x| f(x, mesh.time)).collect()
}
