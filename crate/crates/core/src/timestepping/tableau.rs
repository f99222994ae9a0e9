use crate::error::{EsfemError, Result};
use crate::linalg::DenseMatrix;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

/// Butcher tableau of an implicit Runge–Kutta method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ButcherTableau {
    pub stages: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub order: usize,
    pub stage_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraicStability {
    pub b_positive: bool,
    /// Eigenvalues of `(b_i a_ij + b_j a_ji − b_i b_j)`, ascending.
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub stable: bool,
}

/// Radau IIA with `s ∈ {1, 2, 3}` stages.
pub fn radau_iia(s: usize) -> Result<ButcherTableau> {
    match s {
        1 => Ok(ButcherTableau {
            stages: 1,
            a: vec![vec![1.0]],
            b: vec![1.0],
            c: vec![1.0],
            order: 1,
            stage_order: 1,
        }),
        2 => Ok(ButcherTableau {
            stages: 2,
            a: vec![vec![5.0 / 12.0, -1.0 / 12.0], vec![0.75, 0.25]],
            b: vec![0.75, 0.25],
            c: vec![1.0 / 3.0, 1.0],
            order: 3,
            stage_order: 2,
        }),
        3 => {
            let r = 6f64.sqrt();
            let a = vec![
                vec![
                    (88.0 - 7.0 * r) / 360.0,
                    (296.0 - 169.0 * r) / 1800.0,
                    (-2.0 + 3.0 * r) / 225.0,
                ],
                vec![
                    (296.0 + 169.0 * r) / 1800.0,
                    (88.0 + 7.0 * r) / 360.0,
                    (-2.0 - 3.0 * r) / 225.0,
                ],
                vec![(16.0 - r) / 36.0, (16.0 + r) / 36.0, 1.0 / 9.0],
            ];
            Ok(ButcherTableau {
                stages: 3,
                b: a[2].clone(),
                a,
                c: vec![(4.0 - r) / 10.0, (4.0 + r) / 10.0, 1.0],
                order: 5,
                stage_order: 3,
            })
        }
        _ => Err(EsfemError::InvalidArgument(format!(
            "Radau IIA is available for 1..=3 stages, got {s}"
        ))),
    }
}

impl ButcherTableau {
    pub fn explicit_euler() -> Self {
        ButcherTableau {
            stages: 1,
            a: vec![vec![0.0]],
            b: vec![1.0],
            c: vec![0.0],
            order: 1,
            stage_order: 1,
        }
    }

    /// `b_j = a_sj` and `c_s = 1`.
    pub fn is_stiffly_accurate(&self, tol: f64) -> bool {
        let s = self.stages;
        (self.c[s - 1] - 1.0).abs() <= tol
            && (0..s).all(|j| (self.b[j] - self.a[s - 1][j]).abs() <= tol)
    }

    fn a_dense(&self) -> DenseMatrix {
        let s = self.stages;
        let mut m = DenseMatrix::zeros(s, s);
        for i in 0..s {
            for j in 0..s {
                m[(i, j)] = self.a[i][j];
            }
        }
        m
    }

    /// Inverse of the coefficient matrix, row-major.
    pub fn a_inverse(&self) -> Result<Vec<Vec<f64>>> {
        let s = self.stages;
        let a = self.a_dense();
        let mut inv = vec![vec![0.0; s]; s];
        for j in 0..s {
            let mut e = vec![0.0; s];
            e[j] = 1.0;
            let col = a.lu_solve(&e)?;
            for i in 0..s {
                inv[i][j] = col[i];
            }
        }
        Ok(inv)
    }

    pub fn is_invertible(&self) -> bool {
        self.a_inverse().is_ok()
    }

    /// Residuals of `Σ b_i c_i^{m−1} = 1/m`, `m = 1..=order`.
    pub fn quadrature_order_defects(&self) -> Vec<f64> {
        (1..=self.order)
            .map(|m| {
                let s: f64 = self
                    .b
                    .iter()
                    .zip(&self.c)
                    .map(|(b, c)| b * c.powi(m as i32 - 1))
                    .sum();
                s - 1.0 / m as f64
            })
            .collect()
    }

    /// Largest residual of `Σ_j a_ij c_j^{m−1} = c_i^m/m`, `m = 1..=stage_order`.
    pub fn stage_order_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 1..=self.stage_order {
            for i in 0..self.stages {
                let lhs: f64 = (0..self.stages)
                    .map(|j| self.a[i][j] * self.c[j].powi(m as i32 - 1))
                    .sum();
                worst = worst.max((lhs - self.c[i].powi(m as i32) / m as f64).abs());
            }
        }
        worst
    }
}

pub fn check_algebraic_stability(tableau: &ButcherTableau) -> AlgebraicStability {
    let s = tableau.stages;
    let (a, b) = (&tableau.a, &tableau.b);
    let m = DMatrix::from_fn(s, s, |i, j| b[i] * a[i][j] + b[j] * a[j][i] - b[i] * b[j]);
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let min_eigenvalue = eigenvalues[0];
    let b_positive = b.iter().all(|&x| x > 0.0);
    AlgebraicStability {
        b_positive,
        stable: b_positive && min_eigenvalue >= -1e-12,
        eigenvalues,
        min_eigenvalue,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_euler_tableau() {
        let t = radau_iia(1).unwrap();
        assert_eq!((t.a.clone(), t.b.clone(), t.c.clone()), (vec![vec![1.0]], vec![1.0], vec![1.0]));
        let st = check_algebraic_stability(&t);
        assert!(st.stable);
        assert!((st.eigenvalues[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn radau2_order_conditions() {
        let t = radau_iia(2).unwrap();
        for d in t.quadrature_order_defects() {
            assert!(d.abs() < 1e-15);
        }
        assert!(t.stage_order_defect() < 1e-15);
        let st = check_algebraic_stability(&t);
        assert!(st.stable && st.min_eigenvalue >= -1e-12);
    }

    #[test]
    fn radau3_order_conditions() {
        let t = radau_iia(3).unwrap();
        for d in t.quadrature_order_defects() {
            assert!(d.abs() < 1e-14);
        }
        assert!(t.stage_order_defect() < 1e-14);
    }

    #[test]
    fn shipped_tableaus_satisfy_assumptions() {
        for s in 1..=3 {
            let t = radau_iia(s).unwrap();
            assert!(t.is_stiffly_accurate(1e-15), "s={s}");
            assert!(t.is_invertible());
            assert!(check_algebraic_stability(&t).stable, "s={s}");
            assert!(t.order >= t.stage_order + 1 || s == 1);
        }
        assert!(radau_iia(4).is_err());
    }

    #[test]
    fn explicit_euler_is_not_algebraically_stable() {
        let t = ButcherTableau::explicit_euler();
        let st = check_algebraic_stability(&t);
        assert!(!st.stable);
        assert!((st.min_eigenvalue + 1.0).abs() < 1e-15);
        assert!(!t.is_invertible());
    }

    #[test]
    fn inverse_is_inverse() {
        let t = radau_iia(3).unwrap();
        let inv = t.a_inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let p: f64 = (0..3).map(|k| t.a[i][k] * inv[k][j]).sum();
                assert!((p - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }
}
