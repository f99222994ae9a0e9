use super::{axpy, dot, norm2, CsrMatrix};
use crate::error::{EsfemError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn jacobi(a: &CsrMatrix) -> Result<Vec<f64>> {
    a.diagonal()
        .iter()
        .enumerate()
        .map(|(row, &d)| {
            if d == 0.0 {
                Err(EsfemError::ZeroDiagonal { row })
            } else {
                Ok(1.0 / d)
            }
        })
        .collect()
}

fn check_square(a: &CsrMatrix, b: &[f64]) -> Result<()> {
    if a.nrows != a.ncols {
        return Err(EsfemError::DimensionMismatch {
            expected: a.nrows,
            got: a.ncols,
        });
    }
    if b.len() != a.nrows {
        return Err(EsfemError::DimensionMismatch {
            expected: a.nrows,
            got: b.len(),
        });
    }
    if !super::all_finite(b) {
        return Err(EsfemError::InvalidArgument(
            "right-hand side has non-finite entries".into(),
        ));
    }
    Ok(())
}

/// Jacobi-preconditioned conjugate gradients for SPD `A`, started from zero.
///
/// Stops once `‖Ax − b‖₂ ≤ tol·‖b‖₂`.
pub fn cg_solve(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    check_square(a, b)?;
    let inv_diag = jacobi(a)?;
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rnorm = bnorm;
    for it in 1..=max_iter {
        a.spmv_into(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(EsfemError::LinearSolveFailed {
                solver: "cg",
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        rnorm = norm2(&r);
        if rnorm <= tol * bnorm {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    relative_residual: rnorm / bnorm,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(EsfemError::LinearSolveFailed {
        solver: "cg",
        iterations: max_iter,
        residual: rnorm / bnorm,
    })
}

/// Restarted GMRES with right Jacobi preconditioning, for nonsymmetric systems.
pub fn gmres_solve(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    check_square(a, b)?;
    let inv_diag = jacobi(a)?;
    let n = b.len();
    let m = restart.max(1);
    let bnorm = norm2(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut total = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    loop {
        let ax = a.spmv(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta <= tol * bnorm {
            return Ok((
                x,
                SolveStats {
                    iterations: total,
                    relative_residual: beta / bnorm,
                },
            ));
        }
        if total >= max_iter {
            return Err(EsfemError::LinearSolveFailed {
                solver: "gmres",
                iterations: total,
                residual: beta / bnorm,
            });
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            for i in 0..n {
                z[i] = basis[k][i] * inv_diag[i];
            }
            a.spmv_into(&z, &mut w)?;
            for (j, vj) in basis.iter().enumerate() {
                let h = dot(&w, vj);
                hess[j][k] = h;
                axpy(-h, vj, &mut w);
            }
            let h_next = norm2(&w);
            hess[k + 1][k] = h_next;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                break;
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            if g[k + 1].abs() <= 0.5 * tol * bnorm || h_next == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| hess[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &basis[j], &mut update);
        }
        for i in 0..n {
            x[i] += update[i] * inv_diag[i];
        }
        if k_used == 0 {
            return Err(EsfemError::LinearSolveFailed {
                solver: "gmres",
                iterations: total,
                residual: beta / bnorm,
            });
        }
    }
}

/// `√(wᵀ(S+M)⁻¹w)` with `w = M r`.
pub fn dual_norm(m: &CsrMatrix, s: &CsrMatrix, r: &[f64], tol: f64) -> Result<f64> {
    let w = m.spmv(r)?;
    let sm = CsrMatrix::linear_combination(&[(1.0, s), (1.0, m)])?;
    let (y, _) = cg_solve(&sm, &w, tol, 10 * w.len() + 100)?;
    Ok(dot(&w, &y).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut v: f64 = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum();
                if i == j {
                    v += 1.0;
                }
                triplets.push((i, j, v));
            }
        }
        CsrMatrix::from_triplets(n, n, &triplets).unwrap()
    }

    fn rel_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.spmv(x).unwrap();
        norm2(&crate::linalg::sub(&ax, b)) / norm2(b)
    }

    #[test]
    fn identity_in_one_iteration() {
        let b = [1.0, -2.0, 3.5, 0.25];
        let (x, stats) = cg_solve(&CsrMatrix::identity(4), &b, 1e-14, 10).unwrap();
        assert_eq!(x, b.to_vec());
        assert_eq!(stats.iterations, 1);
    }

    #[test]
    fn diagonal_system() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let (x, _) = cg_solve(&a, &[1.0; 5], 1e-14, 10).unwrap();
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - 1.0 / (i + 1) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn random_spd_residual() {
        let a = random_spd(50, 2024);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let (x, _) = cg_solve(&a, &b, 1e-12, 1000).unwrap();
        assert!(rel_residual(&a, &x, &b) <= 1e-12);
        let (x2, _) = cg_solve(&a, &b, 1e-12, 1000).unwrap();
        assert_eq!(x, x2);
    }

    #[test]
    fn cg_matches_dense_oracle() {
        for (n, seed) in [(10, 1), (80, 2), (200, 3)] {
            let a = random_spd(n, seed);
            let b: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).cos()).collect();
            let (x, _) = cg_solve(&a, &b, 1e-14, 5000).unwrap();
            let dense: DenseMatrix = a.to_dense();
            let oracle = dense.lu_solve(&b).unwrap();
            let err = norm2(&crate::linalg::sub(&x, &oracle)) / norm2(&oracle);
            assert!(err < 1e-10, "n={n}: {err:e}");
        }
    }

    #[test]
    fn cg_errors() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 0.5), (1, 0, 0.5)]).unwrap();
        assert!(matches!(
            cg_solve(&a, &[1.0, 1.0], 1e-10, 10),
            Err(EsfemError::ZeroDiagonal { row: 1 })
        ));
        let a = random_spd(30, 9);
        let b = vec![1.0; 30];
        match cg_solve(&a, &b, 1e-14, 2) {
            Err(EsfemError::LinearSolveFailed { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn gmres_nonsymmetric() {
        let n = 60;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut triplets = Vec::new();
        for i in 0..n {
            triplets.push((i, i, 4.0 + rng.random_range(0.0..1.0)));
            triplets.push((i, (i + 1) % n, rng.random_range(-1.0..1.0)));
            triplets.push((i, (i + 7) % n, rng.random_range(-1.0..1.0)));
        }
        let a = CsrMatrix::from_triplets(n, n, &triplets).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let (x, _) = gmres_solve(&a, &b, None, 1e-12, 10, 500).unwrap();
        assert!(rel_residual(&a, &x, &b) <= 1e-12);
        let oracle = a.to_dense().lu_solve(&b).unwrap();
        assert!(norm2(&crate::linalg::sub(&x, &oracle)) < 1e-10);
    }

    #[test]
    fn dual_norm_examples() {
        let eye = CsrMatrix::identity(3);
        let zero = CsrMatrix::zeros(3, 3);
        assert_eq!(dual_norm(&eye, &zero, &[0.0; 3], 1e-12).unwrap(), 0.0);
        let e1 = [1.0, 0.0, 0.0];
        assert!((dual_norm(&eye, &zero, &e1, 1e-12).unwrap() - 1.0).abs() < 1e-14);
        let two = eye.scaled(2.0);
        assert!((dual_norm(&two, &zero, &e1, 1e-12).unwrap() - 2f64.sqrt()).abs() < 1e-14);
    }
}
