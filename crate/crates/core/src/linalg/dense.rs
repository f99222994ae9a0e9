use crate::error::{EsfemError, Result};
use std::ops::{Index, IndexMut};

/// Row-major dense matrix with an LU solve, for small systems.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.ncols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.ncols + c]
    }
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMatrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| super::dot(&self.data[r * self.ncols..(r + 1) * self.ncols], x))
            .collect()
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    pub fn lu_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.nrows;
        if self.ncols != n {
            return Err(EsfemError::DimensionMismatch {
                expected: n,
                got: self.ncols,
            });
        }
        if b.len() != n {
            return Err(EsfemError::DimensionMismatch {
                expected: n,
                got: b.len(),
            });
        }
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
                .unwrap();
            if a[pivot * n + k].abs() <= 1e-300 + 1e-15 * scale * f64::EPSILON {
                return Err(EsfemError::SingularMatrix { pivot: k });
            }
            if pivot != k {
                for c in 0..n {
                    a.swap(k * n + c, pivot * n + c);
                }
                x.swap(k, pivot);
            }
            let diag = a[k * n + k];
            for i in k + 1..n {
                let factor = a[i * n + k] / diag;
                if factor == 0.0 {
                    continue;
                }
                a[i * n + k] = 0.0;
                for c in k + 1..n {
                    a[i * n + c] -= factor * a[k * n + c];
                }
                x[i] -= factor * x[k];
            }
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|c| a[k * n + c] * x[c]).sum();
            x[k] = (x[k] - s) / a[k * n + k];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_permuted_system() {
        let mut a = DenseMatrix::zeros(3, 3);
        a.data = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let x = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x);
        let got = a.lu_solve(&b).unwrap();
        for i in 0..3 {
            assert!((got[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_detected() {
        let mut a = DenseMatrix::zeros(2, 2);
        a.data = vec![1.0, 2.0, 2.0, 4.0];
        assert!(matches!(
            a.lu_solve(&[1.0, 1.0]),
            Err(EsfemError::SingularMatrix { .. })
        ));
    }
}
