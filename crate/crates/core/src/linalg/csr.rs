use crate::error::{EsfemError, Result};
use serde::{Deserialize, Serialize};

/// Compressed sparse row matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            row_offsets: vec![0; nrows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed in their order of appearance after a stable sort by `(row, col)`.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= nrows {
                return Err(EsfemError::DimensionMismatch {
                    expected: nrows,
                    got: r + 1,
                });
            }
            if c >= ncols {
                return Err(EsfemError::DimensionMismatch {
                    expected: ncols,
                    got: c + 1,
                });
            }
        }
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&i| (triplets[i].0, triplets[i].1));
        let mut row_offsets = vec![0; nrows + 1];
        let mut col_indices = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for i in order {
            let (r, c, v) = triplets[i];
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
                row_offsets[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_offsets[r + 1] += row_offsets[r];
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`, summing each row in column order.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.ncols {
            return Err(EsfemError::DimensionMismatch {
                expected: self.ncols,
                got: x.len(),
            });
        }
        if y.len() != self.nrows {
            return Err(EsfemError::DimensionMismatch {
                expected: self.nrows,
                got: y.len(),
            });
        }
        for (r, yr) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            *yr = cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum();
        }
        Ok(())
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        Ok(super::dot(x, &self.spmv(x)?))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|r| self.get(r, r)).collect()
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
    }

    /// `Σ cᵢ Aᵢ`. Operands must share dimensions; identical sparsity
    /// patterns take a fast path.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Result<CsrMatrix> {
        let Some(&(_, first)) = terms.first() else {
            return Err(EsfemError::InvalidArgument(
                "empty linear combination".into(),
            ));
        };
        if terms.iter().all(|(_, m)| m.same_pattern(first)) {
            let mut out = first.clone();
            for (k, v) in out.values.iter_mut().enumerate() {
                *v = terms.iter().map(|(c, m)| c * m.values[k]).sum();
            }
            return Ok(out);
        }
        let mut triplets = Vec::new();
        for (c, m) in terms {
            if m.nrows != first.nrows || m.ncols != first.ncols {
                return Err(EsfemError::DimensionMismatch {
                    expected: first.nrows,
                    got: m.nrows,
                });
            }
            for r in 0..m.nrows {
                let (cols, vals) = m.row(r);
                triplets.extend(cols.iter().zip(vals).map(|(&col, v)| (r, col, c * v)));
            }
        }
        CsrMatrix::from_triplets(first.nrows, first.ncols, &triplets)
    }

    /// Assembles a block matrix; every block in a block row has the same row
    /// count and every block in a block column the same column count.
    pub fn from_blocks(blocks: &[Vec<&CsrMatrix>]) -> Result<CsrMatrix> {
        let nbr = blocks.len();
        let nbc = blocks.first().map_or(0, Vec::len);
        if nbr == 0 || nbc == 0 || blocks.iter().any(|row| row.len() != nbc) {
            return Err(EsfemError::InvalidArgument("ragged block layout".into()));
        }
        let col_sizes: Vec<usize> = blocks[0].iter().map(|b| b.ncols).collect();
        let mut col_starts = vec![0; nbc + 1];
        for j in 0..nbc {
            col_starts[j + 1] = col_starts[j] + col_sizes[j];
        }
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut nrows = 0;
        for row in blocks {
            let rows = row[0].nrows;
            for (j, b) in row.iter().enumerate() {
                if b.nrows != rows || b.ncols != col_sizes[j] {
                    return Err(EsfemError::DimensionMismatch {
                        expected: rows,
                        got: b.nrows,
                    });
                }
            }
            for r in 0..rows {
                for (j, b) in row.iter().enumerate() {
                    let (cols, vals) = b.row(r);
                    col_indices.extend(cols.iter().map(|c| c + col_starts[j]));
                    values.extend_from_slice(vals);
                }
                row_offsets.push(col_indices.len());
            }
            nrows += rows;
        }
        Ok(CsrMatrix {
            nrows,
            ncols: col_starts[nbc],
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn scaled(&self, c: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `max |A_ij − A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        if self.nrows != self.ncols {
            return Err(EsfemError::DimensionMismatch {
                expected: self.nrows,
                got: self.ncols,
            });
        }
        let asymmetry = self.asymmetry();
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if asymmetry > tol * scale {
            return Err(EsfemError::NotSymmetric { asymmetry });
        }
        Ok(())
    }

    pub fn to_dense(&self) -> super::DenseMatrix {
        let mut d = super::DenseMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                d[(r, c)] += v;
            }
        }
        d
    }

    pub fn is_well_formed(&self) -> bool {
        self.row_offsets.len() == self.nrows + 1
            && self.row_offsets[0] == 0
            && self.row_offsets.windows(2).all(|w| w[0] <= w[1])
            && *self.row_offsets.last().unwrap() == self.values.len()
            && self.col_indices.len() == self.values.len()
            && (0..self.nrows).all(|r| {
                let (cols, _) = self.row(r);
                cols.windows(2).all(|w| w[0] < w[1]) && cols.iter().all(|&c| c < self.ncols)
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spmv_examples() {
        let x = [1.5, -2.0, 3.0];
        assert_eq!(CsrMatrix::identity(3).spmv(&x).unwrap(), x.to_vec());
        assert_eq!(CsrMatrix::zeros(3, 3).spmv(&x).unwrap(), vec![0.0; 3]);
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)]).unwrap();
        assert_eq!(a.spmv(&[1.0, 1.0]).unwrap(), vec![3.0, 3.0]);
        assert!(matches!(
            a.spmv(&[1.0]),
            Err(EsfemError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn triplets_merge_duplicates() {
        let a = CsrMatrix::from_triplets(
            2,
            3,
            &[(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5), (0, 0, 1.0), (0, 1, -1.0)],
        )
        .unwrap();
        assert!(a.is_well_formed());
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(1, 2), 1.5);
        assert_eq!(a.get(1, 0), 0.0);
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn linear_combination_mixed_patterns() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 1, 2.0), (1, 1, 4.0)]).unwrap();
        let c = CsrMatrix::linear_combination(&[(2.0, &a), (0.5, &b)]).unwrap();
        assert_eq!(c.to_dense().data, vec![2.0, 1.0, 0.0, 4.0]);
        let d = CsrMatrix::linear_combination(&[(1.0, &a), (-1.0, &a)]).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn symmetry_check() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0 + 1e-9)]).unwrap();
        assert!(a.check_symmetric(1e-12).is_err());
        assert!(a.check_symmetric(1e-6).is_ok());
    }

    #[test]
    fn block_layout() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 2.0)]).unwrap();
        let b = CsrMatrix::identity(2);
        let m = CsrMatrix::from_blocks(&[vec![&a, &b], vec![&b, &a]]).unwrap();
        assert!(m.is_well_formed());
        assert_eq!((m.nrows, m.ncols), (4, 4));
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(1, 3), 1.0);
        assert_eq!(m.get(3, 2), 2.0);
        assert_eq!(m.get(2, 0), 1.0);
        assert_eq!(m.nnz(), 8);
    }

    fn arb_matrix() -> impl Strategy<Value = CsrMatrix> {
        proptest::collection::vec((0usize..6, 0usize..6, -10.0f64..10.0), 0..30)
            .prop_map(|t| CsrMatrix::from_triplets(6, 6, &t).unwrap())
    }

    proptest! {
        #[test]
        fn spmv_is_linear(
            a in arb_matrix(),
            x in proptest::collection::vec(-10.0f64..10.0, 6),
            y in proptest::collection::vec(-10.0f64..10.0, 6),
        ) {
            prop_assert!(a.is_well_formed());
            let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let lhs = a.spmv(&xy).unwrap();
            let ax = a.spmv(&x).unwrap();
            let ay = a.spmv(&y).unwrap();
            for i in 0..6 {
                let scale = 1.0 + lhs[i].abs() + ax[i].abs() + ay[i].abs();
                prop_assert!((lhs[i] - ax[i] - ay[i]).abs() <= 1e-13 * scale);
            }
            // deterministic
            prop_assert_eq!(a.spmv(&x).unwrap(), ax);
        }
    }
}
