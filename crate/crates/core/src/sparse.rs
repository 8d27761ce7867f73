//! Column-compressed design matrix and the counted kernels every solver goes through.
//!
//! Each call to [`col_dot_dense`] counts as one dot product regardless of the
//! column's fill, which is the cost unit used throughout the benchmarks.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Machine-independent cost ledger for one solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounter {
    pub dot_products: u64,
    pub axpy_ops: u64,
    pub coordinate_touches: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn touch(&mut self) {
        self.coordinate_touches += 1;
    }
}

impl Add for OpCounter {
    type Output = OpCounter;

    fn add(self, rhs: OpCounter) -> OpCounter {
        OpCounter {
            dot_products: self.dot_products + rhs.dot_products,
            axpy_ops: self.axpy_ops + rhs.axpy_ops,
            coordinate_touches: self.coordinate_touches + rhs.coordinate_touches,
        }
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: OpCounter) {
        *self = *self + rhs;
    }
}

/// Borrowed view of one stored column.
#[derive(Debug, Clone, Copy)]
pub struct Column<'a> {
    pub rows: &'a [usize],
    pub values: &'a [f64],
}

impl Column<'_> {
    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.rows.iter().copied().zip(self.values.iter().copied())
    }
}

/// An `m x p` matrix stored column by column with sorted row indices and no
/// stored zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseColumnMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseColumnMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseColumnMatrix {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from per-column `(row, value)` lists. Rows must be strictly
    /// increasing within a column; zero values are dropped.
    pub fn from_columns(nrows: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let ncols = columns.len();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for (j, col) in columns.into_iter().enumerate() {
            let mut last: Option<usize> = None;
            for (r, v) in col {
                if r >= nrows {
                    return Err(Error::Dimension(format!(
                        "row index {r} out of range for {nrows} rows (column {j})"
                    )));
                }
                if last.is_some_and(|l| r <= l) {
                    return Err(Error::Dimension(format!(
                        "row indices not strictly increasing in column {j}"
                    )));
                }
                last = Some(r);
                if v != 0.0 {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(SparseColumnMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds from row-major sparse rows, as read from LIBSVM files.
    pub fn from_rows(ncols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
        for (r, row) in rows.iter().enumerate() {
            for &(c, v) in row {
                if c >= ncols {
                    return Err(Error::Dimension(format!(
                        "column index {c} out of range for {ncols} columns (row {r})"
                    )));
                }
                columns[c].push((r, v));
            }
        }
        Self::from_columns(rows.len(), columns)
    }

    pub fn from_dense_columns(nrows: usize, columns: &[Vec<f64>]) -> Self {
        let cols = columns
            .iter()
            .map(|c| {
                assert_eq!(c.len(), nrows, "dense column length must equal nrows");
                c.iter().copied().enumerate().collect()
            })
            .collect();
        Self::from_columns(nrows, cols).expect("dense columns are well formed")
    }

    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let columns: Vec<Vec<f64>> = (0..ncols)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        Self::from_dense_columns(nrows, &columns)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, j: usize) -> Column<'_> {
        let (lo, hi) = (self.col_ptr[j], self.col_ptr[j + 1]);
        Column {
            rows: &self.row_idx[lo..hi],
            values: &self.values[lo..hi],
        }
    }

    pub fn columns(&self) -> impl Iterator<Item = Column<'_>> + '_ {
        (0..self.ncols).map(move |j| self.column(j))
    }

    pub fn to_dense_columns(&self) -> Vec<Vec<f64>> {
        self.columns()
            .map(|c| {
                let mut dense = vec![0.0; self.nrows];
                for (r, v) in c.iter() {
                    dense[r] = v;
                }
                dense
            })
            .collect()
    }

    /// Row-major sparse view (transpose of the storage), rows sorted by column.
    pub fn to_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.nrows];
        for (j, c) in self.columns().enumerate() {
            for (r, v) in c.iter() {
                rows[r].push((j, v));
            }
        }
        rows
    }

    /// Returns a copy with column `j` multiplied by `factors[j]`.
    pub fn scale_columns(&self, factors: &[f64]) -> Self {
        assert_eq!(factors.len(), self.ncols);
        let columns = self
            .columns()
            .zip(factors)
            .map(|(c, &f)| c.iter().map(|(r, v)| (r, v * f)).collect())
            .collect();
        Self::from_columns(self.nrows, columns).expect("scaling preserves structure")
    }

    /// Same matrix with `ncols` columns; extra columns are empty.
    pub fn with_ncols(mut self, ncols: usize) -> Result<Self> {
        if ncols < self.ncols {
            return Err(Error::Dimension(format!(
                "cannot shrink {} columns to {ncols}",
                self.ncols
            )));
        }
        let last = *self.col_ptr.last().unwrap_or(&0);
        self.col_ptr.resize(ncols + 1, last);
        self.ncols = ncols;
        Ok(self)
    }

    /// Dense `X * alpha` for a dense coefficient vector. Uncounted.
    pub fn mul_dense(&self, alpha: &[f64]) -> Vec<f64> {
        assert_eq!(alpha.len(), self.ncols);
        let mut out = vec![0.0; self.nrows];
        for (c, &a) in self.columns().zip(alpha) {
            if a != 0.0 {
                for (r, v) in c.iter() {
                    out[r] += a * v;
                }
            }
        }
        out
    }

    /// `X * alpha` for `(index, value)` coefficient pairs. Uncounted.
    pub fn mul_sparse(&self, alpha: &[(usize, f64)]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        for &(j, a) in alpha {
            for (r, v) in self.column(j).iter() {
                out[r] += a * v;
            }
        }
        out
    }
}

#[cfg(not(feature = "kahan"))]
#[inline]
fn accumulate(terms: impl Iterator<Item = f64>) -> f64 {
    terms.sum()
}

#[cfg(feature = "kahan")]
#[inline]
fn accumulate(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for t in terms {
        let y = t - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
    sum
}

/// `z_j^T v`.
pub fn col_dot_dense(a: &SparseColumnMatrix, j: usize, v: &[f64], ctr: &mut OpCounter) -> f64 {
    assert!(j < a.ncols, "column {j} out of range ({} columns)", a.ncols);
    assert_eq!(v.len(), a.nrows, "vector length must equal nrows");
    ctr.dot_products += 1;
    let c = a.column(j);
    accumulate(c.iter().map(|(r, val)| val * v[r]))
}

/// `v += scale * z_j`, touching stored entries only.
pub fn col_axpy(a: &SparseColumnMatrix, j: usize, scale: f64, v: &mut [f64], ctr: &mut OpCounter) {
    assert!(j < a.ncols, "column {j} out of range ({} columns)", a.ncols);
    assert_eq!(v.len(), a.nrows, "vector length must equal nrows");
    ctr.axpy_ops += 1;
    if scale == 0.0 {
        return;
    }
    for (r, val) in a.column(j).iter() {
        v[r] += scale * val;
    }
}

/// Squared Euclidean norm of every column; counted as `p` dot products.
pub fn col_norms_sq(a: &SparseColumnMatrix, ctr: &mut OpCounter) -> Vec<f64> {
    ctr.dot_products += a.ncols as u64;
    a.columns()
        .map(|c| accumulate(c.values.iter().map(|v| v * v)))
        .collect()
}

/// `X^T v`; `p` dot products.
pub fn col_dots(a: &SparseColumnMatrix, v: &[f64], ctr: &mut OpCounter) -> Vec<f64> {
    (0..a.ncols).map(|j| col_dot_dense(a, j, v, ctr)).collect()
}

/// Full gradient `-sigma + X^T (X alpha)` given the cached `X alpha`.
pub fn full_gradient(
    a: &SparseColumnMatrix,
    x_alpha: &[f64],
    sigma: &[f64],
    ctr: &mut OpCounter,
) -> Vec<f64> {
    assert_eq!(sigma.len(), a.ncols);
    (0..a.ncols)
        .map(|j| col_dot_dense(a, j, x_alpha, ctr) - sigma[j])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, p: usize, fill: f64) -> Vec<Vec<f64>> {
        (0..p)
            .map(|_| {
                (0..m)
                    .map(|_| {
                        if rng.random::<f64>() < fill {
                            rng.random::<f64>() * 2.0 - 1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn dot_hand_expansion() {
        let a = SparseColumnMatrix::from_dense_columns(3, &[vec![1.0, 0.0, 2.0]]);
        let mut ctr = OpCounter::new();
        assert_eq!(col_dot_dense(&a, 0, &[3.0, 9.0, 4.0], &mut ctr), 11.0);
        assert_eq!(ctr.dot_products, 1);
    }

    #[test]
    fn dot_empty_column_is_zero() {
        let a = SparseColumnMatrix::zeros(4, 2);
        let mut ctr = OpCounter::new();
        assert_eq!(col_dot_dense(&a, 1, &[1.0, 2.0, 3.0, 4.0], &mut ctr), 0.0);
        assert_eq!(ctr.dot_products, 1);
    }

    #[test]
    fn dot_against_dense_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 400;
        let mut col = vec![0.0; m];
        for _ in 0..100 {
            let r = rng.random_range(0..m);
            col[r] = rng.random::<f64>() * 10.0 - 5.0;
        }
        let v: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
        let a = SparseColumnMatrix::from_dense_columns(m, &[col.clone()]);
        let mut expected = 0.0;
        for r in 0..m {
            expected += col[r] * v[r];
        }
        let got = col_dot_dense(&a, 0, &v, &mut OpCounter::new());
        assert!(rel_close(got, expected, 1e-12));
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn dot_out_of_range_column_panics() {
        let a = SparseColumnMatrix::zeros(2, 2);
        col_dot_dense(&a, 2, &[0.0, 0.0], &mut OpCounter::new());
    }

    #[test]
    fn axpy_cases() {
        let a = SparseColumnMatrix::from_dense_columns(2, &[vec![0.0, 2.0]]);
        let mut ctr = OpCounter::new();
        let mut v = vec![0.0, 0.0];
        col_axpy(&a, 0, 3.0, &mut v, &mut ctr);
        assert_eq!(v, vec![0.0, 6.0]);
        let before = v.clone();
        col_axpy(&a, 0, 0.0, &mut v, &mut ctr);
        assert_eq!(v, before);
        assert_eq!(ctr.axpy_ops, 2);
    }

    #[test]
    fn axpy_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cols = random_matrix(&mut rng, 50, 1, 0.4);
        let a = SparseColumnMatrix::from_dense_columns(50, &cols);
        let v0: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let mut v = v0.clone();
        let mut ctr = OpCounter::new();
        col_axpy(&a, 0, 1.7, &mut v, &mut ctr);
        col_axpy(&a, 0, -1.7, &mut v, &mut ctr);
        for (x, y) in v.iter().zip(&v0) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn norms_cases() {
        let eye = SparseColumnMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let mut ctr = OpCounter::new();
        assert_eq!(col_norms_sq(&eye, &mut ctr), vec![1.0, 1.0]);
        assert_eq!(ctr.dot_products, 2);
        let c = SparseColumnMatrix::from_dense_columns(2, &[vec![3.0, 4.0]]);
        assert_eq!(col_norms_sq(&c, &mut ctr), vec![25.0]);
    }

    #[test]
    fn gradient_scalar_and_zero_alpha() {
        let x = SparseColumnMatrix::from_dense_columns(1, &[vec![2.0]]);
        let mut ctr = OpCounter::new();
        let sigma = col_dots(&x, &[3.0], &mut ctr);
        assert_eq!(sigma, vec![6.0]);
        // alpha = 1 => X alpha = 2
        assert_eq!(full_gradient(&x, &[2.0], &sigma, &mut ctr), vec![-2.0]);
        assert_eq!(full_gradient(&x, &[0.0], &sigma, &mut ctr), vec![-6.0]);
    }

    #[test]
    fn gradient_against_dense_residual_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (m, p) = (10, 20);
        let cols = random_matrix(&mut rng, m, p, 0.6);
        let a = SparseColumnMatrix::from_dense_columns(m, &cols);
        let y: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
        let alpha: Vec<f64> = (0..p).map(|_| rng.random::<f64>() - 0.5).collect();
        // dense oracle: -X^T (y - X alpha)
        let mut resid = y.clone();
        for j in 0..p {
            for r in 0..m {
                resid[r] -= cols[j][r] * alpha[j];
            }
        }
        let expected: Vec<f64> = (0..p)
            .map(|j| -(0..m).map(|r| cols[j][r] * resid[r]).sum::<f64>())
            .collect();
        let mut ctr = OpCounter::new();
        let sigma = col_dots(&a, &y, &mut ctr);
        let xa = a.mul_dense(&alpha);
        let got = full_gradient(&a, &xa, &sigma, &mut ctr);
        for (g, e) in got.iter().zip(&expected) {
            assert!(rel_close(*g, *e, 1e-10));
        }
        assert_eq!(ctr.dot_products, 2 * p as u64);
    }

    #[test]
    fn construction_rejects_bad_structure() {
        assert!(SparseColumnMatrix::from_columns(3, vec![vec![(1, 1.0), (1, 2.0)]]).is_err());
        assert!(SparseColumnMatrix::from_columns(3, vec![vec![(3, 1.0)]]).is_err());
        let a = SparseColumnMatrix::from_columns(3, vec![vec![(0, 0.0), (2, 1.0)]]).unwrap();
        assert_eq!(a.nnz(), 1);
    }

    #[test]
    fn counters_merge_by_addition() {
        let a = OpCounter {
            dot_products: 3,
            axpy_ops: 1,
            coordinate_touches: 2,
        };
        let mut b = OpCounter {
            dot_products: 1,
            axpy_ops: 0,
            coordinate_touches: 5,
        };
        b += a;
        assert_eq!(b.dot_products, 4);
        assert_eq!(b.coordinate_touches, 7);
    }
}
