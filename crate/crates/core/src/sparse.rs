//! Compressed sparse row matrices.
//!
//! Column indices within a row are strictly increasing, so iteration order
//! and floating-point summation order are fixed for a given matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets in any order. Duplicate
    /// coordinates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &t {
            if r >= rows || c >= cols {
                return Err(Error::InvalidArgument(format!(
                    "entry ({r}, {c}) outside {rows}x{cols} matrix"
                )));
            }
        }
        t.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Stores the nonzero entries of a dense matrix.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut indptr = Vec::with_capacity(m.rows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in m.row_iter() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn density(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        self.nnz() as f64 / (self.rows as f64 * self.cols as f64)
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// Same sparsity pattern, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self {
            values,
            ..self.clone()
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let p = next[c];
                indices[p] = i;
                values[p] = v;
                next[c] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    /// `self · m`
    pub fn spmm(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != m.rows() {
            return Err(Error::dims(
                "spmm",
                format!("{} rows", self.cols),
                format!("{} rows", m.rows()),
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, m.cols());
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let dst = out.row_mut(i);
            for (&j, &a) in cols.iter().zip(vals) {
                for (o, x) in dst.iter_mut().zip(m.row(j)) {
                    *o += a * x;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · m` without materializing the transpose.
    pub fn t_spmm(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != m.rows() {
            return Err(Error::dims(
                "t_spmm",
                format!("{} rows", self.rows),
                format!("{} rows", m.rows()),
            ));
        }
        let mut out = DenseMatrix::zeros(self.cols, m.cols());
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let src = m.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                for (o, x) in out.row_mut(j).iter_mut().zip(src) {
                    *o += a * x;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_sparse(rows: usize, cols: usize, p: f64, seed: u64) -> CsrMatrix {
        let mut r = rng::stream(seed, "sparse-test");
        let mut t = Vec::new();
        for i in 0..rows {
            for j in 0..cols {
                if r.random::<f64>() < p {
                    t.push((i, j, r.random::<f64>() - 0.5));
                }
            }
        }
        CsrMatrix::from_triplets(rows, cols, t).unwrap()
    }

    fn random_dense(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut r = rng::stream(seed, "dense-test");
        DenseMatrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| r.random::<f64>() * 2.0 - 1.0).collect(),
        )
        .unwrap()
    }

    #[test]
    fn duplicate_triplets_are_summed_and_columns_sorted() {
        let m = CsrMatrix::from_triplets(2, 3, [(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5)]).unwrap();
        assert_eq!(m.row(0).0, &[0, 2]);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(CsrMatrix::from_triplets(2, 2, [(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn spmm_hand_example() {
        let adj =
            CsrMatrix::from_triplets(2, 2, [(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)]).unwrap();
        let out = adj.spmm(&DenseMatrix::from_rows(&[[1.0], [3.0]])).unwrap();
        assert_eq!(out, DenseMatrix::from_rows(&[[2.0], [2.0]]));
    }

    #[test]
    fn spmm_single_node_identity() {
        let row = DenseMatrix::from_rows(&[[1.5, -2.0, 7.0]]);
        assert_eq!(CsrMatrix::identity(1).spmm(&row).unwrap(), row);
    }

    #[test]
    fn spmm_matches_dense_product() {
        let a = random_sparse(20, 20, 0.2, 1);
        let m = random_dense(20, 5, 2);
        let expected = a.to_dense().matmul(&m).unwrap();
        let got = a.spmm(&m).unwrap();
        let scale = expected.max_abs().max(1.0);
        assert!(got.max_abs_diff(&expected) / scale < 1e-10);
        let expected_t = a.to_dense().t_matmul(&m).unwrap();
        assert!(a.t_spmm(&m).unwrap().max_abs_diff(&expected_t) / scale < 1e-10);
        assert!(a.transpose().spmm(&m).unwrap().max_abs_diff(&expected_t) / scale < 1e-10);
    }

    #[test]
    fn spmm_dimension_mismatch() {
        let a = random_sparse(4, 3, 0.5, 3);
        assert!(a.spmm(&DenseMatrix::zeros(4, 2)).is_err());
    }

    #[test]
    fn dense_round_trip() {
        let a = random_sparse(7, 9, 0.3, 4);
        assert_eq!(CsrMatrix::from_dense(&a.to_dense()), a);
    }
}
