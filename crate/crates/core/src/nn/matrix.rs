use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims("DenseMatrix::from_vec", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows. Panics on ragged input; meant
    /// for literals in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Copies the listed rows into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(idx.len(), self.cols);
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.row(i));
        }
        out
    }

    fn gemm(&self, a_t: bool, other: &DenseMatrix, b_t: bool, op: &'static str) -> Result<DenseMatrix> {
        let (m, k) = if a_t {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        };
        let (k2, n) = if b_t {
            (other.cols, other.rows)
        } else {
            (other.rows, other.cols)
        };
        if k != k2 {
            return Err(Error::dims(op, format!("inner dimension {k}"), format!("{k2}")));
        }
        let mut out = DenseMatrix::zeros(m, n);
        if m == 0 || n == 0 || k == 0 {
            return Ok(out);
        }
        let (rsa, csa) = if a_t {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        };
        let (rsb, csb) = if b_t {
            (1, other.cols as isize)
        } else {
            (other.cols as isize, 1)
        };
        // SAFETY: strides describe in-bounds views of the backing vectors,
        // whose lengths were checked at construction.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                self.data.as_ptr(),
                rsa,
                csa,
                other.data.as_ptr(),
                rsb,
                csb,
                0.0,
                out.data.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        Ok(out)
    }

    /// `self · other`
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.gemm(false, other, false, "matmul")
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.gemm(true, other, false, "t_matmul")
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        self.gemm(false, other, true, "matmul_t")
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    fn check_same_shape(&self, other: &DenseMatrix, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dims(
                op,
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// `self += alpha · other`
    pub fn axpy(&mut self, alpha: f64, other: &DenseMatrix) -> Result<()> {
        self.check_same_shape(other, "axpy")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn hadamard_assign(&mut self, other: &DenseMatrix) -> Result<()> {
        self.check_same_shape(other, "hadamard_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a *= b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> DenseMatrix {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Adds a `1 × cols` row vector to every row.
    pub fn add_row_broadcast(&mut self, bias: &DenseMatrix) -> Result<()> {
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(Error::dims(
                "add_row_broadcast",
                format!("(1, {})", self.cols),
                format!("{:?}", bias.shape()),
            ));
        }
        let cols = self.cols;
        for i in 0..self.rows {
            for (v, b) in self.data[i * cols..(i + 1) * cols].iter_mut().zip(&bias.data) {
                *v += b;
            }
        }
        Ok(())
    }

    /// Column sums as a `1 × cols` matrix.
    pub fn column_sums(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(1, self.cols);
        for row in self.row_iter() {
            for (o, v) in out.data.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn relu(&self) -> DenseMatrix {
        self.map(|v| v.max(0.0))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copies `other`'s columns into `self` starting at column `offset`.
    pub fn set_columns(&mut self, offset: usize, other: &DenseMatrix) {
        assert_eq!(self.rows, other.rows);
        assert!(offset + other.cols <= self.cols);
        for i in 0..self.rows {
            let dst = &mut self.data[i * self.cols + offset..i * self.cols + offset + other.cols];
            dst.copy_from_slice(other.row(i));
        }
    }

    /// Column block `[offset, offset + width)` as a new matrix.
    pub fn columns(&self, offset: usize, width: usize) -> DenseMatrix {
        assert!(offset + width <= self.cols);
        let mut out = DenseMatrix::zeros(self.rows, width);
        for i in 0..self.rows {
            out.row_mut(i)
                .copy_from_slice(&self.data[i * self.cols + offset..i * self.cols + offset + width]);
        }
        out
    }
}

/// Row-wise softmax, computed with the max-subtraction trick.
pub fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        softmax_in_place(out.row_mut(i));
    }
    out
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// `log softmax(row)[k]`, stable for large logits.
pub fn log_softmax_at(row: &[f64], k: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    row[k] - lse
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn seq(r: usize, c: usize, off: f64) -> DenseMatrix {
        DenseMatrix::from_vec(r, c, (0..r * c).map(|v| (v as f64 * 0.37 + off).sin()).collect()).unwrap()
    }

    #[test]
    fn products_match_naive_loops() {
        let a = seq(5, 4, 0.1);
        let b = seq(4, 3, 1.3);
        assert!(a.matmul(&b).unwrap().max_abs_diff(&naive(&a, &b)) < 1e-12);
        let c = seq(5, 3, 2.0);
        assert!(a.t_matmul(&c).unwrap().max_abs_diff(&naive(&a.transpose(), &c)) < 1e-12);
        let d = seq(6, 4, 0.5);
        assert!(a.matmul_t(&d).unwrap().max_abs_diff(&naive(&a, &d.transpose())) < 1e-12);
    }

    #[test]
    fn mismatched_inner_dimension_is_an_error() {
        let a = seq(2, 3, 0.0);
        assert!(matches!(a.matmul(&a), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn softmax_rows_sum_to_one_and_argmax_ties_go_low() {
        let p = softmax_rows(&DenseMatrix::from_rows(&[[1000.0, 1000.0, -5.0]]));
        assert!((p.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(argmax(p.row(0)), 0);
        assert!(
            (log_softmax_at(&[2.0, 1.0, 0.0], 0) - (2.0f64.exp() / (2.0f64.exp() + 1.0f64.exp() + 1.0)).ln())
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn column_blocks_round_trip() {
        let a = seq(3, 5, 0.0);
        let mut b = DenseMatrix::zeros(3, 5);
        b.set_columns(0, &a.columns(0, 2));
        b.set_columns(2, &a.columns(2, 3));
        assert_eq!(a, b);
    }
}
