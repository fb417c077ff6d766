use rand::Rng as _;

use crate::error::Result;
use crate::nn::DenseMatrix;
use crate::rng::Rng;
use crate::sparse::CsrMatrix;

/// Node-feature matrix as consumed by a first layer. Bag-of-words features
/// are mostly zeros and are kept sparse; everything else is dense.
#[derive(Clone, Debug, PartialEq)]
pub enum InputMatrix {
    Dense(DenseMatrix),
    Sparse(CsrMatrix),
}

/// Below this fraction of nonzeros a feature matrix is stored sparse.
pub const SPARSE_DENSITY_THRESHOLD: f64 = 0.25;

impl InputMatrix {
    pub fn from_dense_auto(m: DenseMatrix) -> Self {
        let nnz = m.as_slice().iter().filter(|v| **v != 0.0).count();
        let total = (m.rows() * m.cols()).max(1);
        if (nnz as f64 / total as f64) < SPARSE_DENSITY_THRESHOLD {
            InputMatrix::Sparse(CsrMatrix::from_dense(&m))
        } else {
            InputMatrix::Dense(m)
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            InputMatrix::Dense(m) => m.rows(),
            InputMatrix::Sparse(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            InputMatrix::Dense(m) => m.cols(),
            InputMatrix::Sparse(m) => m.cols(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            InputMatrix::Dense(m) => m.clone(),
            InputMatrix::Sparse(m) => m.to_dense(),
        }
    }

    /// `self · w`
    pub fn matmul(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            InputMatrix::Dense(m) => m.matmul(w),
            InputMatrix::Sparse(m) => m.spmm(w),
        }
    }

    /// `selfᵀ · g`
    pub fn t_matmul(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            InputMatrix::Dense(m) => m.t_matmul(g),
            InputMatrix::Sparse(m) => m.t_spmm(g),
        }
    }

    /// Inverted dropout over stored entries. Zeros of a sparse matrix stay
    /// zero either way, so only nonzeros draw a mask bit.
    pub fn dropout(&self, rate: f64, rng: &mut Rng) -> InputMatrix {
        if rate <= 0.0 {
            return self.clone();
        }
        let keep = 1.0 / (1.0 - rate);
        let mut apply = |vals: &mut [f64]| {
            for v in vals.iter_mut() {
                if rng.random::<f64>() < rate {
                    *v = 0.0;
                } else {
                    *v *= keep;
                }
            }
        };
        match self {
            InputMatrix::Dense(m) => {
                let mut m = m.clone();
                apply(m.as_mut_slice());
                InputMatrix::Dense(m)
            }
            InputMatrix::Sparse(m) => {
                let mut m = m.clone();
                apply(m.values_mut());
                InputMatrix::Sparse(m)
            }
        }
    }
}
