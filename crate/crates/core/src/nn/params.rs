use rand::Rng as _;

use crate::error::{Error, Result};
use crate::nn::DenseMatrix;
use crate::rng::Rng;

/// Named trainable tensors in declaration order. Biases and attention
/// vectors are stored as single-row matrices.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParameterSet {
    entries: Vec<(String, DenseMatrix)>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: DenseMatrix) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter name {name}")));
        }
        self.entries.push((name, value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&DenseMatrix> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut DenseMatrix> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    /// Like [`get`](Self::get) but a missing name is an error.
    pub fn require(&self, name: &str) -> Result<&DenseMatrix> {
        self.get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("missing parameter {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseMatrix)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut DenseMatrix)> {
        self.entries.iter_mut().map(|(n, m)| (n.as_str(), m))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.rows() * m.cols()).sum()
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(n, m)| (n.clone(), DenseMatrix::zeros(m.rows(), m.cols())))
                .collect(),
        }
    }

    /// Adds `grad` into the entry called `name`.
    pub fn accumulate(&mut self, name: &str, grad: &DenseMatrix) -> Result<()> {
        let slot = self
            .get_mut(name)
            .ok_or_else(|| Error::InvalidArgument(format!("missing parameter {name}")))?;
        slot.add_assign(grad)
    }

    pub fn same_layout(&self, other: &ParameterSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((a, ma), (b, mb))| a == b && ma.shape() == mb.shape())
    }
}

/// Uniform Glorot initialization in `±sqrt(6 / (rows + cols))`.
pub fn glorot_init(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    DenseMatrix::from_vec(rows, cols, data).expect("length matches shape")
}
