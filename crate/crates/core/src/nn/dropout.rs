use rand::Rng as _;

use crate::nn::DenseMatrix;
use crate::rng::Rng;

/// Inverted dropout. Returns the output and the multiplicative mask
/// (0 or `1 / (1 - rate)` per entry), which is also what backward multiplies
/// the incoming gradient by. Outside training, or with `rate == 0`, the
/// output equals the input and the mask is all ones.
pub fn dropout_forward(
    m: &DenseMatrix,
    rate: f64,
    rng: &mut Rng,
    training: bool,
) -> (DenseMatrix, DenseMatrix) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if !training || rate == 0.0 {
        return (m.clone(), DenseMatrix::filled(m.rows(), m.cols(), 1.0));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask_data = (0..m.rows() * m.cols())
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let mask = DenseMatrix::from_vec(m.rows(), m.cols(), mask_data).expect("shape");
    let mut out = m.clone();
    out.hadamard_assign(&mask).expect("same shape");
    (out, mask)
}
