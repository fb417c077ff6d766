//! Temperature scaling: one scalar `T` dividing every logit, fit by
//! minimizing validation NLL.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{softmax_rows, DenseMatrix};

pub const T_MIN: f64 = 0.05;
pub const T_MAX: f64 = 20.0;
pub const T_TOLERANCE: f64 = 1e-4;
const PRESCAN_POINTS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFit {
    pub temperature: f64,
    /// The optimum sits on an end of the search interval, which usually
    /// means the validation NLL is monotone in `T`.
    pub at_boundary: bool,
}

/// Mean `−log softmax(z/T)_y` over the rows of `logits`.
pub fn scaled_nll(logits: &DenseMatrix, labels: &[usize], t: f64) -> f64 {
    let mut total = 0.0;
    for (row, &y) in logits.row_iter().zip(labels) {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) / t;
        let lse = row.iter().map(|&v| (v / t - max).exp()).sum::<f64>().ln() + max;
        total += lse - row[y] / t;
    }
    total / labels.len() as f64
}

/// Log-spaced grid over the search interval.
pub fn temperature_grid(points: usize) -> Vec<f64> {
    let (lo, hi) = (T_MIN.ln(), T_MAX.ln());
    (0..points)
        .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Fits `T` on row-aligned validation logits and labels. A coarse grid scan
/// picks the bracket, golden-section search refines it.
pub fn fit_temperature(logits: &DenseMatrix, labels: &[usize]) -> Result<TemperatureFit> {
    if labels.is_empty() {
        return Err(Error::Empty("temperature validation set"));
    }
    if logits.rows() != labels.len() {
        return Err(Error::dims("fit_temperature", logits.rows(), labels.len()));
    }
    let nll = |t: f64| scaled_nll(logits, labels, t);
    let grid = temperature_grid(PRESCAN_POINTS);
    let values: Vec<f64> = grid.iter().map(|&t| nll(t)).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v < values[b] { i } else { b });
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(PRESCAN_POINTS - 1)];
    let mut t = golden_section(nll, lo, hi, T_TOLERANCE);
    // the search interval is closed; keep an end point if it is better
    for end in [T_MIN, T_MAX] {
        if nll(end) < nll(t) {
            t = end;
        }
    }
    let at_boundary = t - T_MIN < 2.0 * T_TOLERANCE || T_MAX - t < 2.0 * T_TOLERANCE;
    Ok(TemperatureFit {
        temperature: t,
        at_boundary,
    })
}

/// `softmax(Z / T)` row-wise.
pub fn apply_temperature(logits: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be > 0, got {t}"
        )));
    }
    Ok(softmax_rows(&logits.scaled(1.0 / t)))
}
