//! Mean and sample standard deviation across seeds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator); 0 when `n == 1`.
    pub sd: f64,
    pub n: usize,
    /// Set when `n == 1`, so the zero SD carries no information.
    pub single_sample: bool,
}

/// Two-pass mean and sample SD.
pub fn aggregate(values: &[f64]) -> Result<MeanSd> {
    if values.is_empty() {
        return Err(Error::Empty("aggregate input"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(MeanSd {
        mean,
        sd,
        n,
        single_sample: n == 1,
    })
}
