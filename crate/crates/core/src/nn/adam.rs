use crate::error::{Error, Result};
use crate::nn::{DenseMatrix, ParameterSet};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct AdamState {
    first: Vec<DenseMatrix>,
    second: Vec<DenseMatrix>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ParameterSet) -> Self {
        let zeros = |_: ()| {
            params
                .iter()
                .map(|(_, m)| DenseMatrix::zeros(m.rows(), m.cols()))
                .collect::<Vec<_>>()
        };
        Self {
            first: zeros(()),
            second: zeros(()),
            step: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[DenseMatrix] {
        &self.first
    }

    pub fn second_moments(&self) -> &[DenseMatrix] {
        &self.second
    }
}

/// One Adam update. Weight decay is coupled: `weight_decay · θ` is added to
/// the gradient before it enters the moment estimates.
pub fn adam_step(
    params: &mut ParameterSet,
    grads: &ParameterSet,
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if !params.same_layout(grads) || state.first.len() != params.len() {
        return Err(Error::dims(
            "adam_step",
            "gradients with the parameter layout",
            "different names or shapes",
        ));
    }
    for (name, g) in grads.iter() {
        if !g.all_finite() {
            return Err(Error::NonFinite(format!("gradient of {name}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (k, ((_, p), (_, g))) in params.iter_mut().zip(grads.iter()).enumerate() {
        let m = state.first[k].as_mut_slice();
        let v = state.second[k].as_mut_slice();
        for (((theta, &grad), mi), vi) in p
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            let geff = grad + weight_decay * *theta;
            *mi = b1 * *mi + (1.0 - b1) * geff;
            *vi = b2 * *vi + (1.0 - b2) * geff * geff;
            let mhat = *mi / c1;
            let vhat = *vi / c2;
            *theta -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}
