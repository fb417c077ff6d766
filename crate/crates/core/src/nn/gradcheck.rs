use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::nn::ParameterSet;
use crate::rng;

#[derive(Clone, Debug)]
pub struct GradcheckOptions {
    /// Central-difference step.
    pub h: f64,
    pub tolerance: f64,
    /// Coordinates checked per parameter tensor; smaller tensors are checked
    /// exhaustively.
    pub max_coords_per_param: usize,
    pub seed: u64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            h: 1e-5,
            tolerance: 1e-4,
            max_coords_per_param: 64,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradcheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub passed: bool,
}

/// `|a - n| / max(|a|, |n|, 1e-6)`. The floor keeps coordinates whose true
/// gradient is zero from turning round-off into huge relative errors.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares the analytic gradient returned by `loss_and_grad` against
/// central finite differences of its loss on a random coordinate subsample.
/// The closure must be deterministic (no fresh dropout masks).
pub fn gradcheck<F>(
    mut loss_and_grad: F,
    params: &ParameterSet,
    opts: &GradcheckOptions,
) -> Result<GradcheckReport>
where
    F: FnMut(&ParameterSet) -> Result<(f64, ParameterSet)>,
{
    let (loss, analytic) = loss_and_grad(params)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("gradcheck loss".into()));
    }
    if !analytic.same_layout(params) {
        return Err(Error::dims(
            "gradcheck",
            "gradient with parameter layout",
            "mismatch",
        ));
    }
    let mut r = rng::stream(opts.seed, "gradcheck");
    let mut work = params.clone();
    let mut report = GradcheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
        passed: true,
    };
    let names: Vec<String> = params.iter().map(|(n, _)| n.to_string()).collect();
    for name in names {
        let size = {
            let m = params.get(&name).expect("name from params");
            m.rows() * m.cols()
        };
        let coords: Vec<usize> = if size <= opts.max_coords_per_param {
            (0..size).collect()
        } else {
            let mut v = sample(&mut r, size, opts.max_coords_per_param).into_vec();
            v.sort_unstable();
            v
        };
        let grad = analytic.get(&name).expect("same layout");
        for idx in coords {
            let orig = params.get(&name).expect("name").as_slice()[idx];
            work.get_mut(&name).expect("name").as_mut_slice()[idx] = orig + opts.h;
            let plus = loss_and_grad(&work)?.0;
            work.get_mut(&name).expect("name").as_mut_slice()[idx] = orig - opts.h;
            let minus = loss_and_grad(&work)?.0;
            work.get_mut(&name).expect("name").as_mut_slice()[idx] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!("gradcheck loss at {name}[{idx}]")));
            }
            let numeric = (plus - minus) / (2.0 * opts.h);
            let err = relative_error(grad.as_slice()[idx], numeric);
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), idx));
            }
        }
    }
    report.passed = report.max_rel_error <= opts.tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{log_softmax_at, softmax_rows, DenseMatrix};

    #[test]
    fn quadratic_loss_is_exact() {
        let mut p = ParameterSet::new();
        p.insert("w", DenseMatrix::from_rows(&[[0.3, -1.2], [2.0, 0.7]]))
            .unwrap();
        let rep = gradcheck(
            |q| {
                let w = q.get("w").unwrap();
                let mut g = ParameterSet::new();
                g.insert("w", w.clone()).unwrap();
                Ok((0.5 * w.sum_squares(), g))
            },
            &p,
            &GradcheckOptions {
                tolerance: 1e-8,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.checked, 4);
    }

    #[test]
    fn softmax_cross_entropy_three_logits() {
        let mut p = ParameterSet::new();
        p.insert("z", DenseMatrix::from_rows(&[[0.2, -1.1, 0.9]]))
            .unwrap();
        let label = 1;
        let rep = gradcheck(
            |q| {
                let z = q.get("z").unwrap();
                let loss = -log_softmax_at(z.row(0), label);
                let mut g = softmax_rows(z);
                g.set(0, label, g.get(0, label) - 1.0);
                let mut gs = ParameterSet::new();
                gs.insert("z", g).unwrap();
                Ok((loss, gs))
            },
            &p,
            &GradcheckOptions {
                tolerance: 1e-6,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn wrong_gradient_fails() {
        let mut p = ParameterSet::new();
        p.insert("w", DenseMatrix::from_rows(&[[1.0]])).unwrap();
        let rep = gradcheck(
            |q| {
                let w = q.get("w").unwrap();
                let mut g = ParameterSet::new();
                g.insert("w", w.scaled(2.0)).unwrap();
                Ok((0.5 * w.sum_squares(), g))
            },
            &p,
            &GradcheckOptions::default(),
        )
        .unwrap();
        assert!(!rep.passed);
    }
}
