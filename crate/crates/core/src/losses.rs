//! Training losses: masked cross-entropy, the accuracy-weighted calibration
//! term, and their annealed combination.
//!
//! Gradients are returned with respect to the logits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::BinningScheme;
use crate::nn::{argmax, log_softmax_at, softmax_rows, DenseMatrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    #[default]
    CeOnly,
    CePlusCal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub mode: LossMode,
    /// Weight of the cross-entropy term, in `(0, 1]`.
    pub alpha: f64,
    pub lambda: f64,
    /// Fraction of training after which the annealing factor saturates.
    pub anneal_max: f64,
    pub num_bins: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            mode: LossMode::CeOnly,
            alpha: 1.0,
            lambda: 1.0,
            anneal_max: 1.0,
            num_bins: 15,
        }
    }
}

/// Candidate `alpha` values searched when the calibration term is enabled.
pub const ALPHA_GRID: [f64; 5] = [0.95, 0.96, 0.97, 0.98, 0.99];

impl LossConfig {
    pub fn ce_plus_cal(alpha: f64) -> Self {
        Self {
            mode: LossMode::CePlusCal,
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.anneal_max > 0.0 && self.anneal_max.is_finite()) {
            return Err(Error::Config(format!(
                "anneal_max must be > 0, got {}",
                self.anneal_max
            )));
        }
        if self.num_bins == 0 {
            return Err(Error::Config("num_bins must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mean negative log-likelihood of `labels` over `mask`, with gradient
/// `(softmax − onehot) / |mask|` on masked rows and zero elsewhere.
pub fn cross_entropy(logits: &DenseMatrix, labels: &[usize], mask: &[usize]) -> Result<(f64, DenseMatrix)> {
    if mask.is_empty() {
        return Err(Error::Empty("cross-entropy mask"));
    }
    let n = mask.len() as f64;
    let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for &i in mask {
        let row = logits.row(i);
        loss -= log_softmax_at(row, labels[i]);
        let g = grad.row_mut(i);
        g.copy_from_slice(row);
        crate::nn::softmax_in_place(g);
        g[labels[i]] -= 1.0;
        g.iter_mut().for_each(|v| *v /= n);
    }
    Ok((loss / n, grad))
}

/// `−(1/|mask|) Σ acc(B(i)) · log p̂_i`, where `B(i)` is the confidence bin
/// of sample `i` among the masked samples and the bin accuracies are held
/// constant. The gradient is taken through `log p̂_i` only:
/// `acc(B(i)) · (softmax − onehot(ŷ_i)) / |mask|`.
pub fn calibration_loss(
    logits: &DenseMatrix,
    labels: &[usize],
    mask: &[usize],
    num_bins: usize,
) -> Result<(f64, DenseMatrix)> {
    if mask.is_empty() {
        return Err(Error::Empty("calibration-loss mask"));
    }
    let scheme = BinningScheme::uniform(num_bins)?;
    let probs = softmax_rows(logits);
    let mut bin_of = Vec::with_capacity(mask.len());
    let mut count = vec![0usize; num_bins];
    let mut hits = vec![0usize; num_bins];
    for &i in mask {
        let row = probs.row(i);
        let k = argmax(row);
        let b = scheme.assign(row[k].clamp(0.0, 1.0))?;
        count[b] += 1;
        hits[b] += (k == labels[i]) as usize;
        bin_of.push((b, k));
    }
    let n = mask.len() as f64;
    let mut grad = DenseMatrix::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for (&i, &(b, k)) in mask.iter().zip(&bin_of) {
        let acc = hits[b] as f64 / count[b] as f64;
        if acc == 0.0 {
            continue;
        }
        loss -= acc * log_softmax_at(logits.row(i), k);
        let g = grad.row_mut(i);
        for (gj, &pj) in g.iter_mut().zip(probs.row(i)) {
            *gj = acc * pj / n;
        }
        g[k] -= acc / n;
    }
    Ok((loss / n, grad))
}

/// `λ · min(1, epoch / (total_epochs · anneal_max))`.
pub fn anneal_factor(epoch: usize, total_epochs: usize, cfg: &LossConfig) -> f64 {
    if total_epochs == 0 {
        return cfg.lambda;
    }
    let ramp = epoch as f64 / (total_epochs as f64 * cfg.anneal_max);
    cfg.lambda * ramp.min(1.0)
}

/// `α · ce + (1 − α) · anneal · cal`.
pub fn combined_loss(epoch: usize, total_epochs: usize, cfg: &LossConfig, ce: f64, cal: f64) -> f64 {
    if cfg.alpha == 1.0 {
        return ce;
    }
    cfg.alpha * ce + (1.0 - cfg.alpha) * anneal_factor(epoch, total_epochs, cfg) * cal
}

/// Loss value and logit gradient of one training epoch under `cfg`.
pub fn training_objective(
    logits: &DenseMatrix,
    labels: &[usize],
    mask: &[usize],
    epoch: usize,
    total_epochs: usize,
    cfg: &LossConfig,
) -> Result<(f64, DenseMatrix)> {
    let (ce, mut grad) = cross_entropy(logits, labels, mask)?;
    if cfg.mode == LossMode::CeOnly || cfg.alpha == 1.0 {
        return Ok((ce, grad));
    }
    let (cal, cal_grad) = calibration_loss(logits, labels, mask, cfg.num_bins)?;
    let w = (1.0 - cfg.alpha) * anneal_factor(epoch, total_epochs, cfg);
    grad.scale(cfg.alpha);
    grad.axpy(w, &cal_grad)?;
    Ok((combined_loss(epoch, total_epochs, cfg, ce, cal), grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logits_for(probs: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(
            &probs
                .iter()
                .map(|r| r.iter().map(|p| p.ln()).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn cross_entropy_examples() {
        let confident = DenseMatrix::from_rows(&[[800.0, 0.0, 0.0]]);
        let (l, _) = cross_entropy(&confident, &[0], &[0]).unwrap();
        assert!(l.abs() < 1e-300 || l == 0.0);
        let uniform = DenseMatrix::zeros(3, 4);
        let (l, g) = cross_entropy(&uniform, &[0, 1, 2], &[0, 2]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);
        assert!(g.row(1).iter().all(|&v| v == 0.0));
        assert!(cross_entropy(&uniform, &[0, 1, 2], &[]).is_err());
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = crate::rng::stream(3, "ce");
        let z = crate::nn::glorot_init(5, 3, &mut rng).scaled(4.0);
        let labels = [0, 2, 1, 1, 0];
        let mask = [0, 1, 3, 4];
        let (_, g) = cross_entropy(&z, &labels, &mask).unwrap();
        let h = 1e-6;
        for i in 0..5 {
            for k in 0..3 {
                let mut zp = z.clone();
                zp.set(i, k, z.get(i, k) + h);
                let mut zm = z.clone();
                zm.set(i, k, z.get(i, k) - h);
                let num = (cross_entropy(&zp, &labels, &mask).unwrap().0
                    - cross_entropy(&zm, &labels, &mask).unwrap().0)
                    / (2.0 * h);
                assert!(
                    (num - g.get(i, k)).abs() < 1e-6,
                    "({i},{k}) {num} vs {}",
                    g.get(i, k)
                );
            }
        }
    }

    #[test]
    fn calibration_loss_four_samples() {
        // top-class confidences .9/.8/.3/.4, correct T/F/F/T
        let z = logits_for(&[
            &[0.9, 0.05, 0.05, 0.0 + 1e-300],
            &[0.8, 0.1, 0.05, 0.05],
            &[0.3, 0.25, 0.25, 0.2],
            &[0.4, 0.2, 0.2, 0.2],
        ]);
        let labels = [0, 1, 1, 0];
        let (l, _) = calibration_loss(&z, &labels, &[0, 1, 2, 3], 2).unwrap();
        let direct = -(0.5 * 0.9f64.ln() + 0.5 * 0.8f64.ln() + 0.5 * 0.3f64.ln() + 0.5 * 0.4f64.ln()) / 4.0;
        assert!((l - direct).abs() < 1e-12, "{l} vs {direct}");
    }

    #[test]
    fn calibration_loss_degenerate_cases() {
        let perfect = DenseMatrix::from_rows(&[[900.0, 0.0], [0.0, 900.0]]);
        let (l, g) = calibration_loss(&perfect, &[0, 1], &[0, 1], 15).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.max_abs() < 1e-300);
        // all wrong, so every occupied bin has zero accuracy
        let wrong = DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 1.0]]);
        let (l, g) = calibration_loss(&wrong, &[1, 0], &[0, 1], 15).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g.max_abs(), 0.0);
        assert!(calibration_loss(&wrong, &[1, 0], &[], 15).is_err());
    }

    #[test]
    fn calibration_gradient_with_frozen_accuracy() {
        let mut rng = crate::rng::stream(9, "cal");
        let z = crate::nn::glorot_init(8, 3, &mut rng).scaled(3.0);
        let labels = [0, 1, 2, 0, 1, 2, 0, 1];
        let mask = [0, 1, 2, 3, 4, 5, 6, 7];
        let m = 3;
        let (_, g) = calibration_loss(&z, &labels, &mask, m).unwrap();
        // oracle: freeze acc and predictions, differentiate -acc * log p_yhat
        let probs = softmax_rows(&z);
        let scheme = BinningScheme::uniform(m).unwrap();
        let info: Vec<(usize, usize)> = mask
            .iter()
            .map(|&i| {
                let k = argmax(probs.row(i));
                (scheme.assign(probs.get(i, k)).unwrap(), k)
            })
            .collect();
        let acc = |b: usize| {
            let members: Vec<usize> = (0..8).filter(|&j| info[j].0 == b).collect();
            members.iter().filter(|&&j| info[j].1 == labels[j]).count() as f64 / members.len() as f64
        };
        let frozen = |zz: &DenseMatrix| -> f64 {
            mask.iter()
                .map(|&i| -acc(info[i].0) * log_softmax_at(zz.row(i), info[i].1))
                .sum::<f64>()
                / 8.0
        };
        let h = 1e-6;
        for i in 0..8 {
            for k in 0..3 {
                let mut zp = z.clone();
                zp.set(i, k, z.get(i, k) + h);
                let mut zm = z.clone();
                zm.set(i, k, z.get(i, k) - h);
                let num = (frozen(&zp) - frozen(&zm)) / (2.0 * h);
                assert!((num - g.get(i, k)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn combined_loss_schedule() {
        let cfg = LossConfig {
            alpha: 0.9,
            lambda: 2.0,
            anneal_max: 0.5,
            ..LossConfig::ce_plus_cal(0.9)
        };
        assert_eq!(combined_loss(0, 100, &cfg, 1.5, 3.0), 0.9 * 1.5);
        assert!((anneal_factor(50, 100, &cfg) - 2.0).abs() < 1e-15);
        assert!((anneal_factor(80, 100, &cfg) - 2.0).abs() < 1e-15);
        assert!((anneal_factor(25, 100, &cfg) - 1.0).abs() < 1e-15);
        let ce_only = LossConfig::ce_plus_cal(1.0);
        for e in [0, 7, 100] {
            assert_eq!(combined_loss(e, 100, &ce_only, 0.7, 9.0), 0.7);
        }
        let mut prev = f64::NEG_INFINITY;
        for e in 0..=100 {
            let v = combined_loss(e, 100, &cfg, 1.0, 2.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn ce_only_objective_is_plain_cross_entropy() {
        let z = DenseMatrix::from_rows(&[[1.0, 2.0], [0.5, -0.5], [3.0, 0.0]]);
        let (l, g) = training_objective(&z, &[1, 0, 1], &[0, 2], 3, 10, &LossConfig::default()).unwrap();
        let (l2, g2) = cross_entropy(&z, &[1, 0, 1], &[0, 2]).unwrap();
        assert_eq!(l.to_bits(), l2.to_bits());
        assert_eq!(g, g2);
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::ce_plus_cal(0.0).validate().is_err());
        assert!(LossConfig::ce_plus_cal(1.2).validate().is_err());
        assert!(LossConfig {
            num_bins: 0,
            ..LossConfig::default()
        }
        .validate()
        .is_err());
        assert!(LossConfig::ce_plus_cal(0.97).validate().is_ok());
    }
}
