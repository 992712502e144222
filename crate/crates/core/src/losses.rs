//! Training losses: cross-entropy, concordance loss, the five-component
//! squared error and their weighted combination.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Lower clamp applied to probabilities inside the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Weights of the four loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub class: f64,
    pub arousal: f64,
    pub valence: f64,
    pub mse: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            class: 1.0,
            arousal: 0.4,
            valence: 0.4,
            mse: 0.2,
        }
    }
}

impl LossWeights {
    pub fn new(class: f64, arousal: f64, valence: f64, mse: f64) -> Result<Self> {
        let w = Self {
            class,
            arousal,
            valence,
            mse,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.class, self.arousal, self.valence, self.mse];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(format!("loss weights must be non-negative, got {all:?}")));
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err(Error::Config("at least one loss weight must be positive".into()));
        }
        Ok(())
    }
}

/// `−Σ y_i · ln(clamp(p_i, 1e-12, 1))` for a one-hot target.
pub fn cross_entropy(target: &[f64], probs: &[f64]) -> Result<f64> {
    if target.len() != probs.len() {
        return Err(Error::Shape {
            expected: alloc::vec![target.len()],
            found: alloc::vec![probs.len()],
        });
    }
    let ones = target.iter().filter(|&&y| y == 1.0).count();
    let zeros = target.iter().filter(|&&y| y == 0.0).count();
    if ones != 1 || ones + zeros != target.len() {
        return Err(Error::Contract(format!("target is not one-hot: {target:?}")));
    }
    Ok(target
        .iter()
        .zip(probs)
        .filter(|(y, _)| **y == 1.0)
        .map(|(_, p)| -math::ln(p.clamp(PROB_FLOOR, 1.0)))
        .sum())
}

/// Cross-entropy for an integer class label.
pub fn cross_entropy_label(label: usize, probs: &[f64]) -> f64 {
    -math::ln(probs[label].clamp(PROB_FLOOR, 1.0))
}

/// Gradient of the cross-entropy with respect to the pre-softmax logits, `p − y`.
pub fn cross_entropy_logit_grad(label: usize, probs: &[f64]) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(i, p)| if i == label { p - 1.0 } else { *p })
        .collect()
}

struct Moments {
    mean_x: f64,
    mean_y: f64,
    var_x: f64,
    var_y: f64,
    cov: f64,
}

fn moments(x: &[f64], y: &[f64]) -> Result<Moments> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!(
            "sequence lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Contract(format!(
            "concordance needs at least two values, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut var_x, mut var_y, mut cov) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mean_x, b - mean_y);
        var_x += dx * dx;
        var_y += dy * dy;
        cov += dx * dy;
    }
    Ok(Moments {
        mean_x,
        mean_y,
        var_x: var_x / n,
        var_y: var_y / n,
        cov: cov / n,
    })
}

/// Concordance correlation coefficient with population statistics.
///
/// Returns 1 when the denominator vanishes, which only happens for two equal
/// constant sequences.
pub fn ccc(x: &[f64], y: &[f64]) -> Result<f64> {
    let m = moments(x, y)?;
    let shift = m.mean_x - m.mean_y;
    let denom = m.var_x + m.var_y + shift * shift;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok(2.0 * m.cov / denom)
}

/// `1 − ccc(pred, target)` over a batch, with its gradient on each prediction.
pub fn ccc_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    let m = moments(pred, target)?;
    let n = pred.len() as f64;
    let shift = m.mean_x - m.mean_y;
    let denom = m.var_x + m.var_y + shift * shift;
    if denom == 0.0 {
        return Ok((0.0, alloc::vec![0.0; pred.len()]));
    }
    let rho = 2.0 * m.cov / denom;
    // d rho / d x_i = [2 (y_i − ȳ) D − 2 s_xy (2 (x_i − x̄) + 2 (x̄ − ȳ))] / (N D²)
    let grad = pred
        .iter()
        .zip(target)
        .map(|(x, y)| {
            let d_cov = (y - m.mean_y) / n;
            let d_den = 2.0 * (x - m.mean_x) / n + 2.0 * shift / n;
            -(2.0 * d_cov * denom - 2.0 * m.cov * d_den) / (denom * denom)
        })
        .collect();
    Ok((1.0 - rho, grad))
}

/// `Σ (y_i − ŷ_i)²` over a five-vector, with gradient `2 (ŷ − y)`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, [f64; 5])> {
    if pred.len() != 5 || target.len() != 5 {
        return Err(Error::Contract(format!(
            "squared-error loss takes two 5-vectors, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let mut grad = [0.0; 5];
    let mut loss = 0.0;
    for i in 0..5 {
        let r = pred[i] - target[i];
        loss += r * r;
        grad[i] = 2.0 * r;
    }
    Ok((loss, grad))
}

/// `w1·class + w2·arousal + w3·valence + w4·mse`.
pub fn total_loss(
    class_loss: f64,
    ccc_arousal_loss: f64,
    ccc_valence_loss: f64,
    mse: f64,
    weights: &LossWeights,
) -> f64 {
    weights.class * class_loss
        + weights.arousal * ccc_arousal_loss
        + weights.valence * ccc_valence_loss
        + weights.mse * mse
}

/// Regression terms of a batch loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaLossTerms {
    pub arousal_ccc: f64,
    pub valence_ccc: f64,
    pub mse: f64,
}

/// Per-term batch losses; the regression part exists only for multitask models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub class: f64,
    pub va: Option<VaLossTerms>,
}

impl LossTerms {
    /// Weighted total; classification-only terms form only the `w1` product.
    pub fn total(&self, weights: &LossWeights) -> f64 {
        match self.va {
            Some(va) => total_loss(self.class, va.arousal_ccc, va.valence_ccc, va.mse, weights),
            None => weights.class * self.class,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.class.is_finite()
            && self
                .va
                .is_none_or(|v| v.arousal_ccc.is_finite() && v.valence_ccc.is_finite() && v.mse.is_finite())
    }
}
