//! Challenge metrics: accuracy, macro-F1, expression score, CCC and VA score.

use alloc::format;

use crate::data::NUM_CLASSES;
use crate::error::{Error, Result};

/// `counts[true][predicted]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    /// F1 of one class; zero when the class never occurs and is never predicted.
    pub fn class_f1(&self, class: usize) -> f64 {
        let tp = self.counts[class][class] as f64;
        let actual: u64 = self.counts[class].iter().sum();
        let predicted: u64 = (0..NUM_CLASSES).map(|i| self.counts[i][class]).sum();
        let denom = actual as f64 + predicted as f64;
        if tp == 0.0 || denom == 0.0 {
            0.0
        } else {
            2.0 * tp / denom
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
}

pub fn classification_metrics(predicted: &[usize], truth: &[usize]) -> Result<ClassificationMetrics> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::Contract(format!(
            "label sequences must be equal and non-empty, got {} and {}",
            predicted.len(),
            truth.len()
        )));
    }
    let mut confusion = ConfusionMatrix::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= NUM_CLASSES || t >= NUM_CLASSES {
            return Err(Error::Contract(format!("label out of range: true {t}, predicted {p}")));
        }
        confusion.counts[t][p] += 1;
    }
    let accuracy = confusion.correct() as f64 / confusion.total() as f64;
    let macro_f1 = (0..NUM_CLASSES).map(|c| confusion.class_f1(c)).sum::<f64>() / NUM_CLASSES as f64;
    Ok(ClassificationMetrics {
        accuracy,
        macro_f1,
        confusion,
    })
}

/// `0.67·F1 + 0.33·accuracy`.
pub fn expression_score(accuracy: f64, macro_f1: f64) -> f64 {
    0.67 * macro_f1 + 0.33 * accuracy
}

/// Mean of the arousal and valence concordance.
pub fn va_score(ccc_arousal: f64, ccc_valence: f64) -> f64 {
    (ccc_arousal + ccc_valence) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpressionMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub expression_score: f64,
    pub confusion: ConfusionMatrix,
    pub frames: usize,
}

impl ExpressionMetrics {
    pub fn from_labels(predicted: &[usize], truth: &[usize]) -> Result<Self> {
        let m = classification_metrics(predicted, truth)?;
        Ok(Self {
            accuracy: m.accuracy,
            macro_f1: m.macro_f1,
            expression_score: expression_score(m.accuracy, m.macro_f1),
            confusion: m.confusion,
            frames: truth.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaMetrics {
    pub ccc_arousal: f64,
    pub ccc_valence: f64,
    pub va_score: f64,
    pub frames: usize,
}

impl VaMetrics {
    /// Global CCC per dimension over all supplied frames.
    pub fn from_values(
        pred_arousal: &[f64],
        true_arousal: &[f64],
        pred_valence: &[f64],
        true_valence: &[f64],
    ) -> Result<Self> {
        let ccc_arousal = crate::losses::ccc(pred_arousal, true_arousal)?;
        let ccc_valence = crate::losses::ccc(pred_valence, true_valence)?;
        Ok(Self {
            ccc_arousal,
            ccc_valence,
            va_score: va_score(ccc_arousal, ccc_valence),
            frames: true_arousal.len(),
        })
    }
}

/// Expression and valence-arousal results; a part is absent when the model or
/// track does not produce it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsReport {
    pub expression: Option<ExpressionMetrics>,
    pub va: Option<VaMetrics>,
}

impl MetricsReport {
    /// Checks that the derived scores agree with their inputs within 1e-12.
    pub fn is_consistent(&self) -> bool {
        let expr_ok = self.expression.is_none_or(|e| {
            (e.expression_score - expression_score(e.accuracy, e.macro_f1)).abs() <= 1e-12
        });
        let va_ok = self
            .va
            .is_none_or(|v| (v.va_score - va_score(v.ccc_arousal, v.ccc_valence)).abs() <= 1e-12);
        expr_ok && va_ok
    }
}
