//! Evaluation statistics for binary predictions. Class 1 is the positive
//! class throughout.

use crate::error::{OteError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn from_labels(predicted: &[u8], truth: &[u8]) -> Result<Self> {
        check_lengths(predicted.len(), truth.len())?;
        let mut m = ConfusionMatrix::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p, t) {
                (1, 1) => m.tp += 1,
                (1, _) => m.fp += 1,
                (_, 1) => m.fn_ += 1,
                _ => m.tn += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(OteError::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(OteError::Empty("label vector"));
    }
    Ok(())
}

pub fn misclassification(predicted: &[u8], truth: &[u8]) -> Result<f64> {
    check_lengths(predicted.len(), truth.len())?;
    let wrong = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Mean squared difference between class-1 probabilities and outcomes.
pub fn brier_score(probas: &[f64], truth: &[u8]) -> Result<f64> {
    check_lengths(probas.len(), truth.len())?;
    if let Some(&p) = probas.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(OteError::ProbabilityOutOfRange(p));
    }
    let sum: f64 = probas
        .iter()
        .zip(truth)
        .map(|(&p, &y)| {
            let r = f64::from(y) - p;
            r * r
        })
        .sum();
    Ok(sum / truth.len() as f64)
}

/// True-positive rate; undefined when the truth has no positives.
pub fn sensitivity(predicted: &[u8], truth: &[u8]) -> Result<f64> {
    let m = ConfusionMatrix::from_labels(predicted, truth)?;
    if m.tp + m.fn_ == 0 {
        return Err(OteError::Undefined("sensitivity"));
    }
    Ok(m.tp as f64 / (m.tp + m.fn_) as f64)
}

/// Cohen's kappa with marginals taken from both label vectors.
pub fn kappa(predicted: &[u8], truth: &[u8]) -> Result<f64> {
    let m = ConfusionMatrix::from_labels(predicted, truth)?;
    let n = m.total() as f64;
    let observed = (m.tp + m.tn) as f64 / n;
    let pred_pos = (m.tp + m.fp) as f64 / n;
    let true_pos = (m.tp + m.fn_) as f64 / n;
    let expected = pred_pos * true_pos + (1.0 - pred_pos) * (1.0 - true_pos);
    if expected >= 1.0 {
        return Err(OteError::Undefined("kappa"));
    }
    Ok((observed - expected) / (1.0 - expected))
}
