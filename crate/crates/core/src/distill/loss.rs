use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{logloss, sigmoid, PROB_CLIP};

/// Space in which student outputs are matched to teacher outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KdSpace {
    #[default]
    Logit,
    Probability,
}

impl std::str::FromStr for KdSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logit" => Ok(KdSpace::Logit),
            "probability" => Ok(KdSpace::Probability),
            _ => Err(Error::Config(format!("unknown KD space `{s}` (logit | probability)"))),
        }
    }
}

/// Mean squared difference between teacher and student logits.
pub fn kd_loss(teacher: &[f64], student: &[f64]) -> Result<f64> {
    kd_loss_in(KdSpace::Logit, teacher, student)
}

pub fn kd_loss_in(space: KdSpace, teacher: &[f64], student: &[f64]) -> Result<f64> {
    if teacher.len() != student.len() || teacher.is_empty() {
        return Err(Error::Evaluation(format!(
            "KD loss needs equal non-empty inputs, got {} and {}",
            teacher.len(),
            student.len()
        )));
    }
    let total: f64 = teacher.iter().zip(student).map(|(&t, &s)| kd_term(space, t, s).0).sum();
    Ok(total / teacher.len() as f64)
}

/// Mean binary cross-entropy on clipped probabilities.
pub fn ctr_loss(labels: &[f64], probs: &[f64]) -> Result<f64> {
    logloss(labels, probs)
}

pub fn total_loss(kd: f64, ctr: f64, alpha: f64, beta: f64) -> f64 {
    alpha * kd + beta * ctr
}

/// One instance's KD loss and its derivative with respect to the student logit.
#[inline]
pub fn kd_term(space: KdSpace, teacher_logit: f64, student_logit: f64) -> (f64, f64) {
    match space {
        KdSpace::Logit => {
            let r = student_logit - teacher_logit;
            (r * r, 2.0 * r)
        }
        KdSpace::Probability => {
            let s = sigmoid(student_logit);
            let r = s - sigmoid(teacher_logit);
            (r * r, 2.0 * r * s * (1.0 - s))
        }
    }
}

/// One instance's clipped cross-entropy and its derivative with respect to
/// the logit. Inside the clipped region the loss is flat, so the derivative
/// is zero there.
#[inline]
pub fn ctr_term(label: f64, logit: f64) -> (f64, f64) {
    let p = sigmoid(logit);
    let clipped = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    let loss = if label == 1.0 {
        -clipped.ln()
    } else {
        -(1.0 - clipped).ln()
    };
    let grad = if clipped == p { p - label } else { 0.0 };
    (loss, grad)
}
