use crate::error::{Error, Result};

/// Clip bound applied to probabilities before taking logs.
pub const PROB_CLIP: f64 = 1e-7;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Area under the ROC curve as the Mann-Whitney statistic, from rank sums
/// with tied scores sharing their average rank.
pub fn auc(labels: &[f64], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::Evaluation(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    let positives = labels.iter().filter(|&&y| y > 0.5).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes ({positives} positives, {negatives} negatives)"
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Evaluation("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start + 1 ..= end share their mean.
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        let pos_in_block = order[start..end].iter().filter(|&&k| labels[k] > 0.5).count();
        rank_sum += mean_rank * pos_in_block as f64;
        start = end;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean binary cross-entropy of probabilities clipped to `[1e-7, 1 - 1e-7]`.
pub fn logloss(labels: &[f64], probs: &[f64]) -> Result<f64> {
    if labels.len() != probs.len() || labels.is_empty() {
        return Err(Error::Evaluation(format!(
            "logloss needs equal non-empty inputs, got {} and {}",
            labels.len(),
            probs.len()
        )));
    }
    let mut total = 0.0;
    for (&y, &p) in labels.iter().zip(probs) {
        if y != 0.0 && y != 1.0 {
            return Err(Error::Evaluation(format!("label {y} is not 0 or 1")));
        }
        let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        total -= if y == 1.0 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(total / labels.len() as f64)
}
