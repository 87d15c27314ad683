use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Precision-recall curve of a ranking; one point per rank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// `(recall, precision)` after each ranked item.
    pub points: Vec<(f64, f64)>,
    pub ap: f64,
}

/// Indices sorted by descending score; ties keep input order.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Non-interpolated average precision: mean of the precision at the rank of each positive.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<PrCurve> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::NoPositives);
    }
    let mut points = Vec::with_capacity(scores.len());
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in ranking(scores).iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
        points.push((hits as f64 / n_pos as f64, hits as f64 / (rank + 1) as f64));
    }
    Ok(PrCurve {
        points,
        ap: sum / n_pos as f64,
    })
}

/// AP after keeping at most `k` top-scoring items per group (`None` keeps all).
///
/// Groups are typically videos; kept items are pooled across groups in group
/// order before ranking.
pub fn eval_ap_at_k(groups: &[Vec<(f64, bool)>], k: Option<usize>) -> Result<f64> {
    if k == Some(0) {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for group in groups {
        let group_scores: Vec<f64> = group.iter().map(|g| g.0).collect();
        let order = ranking(&group_scores);
        let keep = k.unwrap_or(order.len()).min(order.len());
        let mut kept: Vec<usize> = order[..keep].to_vec();
        kept.sort_unstable();
        for i in kept {
            scores.push(group[i].0);
            labels.push(group[i].1);
        }
    }
    Ok(average_precision(&scores, &labels)?.ap)
}

/// Unweighted mean of per-class APs.
pub fn mean_average_precision(aps: &[f64]) -> f64 {
    aps.iter().sum::<f64>() / aps.len() as f64
}
