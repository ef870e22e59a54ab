use serde::Serialize;

use crate::error::{Error, Result};

fn check_aligned(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("scores must be finite".into()));
    }
    Ok(())
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    (pos, labels.len() - pos)
}

/// `mean + population std` of the training errors.
pub fn compute_threshold(train_errors: &[f64]) -> Result<f64> {
    if train_errors.len() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "threshold needs at least 2 training errors, got {}",
            train_errors.len()
        )));
    }
    let n = train_errors.len() as f64;
    let mean = train_errors.iter().sum::<f64>() / n;
    let var = train_errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    Ok(mean + var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocPoint {
    /// Frames with `score ≥ threshold` are predicted anomalous.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points from `(0, 0)` to `(1, 1)`, non-decreasing in both axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Area under the ROC curve by the rank-sum statistic with midranks for
/// ties, equal to `P(s⁺ > s⁻) + ½·P(s⁺ = s⁻)`.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    check_aligned(scores, labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes, got {pos} anomalous and {neg} normal frames"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // ranks are 1-based; a tie group spanning ranks i+1..=j gets (i+1+j)/2
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        let group_pos = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        pos_rank_sum += midrank * group_pos as f64;
        i = j;
    }
    let u = pos_rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    let auc = u / (pos * neg) as f64;

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = order.len();
    while k > 0 {
        let s = scores[order[k - 1]];
        while k > 0 && scores[order[k - 1]] == s {
            if labels[order[k - 1]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k -= 1;
        }
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdMetrics {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub oa: f64,
    pub counts: Confusion,
    /// No frame was predicted anomalous, so precision and F1 are reported as 0.
    pub degenerate: bool,
}

/// Confusion-matrix metrics with `score > threshold` declared anomalous.
pub fn threshold_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<ThresholdMetrics> {
    check_aligned(scores, labels)?;
    if scores.is_empty() {
        return Err(Error::UndefinedMetric("no frames to evaluate".into()));
    }
    let mut c = Confusion { tp: 0, fp: 0, tn: 0, fn_: 0 };
    for (&s, &l) in scores.iter().zip(labels) {
        match (s > threshold, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let recall = ratio(c.tp, c.tp + c.fn_);
    let precision = ratio(c.tp, c.tp + c.fp);
    let f1 = if recall + precision > 0.0 {
        2.0 * recall * precision / (recall + precision)
    } else {
        0.0
    };
    Ok(ThresholdMetrics {
        recall,
        precision,
        f1,
        oa: ratio(c.tp + c.tn, c.total()),
        counts: c,
        degenerate: c.tp + c.fp == 0,
    })
}

/// Mean anomalous score minus mean normal score.
pub fn delta_s(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_aligned(scores, labels)?;
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("Δs needs both classes".into()));
    }
    let (mut sp, mut sn) = (0.0, 0.0);
    for (&s, &l) in scores.iter().zip(labels) {
        if l == 1 {
            sp += s;
        } else {
            sn += s;
        }
    }
    Ok(sp / pos as f64 - sn / neg as f64)
}

/// Mean of the per-frame errors.
pub fn mean_squared_reconstruction_error(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::UndefinedMetric("MSRE of no frames".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// `FP / (FP + TN)` with `score > threshold` declared anomalous.
pub fn false_positive_rate(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    check_aligned(scores, labels)?;
    let (_, neg) = class_counts(labels);
    if neg == 0 {
        return Err(Error::UndefinedMetric("FPR needs normal frames".into()));
    }
    let fp = scores.iter().zip(labels).filter(|&(&s, &l)| l == 0 && s > threshold).count();
    Ok(fp as f64 / neg as f64)
}
