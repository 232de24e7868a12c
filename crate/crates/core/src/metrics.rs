//! Confusion-matrix metrics against a ground-truth mask.

use crate::error::{Error, Result};
use crate::mask::SegMask;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Standard precision/recall/F1 treating foreground as the positive class.
/// With no predicted positives precision is 1 by convention (no false
/// alarms), and with no actual positives recall is 1; an empty mask against
/// empty truth therefore scores (1, 1, 1).
pub fn compute_metrics(mask: &SegMask, truth: &SegMask) -> Result<Metrics> {
    if mask.width() != truth.width() || mask.height() != truth.height() {
        return Err(Error::DimensionMismatch(format!(
            "mask {}x{} vs truth {}x{}",
            mask.width(),
            mask.height(),
            truth.width(),
            truth.height()
        )));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&m, &t) in mask.bits().iter().zip(truth.bits()) {
        match (m, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        precision,
        recall,
        f1,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_masks_score_one() {
        let mut m = SegMask::empty(4, 4);
        m.set(1, 2, true);
        m.set(3, 3, true);
        let metrics = compute_metrics(&m, &m).unwrap();
        assert_eq!((metrics.precision, metrics.recall, metrics.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_mask_nonempty_truth_has_zero_recall() {
        let empty = SegMask::empty(4, 4);
        let mut truth = SegMask::empty(4, 4);
        truth.set(0, 0, true);
        let metrics = compute_metrics(&empty, &truth).unwrap();
        assert_eq!(metrics.recall, 0.0);
        assert_eq!(metrics.precision, 1.0);
        assert_eq!(metrics.f1, 0.0);
    }

    #[test]
    fn both_empty_scores_one_by_convention() {
        let empty = SegMask::empty(4, 4);
        let metrics = compute_metrics(&empty, &empty).unwrap();
        assert_eq!((metrics.precision, metrics.recall, metrics.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn arithmetic_from_confusion_counts() {
        // 90 TP, 10 FP, 10 FN laid out on a 200-pixel strip.
        let mut mask = SegMask::empty(200, 1);
        let mut truth = SegMask::empty(200, 1);
        for c in 0..90 {
            mask.set(0, c, true);
            truth.set(0, c, true);
        }
        for c in 90..100 {
            mask.set(0, c, true);
        }
        for c in 100..110 {
            truth.set(0, c, true);
        }
        let m = compute_metrics(&mask, &truth).unwrap();
        assert!((m.precision - 0.9).abs() < 1e-12);
        assert!((m.recall - 0.9).abs() < 1e-12);
        assert!((m.f1 - 0.9).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = SegMask::empty(4, 4);
        let b = SegMask::empty(4, 5);
        assert!(compute_metrics(&a, &b).is_err());
    }
}
