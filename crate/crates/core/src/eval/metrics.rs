use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::records::{ErrorTag, EvalRecord};
use super::EvalError;
use crate::schema::TaskKind;

/// IoU thresholds reported for localization tasks.
pub const IOU_THRESHOLDS: [f64; 3] = [0.3, 0.5, 0.7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: TaskKind,
    pub n_records: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    /// Threshold (formatted as in [`IOU_THRESHOLDS`]) to precision.
    pub precision_at: BTreeMap<String, f64>,
    pub iou_avg: Option<f64>,
    pub rejection_accuracy: Option<f64>,
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub macro_recall: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub macro_recall: f64,
}

/// Fraction of positive-sample records with IoU at least `tau`. Records
/// without a usable prediction count as misses.
pub fn precision_at_tau(records: &[EvalRecord], tau: f64) -> Result<f64, EvalError> {
    let positives: Vec<&EvalRecord> = records.iter().filter(|r| !r.negative).collect();
    if positives.is_empty() {
        return Err(EvalError::EmptyDenominator);
    }
    let hits = positives
        .iter()
        .filter(|r| r.iou.unwrap_or(0.0) >= tau)
        .count();
    Ok(hits as f64 / positives.len() as f64)
}

/// Mean IoU over records that carry one.
pub fn iou_avg(records: &[EvalRecord]) -> Option<f64> {
    let ious: Vec<f64> = records.iter().filter_map(|r| r.iou).collect();
    (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64)
}

/// Fraction of negative-sample records answered with no box. Transport
/// failures are not rejections.
pub fn rejection_accuracy(records: &[EvalRecord]) -> Option<f64> {
    let negatives: Vec<&EvalRecord> = records.iter().filter(|r| r.negative).collect();
    if negatives.is_empty() {
        return None;
    }
    let correct = negatives
        .iter()
        .filter(|r| r.pred_box.is_none() && r.error_tag != Some(ErrorTag::InferException))
        .count();
    Some(correct as f64 / negatives.len() as f64)
}

/// Exact-match accuracy plus macro F1 and recall over the classes present in
/// `gts`.
pub fn classification_metrics<S: AsRef<str>>(
    preds: &[S],
    gts: &[S],
) -> Result<ClassificationMetrics, EvalError> {
    if preds.len() != gts.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            gts: gts.len(),
        });
    }
    if gts.is_empty() {
        return Err(EvalError::EmptyDenominator);
    }
    let n = gts.len() as f64;
    let correct = preds
        .iter()
        .zip(gts)
        .filter(|(p, g)| p.as_ref() == g.as_ref())
        .count();
    let classes: BTreeSet<&str> = gts.iter().map(AsRef::as_ref).collect();
    let mut f1_sum = 0.0;
    let mut recall_sum = 0.0;
    for class in &classes {
        let tp = preds
            .iter()
            .zip(gts)
            .filter(|(p, g)| p.as_ref() == *class && g.as_ref() == *class)
            .count() as f64;
        let predicted = preds.iter().filter(|p| p.as_ref() == *class).count() as f64;
        let support = gts.iter().filter(|g| g.as_ref() == *class).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if support > 0.0 { tp / support } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        f1_sum += f1;
        recall_sum += recall;
    }
    let k = classes.len() as f64;
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / n,
        macro_f1: f1_sum / k,
        macro_recall: recall_sum / k,
    })
}

pub fn threshold_key(tau: f64) -> String {
    format!("{tau:.1}")
}

/// Metrics for one task's records.
pub fn compute_report(task: TaskKind, records: &[EvalRecord]) -> MetricsReport {
    let n_negative = records.iter().filter(|r| r.negative).count();
    let mut report = MetricsReport {
        task,
        n_records: records.len(),
        n_positive: records.len() - n_negative,
        n_negative,
        precision_at: BTreeMap::new(),
        iou_avg: None,
        rejection_accuracy: rejection_accuracy(records),
        accuracy: None,
        macro_f1: None,
        macro_recall: None,
    };
    if task.is_localization() {
        for tau in IOU_THRESHOLDS {
            if let Ok(p) = precision_at_tau(records, tau) {
                report.precision_at.insert(threshold_key(tau), p);
            }
        }
        report.iou_avg = iou_avg(records);
    } else {
        let (preds, gts): (Vec<&str>, Vec<&str>) = records
            .iter()
            .filter_map(|r| {
                let gt = r.answer_gt.as_deref()?;
                Some((r.answer_pred.as_deref().unwrap_or(""), gt))
            })
            .unzip();
        if let Ok(m) = classification_metrics(&preds, &gts) {
            report.accuracy = Some(m.accuracy);
            report.macro_f1 = Some(m.macro_f1);
            report.macro_recall = Some(m.macro_recall);
        }
    }
    report
}
