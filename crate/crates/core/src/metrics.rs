//! Confusion matrices and support-weighted precision, recall and F1.
//!
//! Class 1 (sarcastic) is the positive class. A metric whose denominator is
//! zero (precision of a class that is never predicted, say) evaluates to 0.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::data::{Label, Manifest, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn record(&mut self, label: Label, pred: Label) {
        match (label, pred) {
            (Label::Sarcastic, Label::Sarcastic) => self.tp += 1,
            (Label::NonSarcastic, Label::Sarcastic) => self.fp += 1,
            (Label::NonSarcastic, Label::NonSarcastic) => self.tn += 1,
            (Label::Sarcastic, Label::NonSarcastic) => self.fn_ += 1,
        }
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

pub fn confusion(labels: &[Label], preds: &[Label]) -> Result<ConfusionMatrix> {
    if labels.len() != preds.len() {
        return Err(Error::LengthMismatch { labels: labels.len(), preds: preds.len() });
    }
    if labels.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let mut c = ConfusionMatrix::default();
    for (l, p) in labels.iter().zip(preds) {
        c.record(*l, *p);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    /// Support-weighted over both classes.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Indexed by class: 0 non-sarcastic, 1 sarcastic.
    pub per_class: [ClassMetrics; 2],
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    /// Weighted P, R, F1 in percent.
    pub fn percentages(&self) -> [f64; 3] {
        [self.precision * 100.0, self.recall * 100.0, self.f1 * 100.0]
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(correct: u64, predicted: u64, support: u64) -> ClassMetrics {
    let precision = ratio(correct, predicted);
    let recall = ratio(correct, support);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    ClassMetrics { precision, recall, f1, support }
}

pub fn weighted_prf(c: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = c.total();
    if total == 0 {
        return Err(Error::EmptyEvaluation);
    }
    let negative = class_metrics(c.tn, c.tn + c.fn_, c.tn + c.fp);
    let positive = class_metrics(c.tp, c.tp + c.fp, c.tp + c.fn_);
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        (negative.support as f64 * f(&negative) + positive.support as f64 * f(&positive)) / total as f64
    };
    Ok(MetricsReport {
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
        accuracy: c.accuracy(),
        per_class: [negative, positive],
        confusion: *c,
    })
}

/// Convenience: confusion then weighted metrics.
pub fn evaluate_labels(labels: &[Label], preds: &[Label]) -> Result<MetricsReport> {
    weighted_prf(&confusion(labels, preds)?)
}

/// One line of an external predictions file.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub pred: Label,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Coverage {
    /// Samples in the requested split, all of which were scored.
    pub scored: usize,
    /// Predictions for ids that belong to other splits of the manifest.
    pub other_split: usize,
}

/// Maximum number of missing ids quoted in the error.
pub const MISSING_ID_SAMPLE: usize = 10;

/// Joins predictions with the manifest labels of `split` by id.
pub fn score_predictions(
    manifest: &Manifest,
    predictions: &[Prediction],
    split: Split,
) -> Result<(MetricsReport, Coverage)> {
    let mut by_id: BTreeMap<&str, Label> = BTreeMap::new();
    for p in predictions {
        if by_id.insert(p.id.as_str(), p.pred).is_some() {
            return Err(Error::DuplicatePredictionId(p.id.clone()));
        }
    }
    let known: BTreeMap<&str, Split> = manifest.records().iter().map(|r| (r.id.as_str(), r.split)).collect();
    if let Some(p) = predictions.iter().find(|p| !known.contains_key(p.id.as_str())) {
        return Err(Error::UnknownPredictionId(p.id.clone()));
    }

    let mut labels = Vec::new();
    let mut preds = Vec::new();
    let mut missing = Vec::new();
    for r in manifest.split(split) {
        match by_id.get(r.id.as_str()) {
            Some(pred) => {
                labels.push(r.label);
                preds.push(*pred);
            }
            None => missing.push(r.id.as_str()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingPredictions {
            count: missing.len(),
            sample: missing.iter().take(MISSING_ID_SAMPLE).map(|s| s.to_string()).collect(),
        });
    }
    let in_split: BTreeSet<&str> = manifest.split(split).map(|r| r.id.as_str()).collect();
    let coverage =
        Coverage { scored: labels.len(), other_split: by_id.keys().filter(|id| !in_split.contains(*id)).count() };
    Ok((evaluate_labels(&labels, &preds)?, coverage))
}
