//! Evaluation: object-box gaze accuracy, classification statistics,
//! precision-recall curves, fixation-context consistency and the
//! consistency-weighted F1.

mod features;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{BoundingBox, EmotionDistribution, EmotionLabel, ErpPoint, NUM_EMOTIONS};

pub use features::{
    cosine, extract_features, fcc_score, l2_normalize, render_attention, ContextFeatures,
    FccConfig, FeatureExtractor, HistGradExtractor, Window, FEATURE_DIM, HIST_BINS_PER_CHANNEL,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no samples")]
    Empty,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("feature dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("consistency weights sum to {0}; the weighted F1 is undefined")]
    ZeroWeight(f64),
    #[error("no positive samples")]
    NoPositives,
    #[error("window of radius {radius} around ({x}, {y}) is empty")]
    EmptyWindow { x: f64, y: f64, radius: f64 },
    #[error("invalid weights: {0}")]
    Weights(String),
}

/// True when some box contains `p`, edges included.
pub fn gaze_accuracy(p: &ErpPoint, boxes: &[BoundingBox]) -> bool {
    boxes.iter().any(|b| b.contains(p.u, p.v))
}

/// Percentage of points whose paired box set contains them.
pub fn gaze_accuracy_percent(cases: &[(ErpPoint, Vec<BoundingBox>)]) -> Result<f64, MetricsError> {
    if cases.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = cases.iter().filter(|(p, b)| gaze_accuracy(p, b)).count();
    Ok(100.0 * hits as f64 / cases.len() as f64)
}

/// One evaluated episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub true_label: EmotionLabel,
    pub pred_dist: EmotionDistribution,
    pub gaze_point: ErpPoint,
    pub scene_id: String,
    pub features: ContextFeatures,
}

impl EvalRecord {
    pub fn predicted(&self) -> EmotionLabel {
        self.pred_dist.argmax()
    }
}

/// Per-record consistency scores and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FccResult {
    pub scores: Vec<f64>,
    pub mean: f64,
}

pub fn fcc(records: &[EvalRecord], cfg: &FccConfig) -> Result<FccResult, MetricsError> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let scores = records
        .iter()
        .map(|r| fcc_score(&r.features, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(FccResult { scores, mean })
}

/// How each record's F1 term is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CawVariant {
    /// One-vs-rest F1 of the record's true class over the evaluation set.
    #[default]
    ClassF1,
    /// 1 when the record is classified correctly, else 0.
    Strict,
}

/// `sum(w_i f_i) / sum(w_i)`.
///
/// Weights are divided by their maximum first; the quotient is correctly
/// rounded, so any rescaling `c * w` that is itself exact gives a
/// bit-identical result.
pub fn weighted_f1(weights: &[f64], f1: &[f64]) -> Result<f64, MetricsError> {
    if weights.len() != f1.len() {
        return Err(MetricsError::LengthMismatch {
            left: weights.len(),
            right: f1.len(),
        });
    }
    if weights.is_empty() {
        return Err(MetricsError::Empty);
    }
    let den: f64 = weights.iter().sum();
    if !(den > 0.0) {
        return Err(MetricsError::ZeroWeight(den));
    }
    let top = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unit: Vec<f64> = weights.iter().map(|w| w / top).collect();
    let num: f64 = unit.iter().zip(f1).map(|(u, f)| u * f).sum();
    Ok(num / unit.iter().sum::<f64>())
}

/// Consistency-weighted F1 of `records` with the given FCC weights.
pub fn cawf1(
    records: &[EvalRecord],
    per_class_f1: &[f64; NUM_EMOTIONS],
    fcc_scores: &[f64],
    variant: CawVariant,
) -> Result<f64, MetricsError> {
    let f1: Vec<f64> = records
        .iter()
        .map(|r| match variant {
            CawVariant::ClassF1 => per_class_f1[r.true_label.ordinal()],
            CawVariant::Strict => (r.predicted() == r.true_label) as u8 as f64,
        })
        .collect();
    weighted_f1(fcc_scores, &f1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub n: usize,
    pub accuracy: f64,
    pub per_class: [ClassStats; NUM_EMOTIONS],
    /// Mean F1 over classes that occur in the truth or the predictions.
    pub macro_f1: f64,
    /// Rows are true classes, columns predicted.
    pub confusion: [[usize; NUM_EMOTIONS]; NUM_EMOTIONS],
    /// Confusion rows divided by their sums (zero rows stay zero).
    pub confusion_norm: [[f64; NUM_EMOTIONS]; NUM_EMOTIONS],
}

impl ClassificationReport {
    pub fn class_f1(&self) -> [f64; NUM_EMOTIONS] {
        self.per_class.map(|c| c.f1)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn classification_report(
    truth: &[EmotionLabel],
    pred: &[EmotionLabel],
) -> Result<ClassificationReport, MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            left: truth.len(),
            right: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut confusion = [[0usize; NUM_EMOTIONS]; NUM_EMOTIONS];
    for (t, p) in truth.iter().zip(pred) {
        confusion[t.ordinal()][p.ordinal()] += 1;
    }
    let per_class: [ClassStats; NUM_EMOTIONS] = std::array::from_fn(|c| {
        let tp = confusion[c][c];
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = ratio(2 * tp, support + predicted);
        ClassStats {
            precision,
            recall,
            f1,
            support,
            predicted,
        }
    });
    let present: Vec<&ClassStats> = per_class
        .iter()
        .filter(|c| c.support + c.predicted > 0)
        .collect();
    let macro_f1 = present.iter().map(|c| c.f1).sum::<f64>() / present.len() as f64;
    let correct: usize = (0..NUM_EMOTIONS).map(|c| confusion[c][c]).sum();
    let confusion_norm = confusion.map(|row| {
        let s: usize = row.iter().sum();
        row.map(|v| ratio(v, s))
    });
    Ok(ClassificationReport {
        n: truth.len(),
        accuracy: ratio(correct, truth.len()),
        per_class,
        macro_f1,
        confusion,
        confusion_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// One point per distinct score, thresholds descending; a sample counts as
/// positive when its score is at least the threshold.
pub fn pr_curve(truth: &[bool], scores: &[f64]) -> Result<Vec<PrPoint>, MetricsError> {
    if truth.len() != scores.len() {
        return Err(MetricsError::LengthMismatch {
            left: truth.len(),
            right: scores.len(),
        });
    }
    let positives = truth.iter().filter(|t| **t).count();
    if positives == 0 {
        return Err(MetricsError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let thr = scores[order[i]];
        while i < order.len() && scores[order[i]] == thr {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(PrPoint {
            threshold: thr,
            recall: ratio(tp, positives),
            precision: ratio(tp, tp + fp),
        });
    }
    Ok(out)
}

/// One-vs-rest curve for `class`, scored by its predicted probability.
pub fn class_pr_curve(
    truth: &[EmotionLabel],
    dists: &[EmotionDistribution],
    class: EmotionLabel,
) -> Result<Vec<PrPoint>, MetricsError> {
    let t: Vec<bool> = truth.iter().map(|l| *l == class).collect();
    let s: Vec<f64> = dists.iter().map(|d| d.prob(class)).collect();
    pr_curve(&t, &s)
}

/// `metric,class,value` rows followed by a confusion block.
pub fn metrics_table(report: &ClassificationReport, extra: &[(&str, f64)]) -> String {
    let mut out = String::from("metric,class,value\n");
    let _ = writeln!(out, "accuracy,all,{}", report.accuracy);
    let _ = writeln!(out, "macro_f1,all,{}", report.macro_f1);
    for (name, v) in extra {
        let _ = writeln!(out, "{name},all,{v}");
    }
    for (e, c) in EmotionLabel::ALL.iter().zip(&report.per_class) {
        let _ = writeln!(out, "precision,{e},{}", c.precision);
        let _ = writeln!(out, "recall,{e},{}", c.recall);
        let _ = writeln!(out, "f1,{e},{}", c.f1);
        let _ = writeln!(out, "support,{e},{}", c.support);
    }
    out.push_str("\nconfusion,");
    out.push_str(&EmotionLabel::ALL.map(|e| e.name()).join(","));
    out.push('\n');
    for (e, row) in EmotionLabel::ALL.iter().zip(&report.confusion) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{e},{}", cells.join(","));
    }
    out
}

/// `threshold,recall,precision` rows.
pub fn pr_table(points: &[PrPoint]) -> String {
    let mut out = String::from("threshold,recall,precision\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.threshold, p.recall, p.precision);
    }
    out
}
