//! Accuracy, confusion matrices, one-vs-rest ROC curves and side-by-side
//! classifier comparisons.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no predictions to evaluate")]
    Empty,
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("class {0} has no positive instances; its ROC curve is undefined")]
    NoPositives(usize),
    #[error("class {0} has no negative instances; its ROC curve is undefined")]
    NoNegatives(usize),
    #[error("score row {row}: {reason}")]
    BadScores { row: usize, reason: String },
    #[error("{scores} score rows but {truths} labels")]
    LengthMismatch { scores: usize, truths: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub n_test: usize,
    pub class_names: Vec<String>,
}

/// Builds a report from `(truth, predicted)` pairs. Precision and recall of a
/// class with no predictions or no instances are reported as 0.
pub fn evaluate(pairs: &[(usize, usize)], n_classes: usize) -> Result<EvalReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for &(truth, pred) in pairs {
        for label in [truth, pred] {
            if label >= n_classes {
                return Err(EvalError::LabelOutOfRange { label, n_classes });
            }
        }
        confusion[truth][pred] += 1;
    }
    let n_test = pairs.len();
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = (0..n_classes)
        .map(|c| ratio(confusion[c][c], (0..n_classes).map(|t| confusion[t][c]).sum()))
        .collect();
    let recall = (0..n_classes)
        .map(|c| ratio(confusion[c][c], confusion[c].iter().sum()))
        .collect();
    Ok(EvalReport {
        accuracy: correct as f64 / n_test as f64,
        confusion,
        precision,
        recall,
        n_test,
        class_names: (0..n_classes).map(|c| c.to_string()).collect(),
    })
}

impl EvalReport {
    pub fn with_class_names(mut self, names: &[String]) -> Self {
        assert_eq!(names.len(), self.confusion.len(), "class name count");
        self.class_names = names.to_vec();
        self
    }

    pub fn n_classes(&self) -> usize {
        self.confusion.len()
    }

    pub fn to_text(&self) -> String {
        let width = self.class_names.iter().map(String::len).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "instances: {}", self.n_test);
        let _ = writeln!(out, "accuracy:  {:.4}", self.accuracy);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<width$}  precision  recall  support", "class");
        for (c, name) in self.class_names.iter().enumerate() {
            let support: usize = self.confusion[c].iter().sum();
            let _ = writeln!(
                out,
                "{name:<width$}  {:>9.4}  {:>6.4}  {support:>7}",
                self.precision[c], self.recall[c]
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "confusion matrix (rows = truth, columns = predicted):");
        let cell = self
            .confusion
            .iter()
            .flatten()
            .map(|v| v.to_string().len())
            .max()
            .unwrap_or(1)
            .max(width);
        let _ = write!(out, "{:<width$}", "");
        for name in &self.class_names {
            let _ = write!(out, " {name:>cell$}");
        }
        let _ = writeln!(out);
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            let _ = write!(out, "{name:<width$}");
            for v in row {
                let _ = write!(out, " {v:>cell$}");
            }
            let _ = writeln!(out);
        }
        out
    }

    /// `class,precision,recall,support` plus a final `overall` accuracy row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,support\n");
        for (c, name) in self.class_names.iter().enumerate() {
            let support: usize = self.confusion[c].iter().sum();
            let _ = writeln!(out, "{},{},{},{support}", csv_field(name), self.precision[c], self.recall[c]);
        }
        let _ = writeln!(out, "overall,{},{},{}", self.accuracy, self.accuracy, self.n_test);
        out
    }

    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("truth");
        for name in &self.class_names {
            out.push(',');
            out.push_str(&csv_field(name));
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(&self.confusion) {
            out.push_str(&csv_field(name));
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub class_index: usize,
    /// `(false positive rate, true positive rate)` from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (fpr, tpr) in &self.points {
            let _ = writeln!(out, "{fpr},{tpr}");
        }
        out
    }
}

/// One-vs-rest ROC of class `k`: thresholds sweep the distinct class-`k`
/// scores from high to low (instances scoring at or above the threshold are
/// called positive), bracketed by the +inf and -inf sentinels. The area is
/// the trapezoidal integral over the points.
pub fn roc_one_vs_rest(scores: &[Vec<f64>], truths: &[usize], k: usize) -> Result<RocCurve, EvalError> {
    if scores.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            truths: truths.len(),
        });
    }
    for (row, s) in scores.iter().enumerate() {
        if k >= s.len() {
            return Err(EvalError::BadScores {
                row,
                reason: format!("no score for class {k}"),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::BadScores {
                row,
                reason: "non-finite score".into(),
            });
        }
        let total: f64 = s.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(EvalError::BadScores {
                row,
                reason: format!("scores sum to {total}, expected 1"),
            });
        }
    }
    let positives = truths.iter().filter(|&&t| t == k).count();
    let negatives = truths.len() - positives;
    if positives == 0 {
        return Err(EvalError::NoPositives(k));
    }
    if negatives == 0 {
        return Err(EvalError::NoNegatives(k));
    }

    let mut ranked: Vec<(f64, bool)> = scores.iter().zip(truths).map(|(s, &t)| (s[k], t == k)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < ranked.len() {
        let threshold = ranked[i].0;
        while i < ranked.len() && ranked[i].0 == threshold {
            if ranked[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n, tp as f64 / p));
    }
    if points.last() != Some(&(1.0, 1.0)) {
        points.push((1.0, 1.0));
    }

    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    Ok(RocCurve {
        class_index: k,
        points,
        auc,
    })
}

/// Accuracy and per-class recall of several classifiers, in the given order.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub text: String,
    pub csv: String,
}

/// Tabulates the reports. `focus` lists class indices whose recalls are
/// additionally printed side by side in their own section.
pub fn compare_report(reports: &[(String, EvalReport)], focus: &[usize]) -> Comparison {
    let class_names: Vec<String> = reports
        .first()
        .map(|(_, r)| r.class_names.clone())
        .unwrap_or_default();
    let name_w = reports.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(10);
    let col_w = class_names.iter().map(String::len).max().unwrap_or(0).max(8);

    let mut text = String::new();
    let _ = write!(text, "{:<name_w$}  {:>col_w$}", "classifier", "accuracy");
    for c in &class_names {
        let _ = write!(text, "  {c:>col_w$}");
    }
    let _ = writeln!(text);
    let mut csv = String::from("classifier,accuracy");
    for c in &class_names {
        let _ = write!(csv, ",recall_{}", csv_field(c));
    }
    csv.push('\n');

    for (name, r) in reports {
        let _ = write!(text, "{name:<name_w$}  {:>col_w$.4}", r.accuracy);
        let _ = write!(csv, "{},{}", csv_field(name), r.accuracy);
        for recall in &r.recall {
            let _ = write!(text, "  {recall:>col_w$.4}");
            let _ = write!(csv, ",{recall}");
        }
        let _ = writeln!(text);
        csv.push('\n');
    }

    let focus: Vec<usize> = focus.iter().copied().filter(|&c| c < class_names.len()).collect();
    if !focus.is_empty() {
        let _ = writeln!(text);
        let _ = writeln!(text, "per-class recall, focus classes:");
        let _ = write!(text, "{:<name_w$}", "classifier");
        for &c in &focus {
            let _ = write!(text, "  {:>col_w$}", class_names[c]);
        }
        let _ = writeln!(text);
        for (name, r) in reports {
            let _ = write!(text, "{name:<name_w$}");
            for &c in &focus {
                let _ = write!(text, "  {:>col_w$.4}", r.recall[c]);
            }
            let _ = writeln!(text);
        }
    }
    Comparison { text, csv }
}
