//! Threshold-free evaluation.
//!
//! AUROC is the exact Mann-Whitney statistic computed from average ranks, so
//! ties count one half. AUPR is average precision: the PR curve is a step
//! function over descending unique thresholds with precision held constant
//! to the right of each recall step.

use std::cmp::Ordering;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<u8>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!("{} scores, {} labels", scores.len(), labels.len())));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("scores"));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::BadParameter("labels must be 0 or 1".into()));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn num_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// The negative-class view: `(1 - score, 1 - label)`.
    pub fn flipped(&self) -> ScoredSet {
        ScoredSet {
            scores: self.scores.iter().map(|s| 1.0 - s).collect(),
            labels: self.labels.iter().map(|l| 1 - l).collect(),
        }
    }

    fn class_counts(&self) -> Result<(usize, usize)> {
        let pos = self.num_positive();
        let neg = self.len() - pos;
        if pos == 0 || neg == 0 {
            return Err(Error::SingleClass);
        }
        Ok((pos, neg))
    }

    /// Indices sorted by descending score.
    fn descending(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].partial_cmp(&self.scores[a]).unwrap_or(Ordering::Equal));
        idx
    }

    /// Cumulative `(tp, fp)` after each group of tied scores, highest first.
    fn threshold_counts(&self) -> Vec<(usize, usize)> {
        let idx = self.descending();
        let mut out = Vec::new();
        let (mut tp, mut fp) = (0, 0);
        for (k, &i) in idx.iter().enumerate() {
            if self.labels[i] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            let last_of_group = k + 1 == idx.len() || self.scores[idx[k + 1]] != self.scores[i];
            if last_of_group {
                out.push((tp, fp));
            }
        }
        out
    }
}

pub fn auroc(s: &ScoredSet) -> Result<f64> {
    let (pos, neg) = s.class_counts()?;
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s.scores[a].partial_cmp(&s.scores[b]).unwrap_or(Ordering::Equal));
    // twice the rank sum of the positives, so average ranks stay integral
    let mut rank_sum_x2: u128 = 0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && s.scores[idx[end]] == s.scores[idx[start]] {
            end += 1;
        }
        // ranks start+1 ..= end, average (start + 1 + end) / 2
        let avg_x2 = (start + 1 + end) as u128;
        let pos_in_group = idx[start..end].iter().filter(|&&i| s.labels[i] == 1).count() as u128;
        rank_sum_x2 += avg_x2 * pos_in_group;
        start = end;
    }
    let pos_u = pos as u128;
    // 2U = 2R - n_pos (n_pos + 1); U is a multiple of 1/2
    let u_x2 = rank_sum_x2 - pos_u * (pos_u + 1);
    Ok((u_x2 as f64 / 2.0) / (pos as f64 * neg as f64))
}

pub fn aupr(s: &ScoredSet) -> Result<f64> {
    let (pos, _) = s.class_counts()?;
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for (tp, fp) in s.threshold_counts() {
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// `(fpr, tpr)` points from `(0, 0)` to `(1, 1)`.
pub fn roc_curve(s: &ScoredSet) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = s.class_counts()?;
    let mut pts = vec![(0.0, 0.0)];
    pts.extend(s.threshold_counts().into_iter().map(|(tp, fp)| (fp as f64 / neg as f64, tp as f64 / pos as f64)));
    Ok(pts)
}

/// `(recall, precision)` points, starting at `(0, 1)`.
pub fn pr_curve(s: &ScoredSet) -> Result<Vec<(f64, f64)>> {
    let (pos, _) = s.class_counts()?;
    let mut pts = vec![(0.0, 1.0)];
    pts.extend(
        s.threshold_counts()
            .into_iter()
            .map(|(tp, fp)| (tp as f64 / pos as f64, tp as f64 / (tp + fp) as f64)),
    );
    Ok(pts)
}

pub fn harmonic(x: f64, y: f64) -> f64 {
    if x + y == 0.0 {
        0.0
    } else {
        2.0 * x * y / (x + y)
    }
}

/// Precision and recall of the positive class, predicting positive when
/// `score >= threshold`. Precision is 0 when nothing is predicted positive.
pub fn precision_recall_at(s: &ScoredSet, threshold: f64) -> (f64, f64) {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&score, &l) in s.scores.iter().zip(&s.labels) {
        match (score >= threshold, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    (precision, recall)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub auroc_pos: f64,
    pub auroc_neg: f64,
    pub auroc_harmonic: f64,
    pub aupr_pos: f64,
    pub aupr_neg: f64,
    pub aupr_harmonic: f64,
    pub precision: f64,
    pub recall: f64,
}

pub const METRIC_NAMES: [&str; 8] = [
    "auroc_pos",
    "auroc_neg",
    "auroc_harmonic",
    "aupr_pos",
    "aupr_neg",
    "aupr_harmonic",
    "precision",
    "recall",
];

impl MetricsReport {
    pub fn values(&self) -> [f64; 8] {
        [
            self.auroc_pos,
            self.auroc_neg,
            self.auroc_harmonic,
            self.aupr_pos,
            self.aupr_neg,
            self.aupr_harmonic,
            self.precision,
            self.recall,
        ]
    }

    pub fn from_values(v: [f64; 8]) -> Self {
        MetricsReport {
            auroc_pos: v[0],
            auroc_neg: v[1],
            auroc_harmonic: v[2],
            aupr_pos: v[3],
            aupr_neg: v[4],
            aupr_harmonic: v[5],
            precision: v[6],
            recall: v[7],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = (&'static str, f64)> {
        METRIC_NAMES.into_iter().zip(self.values())
    }

    /// Element-wise mean of several reports (k-fold summaries).
    pub fn mean(reports: &[MetricsReport]) -> Option<MetricsReport> {
        if reports.is_empty() {
            return None;
        }
        let mut acc = [0.0; 8];
        for r in reports {
            for (a, v) in acc.iter_mut().zip(r.values()) {
                *a += v;
            }
        }
        Some(MetricsReport::from_values(acc.map(|a| a / reports.len() as f64)))
    }

    /// `metric<TAB>value` rows under a header.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "metric\tvalue")?;
        for (name, v) in self.rows() {
            writeln!(w, "{name}\t{v}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut values = [f64::NAN; 8];
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 && line.starts_with("metric") || line.trim().is_empty() {
                continue;
            }
            let (name, value) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse { line: i + 1, reason: "expected metric<TAB>value".into() })?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse { line: i + 1, reason: format!("bad value {value:?}") })?;
            if let Some(k) = METRIC_NAMES.iter().position(|n| *n == name) {
                values[k] = v;
            }
        }
        if let Some(k) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Format(format!("report lacks {}", METRIC_NAMES[k])));
        }
        Ok(MetricsReport::from_values(values))
    }
}

/// Positive-class and negative-class AUROC/AUPR with their harmonic means,
/// plus positive precision/recall at 0.5.
pub fn dual_class_report(s: &ScoredSet) -> Result<MetricsReport> {
    let flipped = s.flipped();
    let auroc_pos = auroc(s)?;
    let auroc_neg = auroc(&flipped)?;
    let aupr_pos = aupr(s)?;
    let aupr_neg = aupr(&flipped)?;
    let (precision, recall) = precision_recall_at(s, 0.5);
    Ok(MetricsReport {
        auroc_pos,
        auroc_neg,
        auroc_harmonic: harmonic(auroc_pos, auroc_neg),
        aupr_pos,
        aupr_neg,
        aupr_harmonic: harmonic(aupr_pos, aupr_neg),
        precision,
        recall,
    })
}

/// Writes `x<TAB>y` curve points under a two-column header.
pub fn write_curve<W: Write>(mut w: W, header: (&str, &str), pts: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(w, "{}\t{}", header.0, header.1)?;
    for (x, y) in pts {
        writeln!(w, "{x}\t{y}")?;
    }
    Ok(())
}
