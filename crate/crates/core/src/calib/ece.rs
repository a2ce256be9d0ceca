use serde::Serialize;

use super::data::LabeledLogitSet;
use super::model::CalibModel;
use crate::error::{Error, Result};
use crate::types::argmax_lowest;

pub const DEFAULT_BINS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinStat {
    pub count: usize,
    /// Zero for an empty bin.
    pub accuracy: f64,
    /// Mean top-label confidence; zero for an empty bin.
    pub confidence: f64,
}

/// Top-label expected calibration error with equal-width bins
/// `((m−1)/M, m/M]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EceReport {
    pub ece: f64,
    pub per_bin: Vec<BinStat>,
    pub bins: usize,
    pub accuracy: f64,
}

impl EceReport {
    /// `Σ (count/N) |acc − conf|` from `per_bin`.
    pub fn recompute(&self) -> f64 {
        let n: usize = self.per_bin.iter().map(|b| b.count).sum();
        self.per_bin
            .iter()
            .map(|b| b.count as f64 / n as f64 * (b.accuracy - b.confidence).abs())
            .sum()
    }
}

/// 0-based bin of confidence `p` among `m` bins `((j)/m, (j+1)/m]`.
fn bin_index(p: f64, m: usize) -> usize {
    let mf = m as f64;
    let mut j = ((p * mf).ceil() as usize).clamp(1, m);
    while j > 1 && p <= (j - 1) as f64 / mf {
        j -= 1;
    }
    while j < m && p > j as f64 / mf {
        j += 1;
    }
    j - 1
}

/// ECE from top-label confidences and correctness flags.
pub fn ece_from_confidences(
    confidence: &[f64],
    correct: &[bool],
    bins: usize,
) -> Result<EceReport> {
    if bins == 0 {
        return Err(Error::Usage("ECE needs at least one bin".into()));
    }
    if confidence.len() != correct.len() {
        return Err(Error::Dimension {
            expected: confidence.len(),
            got: correct.len(),
        });
    }
    if confidence.is_empty() {
        return Err(Error::domain("ECE of an empty set"));
    }
    let mut count = vec![0usize; bins];
    let mut hits = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    for (&p, &ok) in confidence.iter().zip(correct) {
        let j = bin_index(p, bins);
        count[j] += 1;
        hits[j] += usize::from(ok);
        conf_sum[j] += p;
    }
    let n = confidence.len() as f64;
    let per_bin: Vec<BinStat> = (0..bins)
        .map(|j| {
            if count[j] == 0 {
                BinStat {
                    count: 0,
                    accuracy: 0.0,
                    confidence: 0.0,
                }
            } else {
                let c = count[j] as f64;
                BinStat {
                    count: count[j],
                    accuracy: hits[j] as f64 / c,
                    confidence: conf_sum[j] / c,
                }
            }
        })
        .collect();
    let ece = per_bin
        .iter()
        .map(|b| b.count as f64 / n * (b.accuracy - b.confidence).abs())
        .sum();
    let accuracy = hits.iter().sum::<usize>() as f64 / n;
    Ok(EceReport {
        ece,
        per_bin,
        bins,
        accuracy,
    })
}

/// ECE of probability rows against labels. Argmax ties go to the lowest index.
pub fn ece_from_probs<P: AsRef<[f64]>>(
    probs: &[P],
    labels: &[usize],
    bins: usize,
) -> Result<EceReport> {
    if probs.len() != labels.len() {
        return Err(Error::Dimension {
            expected: probs.len(),
            got: labels.len(),
        });
    }
    let mut confidence = Vec::with_capacity(probs.len());
    let mut correct = Vec::with_capacity(probs.len());
    for (p, &y) in probs.iter().zip(labels) {
        let p = p.as_ref();
        let top = argmax_lowest(p);
        confidence.push(p[top]);
        correct.push(top == y);
    }
    ece_from_confidences(&confidence, &correct, bins)
}

/// ECE of `model`'s predictions on `data`.
pub fn ece(model: &CalibModel, data: &LabeledLogitSet, bins: usize) -> Result<EceReport> {
    let probs = (0..data.len())
        .map(|n| model.predict(data.logits(n), data.features(n)))
        .collect::<Result<Vec<_>>>()?;
    ece_from_probs(&probs, data.labels(), bins)
}
