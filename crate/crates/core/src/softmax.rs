use crate::error::Result;
use crate::types::{LogitVector, ProbVector, Temperature};

/// Logits scaled by `1/τ` and shifted so the largest entry is zero.
///
/// `exps[i] = exp(shifted[i])`, each in `(0, 1]` up to underflow.
#[derive(Debug, Clone)]
pub(crate) struct ScaledLogits {
    pub shifted: Vec<f64>,
    pub exps: Vec<f64>,
    pub shift: f64,
}

impl ScaledLogits {
    pub fn new(x: &[f64], tau: Temperature) -> Self {
        let tau = tau.get();
        let scaled: Vec<f64> = x.iter().map(|&v| v / tau).collect();
        let shift = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = scaled.iter().map(|&v| v - shift).collect();
        let exps = shifted.iter().map(|&v| v.exp()).collect();
        Self {
            shifted,
            exps,
            shift,
        }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }
}

/// `Softmax_τ(x)[i] = exp(x_i/τ) / Σ_k exp(x_k/τ)`.
pub fn softmax(x: &LogitVector, tau: Temperature) -> ProbVector {
    ProbVector::from_raw(softmax_slice(x, tau))
}

pub(crate) fn softmax_slice(x: &[f64], tau: Temperature) -> Vec<f64> {
    let frame = ScaledLogits::new(x, tau);
    let total: f64 = frame.exps.iter().sum();
    frame.exps.iter().map(|&e| e / total).collect()
}

/// `x·y − τ Σ y_k log y_k` with `0 log 0 = 0`.
pub fn objective_value(y: &ProbVector, x: &LogitVector, tau: Temperature) -> Result<f64> {
    if y.len() != x.len() {
        return Err(crate::Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(objective_slice(y, x, tau.get()))
}

pub(crate) fn objective_slice(y: &[f64], x: &[f64], tau: f64) -> f64 {
    y.iter()
        .zip(x)
        .map(|(&p, &v)| {
            let ent = if p > 0.0 { p * p.ln() } else { 0.0 };
            v * p - tau * ent
        })
        .sum()
}

/// Elementwise `max(lo, min(x, hi))`.
pub fn clip(x: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    x.iter().map(|&v| lo.max(v.min(hi))).collect()
}
