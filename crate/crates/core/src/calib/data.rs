use rand::distr::weighted::WeightedIndex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::softmax::softmax_slice;
use crate::types::Temperature;

/// Logits with labels and optional per-sample features, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledLogitSet {
    logits: Vec<f64>,
    labels: Vec<usize>,
    features: Option<Vec<f64>>,
    k: usize,
    d: usize,
}

impl LabeledLogitSet {
    pub fn new(
        logits: Vec<Vec<f64>>,
        labels: Vec<usize>,
        features: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n = logits.len();
        if n == 0 {
            return Err(Error::domain("dataset has no rows"));
        }
        if labels.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: labels.len(),
            });
        }
        let k = logits[0].len();
        if k == 0 {
            return Err(Error::domain("logit rows are empty"));
        }
        let logits = flatten(logits, k, "logit")?;
        if let Some(row) = logits.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("row {}: non-finite logit", row / k)));
        }
        if let Some(row) = labels.iter().position(|&y| y >= k) {
            return Err(Error::domain(format!(
                "row {row}: label {} outside 0..{k}",
                labels[row]
            )));
        }
        let (features, d) = match features {
            None => (None, 0),
            Some(f) => {
                if f.len() != n {
                    return Err(Error::Dimension {
                        expected: n,
                        got: f.len(),
                    });
                }
                let d = f[0].len();
                let flat = flatten(f, d, "feature")?;
                if let Some(i) = flat.iter().position(|v| !v.is_finite()) {
                    return Err(Error::domain(format!(
                        "row {}: non-finite feature",
                        i / d.max(1)
                    )));
                }
                (Some(flat), d)
            }
        };
        Ok(Self {
            logits,
            labels,
            features,
            k,
            d,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    /// Feature dimension, `None` without features.
    pub fn feature_dim(&self) -> Option<usize> {
        self.features.as_ref().map(|_| self.d)
    }

    pub fn logits(&self, n: usize) -> &[f64] {
        &self.logits[n * self.k..(n + 1) * self.k]
    }

    pub fn label(&self, n: usize) -> usize {
        self.labels[n]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self, n: usize) -> Option<&[f64]> {
        self.features
            .as_ref()
            .map(|f| &f[n * self.d..(n + 1) * self.d])
    }

    /// Rows `0..n` and `n..len`.
    pub fn split_at(&self, n: usize) -> Result<(Self, Self)> {
        if n == 0 || n >= self.len() {
            return Err(Error::Usage(format!(
                "split point {n} leaves an empty side of {} rows",
                self.len()
            )));
        }
        Ok((self.rows(0..n), self.rows(n..self.len())))
    }

    fn rows(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            logits: self.logits[range.start * self.k..range.end * self.k].to_vec(),
            labels: self.labels[range.clone()].to_vec(),
            features: self
                .features
                .as_ref()
                .map(|f| f[range.start * self.d..range.end * self.d].to_vec()),
            k: self.k,
            d: self.d,
        }
    }
}

fn flatten(rows: Vec<Vec<f64>>, width: usize, what: &str) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * width);
    for (n, row) in rows.into_iter().enumerate() {
        if row.len() != width {
            return Err(Error::domain(format!(
                "row {n}: expected {width} {what} columns, got {}",
                row.len()
            )));
        }
        flat.extend(row);
    }
    Ok(flat)
}

/// Synthetic classifier outputs with a known miscalibration.
///
/// Draws `z ~ N(0, I_K)`, a label from `softmax(z)`, and emits logits
/// `scale · z` with features `z`. Temperature `scale` recovers calibration.
pub fn gen_synthetic(n: usize, k: usize, scale: f64, seed: u64) -> Result<LabeledLogitSet> {
    if n == 0 || k == 0 {
        return Err(Error::domain("N and K must be positive"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::domain(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut logits = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
        let p = softmax_slice(&z, Temperature::ONE);
        let label = WeightedIndex::new(&p)
            .map_err(|e| Error::Internal(format!("label distribution: {e}")))?
            .sample(&mut rng);
        logits.push(z.iter().map(|v| scale * v).collect());
        labels.push(label);
        features.push(z);
    }
    LabeledLogitSet::new(logits, labels, Some(features))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_rows() {
        assert!(LabeledLogitSet::new(vec![], vec![], None).is_err());
        assert!(LabeledLogitSet::new(vec![vec![0.0, 1.0]], vec![2], None).is_err());
        assert!(LabeledLogitSet::new(vec![vec![0.0, 1.0], vec![1.0]], vec![0, 0], None).is_err());
        assert!(
            LabeledLogitSet::new(vec![vec![0.0, 1.0]], vec![1], Some(vec![vec![0.5; 3]])).is_ok()
        );
        assert!(LabeledLogitSet::new(vec![vec![f64::NAN, 1.0]], vec![1], None).is_err());
    }

    #[test]
    fn synthetic_shape_and_determinism() {
        let a = gen_synthetic(20, 4, 3.0, 7).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a.num_classes(), 4);
        assert_eq!(a.feature_dim(), Some(4));
        for n in 0..20 {
            let z = a.features(n).unwrap();
            for (l, f) in a.logits(n).iter().zip(z) {
                assert_eq!(*l, 3.0 * f);
            }
        }
        assert_eq!(a, gen_synthetic(20, 4, 3.0, 7).unwrap());
        assert_ne!(a, gen_synthetic(20, 4, 3.0, 8).unwrap());
    }

    #[test]
    fn singleton_set() {
        let s = gen_synthetic(1, 1, 1.0, 0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.label(0), 0);
    }

    #[test]
    fn split_keeps_rows() {
        let s = gen_synthetic(10, 3, 1.0, 1).unwrap();
        let (a, b) = s.split_at(4).unwrap();
        assert_eq!((a.len(), b.len()), (4, 6));
        assert_eq!(b.logits(0), s.logits(4));
        assert_eq!(b.features(5), s.features(9));
        assert!(s.split_at(0).is_err());
    }
}
