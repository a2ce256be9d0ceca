use std::ops::Deref;

use crate::error::{Error, Result};
use crate::tol;

/// Unnormalized scores `x ∈ ℝ^K`, `K ≥ 1`, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("logit vector must have K >= 1 entries"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "logit {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for LogitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for LogitVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<&[f64]> for LogitVector {
    type Error = Error;

    fn try_from(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }
}

/// Softmax temperature `τ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature(f64);

impl Temperature {
    pub const ONE: Temperature = Temperature(1.0);

    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::domain(format!(
                "temperature must be positive and finite, got {tau}"
            )));
        }
        Ok(Self(tau))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Self::ONE
    }
}

/// Feasible lower bounds: `0 ≤ a_k < 1`, `Σ a_k ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBounds(Vec<f64>);

impl LowerBounds {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::domain("lower bounds must have K >= 1 entries"));
        }
        for (k, &v) in a.iter().enumerate() {
            if !(v.is_finite() && (0.0..1.0).contains(&v)) {
                return Err(Error::domain(format!(
                    "lower bound a_{k} = {v} outside [0, 1)"
                )));
            }
        }
        let total: f64 = a.iter().sum();
        if total > 1.0 + tol::BOUND_SLACK {
            return Err(Error::domain(format!("lower bounds sum to {total} > 1")));
        }
        Ok(Self(a))
    }

    /// `a = 0_K`, the inactive lower bound.
    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn uniform(k: usize, a: f64) -> Result<Self> {
        Self::new(vec![a; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_inactive(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

impl Deref for LowerBounds {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Feasible upper bounds: `0 < b_k ≤ 1`, `Σ b_k ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperBounds(Vec<f64>);

impl UpperBounds {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::domain("upper bounds must have K >= 1 entries"));
        }
        for (k, &v) in b.iter().enumerate() {
            if !(v.is_finite() && v > 0.0 && v <= 1.0) {
                return Err(Error::domain(format!(
                    "upper bound b_{k} = {v} outside (0, 1]"
                )));
            }
        }
        let total: f64 = b.iter().sum();
        if total < 1.0 - tol::BOUND_SLACK {
            return Err(Error::domain(format!("upper bounds sum to {total} < 1")));
        }
        Ok(Self(b))
    }

    /// `b = 1_K`, the inactive upper bound.
    pub fn ones(k: usize) -> Self {
        Self(vec![1.0; k])
    }

    pub fn uniform(k: usize, b: f64) -> Result<Self> {
        Self::new(vec![b; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_inactive(&self) -> bool {
        self.0.iter().all(|&v| v == 1.0)
    }
}

impl Deref for UpperBounds {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A feasible box `(a, b)` with `a ⪯ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lower: LowerBounds,
    upper: UpperBounds,
}

impl BoxBounds {
    pub fn new(lower: LowerBounds, upper: UpperBounds) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (k, (&a, &b)) in lower.iter().zip(upper.iter()).enumerate() {
            if a > b {
                return Err(Error::domain(format!(
                    "lower bound a_{k} = {a} exceeds upper bound b_{k} = {b}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn from_vecs(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        Self::new(LowerBounds::new(a)?, UpperBounds::new(b)?)
    }

    /// `(0_K, 1_K)`: plain softmax.
    pub fn unbounded(k: usize) -> Self {
        Self {
            lower: LowerBounds::zeros(k),
            upper: UpperBounds::ones(k),
        }
    }

    /// `(a·1_K, b·1_K)`.
    pub fn uniform(k: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(LowerBounds::uniform(k, a)?, UpperBounds::uniform(k, b)?)
    }

    pub fn lower(&self) -> &LowerBounds {
        &self.lower
    }

    pub fn upper(&self) -> &UpperBounds {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Whether `y` lies in the box up to `slack` per coordinate.
    pub fn contains(&self, y: &[f64], slack: f64) -> bool {
        y.len() == self.len()
            && y.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(&v, (&a, &b))| v >= a - slack && v <= b + slack)
    }
}

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Wraps `p` after checking `p ⪰ 0` and `|Σp − 1| ≤ tol::SIMPLEX`.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::domain("probability vector must be non-empty"));
        }
        if let Some(k) = p.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain(format!(
                "p_{k} = {} is not a probability",
                p[k]
            )));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > tol::SIMPLEX {
            return Err(Error::domain(format!("probabilities sum to {total}")));
        }
        Ok(Self(p))
    }

    pub(crate) fn from_raw(p: Vec<f64>) -> Self {
        Self(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest entry, ties to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax_lowest(&self.0)
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for ProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn argmax_lowest(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Structure of a bounded-softmax solution.
///
/// Every index is lower-pinned (`y_i = a_i`), upper-pinned (`y_i = b_i`) or
/// free (`y_i = exp(x_i/τ − shift) / normalizer`). `free_exp_sum` and
/// `normalizer` live in the frame offset by `shift`: normally `max_i x_i/τ`,
/// or the largest free `x_i/τ` when the free exponentials would underflow
/// relative to the global maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    pub lower_pinned: Vec<bool>,
    pub upper_pinned: Vec<bool>,
    /// `1 − Σ_{lower} a_i − Σ_{upper} b_i`.
    pub free_mass: f64,
    /// `free_exp_sum / free_mass`; zero when no index is free.
    pub normalizer: f64,
    pub free_exp_sum: f64,
    pub shift: f64,
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        self.lower_pinned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower_pinned.is_empty()
    }

    pub fn is_free(&self, i: usize) -> bool {
        !self.lower_pinned[i] && !self.upper_pinned[i]
    }

    pub fn any_free(&self) -> bool {
        (0..self.len()).any(|i| self.is_free(i))
    }

    pub fn any_lower(&self) -> bool {
        self.lower_pinned.iter().any(|&g| g)
    }

    pub fn any_upper(&self) -> bool {
        self.upper_pinned.iter().any(|&h| h)
    }

    /// `ln Z` for the unshifted frame, where free `y_i = exp(x_i/τ) / Z`.
    pub fn log_normalizer(&self) -> f64 {
        self.normalizer.ln() + self.shift
    }
}
