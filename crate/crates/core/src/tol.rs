//! Numerical tolerances shared by the algorithms and their tests.

/// Allowed deviation of `Σ y` from one.
pub const SIMPLEX: f64 = 1e-9;

/// Per-coordinate slack when testing `a ≤ y ≤ b`.
pub const FEAS: f64 = 1e-12;

/// Cross-algorithm agreement, relative or absolute (whichever is larger).
pub const EQ: f64 = 1e-9;

/// Slack on objective comparisons.
pub const OBJ: f64 = 1e-9;

/// Slack accepted when validating `Σ a ≤ 1` and `Σ b ≥ 1`.
pub const BOUND_SLACK: f64 = 1e-12;

/// `|x − y| ≤ EQ · max(1, |x|, |y|)`.
pub fn approx_eq(x: f64, y: f64) -> bool {
    (x - y).abs() <= EQ * 1f64.max(x.abs()).max(y.abs())
}

/// Largest coordinate-wise absolute difference.
pub fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
