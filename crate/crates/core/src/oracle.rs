//! Brute-force solvers used as ground truth.
//!
//! [`solve_enumerate`] tries every assignment of each index to
//! {lower-pinned, upper-pinned, free}, builds the point that assignment
//! implies, and keeps the feasible one with the largest objective. It shares
//! no code with the threshold algorithms beyond the objective itself.

use crate::error::{Error, Result};
use crate::softmax::{objective_slice, ScaledLogits};
use crate::tol;
use crate::types::{BoxBounds, LogitVector, ProbVector, Temperature, UpperBounds};

/// Largest `K` accepted by [`solve_enumerate`] (3^12 = 531441 assignments).
pub const MAX_ENUMERATE_K: usize = 12;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Lower,
    Upper,
    Free,
}

/// Calls `visit(y)` for every assignment whose implied point is feasible.
///
/// Free coordinates may land on a bound (within [`tol::FEAS`]); such a point
/// coincides with a pinned assignment and the objective comparison resolves it.
pub fn for_each_feasible_candidate(
    x: &LogitVector,
    bounds: &BoxBounds,
    tau: Temperature,
    mut visit: impl FnMut(&[f64]),
) -> Result<()> {
    let k = x.len();
    if bounds.len() != k {
        return Err(Error::Dimension {
            expected: k,
            got: bounds.len(),
        });
    }
    if k > MAX_ENUMERATE_K {
        return Err(Error::TooLarge(format!(
            "enumeration needs 3^{k} assignments; K is limited to {MAX_ENUMERATE_K}"
        )));
    }
    let frame = ScaledLogits::new(x, tau);
    let (a, b) = (bounds.lower(), bounds.upper());
    let mut roles = vec![Role::Lower; k];
    let mut y = vec![0.0; k];

    'outer: loop {
        let mut s = 1.0;
        let mut r = 0.0;
        for i in 0..k {
            match roles[i] {
                Role::Lower => s -= a[i],
                Role::Upper => s -= b[i],
                Role::Free => r += frame.exps[i],
            }
        }

        let plausible = if r == 0.0 {
            // all pinned: the bounds alone must sum to one
            s.abs() <= tol::SIMPLEX
        } else {
            s >= -tol::FEAS
        };
        if plausible {
            let scale = s.max(0.0) / r.max(f64::MIN_POSITIVE);
            let mut feasible = true;
            for i in 0..k {
                y[i] = match roles[i] {
                    Role::Lower => a[i],
                    Role::Upper => b[i],
                    Role::Free => frame.exps[i] * scale,
                };
                if roles[i] == Role::Free && (y[i] < a[i] - tol::FEAS || y[i] > b[i] + tol::FEAS) {
                    feasible = false;
                    break;
                }
            }
            if feasible {
                visit(&y);
            }
        }

        // next assignment in base 3
        let mut digit = 0;
        loop {
            if digit == k {
                return Ok(());
            }
            match roles[digit] {
                Role::Lower => roles[digit] = Role::Upper,
                Role::Upper => roles[digit] = Role::Free,
                Role::Free => {
                    roles[digit] = Role::Lower;
                    digit += 1;
                    continue;
                }
            }
            continue 'outer;
        }
    }
}

/// Maximizes the objective over all `3^K` active-set assignments. `K ≤ 12`.
pub fn solve_enumerate(
    x: &LogitVector,
    bounds: &BoxBounds,
    tau: Temperature,
) -> Result<ProbVector> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for_each_feasible_candidate(x, bounds, tau, |y| {
        let value = objective_slice(y, x, tau.get());
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, y.to_vec()));
        }
    })?;
    best.map(|(_, y)| ProbVector::from_raw(y))
        .ok_or_else(|| Error::Internal("no feasible active-set assignment".into()))
}

/// Upper-bounded softmax by trying every prefix length.
///
/// Sorts by `b_i / exp(x_i/τ)` ascending, forms
/// `y(k) = concat(b_{1:k}, s_k · softmax(x_{k+1:K}))` for each `k`, and returns
/// the feasible candidate with the largest objective. `O(K²)`.
pub fn solve_sweep_ub(x: &LogitVector, b: &UpperBounds, tau: Temperature) -> Result<ProbVector> {
    let k = x.len();
    if b.len() != k {
        return Err(Error::Dimension {
            expected: k,
            got: b.len(),
        });
    }
    let frame = ScaledLogits::new(x, tau);
    let keys: Vec<f64> = (0..k).map(|i| b[i].ln() - frame.shifted[i]).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| keys[i].total_cmp(&keys[j]).then(i.cmp(&j)));

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut y = vec![0.0; k];
    for pinned in 0..=k {
        let s = 1.0 - order[..pinned].iter().map(|&i| b[i]).sum::<f64>();
        let r: f64 = order[pinned..].iter().map(|&i| frame.exps[i]).sum();
        let feasible_mass = if pinned == k {
            s.abs() <= tol::SIMPLEX
        } else {
            s >= -tol::FEAS
        };
        if !feasible_mass {
            continue;
        }
        for &i in &order[..pinned] {
            y[i] = b[i];
        }
        let mut feasible = true;
        for &i in &order[pinned..] {
            y[i] = frame.exps[i] * s.max(0.0) / r;
            feasible &= y[i] <= b[i] + tol::FEAS;
        }
        if !feasible {
            continue;
        }
        let value = objective_slice(&y, x, tau.get());
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, y.clone()));
        }
    }
    best.map(|(_, y)| ProbVector::from_raw(y))
        .ok_or_else(|| Error::Internal("no feasible prefix".into()))
}
