//! Upper-bounded softmax.
//!
//! Both kernels solve `max u·y − Σ y log y` over `{Σ y = mass, 0 ⪯ y ⪯ cap}`
//! for a subset of coordinates. Sorting the coordinates by `cap_i / exp(u_i)`
//! ascending, the solution pins a prefix of that order to its caps and spreads
//! the remaining mass proportionally to `exp(u_i)` over the rest. The prefix
//! length is the first position `k` with
//!
//! ```text
//! exp(u_{k+1}) · s_k ≤ cap_{k+1} · r_k
//! ```
//!
//! where `s_k` is the mass left after pinning the first `k` entries and `r_k`
//! the exp-sum of the rest. The predicate is monotone in `k`, so it can be
//! located by a linear scan over the sorted order or by a selection-based
//! binary search without sorting.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::softmax::ScaledLogits;
use crate::tol;
use crate::types::{ActiveSet, LogitVector, ProbVector, Temperature, UpperBounds};

/// Below this the free exp-sum may have lost precision to underflow, and the
/// threshold is recomputed in log space.
pub(crate) const UNDERFLOW: f64 = 1e-280;

/// Where the threshold landed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Threshold {
    /// Number of pinned entries; they occupy `items[..pinned]`.
    pub pinned: usize,
    /// Mass left for the free entries.
    pub free_mass: f64,
    /// Σ exp(u_i − local_shift) over the free entries.
    pub free_exp_sum: f64,
    /// Extra offset of the free entries' frame; nonzero only after the
    /// log-space fallback.
    pub local_shift: f64,
}

impl Threshold {
    fn underflowed(&self, n: usize) -> bool {
        self.pinned < n && self.free_exp_sum < UNDERFLOW
    }
}

/// `ln(eᵃ + eᵇ)`.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

/// Σ exp(u_i − m) over `items` with `m` their largest `u`.
pub(crate) fn local_exp_sum(items: &[usize], shifted: &[f64]) -> (f64, f64) {
    let m = items
        .iter()
        .map(|&i| shifted[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let r = items.iter().map(|&i| (shifted[i] - m).exp()).sum();
    (m, r)
}

/// Strict total order on `(key, index)`.
#[inline]
pub(crate) fn by_key(keys: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&i, &j| keys[i].total_cmp(&keys[j]).then(i.cmp(&j))
}

#[inline]
fn pins_here(exp: f64, cap: f64, mass_left: f64, exp_sum: f64) -> bool {
    exp * mass_left <= cap * exp_sum
}

/// Threshold search over `items` already sorted by ascending key.
pub(crate) fn threshold_sorted(
    items: &[usize],
    frame: &ScaledLogits,
    caps: &[f64],
    mass: f64,
) -> Threshold {
    let exps = &frame.exps;
    let n = items.len();
    let mut suffix = vec![0.0; n + 1];
    for j in (0..n).rev() {
        suffix[j] = suffix[j + 1] + exps[items[j]];
    }
    let mut s = mass;
    let mut t = Threshold {
        pinned: n,
        free_mass: 0.0,
        free_exp_sum: 0.0,
        local_shift: 0.0,
    };
    for (k, &i) in items.iter().enumerate() {
        if pins_here(exps[i], caps[i], s, suffix[k]) {
            t.pinned = k;
            t.free_exp_sum = suffix[k];
            break;
        }
        s -= caps[i];
    }
    // pinned == n only when Σ caps < mass
    t.free_mass = s;
    if t.underflowed(n) {
        return threshold_log(items, frame, caps, mass);
    }
    t
}

/// [`threshold_sorted`] with suffix sums kept as log-sum-exp, for free sets
/// whose exponentials underflow in the global frame.
fn threshold_log(items: &[usize], frame: &ScaledLogits, caps: &[f64], mass: f64) -> Threshold {
    let u = &frame.shifted;
    let n = items.len();
    let mut lse = vec![f64::NEG_INFINITY; n + 1];
    for j in (0..n).rev() {
        lse[j] = log_add_exp(u[items[j]], lse[j + 1]);
    }
    let mut s = mass;
    for (k, &i) in items.iter().enumerate() {
        // exp(u_i)·s ≤ cap_i·r_k in log space
        if s <= 0.0 || s.ln() - lse[k] <= caps[i].ln() - u[i] {
            let (m, r) = local_exp_sum(&items[k..], u);
            return Threshold {
                pinned: k,
                free_mass: s,
                free_exp_sum: r,
                local_shift: m,
            };
        }
        s -= caps[i];
    }
    Threshold {
        pinned: n,
        free_mass: s,
        free_exp_sum: 0.0,
        local_shift: 0.0,
    }
}

/// Sorts `items` by key, then runs [`threshold_sorted`].
pub(crate) fn solve_sorted(
    items: &mut [usize],
    frame: &ScaledLogits,
    caps: &[f64],
    keys: &[f64],
    mass: f64,
) -> Threshold {
    items.sort_by(by_key(keys));
    threshold_sorted(items, frame, caps, mass)
}

/// Expected-linear threshold search.
///
/// Binary search over the rank of the threshold; each probe partitions the
/// live range with `select_nth_unstable_by` so the total work is
/// `n + n/2 + n/4 + …`. On return `items[..pinned]` holds the pinned entries
/// (unordered) and `items[pinned..]` the free ones.
pub(crate) fn solve_select(
    items: &mut [usize],
    frame: &ScaledLogits,
    caps: &[f64],
    keys: &[f64],
    mass: f64,
) -> Threshold {
    let exps = &frame.exps;
    let cmp = by_key(keys);
    let (mut lo, mut hi) = (0, items.len());
    // mass left after pinning items[..lo]
    let mut s = mass;
    // Σ exp over items[hi..]
    let mut right = 0.0;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        items[lo..hi].select_nth_unstable_by(mid - lo, &cmp);
        let s_mid = s - items[lo..mid].iter().map(|&i| caps[i]).sum::<f64>();
        let r_mid = items[mid..hi].iter().map(|&i| exps[i]).sum::<f64>() + right;
        let i = items[mid];
        if pins_here(exps[i], caps[i], s_mid, r_mid) {
            hi = mid;
            right = r_mid;
        } else {
            s = s_mid - caps[i];
            lo = mid + 1;
        }
    }
    let t = Threshold {
        pinned: lo,
        free_mass: s,
        free_exp_sum: right,
        local_shift: 0.0,
    };
    if t.underflowed(items.len()) {
        return solve_sorted(items, frame, caps, keys, mass);
    }
    t
}

/// Writes the solution for `items` into `y` and marks pinned entries.
pub(crate) fn fill(
    items: &[usize],
    t: &Threshold,
    frame: &ScaledLogits,
    caps: &[f64],
    y: &mut [f64],
    upper: &mut [bool],
) {
    for &i in &items[..t.pinned] {
        y[i] = caps[i];
        upper[i] = true;
    }
    let scale = if t.free_exp_sum > 0.0 {
        t.free_mass.max(0.0) / t.free_exp_sum
    } else {
        0.0
    };
    if t.local_shift == 0.0 {
        for &i in &items[t.pinned..] {
            y[i] = frame.exps[i] * scale;
        }
    } else {
        for &i in &items[t.pinned..] {
            y[i] = (frame.shifted[i] - t.local_shift).exp() * scale;
        }
    }
}

pub(crate) fn normalizer(free_mass: f64, free_exp_sum: f64, any_free: bool) -> f64 {
    if !any_free {
        0.0
    } else if free_mass > 0.0 {
        free_exp_sum / free_mass
    } else {
        f64::INFINITY
    }
}

/// `ln cap_i − u_i`: log of `cap_i / exp(u_i)` in the shifted frame.
pub(crate) fn upper_keys(frame: &ScaledLogits, caps: &[f64]) -> Vec<f64> {
    caps.iter()
        .zip(&frame.shifted)
        .map(|(&c, &u)| c.ln() - u)
        .collect()
}

/// `Σ v = 1` within [`tol::BOUND_SLACK`]: the bounds `v` admit a single point.
pub(crate) fn sums_to_one(v: &[f64]) -> bool {
    (v.iter().sum::<f64>() - 1.0).abs() <= tol::BOUND_SLACK
}

/// The solution `y = v` with every index pinned to its lower (or upper) bound.
pub(crate) fn pinned_everywhere(v: &[f64], lower: bool, shift: f64) -> (ProbVector, ActiveSet) {
    let k = v.len();
    let active = ActiveSet {
        lower_pinned: vec![lower; k],
        upper_pinned: vec![!lower; k],
        free_mass: 0.0,
        normalizer: 0.0,
        free_exp_sum: 0.0,
        shift,
    };
    (ProbVector::from_raw(v.to_vec()), active)
}

fn check_dims(x: &LogitVector, k: usize) -> Result<()> {
    if x.len() != k {
        return Err(Error::Dimension {
            expected: x.len(),
            got: k,
        });
    }
    Ok(())
}

type Solver = fn(&mut [usize], &ScaledLogits, &[f64], &[f64], f64) -> Threshold;

fn ubsoftmax_impl(
    x: &LogitVector,
    b: &UpperBounds,
    tau: Temperature,
    solve: Solver,
) -> Result<(ProbVector, ActiveSet)> {
    check_dims(x, b.len())?;
    let frame = ScaledLogits::new(x, tau);
    if sums_to_one(b) {
        return Ok(pinned_everywhere(b, false, frame.shift));
    }
    let keys = upper_keys(&frame, b);
    let mut items: Vec<usize> = (0..frame.len()).collect();
    let t = solve(&mut items, &frame, b, &keys, 1.0);

    let k = frame.len();
    let mut y = vec![0.0; k];
    let mut upper = vec![false; k];
    fill(&items, &t, &frame, b, &mut y, &mut upper);
    let active = ActiveSet {
        lower_pinned: vec![false; k],
        upper_pinned: upper,
        free_mass: t.free_mass,
        normalizer: normalizer(t.free_mass, t.free_exp_sum, t.pinned < k),
        free_exp_sum: t.free_exp_sum,
        shift: frame.shift + t.local_shift,
    };
    Ok((ProbVector::from_raw(y), active))
}

/// Upper-bounded softmax by sorting on `b_i / exp(x_i/τ)`. `O(K log K)`.
pub fn ubsoftmax_sorted(
    x: &LogitVector,
    b: &UpperBounds,
    tau: Temperature,
) -> Result<(ProbVector, ActiveSet)> {
    ubsoftmax_impl(x, b, tau, solve_sorted)
}

/// Upper-bounded softmax by selection. Expected `O(K)`; same output as
/// [`ubsoftmax_sorted`].
pub fn ubsoftmax_select(
    x: &LogitVector,
    b: &UpperBounds,
    tau: Temperature,
) -> Result<(ProbVector, ActiveSet)> {
    ubsoftmax_impl(x, b, tau, solve_select)
}
