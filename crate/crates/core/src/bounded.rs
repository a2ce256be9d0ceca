//! Lower-bounded and box-constrained softmax.
//!
//! Sort the coordinates by `a_i / exp(x_i/τ)` descending. The solution pins a
//! prefix of that order to the lower bounds, and on the rest it is the
//! upper-bounded softmax carrying the remaining mass:
//!
//! ```text
//! y(k) = concat(a_{1:k}, UB(x_{k+1:K}, b_{k+1:K}; mass = 1 − Σ_{i≤k} a_i))
//! ```
//!
//! The answer is `y(ρ)` for the smallest `k` at which `y(k)` lies in the box.
//! Feasibility itself is not monotone in `k`: once the prefix is long enough the
//! suffix caps can no longer absorb the leftover mass. What is monotone is
//! "the free part of `y(k)` respects its lower bounds": false below `ρ`, true
//! from `ρ` on. [`bcsoftmax`] bisects on that predicate.

use crate::error::{Error, Result};
use crate::softmax::ScaledLogits;
use crate::tol;
use crate::types::{ActiveSet, BoxBounds, LogitVector, LowerBounds, ProbVector, Temperature};
use crate::upper::{self, Threshold};

/// How much work [`bcsoftmax_with`] spends confirming its bisection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchCheck {
    /// Require the bisected candidate to be feasible; fall back to a linear
    /// scan otherwise.
    Certify,
    /// Additionally rerun the linear scan and fail on any disagreement.
    Exhaustive,
}

impl Default for SearchCheck {
    fn default() -> Self {
        if cfg!(debug_assertions) {
            SearchCheck::Exhaustive
        } else {
            SearchCheck::Certify
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Feasible,
    /// Some free coordinate fell below its lower bound: `ρ` lies further right.
    LowerViolated,
    /// The suffix cannot hold the leftover mass (or overshoots a cap).
    Overfull,
}

#[derive(Debug, Clone, Copy)]
enum Inner {
    Select,
    /// Suffix already in upper-key order.
    Presorted,
}

struct Candidate {
    y: Vec<f64>,
    upper: Vec<bool>,
    threshold: Threshold,
    any_free: bool,
}

struct BoxProblem<'a> {
    frame: ScaledLogits,
    lower: &'a [f64],
    upper: &'a [f64],
    upper_keys: Vec<f64>,
    /// Indices by `a_i / exp(u_i)` descending.
    order: Vec<usize>,
    /// `prefix_lower[k] = Σ_{j<k} a[order[j]]`
    prefix_lower: Vec<f64>,
    /// `suffix_upper[k] = Σ_{j≥k} b[order[j]]`
    suffix_upper: Vec<f64>,
}

impl<'a> BoxProblem<'a> {
    fn new(x: &LogitVector, bounds: &'a BoxBounds, tau: Temperature) -> Result<Self> {
        if x.len() != bounds.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: bounds.len(),
            });
        }
        let frame = ScaledLogits::new(x, tau);
        let lower = bounds.lower().as_slice();
        let upper = bounds.upper().as_slice();
        let upper_keys = upper::upper_keys(&frame, upper);
        let order = lower_order(&frame, lower);

        let n = order.len();
        let mut prefix_lower = vec![0.0; n + 1];
        for k in 0..n {
            prefix_lower[k + 1] = prefix_lower[k] + lower[order[k]];
        }
        let mut suffix_upper = vec![0.0; n + 1];
        for k in (0..n).rev() {
            suffix_upper[k] = suffix_upper[k + 1] + upper[order[k]];
        }
        Ok(Self {
            frame,
            lower,
            upper,
            upper_keys,
            order,
            prefix_lower,
            suffix_upper,
        })
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    /// The feasible set is a single point when either side sums to one.
    fn singleton(&self) -> Option<(ProbVector, ActiveSet)> {
        if upper::sums_to_one(self.lower) {
            Some(upper::pinned_everywhere(self.lower, true, self.frame.shift))
        } else if upper::sums_to_one(self.upper) {
            Some(upper::pinned_everywhere(
                self.upper,
                false,
                self.frame.shift,
            ))
        } else {
            None
        }
    }

    /// Builds `y(k)` and classifies it.
    fn probe(&self, k: usize, inner: Inner, items: &mut Vec<usize>) -> (Verdict, Candidate) {
        let n = self.len();
        let mass = 1.0 - self.prefix_lower[k];
        let mut y = vec![0.0; n];
        let mut upper = vec![false; n];
        for &i in &self.order[..k] {
            y[i] = self.lower[i];
        }

        if self.suffix_upper[k] < mass - tol::FEAS {
            let threshold = Threshold {
                pinned: n - k,
                free_mass: 0.0,
                free_exp_sum: 0.0,
                local_shift: 0.0,
            };
            let cand = Candidate {
                y,
                upper,
                threshold,
                any_free: false,
            };
            return (Verdict::Overfull, cand);
        }

        let threshold = match inner {
            Inner::Select => {
                items.clear();
                items.extend_from_slice(&self.order[k..]);
                upper::solve_select(
                    items,
                    &self.frame,
                    self.upper,
                    &self.upper_keys,
                    mass.max(0.0),
                )
            }
            Inner::Presorted => {
                upper::threshold_sorted(items, &self.frame, self.upper, mass.max(0.0))
            }
        };
        upper::fill(
            items,
            &threshold,
            &self.frame,
            self.upper,
            &mut y,
            &mut upper,
        );

        let mut verdict = Verdict::Feasible;
        for &i in &self.order[k..] {
            if y[i] < self.lower[i] - tol::FEAS {
                verdict = Verdict::LowerViolated;
                break;
            }
            if y[i] > self.upper[i] + tol::FEAS {
                verdict = Verdict::Overfull;
            }
        }
        let any_free = threshold.pinned < n - k;
        (
            verdict,
            Candidate {
                y,
                upper,
                threshold,
                any_free,
            },
        )
    }

    /// Smallest feasible `k` by scanning upward.
    fn linear_scan(&self, items: &mut Vec<usize>) -> Result<(usize, Candidate)> {
        for k in 0..=self.len() {
            let (verdict, cand) = self.probe(k, Inner::Select, items);
            if verdict == Verdict::Feasible {
                return Ok((k, cand));
            }
        }
        Err(Error::Internal(
            "no feasible lower-pinned prefix found".into(),
        ))
    }

    fn finish(&self, k: usize, cand: Candidate) -> (ProbVector, ActiveSet) {
        let n = self.len();
        let mut lower_pinned = vec![false; n];
        for &i in &self.order[..k] {
            lower_pinned[i] = true;
        }
        let t = cand.threshold;
        let active = ActiveSet {
            lower_pinned,
            upper_pinned: cand.upper,
            free_mass: t.free_mass,
            normalizer: upper::normalizer(t.free_mass, t.free_exp_sum, cand.any_free),
            free_exp_sum: t.free_exp_sum,
            shift: self.frame.shift + t.local_shift,
        };
        (ProbVector::from_raw(cand.y), active)
    }
}

/// Indices sorted by `ln a_i − u_i` descending (`ln 0 = −∞` last), ties by index.
fn lower_order(frame: &ScaledLogits, lower: &[f64]) -> Vec<usize> {
    let keys: Vec<f64> = lower
        .iter()
        .zip(&frame.shifted)
        .map(|(&a, &u)| {
            if a > 0.0 {
                a.ln() - u
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..lower.len()).collect();
    order.sort_by(|&i, &j| keys[j].total_cmp(&keys[i]).then(i.cmp(&j)));
    order
}

/// Box-constrained softmax, `O(K log K)`.
///
/// Uses the default [`SearchCheck`]: exhaustive in debug builds, certify in
/// release builds.
pub fn bcsoftmax(
    x: &LogitVector,
    bounds: &BoxBounds,
    tau: Temperature,
) -> Result<(ProbVector, ActiveSet)> {
    bcsoftmax_with(x, bounds, tau, SearchCheck::default())
}

/// [`bcsoftmax`] with an explicit verification level.
pub fn bcsoftmax_with(
    x: &LogitVector,
    bounds: &BoxBounds,
    tau: Temperature,
    check: SearchCheck,
) -> Result<(ProbVector, ActiveSet)> {
    let problem = BoxProblem::new(x, bounds, tau)?;
    if let Some(point) = problem.singleton() {
        return Ok(point);
    }
    let mut items = Vec::with_capacity(problem.len());

    let (mut lo, mut hi) = (0, problem.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        match problem.probe(mid, Inner::Select, &mut items).0 {
            Verdict::LowerViolated => lo = mid + 1,
            Verdict::Feasible | Verdict::Overfull => hi = mid,
        }
    }
    let (verdict, cand) = problem.probe(lo, Inner::Select, &mut items);
    let (rho, cand) = if verdict == Verdict::Feasible {
        (lo, cand)
    } else {
        problem.linear_scan(&mut items)?
    };

    if check == SearchCheck::Exhaustive {
        let (scan_rho, scan) = problem.linear_scan(&mut items)?;
        let agree = cand
            .y
            .iter()
            .zip(&scan.y)
            .all(|(&p, &q)| tol::approx_eq(p, q));
        if !agree {
            return Err(Error::Internal(format!(
                "bisection picked k={rho} but the linear scan picked k={scan_rho}"
            )));
        }
    }
    Ok(problem.finish(rho, cand))
}

/// Box-constrained softmax evaluating every candidate `y(k)`, `k = 0..=K`.
///
/// Each candidate runs the sorted upper-bounded kernel on its suffix. The
/// suffix order is a restriction of one global sort, so the whole sweep is
/// `O(K²)`. Used as a cross-check for [`bcsoftmax`].
pub fn bcsoftmax_quadratic(
    x: &LogitVector,
    bounds: &BoxBounds,
    tau: Temperature,
) -> Result<(ProbVector, ActiveSet)> {
    let problem = BoxProblem::new(x, bounds, tau)?;
    if let Some(point) = problem.singleton() {
        return Ok(point);
    }
    let n = problem.len();

    let mut rank = vec![0; n];
    for (r, &i) in problem.order.iter().enumerate() {
        rank[i] = r;
    }
    let mut by_upper: Vec<usize> = (0..n).collect();
    by_upper.sort_by(upper::by_key(&problem.upper_keys));

    let mut first: Option<(usize, Candidate)> = None;
    let mut items = Vec::with_capacity(n);
    for k in 0..=n {
        items.clear();
        items.extend(by_upper.iter().copied().filter(|&i| rank[i] >= k));
        let (verdict, cand) = problem.probe(k, Inner::Presorted, &mut items);
        if verdict == Verdict::Feasible && first.is_none() {
            first = Some((k, cand));
        }
    }
    let (rho, cand) = first.ok_or_else(|| Error::Internal("no feasible candidate y(k)".into()))?;
    Ok(problem.finish(rho, cand))
}

/// Lower-bounded softmax: the box `(a, 1_K)`. `O(K log K)`.
pub fn lbsoftmax(
    x: &LogitVector,
    a: &LowerBounds,
    tau: Temperature,
) -> Result<(ProbVector, ActiveSet)> {
    if x.len() != a.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: a.len(),
        });
    }
    let frame = ScaledLogits::new(x, tau);
    if upper::sums_to_one(a) {
        return Ok(upper::pinned_everywhere(a, true, frame.shift));
    }
    let order = lower_order(&frame, a);
    let n = order.len();
    let mut suffix = vec![0.0; n + 1];
    for j in (0..n).rev() {
        suffix[j] = suffix[j + 1] + frame.exps[order[j]];
    }
    let mut rho = n;
    let mut s = 1.0;
    for (k, &i) in order.iter().enumerate() {
        if frame.exps[i] * s >= a[i] * suffix[k] {
            rho = k;
            break;
        }
        s -= a[i];
    }

    // The largest logit is always free unless every index is pinned, so
    // r ≥ 1 here and the sums cannot underflow.
    let r = suffix[rho];
    let mut y = vec![0.0; n];
    let mut lower_pinned = vec![false; n];
    for &i in &order[..rho] {
        y[i] = a[i];
        lower_pinned[i] = true;
    }
    let scale = if r > 0.0 { s.max(0.0) / r } else { 0.0 };
    for &i in &order[rho..] {
        y[i] = frame.exps[i] * scale;
    }
    let active = ActiveSet {
        lower_pinned,
        upper_pinned: vec![false; n],
        free_mass: s,
        normalizer: upper::normalizer(s, r, rho < n),
        free_exp_sum: r,
        shift: frame.shift,
    };
    Ok((ProbVector::from_raw(y), active))
}

/// Logit clip thresholds `(c, C)` with
/// `softmax(clip(x, c, C), τ) = bcsoftmax(x, (a·1_K, b·1_K), τ)`.
pub fn scalar_bounds_to_clip(
    x: &LogitVector,
    a: f64,
    b: f64,
    tau: Temperature,
) -> Result<(f64, f64)> {
    let k = x.len();
    let bounds = BoxBounds::uniform(k, a, b)?;
    let (_, active) = bcsoftmax(x, &bounds, tau)?;
    let t = tau.get();

    let log_z = if active.any_free() {
        active.log_normalizer()
    } else {
        // All pinned: any ln Z between these limits reproduces the output.
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for i in 0..k {
            let scaled = x[i] / t;
            if active.lower_pinned[i] {
                lo = lo.max(scaled - a.ln());
            } else if active.upper_pinned[i] {
                hi = hi.min(scaled - b.ln());
            }
        }
        if lo.is_finite() {
            lo
        } else {
            hi
        }
    };

    if active.any_lower() && a == 0.0 {
        return Err(Error::domain(
            "a zero lower bound is active; no logit clip yields a zero probability",
        ));
    }
    let min_x = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max_x = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = if active.any_lower() {
        t * (a.ln() + log_z)
    } else {
        min_x
    };
    let hi = if active.any_upper() {
        t * (b.ln() + log_z)
    } else {
        max_x
    };
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::softmax::{clip, softmax};
    use crate::upper::ubsoftmax_sorted;
    use crate::UpperBounds;

    fn logits(v: &[f64]) -> LogitVector {
        LogitVector::new(v.to_vec()).unwrap()
    }

    fn boxed(a: &[f64], b: &[f64]) -> BoxBounds {
        BoxBounds::from_vecs(a.to_vec(), b.to_vec()).unwrap()
    }

    fn all_variants(x: &[f64], a: &[f64], b: &[f64], tau: f64) -> Vec<(ProbVector, ActiveSet)> {
        let x = logits(x);
        let bounds = boxed(a, b);
        let tau = Temperature::new(tau).unwrap();
        vec![
            bcsoftmax_with(&x, &bounds, tau, SearchCheck::Exhaustive).unwrap(),
            bcsoftmax_with(&x, &bounds, tau, SearchCheck::Certify).unwrap(),
            bcsoftmax_quadratic(&x, &bounds, tau).unwrap(),
        ]
    }

    #[test]
    fn worked_example() {
        let expected = [0.107_576_568_547_998_05, 0.6, 0.292_423_431_452_001_97];
        for (y, act) in all_variants(&[-1.5, 1.0, -0.5], &[0.0; 3], &[1.0, 0.6, 0.5], 1.0) {
            assert!(tol::max_abs_diff(&y, &expected) < 1e-15, "{y:?}");
            assert_eq!(act.upper_pinned, vec![false, true, false]);
            assert!(!act.any_lower());
        }
    }

    #[test]
    fn unbounded_box_is_softmax() {
        let x = [0.4, -1.0, 2.5, 2.5, -0.3];
        let p = softmax(&logits(&x), Temperature::new(1.3).unwrap());
        for (y, act) in all_variants(&x, &[0.0; 5], &[1.0; 5], 1.3) {
            assert!(tol::max_abs_diff(&y, &p) < 1e-12);
            assert!((0..5).all(|i| act.is_free(i)));
            assert!((act.free_mass - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fully_pinned_box() {
        let v = [0.2, 0.5, 0.3];
        for x in [[0.0, 0.0, 0.0], [9.0, -3.0, 1.0], [-4.0, 4.0, 0.5]] {
            for (y, act) in all_variants(&x, &v, &v, 1.0) {
                assert!(tol::max_abs_diff(&y, &v) < 1e-12, "{y:?}");
                for i in 0..3 {
                    assert!(!(act.lower_pinned[i] && act.upper_pinned[i]));
                }
            }
        }
    }

    #[test]
    fn feasibility_is_not_monotone_in_the_prefix() {
        // y(0) is uniform and feasible, y(1) cannot place 0.7 under caps 0.34 + 0.34.
        // Bisecting on plain feasibility would probe k = 1 and move right.
        let third = 1.0 / 3.0;
        for (y, act) in all_variants(&[0.0; 3], &[0.3, 0.0, 0.0], &[1.0, 0.34, 0.34], 1.0) {
            assert!(tol::max_abs_diff(&y, &[third; 3]) < 1e-15, "{y:?}");
            assert!(!act.any_lower() && !act.any_upper());
        }
    }

    #[test]
    fn lower_bounded_example() {
        let expected = [0.3, 0.083_442_045_415_482_3, 0.616_557_954_584_517_7];
        let x = logits(&[0.0, 0.0, 2.0]);
        let a = LowerBounds::new(vec![0.3, 0.0, 0.0]).unwrap();
        let (y, act) = lbsoftmax(&x, &a, Temperature::ONE).unwrap();
        assert!(tol::max_abs_diff(&y, &expected) < 1e-15, "{y:?}");
        assert_eq!(act.lower_pinned, vec![true, false, false]);

        for (y, _) in all_variants(&[0.0, 0.0, 2.0], &[0.3, 0.0, 0.0], &[1.0; 3], 1.0) {
            assert!(tol::max_abs_diff(&y, &expected) < 1e-15);
        }
    }

    #[test]
    fn underflowing_free_set() {
        // exp(−900) underflows; index 1 keeps 0.6 and index 2 its floor
        let x = logits(&[0.0, -900.0, -10000.0]);
        let a = [0.0, 0.0, 0.2];
        let b = [0.2, 1.0, 1.0];
        for (y, _) in all_variants(&x, &a, &b, 1.0) {
            assert!(tol::max_abs_diff(&y, &[0.2, 0.6, 0.2]) < 1e-15, "{y:?}");
        }
        let x = logits(&[0.0, -900.0, -901.0]);
        let a = LowerBounds::new(vec![0.0, 0.3, 0.3]).unwrap();
        let (y, act) = lbsoftmax(&x, &a, Temperature::ONE).unwrap();
        assert!(tol::max_abs_diff(&y, &[0.4, 0.3, 0.3]) < 1e-15, "{y:?}");
        assert!(act.lower_pinned[1] && act.lower_pinned[2]);
    }

    #[test]
    fn lower_bounds_summing_to_one() {
        let a = [0.25, 0.125, 0.625];
        let x = logits(&[3.0, -2.0, 0.0]);
        let (y, _) =
            lbsoftmax(&x, &LowerBounds::new(a.to_vec()).unwrap(), Temperature::ONE).unwrap();
        assert!(tol::max_abs_diff(&y, &a) < 1e-15);
        for (y, _) in all_variants(&[3.0, -2.0, 0.0], &a, &[1.0; 3], 1.0) {
            assert!(tol::max_abs_diff(&y, &a) < 1e-15);
        }
    }

    #[test]
    fn zero_lower_bounds_match_softmax() {
        let x = logits(&[1.0, 2.0, -0.5]);
        let tau = Temperature::new(0.5).unwrap();
        let (y, act) = lbsoftmax(&x, &LowerBounds::zeros(3), tau).unwrap();
        assert!(tol::max_abs_diff(&y, &softmax(&x, tau)) < 1e-15);
        assert!(!act.any_lower());
    }

    #[test]
    fn upper_only_matches_ubsoftmax() {
        let x = [2.0, 1.0, 0.0, -1.0];
        let b = [0.3, 0.3, 0.3, 0.3];
        let (ub, _) = ubsoftmax_sorted(
            &logits(&x),
            &UpperBounds::new(b.to_vec()).unwrap(),
            Temperature::ONE,
        )
        .unwrap();
        for (y, _) in all_variants(&x, &[0.0; 4], &b, 1.0) {
            assert!(tol::max_abs_diff(&y, &ub) < 1e-15);
        }
    }

    #[test]
    fn singleton_box() {
        for (y, _) in all_variants(&[4.2], &[0.3], &[1.0], 2.0) {
            assert_eq!(y.as_slice(), &[1.0]);
        }
    }

    #[test]
    fn clip_example() {
        let x = logits(&[0.0, 0.0, 4.0]);
        let (c, cap) = scalar_bounds_to_clip(&x, 0.0, 0.5, Temperature::ONE).unwrap();
        assert!((cap - 2f64.ln()).abs() < 1e-14, "{cap}");
        assert_eq!(c, 0.0);
        let p = softmax(&logits(&clip(&x, c, cap)), Temperature::ONE);
        assert!(tol::max_abs_diff(&p, &[0.25, 0.25, 0.5]) < 1e-15);
    }

    #[test]
    fn inactive_scalar_bounds_do_not_clip() {
        let x = logits(&[-1.0, 0.5, 3.0]);
        let (c, cap) = scalar_bounds_to_clip(&x, 0.0, 1.0, Temperature::ONE).unwrap();
        assert_eq!((c, cap), (-1.0, 3.0));
    }

    #[test]
    fn fully_pinned_scalar_bounds() {
        let x = logits(&[0.0, 0.0]);
        let (c, cap) = scalar_bounds_to_clip(&x, 0.5, 0.5, Temperature::ONE).unwrap();
        assert!(c <= cap);
        let p = softmax(&logits(&clip(&x, c, cap)), Temperature::ONE);
        assert!(tol::max_abs_diff(&p, &[0.5, 0.5]) < 1e-15);

        let x = logits(&[0.0, 5.0]);
        let (c, cap) = scalar_bounds_to_clip(&x, 0.2, 0.8, Temperature::ONE).unwrap();
        let p = softmax(&logits(&clip(&x, c, cap)), Temperature::ONE);
        assert!(tol::max_abs_diff(&p, &[0.2, 0.8]) < 1e-12, "{p:?}");
    }

    #[test]
    fn infeasible_scalar_bounds() {
        let x = logits(&[0.0, 1.0, 2.0]);
        assert!(scalar_bounds_to_clip(&x, 0.4, 0.9, Temperature::ONE).is_err());
        assert!(scalar_bounds_to_clip(&x, 0.0, 0.3, Temperature::ONE).is_err());
    }
}
