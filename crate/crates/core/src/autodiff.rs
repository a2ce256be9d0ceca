//! Jacobians of the box-constrained softmax at `τ = 1`.
//!
//! With `p = bcsoftmax(x, (a, b))`, flags `g` (lower-pinned) and `h`
//! (upper-pinned), `q = p ∘ (1 − g) ∘ (1 − h)` and free mass `s`:
//!
//! ```text
//! ∂p/∂x = Diag(q) − q qᵀ / s
//! ∂p/∂a = Diag(g) − q gᵀ / s
//! ∂p/∂b = Diag(h) − q hᵀ / s
//! ```
//!
//! Each is diagonal minus rank one, so products cost `O(K)`. For another
//! temperature, call with `x/τ` and apply the chain rule outside.

use crate::bounded::bcsoftmax;
use crate::error::Result;
use crate::types::{ActiveSet, BoxBounds, LogitVector, ProbVector, Temperature};

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianFactors {
    /// Output restricted to the free coordinates, zero elsewhere.
    pub q: Vec<f64>,
    /// Free mass `Σ q`.
    pub s: f64,
    pub g: Vec<bool>,
    pub h: Vec<bool>,
}

impl JacobianFactors {
    pub fn from_solution(p: &ProbVector, active: &ActiveSet) -> Self {
        let q = p
            .iter()
            .enumerate()
            .map(|(i, &v)| if active.is_free(i) { v } else { 0.0 })
            .collect();
        Self {
            q,
            s: active.free_mass.max(0.0),
            g: active.lower_pinned.clone(),
            h: active.upper_pinned.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    fn inv_s(&self) -> f64 {
        if self.s > 0.0 {
            1.0 / self.s
        } else {
            0.0
        }
    }
}

/// Runs [`bcsoftmax`] at `τ = 1` and packages its active set.
pub fn jacobian_factors(x: &LogitVector, bounds: &BoxBounds) -> Result<JacobianFactors> {
    let (p, active) = bcsoftmax(x, bounds, Temperature::ONE)?;
    Ok(JacobianFactors::from_solution(&p, &active))
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn masked_dot(mask: &[bool], v: &[f64]) -> f64 {
    mask.iter()
        .zip(v)
        .filter(|(&m, _)| m)
        .map(|(_, &x)| x)
        .sum()
}

/// `vᵀ ∂p/∂x = q ∘ v − q (q·v)/s`. The Jacobian is symmetric, so this is also
/// the JVP.
pub fn vjp_x(f: &JacobianFactors, v: &[f64]) -> Vec<f64> {
    assert_eq!(v.len(), f.len());
    if f.s <= 0.0 {
        return vec![0.0; f.len()];
    }
    let c = dot(&f.q, v) / f.s;
    f.q.iter().zip(v).map(|(&q, &vi)| q * (vi - c)).collect()
}

/// `vᵀ ∂p/∂a = g ∘ v − g (q·v)/s`.
pub fn vjp_a(f: &JacobianFactors, v: &[f64]) -> Vec<f64> {
    vjp_pinned(&f.g, f, v)
}

/// `vᵀ ∂p/∂b = h ∘ v − h (q·v)/s`.
pub fn vjp_b(f: &JacobianFactors, v: &[f64]) -> Vec<f64> {
    vjp_pinned(&f.h, f, v)
}

fn vjp_pinned(mask: &[bool], f: &JacobianFactors, v: &[f64]) -> Vec<f64> {
    assert_eq!(v.len(), f.len());
    let c = dot(&f.q, v) * f.inv_s();
    mask.iter()
        .zip(v)
        .map(|(&m, &vi)| if m { vi - c } else { 0.0 })
        .collect()
}

/// Directional derivative `∂p/∂x dx + ∂p/∂a da + ∂p/∂b db`.
pub fn jvp(f: &JacobianFactors, dx: &[f64], da: &[f64], db: &[f64]) -> Vec<f64> {
    let k = f.len();
    assert!(dx.len() == k && da.len() == k && db.len() == k);
    let inv_s = f.inv_s();
    let c = (dot(&f.q, dx) + masked_dot(&f.g, da) + masked_dot(&f.h, db)) * inv_s;
    (0..k)
        .map(|i| {
            let diag = if f.g[i] {
                da[i]
            } else if f.h[i] {
                db[i]
            } else if f.s > 0.0 {
                f.q[i] * dx[i]
            } else {
                0.0
            };
            diag - f.q[i] * c
        })
        .collect()
}

/// Outcome of [`check_gradients`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    /// A perturbation of size `step` changed the active set; no comparison
    /// was made. Perturbations that leave the feasible region fall back to a
    /// one-sided difference instead.
    pub boundary: bool,
    pub max_dev_x: Option<f64>,
    pub max_dev_a: Option<f64>,
    pub max_dev_b: Option<f64>,
    pub tol: f64,
}

impl GradientReport {
    pub fn passed(&self) -> bool {
        !self.boundary
            && [self.max_dev_x, self.max_dev_a, self.max_dev_b]
                .iter()
                .all(|d| d.is_some_and(|d| d <= self.tol))
    }
}

#[derive(Clone, Copy)]
enum Block {
    X,
    A,
    B,
}

/// Central finite differences of [`bcsoftmax`] at `τ = 1` against the
/// closed-form Jacobians.
pub fn check_gradients(
    x: &LogitVector,
    bounds: &BoxBounds,
    step: f64,
    tol: f64,
) -> Result<GradientReport> {
    let (p, active) = bcsoftmax(x, bounds, Temperature::ONE)?;
    let f = JacobianFactors::from_solution(&p, &active);
    let k = x.len();
    let zeros = vec![0.0; k];
    let boundary = GradientReport {
        boundary: true,
        max_dev_x: None,
        max_dev_a: None,
        max_dev_b: None,
        tol,
    };

    let mut devs = [0.0f64; 3];
    for (slot, block) in [Block::X, Block::A, Block::B].into_iter().enumerate() {
        for j in 0..k {
            // a side that leaves the feasible domain is dropped (one-sided difference)
            let mut sides: [Option<Vec<f64>>; 2] = [None, None];
            for (side, sign) in [1.0, -1.0].into_iter().enumerate() {
                if let Some((y, act)) = perturbed(x, bounds, block, j, sign * step) {
                    if act.lower_pinned != active.lower_pinned
                        || act.upper_pinned != active.upper_pinned
                    {
                        return Ok(boundary);
                    }
                    sides[side] = Some(y.into_inner());
                }
            }
            let (hi, lo, width) = match &sides {
                [Some(up), Some(down)] => (up.as_slice(), down.as_slice(), 2.0 * step),
                [Some(up), None] => (up.as_slice(), p.as_slice(), step),
                [None, Some(down)] => (p.as_slice(), down.as_slice(), step),
                [None, None] => continue,
            };
            let mut e = zeros.clone();
            e[j] = 1.0;
            let analytic = match block {
                Block::X => jvp(&f, &e, &zeros, &zeros),
                Block::A => jvp(&f, &zeros, &e, &zeros),
                Block::B => jvp(&f, &zeros, &zeros, &e),
            };
            for i in 0..k {
                let fd = (hi[i] - lo[i]) / width;
                devs[slot] = devs[slot].max((fd - analytic[i]).abs());
            }
        }
    }
    Ok(GradientReport {
        boundary: false,
        max_dev_x: Some(devs[0]),
        max_dev_a: Some(devs[1]),
        max_dev_b: Some(devs[2]),
        tol,
    })
}

fn perturbed(
    x: &LogitVector,
    bounds: &BoxBounds,
    block: Block,
    j: usize,
    delta: f64,
) -> Option<(ProbVector, ActiveSet)> {
    let mut xv = x.to_vec();
    let mut a = bounds.lower().to_vec();
    let mut b = bounds.upper().to_vec();
    match block {
        Block::X => xv[j] += delta,
        Block::A => a[j] += delta,
        Block::B => b[j] += delta,
    }
    let x = LogitVector::new(xv).ok()?;
    let bounds = BoxBounds::from_vecs(a, b).ok()?;
    bcsoftmax(&x, &bounds, Temperature::ONE).ok()
}
