//! Box-constrained softmax.
//!
//! The softmax family here is defined as the maximizer of the entropic
//! objective `x·y − τ Σ y log y` over the probability simplex intersected
//! with a box `[a, b]`. With only upper bounds this is [`ubsoftmax_sorted`] /
//! [`ubsoftmax_select`], with only lower bounds [`lbsoftmax`], and with both
//! [`bcsoftmax`] / [`bcsoftmax_quadratic`]. All variants are exact: they
//! identify the active set (which coordinates sit on a bound) and fill the
//! remaining mass with a rescaled softmax.
//!
//! [`autodiff`] provides O(K) Jacobian products, [`oracle`] a brute-force
//! solver used as ground truth, and [`calib`] post-hoc calibration built on
//! top of the bounded softmax.

pub mod autodiff;
mod bounded;
pub mod calib;
mod error;
pub mod oracle;
pub mod sample;
mod softmax;
pub mod tol;
mod types;
mod upper;

pub use bounded::{
    bcsoftmax, bcsoftmax_quadratic, bcsoftmax_with, lbsoftmax, scalar_bounds_to_clip, SearchCheck,
};
pub use error::{Error, Result};
pub use softmax::{clip, objective_value, softmax};
pub use types::{
    ActiveSet, BoxBounds, LogitVector, LowerBounds, ProbVector, Temperature, UpperBounds,
};
pub use upper::{ubsoftmax_select, ubsoftmax_sorted};
