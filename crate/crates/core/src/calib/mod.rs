//! Post-hoc calibration of classifier logits.
//!
//! Three families share one fitting loop: temperature scaling, probability
//! bounding (uniform bounds fed to the box-constrained softmax) and logit
//! bounding (clipping logits before a tempered softmax).

mod data;
mod ece;
mod fit;
mod model;

pub use data::{gen_synthetic, LabeledLogitSet};
pub use ece::{ece, ece_from_confidences, ece_from_probs, BinStat, EceReport, DEFAULT_BINS};
pub use fit::{ce_loss, fit, mean_loss, FitConfig, CE_CLAMP};
pub use model::{
    predict_lb, predict_pb, predict_ts, softplus, CalibKind, CalibModel, Flags, Meta, Params,
};
