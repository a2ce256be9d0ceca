use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounded::{bcsoftmax_with, SearchCheck};
use crate::error::{Error, Result};
use crate::softmax::{clip, softmax};
use crate::types::{BoxBounds, LogitVector, ProbVector, Temperature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CalibKind {
    #[serde(rename = "TS")]
    Ts,
    #[serde(rename = "PB-C")]
    PbC,
    #[serde(rename = "PB-L")]
    PbL,
    #[serde(rename = "LB-C")]
    LbC,
    #[serde(rename = "LB-L")]
    LbL,
}

impl CalibKind {
    pub const ALL: [CalibKind; 5] = [
        CalibKind::Ts,
        CalibKind::PbC,
        CalibKind::PbL,
        CalibKind::LbC,
        CalibKind::LbL,
    ];

    pub fn needs_features(self) -> bool {
        matches!(self, CalibKind::PbL | CalibKind::LbL)
    }

    pub fn is_probability_bounding(self) -> bool {
        matches!(self, CalibKind::PbC | CalibKind::PbL)
    }

    pub fn is_logit_bounding(self) -> bool {
        matches!(self, CalibKind::LbC | CalibKind::LbL)
    }

    pub fn name(self) -> &'static str {
        match self {
            CalibKind::Ts => "TS",
            CalibKind::PbC => "PB-C",
            CalibKind::PbL => "PB-L",
            CalibKind::LbC => "LB-C",
            CalibKind::LbL => "LB-L",
        }
    }
}

impl fmt::Display for CalibKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CalibKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CalibKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Usage(format!("unknown calibration method '{s}'")))
    }
}

/// Which bounds a PB or LB model applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub use_lower: bool,
    pub use_upper: bool,
}

impl Default for Flags {
    fn default() -> Self {
        Self {
            use_lower: true,
            use_upper: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Meta {
    pub seed: u64,
    pub epochs: usize,
    /// Mean training cross-entropy of the returned parameters.
    pub final_loss: Option<f64>,
}

/// Kind-specific parameters, before their output transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Params {
    Empty {},
    ProbConst {
        a_raw: f64,
        b_raw: f64,
    },
    ProbLinear {
        a_weight: Vec<f64>,
        a_bias: f64,
        b_weight: Vec<f64>,
        b_bias: f64,
    },
    LogitConst {
        c_raw: f64,
        gap_raw: f64,
    },
    LogitLinear {
        c_weight: Vec<f64>,
        c_bias: f64,
        gap_weight: Vec<f64>,
        gap_bias: f64,
    },
}

/// A fitted calibrator. `τ = exp(tau_raw)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibModel {
    pub kind: CalibKind,
    pub tau_raw: f64,
    pub params: Params,
    pub flags: Flags,
    #[serde(default)]
    pub meta: Meta,
}

const INIT_TAU: f64 = 1.5;
const INIT_LOWER_RAW: f64 = -4.0;
const INIT_UPPER_RAW: f64 = 4.0;
/// `c′ + softplus(C′)` starts at +4.
const INIT_LB_UPPER_ARG: f64 = 4.0;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eˣ)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn softplus_inv(y: f64) -> f64 {
    // ln(eʸ − 1)
    y + (-(-y).exp()).ln_1p()
}

fn dot(w: &[f64], z: &[f64]) -> f64 {
    w.iter().zip(z).map(|(a, b)| a * b).sum()
}

/// Scalar bounds `(a, b)` from raw heads.
pub(crate) fn pb_bounds(k: usize, a_raw: f64, b_raw: f64, flags: Flags) -> (f64, f64) {
    let inv = 1.0 / k as f64;
    let a = if flags.use_lower {
        sigmoid(a_raw) * inv
    } else {
        0.0
    };
    let b = if flags.use_upper {
        inv + (1.0 - inv) * sigmoid(b_raw)
    } else {
        1.0
    };
    (a, b)
}

/// Clip thresholds `(c, C)` from raw heads; infinite when a side is disabled.
pub(crate) fn lb_thresholds(
    kind: CalibKind,
    logits: &[f64],
    c_raw: f64,
    gap_raw: f64,
    flags: Flags,
) -> (f64, f64) {
    let upper_arg = c_raw + softplus(gap_raw);
    let (c, cap) = match kind {
        CalibKind::LbC => {
            let norm = logits.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm * c_raw.tanh(), norm * upper_arg.tanh())
        }
        _ => (c_raw, upper_arg),
    };
    (
        if flags.use_lower {
            c
        } else {
            f64::NEG_INFINITY
        },
        if flags.use_upper { cap } else { f64::INFINITY },
    )
}

impl CalibModel {
    /// Untrained model: `τ = 1.5` and bounds near inactive.
    pub fn init(kind: CalibKind, feature_dim: Option<usize>, flags: Flags) -> Result<Self> {
        let d = match (kind.needs_features(), feature_dim) {
            (true, None) => {
                return Err(Error::Usage(format!("{kind} needs a feature column")));
            }
            (true, Some(d)) => d,
            (false, _) => 0,
        };
        let gap = softplus_inv(INIT_LB_UPPER_ARG - INIT_LOWER_RAW);
        let params = match kind {
            CalibKind::Ts => Params::Empty {},
            CalibKind::PbC => Params::ProbConst {
                a_raw: INIT_LOWER_RAW,
                b_raw: INIT_UPPER_RAW,
            },
            CalibKind::PbL => Params::ProbLinear {
                a_weight: vec![0.0; d],
                a_bias: INIT_LOWER_RAW,
                b_weight: vec![0.0; d],
                b_bias: INIT_UPPER_RAW,
            },
            CalibKind::LbC => Params::LogitConst {
                c_raw: INIT_LOWER_RAW,
                gap_raw: gap,
            },
            CalibKind::LbL => Params::LogitLinear {
                c_weight: vec![0.0; d],
                c_bias: INIT_LOWER_RAW,
                gap_weight: vec![0.0; d],
                gap_bias: gap,
            },
        };
        Ok(Self {
            kind,
            tau_raw: INIT_TAU.ln(),
            params,
            flags,
            meta: Meta::default(),
        })
    }

    /// Plain temperature model with the given `τ`.
    pub fn temperature(tau: f64) -> Result<Self> {
        let tau = Temperature::new(tau)?;
        Ok(Self {
            kind: CalibKind::Ts,
            tau_raw: tau.get().ln(),
            params: Params::Empty {},
            flags: Flags::default(),
            meta: Meta::default(),
        })
    }

    pub fn tau(&self) -> Result<Temperature> {
        Temperature::new(self.tau_raw.exp())
    }

    /// Checks that `params` match `kind` and everything is finite.
    pub fn validate(&self) -> Result<()> {
        let ok = matches!(
            (self.kind, &self.params),
            (CalibKind::Ts, Params::Empty {})
                | (CalibKind::PbC, Params::ProbConst { .. })
                | (CalibKind::PbL, Params::ProbLinear { .. })
                | (CalibKind::LbC, Params::LogitConst { .. })
                | (CalibKind::LbL, Params::LogitLinear { .. })
        );
        if !ok {
            return Err(Error::Usage(format!(
                "parameters do not match model kind {}",
                self.kind
            )));
        }
        if let Params::ProbLinear {
            a_weight: w1,
            b_weight: w2,
            ..
        }
        | Params::LogitLinear {
            c_weight: w1,
            gap_weight: w2,
            ..
        } = &self.params
        {
            if w1.len() != w2.len() {
                return Err(Error::Dimension {
                    expected: w1.len(),
                    got: w2.len(),
                });
            }
        }
        if !self.to_flat().iter().all(|v| v.is_finite()) {
            return Err(Error::domain("model parameters must be finite"));
        }
        self.tau()?;
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: Self =
            serde_json::from_str(s).map_err(|e| Error::Usage(format!("model JSON: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Feature dimension the linear heads expect.
    pub fn feature_dim(&self) -> Option<usize> {
        match &self.params {
            Params::ProbLinear { a_weight, .. } => Some(a_weight.len()),
            Params::LogitLinear { c_weight, .. } => Some(c_weight.len()),
            _ => None,
        }
    }

    /// `[tau_raw, head 1, head 2]`, each linear head laid out as weights then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = vec![self.tau_raw];
        match &self.params {
            Params::Empty {} => {}
            Params::ProbConst { a_raw: p, b_raw: q }
            | Params::LogitConst {
                c_raw: p,
                gap_raw: q,
            } => {
                v.extend([*p, *q]);
            }
            Params::ProbLinear {
                a_weight: w1,
                a_bias: b1,
                b_weight: w2,
                b_bias: b2,
            }
            | Params::LogitLinear {
                c_weight: w1,
                c_bias: b1,
                gap_weight: w2,
                gap_bias: b2,
            } => {
                v.extend(w1);
                v.push(*b1);
                v.extend(w2);
                v.push(*b2);
            }
        }
        v
    }

    /// Inverse of [`to_flat`](Self::to_flat). Panics on a length mismatch.
    pub fn set_flat(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.to_flat().len());
        self.tau_raw = v[0];
        let rest = &v[1..];
        match &mut self.params {
            Params::Empty {} => {}
            Params::ProbConst { a_raw: p, b_raw: q }
            | Params::LogitConst {
                c_raw: p,
                gap_raw: q,
            } => {
                *p = rest[0];
                *q = rest[1];
            }
            Params::ProbLinear {
                a_weight: w1,
                a_bias: b1,
                b_weight: w2,
                b_bias: b2,
            }
            | Params::LogitLinear {
                c_weight: w1,
                c_bias: b1,
                gap_weight: w2,
                gap_bias: b2,
            } => {
                let d = w1.len();
                w1.copy_from_slice(&rest[..d]);
                *b1 = rest[d];
                w2.copy_from_slice(&rest[d + 1..2 * d + 1]);
                *b2 = rest[2 * d + 1];
            }
        }
    }

    /// The two raw head outputs (`a′, b′` or `c′, C′`) for one sample.
    pub(crate) fn heads(&self, features: Option<&[f64]>) -> Result<(f64, f64)> {
        match &self.params {
            Params::Empty {} => Ok((0.0, 0.0)),
            Params::ProbConst { a_raw: p, b_raw: q }
            | Params::LogitConst {
                c_raw: p,
                gap_raw: q,
            } => Ok((*p, *q)),
            Params::ProbLinear {
                a_weight: w1,
                a_bias: b1,
                b_weight: w2,
                b_bias: b2,
            }
            | Params::LogitLinear {
                c_weight: w1,
                c_bias: b1,
                gap_weight: w2,
                gap_bias: b2,
            } => {
                let z = features
                    .ok_or_else(|| Error::Usage(format!("{} needs features", self.kind)))?;
                if z.len() != w1.len() {
                    return Err(Error::Dimension {
                        expected: w1.len(),
                        got: z.len(),
                    });
                }
                Ok((dot(w1, z) + b1, dot(w2, z) + b2))
            }
        }
    }

    /// Calibrated probabilities for one sample.
    pub fn predict(&self, logits: &[f64], features: Option<&[f64]>) -> Result<ProbVector> {
        match self.kind {
            CalibKind::Ts => predict_ts(self, logits),
            CalibKind::PbC | CalibKind::PbL => predict_pb(self, logits, features),
            CalibKind::LbC | CalibKind::LbL => predict_lb(self, logits, features),
        }
    }
}

fn expect_kind(model: &CalibModel, ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Usage(format!(
            "{what} called with a {} model",
            model.kind
        )))
    }
}

/// `softmax(logits, τ)`.
pub fn predict_ts(model: &CalibModel, logits: &[f64]) -> Result<ProbVector> {
    expect_kind(model, model.kind == CalibKind::Ts, "predict_ts")?;
    Ok(softmax(&LogitVector::try_from(logits)?, model.tau()?))
}

/// Box-constrained softmax with uniform bounds `(a(x)·1, b(x)·1)`.
pub fn predict_pb(
    model: &CalibModel,
    logits: &[f64],
    features: Option<&[f64]>,
) -> Result<ProbVector> {
    expect_kind(model, model.kind.is_probability_bounding(), "predict_pb")?;
    let x = LogitVector::try_from(logits)?;
    let (a_raw, b_raw) = model.heads(features)?;
    let (a, b) = pb_bounds(x.len(), a_raw, b_raw, model.flags);
    let bounds = BoxBounds::uniform(x.len(), a, b)?;
    Ok(bcsoftmax_with(&x, &bounds, model.tau()?, SearchCheck::Certify)?.0)
}

/// Tempered softmax of logits clipped to `[c(x), C(x)]`.
pub fn predict_lb(
    model: &CalibModel,
    logits: &[f64],
    features: Option<&[f64]>,
) -> Result<ProbVector> {
    expect_kind(model, model.kind.is_logit_bounding(), "predict_lb")?;
    let x = LogitVector::try_from(logits)?;
    let (c_raw, gap_raw) = model.heads(features)?;
    let (c, cap) = lb_thresholds(model.kind, &x, c_raw, gap_raw, model.flags);
    let clipped = LogitVector::new(clip(&x, c, cap))?;
    Ok(softmax(&clipped, model.tau()?))
}
