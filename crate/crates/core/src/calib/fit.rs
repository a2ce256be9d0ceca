use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::data::LabeledLogitSet;
use super::model::{lb_thresholds, pb_bounds, sigmoid, CalibKind, CalibModel, Flags};
use crate::autodiff::{vjp_a, vjp_b, vjp_x, JacobianFactors};
use crate::bounded::{bcsoftmax_with, SearchCheck};
use crate::error::{Error, Result};
use crate::softmax::{clip, softmax_slice};
use crate::types::{BoxBounds, LogitVector, Temperature};

/// Smallest probability passed to the logarithm in [`ce_loss`].
pub const CE_CLAMP: f64 = 1e-12;

/// `−ln p_label`, with `p_label` clamped to at least [`CE_CLAMP`].
pub fn ce_loss(p: &[f64], label: usize) -> f64 {
    -p[label].max(CE_CLAMP).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    pub flags: Flags,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 128,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            flags: Flags::default(),
        }
    }
}

/// Mean cross-entropy of `model` over `data`.
pub fn mean_loss(model: &CalibModel, data: &LabeledLogitSet) -> Result<f64> {
    let mut total = 0.0;
    for n in 0..data.len() {
        let p = model.predict(data.logits(n), data.features(n))?;
        total += ce_loss(&p, data.label(n));
    }
    Ok(total / data.len() as f64)
}

/// Loss of one sample; adds its parameter gradient (flat layout) to `grad`.
fn sample_grad(
    model: &CalibModel,
    logits: &[f64],
    label: usize,
    features: Option<&[f64]>,
    grad: &mut [f64],
) -> Result<f64> {
    let tau = model.tau()?.get();
    let k = logits.len();
    let (h1, h2) = model.heads(features)?;
    let (mut g_tau, mut g_h1, mut g_h2) = (0.0, 0.0, 0.0);

    let loss = match model.kind {
        CalibKind::Ts => {
            let u: Vec<f64> = logits.iter().map(|l| l / tau).collect();
            let p = softmax_slice(&u, Temperature::ONE);
            let loss = ce_loss(&p, label);
            if p[label] >= CE_CLAMP {
                g_tau = -(0..k)
                    .map(|i| (p[i] - f64::from(i == label)) * u[i])
                    .sum::<f64>();
            }
            loss
        }
        CalibKind::PbC | CalibKind::PbL => {
            let u = LogitVector::new(logits.iter().map(|l| l / tau).collect())?;
            let (a, b) = pb_bounds(k, h1, h2, model.flags);
            let bounds = BoxBounds::uniform(k, a, b)?;
            let (p, active) = bcsoftmax_with(&u, &bounds, Temperature::ONE, SearchCheck::Certify)?;
            let loss = ce_loss(&p, label);
            if p[label] >= CE_CLAMP {
                let f = JacobianFactors::from_solution(&p, &active);
                let mut v = vec![0.0; k];
                v[label] = -1.0 / p[label];
                let gx = vjp_x(&f, &v);
                g_tau = -gx.iter().zip(u.iter()).map(|(g, u)| g * u).sum::<f64>();
                let inv_k = 1.0 / k as f64;
                if model.flags.use_lower {
                    let s = sigmoid(h1);
                    g_h1 = vjp_a(&f, &v).iter().sum::<f64>() * s * (1.0 - s) * inv_k;
                }
                if model.flags.use_upper {
                    let s = sigmoid(h2);
                    g_h2 = vjp_b(&f, &v).iter().sum::<f64>() * s * (1.0 - s) * (1.0 - inv_k);
                }
            }
            loss
        }
        CalibKind::LbC | CalibKind::LbL => {
            let (c, cap) = lb_thresholds(model.kind, logits, h1, h2, model.flags);
            let u: Vec<f64> = clip(logits, c, cap).iter().map(|w| w / tau).collect();
            let p = softmax_slice(&u, Temperature::ONE);
            let loss = ce_loss(&p, label);
            if p[label] >= CE_CLAMP {
                let mut g_c = 0.0;
                let mut g_cap = 0.0;
                for i in 0..k {
                    let gu = p[i] - f64::from(i == label);
                    g_tau -= gu * u[i];
                    // clip subgradient: ties count as interior
                    if logits[i] < c {
                        g_c += gu / tau;
                    } else if logits[i] > cap {
                        g_cap += gu / tau;
                    }
                }
                let upper_arg = h1 + super::model::softplus(h2);
                let (dc_dh1, dcap_darg) = if model.kind == CalibKind::LbC {
                    let norm = logits.iter().map(|v| v * v).sum::<f64>().sqrt();
                    (
                        norm * (1.0 - h1.tanh().powi(2)),
                        norm * (1.0 - upper_arg.tanh().powi(2)),
                    )
                } else {
                    (1.0, 1.0)
                };
                g_h1 = g_c * dc_dh1 + g_cap * dcap_darg;
                g_h2 = g_cap * dcap_darg * sigmoid(h2);
            }
            loss
        }
    };

    grad[0] += g_tau;
    match features.filter(|_| model.kind.needs_features()) {
        None if grad.len() == 3 => {
            grad[1] += g_h1;
            grad[2] += g_h2;
        }
        None => {}
        Some(z) => {
            let d = z.len();
            for j in 0..d {
                grad[1 + j] += g_h1 * z[j];
                grad[2 + d + j] += g_h2 * z[j];
            }
            grad[1 + d] += g_h1;
            grad[2 + 2 * d] += g_h2;
        }
    }
    Ok(loss)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64], cfg: &FitConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

/// Fits a calibrator of `kind` by mini-batch Adam on mean cross-entropy.
///
/// Deterministic for a given `config.seed`. A non-finite loss or gradient
/// stops the run with [`Error::Divergence`].
pub fn fit(kind: CalibKind, data: &LabeledLogitSet, config: &FitConfig) -> Result<CalibModel> {
    if config.batch_size == 0 {
        return Err(Error::Usage("batch size must be positive".into()));
    }
    let mut model = CalibModel::init(kind, data.feature_dim(), config.flags)?;
    let mut theta = model.to_flat();
    let mut adam = Adam::new(theta.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; theta.len()];

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad.fill(0.0);
            let mut loss = 0.0;
            for &n in batch {
                loss += sample_grad(
                    &model,
                    data.logits(n),
                    data.label(n),
                    data.features(n),
                    &mut grad,
                )?;
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if !loss.is_finite() || !grad.iter().all(|g| g.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    reason: "non-finite loss or gradient".into(),
                    last_params: theta,
                });
            }
            let last = theta.clone();
            adam.step(&mut theta, &grad, config);
            model.set_flat(&theta);
            if model.tau().is_err() {
                return Err(Error::Divergence {
                    epoch,
                    reason: format!("temperature left the domain (tau_raw = {})", theta[0]),
                    last_params: last,
                });
            }
        }
    }

    model.meta.seed = config.seed;
    model.meta.epochs = config.epochs;
    model.meta.final_loss = Some(mean_loss(&model, data)?);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::data::gen_synthetic;
    use crate::calib::model::Params;

    #[test]
    fn ce_examples() {
        assert_eq!(ce_loss(&[1.0, 0.0, 0.0], 0), 0.0);
        assert!((ce_loss(&[0.25; 4], 3) - 4f64.ln()).abs() < 1e-15);
        let v = ce_loss(
            &[0.107_576_568_547_998_05, 0.6, 0.292_423_431_452_001_97],
            1,
        );
        assert!((v - 0.510_825_623_765_990_7).abs() < 1e-15);
        assert_eq!(ce_loss(&[1.0, 0.0], 1), -CE_CLAMP.ln());
    }

    /// Central differences of the mean loss in every flat coordinate.
    fn numeric_grad(model: &CalibModel, data: &LabeledLogitSet) -> Vec<f64> {
        let theta = model.to_flat();
        let h = 1e-6;
        (0..theta.len())
            .map(|i| {
                let mut m = model.clone();
                let mut t = theta.clone();
                t[i] += h;
                m.set_flat(&t);
                let up = mean_loss(&m, data).unwrap();
                t[i] -= 2.0 * h;
                m.set_flat(&t);
                let down = mean_loss(&m, data).unwrap();
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn analytic_grad(model: &CalibModel, data: &LabeledLogitSet) -> Vec<f64> {
        let mut g = vec![0.0; model.to_flat().len()];
        for n in 0..data.len() {
            sample_grad(
                model,
                data.logits(n),
                data.label(n),
                data.features(n),
                &mut g,
            )
            .unwrap();
        }
        g.iter().map(|v| v / data.len() as f64).collect()
    }

    fn assert_grad_matches(model: &CalibModel, data: &LabeledLogitSet) {
        let a = analytic_grad(model, data);
        let n = numeric_grad(model, data);
        for (i, (x, y)) in a.iter().zip(&n).enumerate() {
            assert!(
                (x - y).abs() < 1e-6,
                "{} coordinate {i}: {x} vs {y}",
                model.kind
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let data = gen_synthetic(40, 4, 2.0, 3).unwrap();
        for kind in CalibKind::ALL {
            let mut model = CalibModel::init(kind, data.feature_dim(), Flags::default()).unwrap();
            // move the bounds into their active range
            let mut theta = model.to_flat();
            theta[0] = 0.2;
            let active: &[f64] = match kind {
                CalibKind::Ts => &[],
                CalibKind::PbC => &[0.5, -1.0],
                CalibKind::LbC => &[-0.3, -0.2],
                CalibKind::PbL | CalibKind::LbL => &[],
            };
            theta[1..1 + active.len()].copy_from_slice(active);
            if kind.needs_features() {
                let d = 4;
                for (j, v) in theta[1..].iter_mut().enumerate() {
                    *v = 0.1 * ((j % (d + 1)) as f64 - 2.0);
                }
            }
            model.set_flat(&theta);
            assert_grad_matches(&model, &data);
        }
    }

    #[test]
    fn zero_epochs_return_init() {
        let data = gen_synthetic(30, 3, 2.0, 0).unwrap();
        let config = FitConfig {
            epochs: 0,
            ..FitConfig::default()
        };
        for kind in CalibKind::ALL {
            let fitted = fit(kind, &data, &config).unwrap();
            let init = CalibModel::init(kind, data.feature_dim(), config.flags).unwrap();
            assert_eq!(fitted.to_flat(), init.to_flat());
            assert_eq!(fitted.meta.epochs, 0);
        }
    }

    #[test]
    fn fit_is_deterministic_and_reduces_loss() {
        let data = gen_synthetic(300, 5, 3.0, 11).unwrap();
        let config = FitConfig {
            epochs: 20,
            batch_size: 32,
            seed: 5,
            ..FitConfig::default()
        };
        for kind in CalibKind::ALL {
            let a = fit(kind, &data, &config).unwrap();
            let b = fit(kind, &data, &config).unwrap();
            assert_eq!(a, b);
            let init = CalibModel::init(kind, data.feature_dim(), config.flags).unwrap();
            let before = mean_loss(&init, &data).unwrap();
            assert!(a.meta.final_loss.unwrap() <= before + 1e-9, "{kind}");
        }
    }

    #[test]
    fn ts_fit_moves_toward_true_temperature() {
        let data = gen_synthetic(1000, 10, 3.0, 2).unwrap();
        let config = FitConfig {
            epochs: 100,
            ..FitConfig::default()
        };
        let model = fit(CalibKind::Ts, &data, &config).unwrap();
        let tau = model.tau().unwrap().get();
        assert!((2.5..=3.5).contains(&tau), "tau = {tau}");
        assert!(matches!(model.params, Params::Empty {}));
    }

    #[test]
    fn zero_batch_is_a_usage_error() {
        let data = gen_synthetic(5, 2, 1.0, 0).unwrap();
        let config = FitConfig {
            batch_size: 0,
            ..FitConfig::default()
        };
        assert!(matches!(
            fit(CalibKind::Ts, &data, &config),
            Err(Error::Usage(_))
        ));
    }
}
