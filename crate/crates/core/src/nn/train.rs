use rand::Rng;

use crate::game::LegalMask;
use crate::sampling::TrainingSample;

use super::{Mlp, NnError, Real};

/// Mini-batch optimizer settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub n_updates: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm ceiling; non-positive disables clipping.
    pub grad_clip: f64,
}

impl TrainConfig {
    /// 750 updates of 2048 samples.
    pub fn value_default() -> Self {
        TrainConfig {
            batch_size: 2048,
            n_updates: 750,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            grad_clip: 1.0,
        }
    }

    /// 5000 updates of 2048 samples.
    pub fn average_default() -> Self {
        TrainConfig { n_updates: 5000, ..TrainConfig::value_default() }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let positive = self.batch_size > 0
            && self.n_updates > 0
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if positive {
            Ok(())
        } else {
            Err(NnError::InvalidConfig(format!("invalid training settings {self:?}")))
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<R: Real> {
    m: Mlp<R>,
    v: Mlp<R>,
    step: i32,
    lr: R,
    beta1: R,
    beta2: R,
    eps: R,
}

impl<R: Real> Adam<R> {
    pub fn new(net: &Mlp<R>, cfg: &TrainConfig) -> Self {
        Adam {
            m: net.zeros_like(),
            v: net.zeros_like(),
            step: 0,
            lr: R::of(cfg.learning_rate),
            beta1: R::of(cfg.beta1),
            beta2: R::of(cfg.beta2),
            eps: R::of(cfg.epsilon),
        }
    }

    pub fn update(&mut self, net: &mut Mlp<R>, grads: &Mlp<R>) {
        self.step += 1;
        let one = R::one();
        let c1 = one - self.beta1.powi(self.step);
        let c2 = one - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((p, g), m), v) in net.params_mut().zip(grads.params()).zip(self.m.params_mut()).zip(self.v.params_mut()) {
            *m = b1 * *m + (one - b1) * *g;
            *v = b2 * *v + (one - b2) * *g * *g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Scales `grads` so its global norm is at most `clip`; returns the norm before scaling.
pub fn clip_grad_norm<R: Real>(grads: &mut Mlp<R>, clip: f64) -> f64 {
    let norm = grads.params().map(|g| g.as_f64() * g.as_f64()).sum::<f64>().sqrt();
    if clip > 0.0 && norm > clip {
        let s = R::of(clip / norm);
        for g in grads.params_mut() {
            *g = *g * s;
        }
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainStats {
    pub first_loss: f64,
    pub final_loss: f64,
    pub mean_loss: f64,
}

/// Fits `net` to `samples` with `cfg.n_updates` Adam steps on batches drawn
/// uniformly with replacement. Each sample's squared error over its legal
/// actions is weighted by `iteration / current_iteration`.
pub fn train<R: Real, S: TrainingSample, G: Rng + ?Sized>(
    net: &mut Mlp<R>,
    samples: &[S],
    cfg: &TrainConfig,
    current_iteration: u64,
    rng: &mut G,
) -> Result<TrainStats, NnError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(NnError::EmptyBuffer);
    }
    let (d_in, d_out) = (net.input_dim(), net.output_dim());
    let big_t = current_iteration.max(1) as f64;
    let b = cfg.batch_size;
    let mut x = vec![R::zero(); b * d_in];
    let mut y = vec![R::zero(); b * d_out];
    let mut masks = vec![LegalMask(0); b];
    let mut w = vec![R::zero(); b];
    let mut adam = Adam::new(net, cfg);
    let mut stats = TrainStats::default();
    for step in 0..cfg.n_updates {
        for k in 0..b {
            let s = &samples[rng.gen_range(0..samples.len())];
            if s.features().len() != d_in || s.target().len() != d_out {
                return Err(NnError::ShapeMismatch { expected: d_in + d_out, found: s.features().len() + s.target().len() });
            }
            for (dst, src) in x[k * d_in..(k + 1) * d_in].iter_mut().zip(s.features()) {
                *dst = R::of(*src as f64);
            }
            for (dst, src) in y[k * d_out..(k + 1) * d_out].iter_mut().zip(s.target()) {
                *dst = R::of(*src as f64);
            }
            masks[k] = s.mask();
            w[k] = R::of(s.iteration() as f64 / big_t);
        }
        let (loss, mut grads) = net.loss_and_grad(&x, &y, &masks, &w)?;
        clip_grad_norm(&mut grads, cfg.grad_clip);
        adam.update(net, &grads);
        let loss = loss.as_f64();
        if step == 0 {
            stats.first_loss = loss;
        }
        stats.final_loss = loss;
        stats.mean_loss += loss / cfg.n_updates as f64;
    }
    Ok(stats)
}
