//! Actor and critic objectives with analytic gradients.

use ndarray::{Array2, ArrayView2};

use crate::algo::config::CriticLoss;
use crate::distribution::{energy_distance_grad, quantile_huber_grad};
use crate::error::{Error, Result};
use crate::net::{GaussianPolicyHead, Mlp};

/// Per-sample clipped surrogate `min(r A, clip(r, 1-eps, 1+eps) A)`.
pub fn clip_objective(ratio: f64, advantage: f64, clip_epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// True when the unclipped branch attains the minimum, i.e. the ratio
/// still receives gradient.
fn unclipped_active(ratio: f64, advantage: f64, clip_epsilon: f64) -> bool {
    let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
    ratio * advantage <= clipped * advantage
}

/// Frozen on-policy samples for the actor objective.
#[derive(Debug, Clone)]
pub struct ActorBatch {
    pub inputs: Array2<f64>,
    pub actions: Array2<f64>,
    pub old_logprobs: Vec<f64>,
    pub advantages: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ActorLoss {
    /// Negated mean surrogate minus the entropy bonus.
    pub loss: f64,
    /// Gradient over [`actor_params`] ordering.
    pub grads: Vec<f64>,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Actor network parameters followed by the log-std vector.
pub fn actor_params(actor: &Mlp, head: &GaussianPolicyHead) -> Vec<f64> {
    let mut p = actor.params_flat();
    p.extend_from_slice(head.log_std());
    p
}

/// Inverse of [`actor_params`]; the log-std part is projected onto its
/// allowed range.
pub fn set_actor_params(actor: &mut Mlp, head: &mut GaussianPolicyHead, params: &[f64]) -> Result<()> {
    let n = actor.num_params();
    if params.len() != n + head.dim() {
        return Err(Error::LengthMismatch {
            what: "actor parameters",
            expected: n + head.dim(),
            got: params.len(),
        });
    }
    actor.set_params_flat(&params[..n])?;
    head.set_log_std(&params[n..])
}

pub fn actor_loss_and_grad(
    actor: &Mlp,
    head: &GaussianPolicyHead,
    batch: &ActorBatch,
    clip_epsilon: f64,
    entropy_coef: f64,
) -> Result<ActorLoss> {
    let b = batch.inputs.nrows();
    if b == 0 {
        return Err(Error::Empty("actor batch"));
    }
    for (what, got) in [
        ("actions", batch.actions.nrows()),
        ("old log-probs", batch.old_logprobs.len()),
        ("advantages", batch.advantages.len()),
    ] {
        if got != b {
            return Err(Error::LengthMismatch { what, expected: b, got });
        }
    }
    let cache = actor.forward_batch(batch.inputs.view())?;
    let means = cache.output();
    let dim = head.dim();
    let mut out_grad = Array2::zeros((b, dim));
    let mut d_log_std = vec![0.0; dim];
    let mut surrogate = 0.0;
    let mut kl = 0.0;
    let mut clipped = 0usize;
    let scale = 1.0 / b as f64;

    for i in 0..b {
        let mean = means.row(i);
        let action = batch.actions.row(i);
        let lp = head.logprob_and_grad(
            mean.as_slice().expect("row-major output"),
            action.as_slice().expect("row-major actions"),
        )?;
        let log_ratio = lp.logprob - batch.old_logprobs[i];
        let ratio = log_ratio.exp();
        let adv = batch.advantages[i];
        surrogate += clip_objective(ratio, adv, clip_epsilon);
        kl += (ratio - 1.0) - log_ratio;
        if (ratio - 1.0).abs() > clip_epsilon {
            clipped += 1;
        }
        if unclipped_active(ratio, adv, clip_epsilon) {
            // d(-r A / B) / d logp
            let coef = -scale * ratio * adv;
            for k in 0..dim {
                out_grad[[i, k]] = coef * lp.d_mean[k];
                d_log_std[k] += coef * lp.d_log_std[k];
            }
        }
    }
    let entropy = head.entropy();
    // entropy of a diagonal Gaussian has unit slope in each log-std
    d_log_std.iter_mut().for_each(|g| *g -= entropy_coef);

    let (grads, _) = actor.backward_batch(&cache, out_grad.view())?;
    let mut flat = grads.flatten();
    flat.extend(d_log_std);
    Ok(ActorLoss {
        loss: -surrogate * scale - entropy_coef * entropy,
        grads: flat,
        approx_kl: kl * scale,
        clip_fraction: clipped as f64 * scale,
    })
}

/// Distributional or scalar regression loss for the critic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueLoss {
    Energy,
    QuantileHuber { kappa: f64 },
    /// Squared error of a single output against a single target.
    Mse,
}

impl ValueLoss {
    pub fn distributional(kind: CriticLoss, kappa: f64) -> Self {
        match kind {
            CriticLoss::Energy => ValueLoss::Energy,
            CriticLoss::QuantileHuber => ValueLoss::QuantileHuber { kappa },
        }
    }
}

/// Mean per-sample loss between critic outputs and target sample sets, and
/// its gradient over the critic's flat parameters.
pub fn critic_loss_and_grad(
    critic: &Mlp,
    inputs: ArrayView2<f64>,
    targets: &[Vec<f64>],
    loss: ValueLoss,
) -> Result<(f64, Vec<f64>)> {
    let b = inputs.nrows();
    if b == 0 {
        return Err(Error::Empty("critic batch"));
    }
    if targets.len() != b {
        return Err(Error::LengthMismatch {
            what: "critic targets",
            expected: b,
            got: targets.len(),
        });
    }
    let cache = critic.forward_batch(inputs)?;
    let pred = cache.output();
    let mut out_grad = Array2::zeros(pred.dim());
    let scale = 1.0 / b as f64;
    let mut total = 0.0;
    for (i, target) in targets.iter().enumerate() {
        let row = pred.row(i);
        let p = row.as_slice().expect("row-major output");
        let (l, g) = match loss {
            ValueLoss::Energy => energy_distance_grad(p, target)?,
            ValueLoss::QuantileHuber { kappa } => quantile_huber_grad(p, target, kappa)?,
            ValueLoss::Mse => {
                if p.len() != 1 || target.len() != 1 {
                    return Err(Error::Shape("squared-error critic needs one output and one target".into()));
                }
                let d = p[0] - target[0];
                (d * d, vec![2.0 * d])
            }
        };
        total += l;
        for (k, gk) in g.into_iter().enumerate() {
            out_grad[[i, k]] = gk * scale;
        }
    }
    let (grads, _) = critic.backward_batch(&cache, out_grad.view())?;
    Ok((total * scale, grads.flatten()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::grad_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clip_examples() {
        assert!((clip_objective(1.3, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert!((clip_objective(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
        assert_eq!(clip_objective(1.1, 2.0, 0.2), 2.2);
        // clipping never helps the objective
        assert_eq!(clip_objective(0.5, 1.0, 0.2), 0.5);
        assert_eq!(clip_objective(1.5, -1.0, 0.2), -1.5);
    }

    fn random_batch(rng: &mut ChaCha8Rng, b: usize, in_dim: usize, act: usize) -> ActorBatch {
        ActorBatch {
            inputs: Array2::from_shape_fn((b, in_dim), |_| rng.random_range(-1.0..1.0)),
            actions: Array2::from_shape_fn((b, act), |_| rng.random_range(-1.5..1.5)),
            old_logprobs: (0..b).map(|_| rng.random_range(-3.0..-1.0)).collect(),
            advantages: (0..b).map(|_| rng.random_range(-2.0..2.0)).collect(),
        }
    }

    #[test]
    fn zero_advantage_gives_zero_actor_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let actor = Mlp::new(&[3, 8, 2], 0.5, &mut rng);
        let head = GaussianPolicyHead::with_dim(2, 0.0);
        let mut batch = random_batch(&mut rng, 16, 3, 2);
        batch.advantages = vec![0.0; 16];
        let out = actor_loss_and_grad(&actor, &head, &batch, 0.2, 0.0).unwrap();
        let norm = out.grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm < 1e-8);
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let actor = Mlp::new(&[3, 8, 8, 2], 1.0, &mut rng);
        let head = GaussianPolicyHead::new(vec![-0.3, 0.2]);
        let mut batch = random_batch(&mut rng, 24, 3, 2);
        // old log-probs near the current ones so both branches occur
        let cache = actor.forward_batch(batch.inputs.view()).unwrap();
        for i in 0..24 {
            let m = cache.output().row(i).to_vec();
            let a = batch.actions.row(i).to_vec();
            batch.old_logprobs[i] = head.logprob(&m, &a) + rng.random_range(-0.4..0.4);
        }
        let f = |p: &[f64]| {
            let (mut a, mut h) = (actor.clone(), head.clone());
            set_actor_params(&mut a, &mut h, p).unwrap();
            let out = actor_loss_and_grad(&a, &h, &batch, 0.2, 0.01).unwrap();
            (out.loss, out.grads)
        };
        let report = grad_check(f, &actor_params(&actor, &head));
        assert!(report.passes(1e-4), "{report:?}");
    }

    #[test]
    fn critic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let critic = Mlp::new(&[3, 8, 5], 1.0, &mut rng);
        let inputs = Array2::from_shape_fn((10, 3), |_| rng.random_range(-1.0..1.0));
        let targets: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        for loss in [ValueLoss::Energy, ValueLoss::QuantileHuber { kappa: 1.0 }] {
            let f = |p: &[f64]| {
                let mut c = critic.clone();
                c.set_params_flat(p).unwrap();
                critic_loss_and_grad(&c, inputs.view(), &targets, loss).unwrap()
            };
            let report = grad_check(f, &critic.params_flat());
            assert!(report.passes(1e-4), "{loss:?}: {report:?}");
        }
    }

    #[test]
    fn mse_zero_at_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let critic = Mlp::new(&[2, 4, 1], 1.0, &mut rng);
        let inputs = Array2::from_shape_fn((5, 2), |_| rng.random_range(-1.0..1.0));
        let preds = critic.forward_batch(inputs.view()).unwrap();
        let targets: Vec<Vec<f64>> = preds.output().rows().into_iter().map(|r| r.to_vec()).collect();
        let (loss, grads) = critic_loss_and_grad(&critic, inputs.view(), &targets, ValueLoss::Mse).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|&g| g == 0.0));
    }
}
