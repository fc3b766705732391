//! Policy and critic updates shared by DPPO and the PPO baselines.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algo::agent::Agent;
use crate::algo::config::Algorithm;
use crate::algo::loss::{
    actor_loss_and_grad, actor_params, critic_loss_and_grad, set_actor_params, ActorBatch, ValueLoss,
};
use crate::algo::rollout::Rollout;
use crate::distribution::{distorted_value, QuantileDistribution};
use crate::error::{Error, Result};
use crate::net::{clip_grad_norm, AdamState};
use crate::returns::{sr_lambda_targets, truncated_gae};

/// Averages over all minibatches of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub critic_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Flattened training batch built from a rollout.
#[derive(Debug, Clone)]
pub struct PreparedBatch {
    /// Advantages in `actor` are normalized when the config asks for it.
    pub actor: ActorBatch,
    pub raw_advantages: Vec<f64>,
    pub values: Vec<f64>,
    pub critic_inputs: Array2<f64>,
    pub critic_targets: Vec<Vec<f64>>,
}

/// Risk value of one critic output under the sample's own risk parameter.
fn risk_value(agent: &Agent, atoms: &QuantileDistribution, beta: f64) -> Result<f64> {
    distorted_value(atoms, &agent.config.value_metric(agent.algorithm, beta))
}

/// Turns a rollout into advantages and critic targets, using `lambda_gae`
/// for the advantages. The random stream is used for SR(lambda)
/// replacement indices only.
pub fn prepare_batch(agent: &Agent, rollout: &Rollout, lambda_gae: f64, rng: &mut ChaCha8Rng) -> Result<PreparedBatch> {
    let cfg = &agent.config;
    let total = rollout.num_steps();
    if total == 0 {
        return Err(Error::Empty("rollout"));
    }
    let mut advantages = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    let mut targets = Vec::with_capacity(total);
    let mut old_logprobs = Vec::with_capacity(total);
    let mut actor_rows = Vec::with_capacity(rollout.lanes.len());
    let mut action_rows = Vec::with_capacity(rollout.lanes.len());
    let mut critic_rows = Vec::with_capacity(rollout.lanes.len());

    for lane in &rollout.lanes {
        let horizon = lane.len();
        if cfg.condition_critic_on_beta {
            let col = lane.critic_inputs.ncols() - 1;
            debug_assert!(lane
                .betas
                .iter()
                .enumerate()
                .all(|(t, &b)| lane.critic_inputs[[t, col]] == agent.beta_feature(b)));
        }
        let lane_values = lane
            .atoms
            .iter()
            .zip(&lane.betas)
            .map(|(z, &b)| risk_value(agent, z, b))
            .collect::<Result<Vec<f64>>>()?;
        let gae = truncated_gae(&lane.rewards, &lane.dones, &lane_values, cfg.gamma, lambda_gae)?;
        if agent.algorithm.is_distributional() {
            let sr = sr_lambda_targets(
                &lane.rewards,
                &lane.dones,
                lane.next_atoms(),
                cfg.sr_lambda,
                cfg.gamma,
                rng,
            )?;
            targets.extend(sr.targets);
        } else {
            targets.extend(gae.returns().into_iter().map(|r| vec![r]));
        }
        advantages.extend_from_slice(&gae.advantages);
        values.extend_from_slice(&gae.values);
        old_logprobs.extend_from_slice(&lane.logprobs);
        actor_rows.push(lane.actor_inputs.view());
        action_rows.push(lane.actions.view());
        critic_rows.push(lane.critic_inputs.slice(ndarray::s![..horizon, ..]));
    }

    let concat = |rows: &[ndarray::ArrayView2<f64>]| {
        ndarray::concatenate(Axis(0), rows).map_err(|e| Error::Shape(e.to_string()))
    };
    let raw_advantages = advantages.clone();
    if cfg.normalize_advantages {
        normalize(&mut advantages);
    }
    Ok(PreparedBatch {
        actor: ActorBatch {
            inputs: concat(&actor_rows)?,
            actions: concat(&action_rows)?,
            old_logprobs,
            advantages,
        },
        raw_advantages,
        values,
        critic_inputs: concat(&critic_rows)?,
        critic_targets: targets,
    })
}

/// Shifts and scales to zero mean and unit variance.
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let scale = 1.0 / (var.sqrt() + 1e-8);
    xs.iter_mut().for_each(|x| *x = (*x - mean) * scale);
}

/// Agent plus optimizer state and the learner's random stream.
#[derive(Debug, Clone)]
pub struct Learner {
    pub agent: Agent,
    actor_opt: AdamState,
    critic_opt: AdamState,
    rng: ChaCha8Rng,
    updates: u64,
}

impl Learner {
    /// The learner draws from stream 0 of `seed`.
    pub fn new(agent: Agent, seed: u64) -> Self {
        let lr = agent.config.learning_rate;
        let actor_opt = AdamState::new(agent.actor.num_params() + agent.head.dim(), lr);
        let critic_opt = AdamState::new(agent.critic.num_params(), lr);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        Self {
            agent,
            actor_opt,
            critic_opt,
            rng,
            updates: 0,
        }
    }

    /// Number of completed updates.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Position of the learner's random stream, for checkpoint metadata.
    pub fn rng_word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    fn value_loss(&self) -> ValueLoss {
        let cfg = &self.agent.config;
        if self.agent.algorithm.is_distributional() {
            ValueLoss::distributional(cfg.critic_loss, cfg.huber_kappa)
        } else {
            ValueLoss::Mse
        }
    }

    fn minibatches(&mut self, n: usize) -> Vec<Vec<usize>> {
        let count = self.agent.config.minibatches.min(n).max(1);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.rng);
        let size = n.div_ceil(count);
        idx.chunks(size).map(<[usize]>::to_vec).collect()
    }

    /// One actor-and-critic update on a fresh rollout.
    pub fn update(&mut self, rollout: &Rollout) -> Result<UpdateStats> {
        self.run(rollout, true)
    }

    /// Critic-only update; the actor is left untouched.
    pub fn update_critic(&mut self, rollout: &Rollout) -> Result<UpdateStats> {
        self.run(rollout, false)
    }

    fn run(&mut self, rollout: &Rollout, train_actor: bool) -> Result<UpdateStats> {
        let lambda_gae = self.agent.config.lambda_gae_at(self.updates);
        let batch = prepare_batch(&self.agent, rollout, lambda_gae, &mut self.rng)?;
        let cfg = self.agent.config.clone();
        let value_loss = self.value_loss();
        let n = batch.raw_advantages.len();
        let iteration = self.updates;
        let mut stats = UpdateStats::default();
        let mut count = 0usize;

        for epoch in 0..cfg.epochs {
            for (mb, idx) in self.minibatches(n).into_iter().enumerate() {
                let nonfinite = |which| Error::NonFiniteLoss {
                    which,
                    iteration,
                    epoch,
                    minibatch: mb,
                };
                if train_actor {
                    let sub = ActorBatch {
                        inputs: batch.actor.inputs.select(Axis(0), &idx),
                        actions: batch.actor.actions.select(Axis(0), &idx),
                        old_logprobs: idx.iter().map(|&i| batch.actor.old_logprobs[i]).collect(),
                        advantages: idx.iter().map(|&i| batch.actor.advantages[i]).collect(),
                    };
                    let mut out = actor_loss_and_grad(
                        &self.agent.actor,
                        &self.agent.head,
                        &sub,
                        cfg.clip_epsilon,
                        cfg.entropy_coef,
                    )?;
                    if !out.loss.is_finite() {
                        return Err(nonfinite("policy"));
                    }
                    clip_grad_norm(&mut out.grads, cfg.max_grad_norm);
                    let mut params = actor_params(&self.agent.actor, &self.agent.head);
                    self.actor_opt.step(&mut params, &out.grads)?;
                    set_actor_params(&mut self.agent.actor, &mut self.agent.head, &params)?;
                    stats.policy_loss += out.loss;
                    stats.approx_kl += out.approx_kl;
                    stats.clip_fraction += out.clip_fraction;
                }

                let inputs = batch.critic_inputs.select(Axis(0), &idx);
                // the network works in units of value_scale
                let targets: Vec<Vec<f64>> = idx
                    .iter()
                    .map(|&i| batch.critic_targets[i].iter().map(|z| z / cfg.value_scale).collect())
                    .collect();
                let (loss, mut grads) = critic_loss_and_grad(&self.agent.critic, inputs.view(), &targets, value_loss)?;
                if !loss.is_finite() {
                    return Err(nonfinite("critic"));
                }
                clip_grad_norm(&mut grads, cfg.max_grad_norm);
                let mut params = self.agent.critic.params_flat();
                self.critic_opt.step(&mut params, &grads)?;
                self.agent.critic.set_params_flat(&params)?;
                stats.critic_loss += loss;
                count += 1;
            }
        }
        self.updates += 1;
        let c = count.max(1) as f64;
        stats.policy_loss /= c;
        stats.critic_loss /= c;
        stats.approx_kl /= c;
        stats.clip_fraction /= c;
        Ok(stats)
    }
}

/// Update step of the distributional algorithm.
pub fn dppo_update(learner: &mut Learner, rollout: &Rollout) -> Result<UpdateStats> {
    if !learner.agent.algorithm.is_distributional() {
        return Err(Error::Config(format!(
            "dppo update on a {} agent",
            learner.agent.algorithm
        )));
    }
    learner.update(rollout)
}

/// Update step of PPO and the reward-shaping baselines.
pub fn ppo_update(learner: &mut Learner, rollout: &Rollout) -> Result<UpdateStats> {
    if learner.agent.algorithm == Algorithm::Dppo {
        return Err(Error::Config("ppo update on a dppo agent".into()));
    }
    learner.update(rollout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algo::config::DppoConfig;
    use crate::algo::rollout::{Behavior, Collector};
    use crate::distribution::MetricKind;
    use crate::envs::{EnvKind, EnvSpec};

    fn small(cfg: DppoConfig) -> DppoConfig {
        DppoConfig {
            hidden: vec![16],
            num_envs: 4,
            horizon: 32,
            ..cfg
        }
    }

    #[test]
    fn single_atom_neutral_matches_scalar_pipeline() {
        let base = small(DppoConfig {
            n_atoms: 1,
            metric: MetricKind::Neutral,
            sr_lambda: 0.0,
            condition_critic_on_beta: false,
            beta_range: Some([0.0, 0.0]),
            ..DppoConfig::default()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dppo = Agent::new(&base, Algorithm::Dppo, EnvKind::RiskyCliff, &mut rng).unwrap();
        let mut ppo = dppo.clone();
        ppo.algorithm = Algorithm::Ppo;

        let spec = EnvSpec::new(EnvKind::RiskyCliff);
        let mut c = Collector::new(spec, 4, Algorithm::Dppo, (0.0, 0.0), 2);
        let rollout = c.collect(&dppo, Behavior::Sample, 32).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(0);
        let mut r2 = ChaCha8Rng::seed_from_u64(0);
        let a = prepare_batch(&dppo, &rollout, 0.95, &mut r1).unwrap();
        let b = prepare_batch(&ppo, &rollout, 0.95, &mut r2).unwrap();
        for (x, y) in a.raw_advantages.iter().zip(&b.raw_advantages) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn normalization_is_affine_and_order_preserving() {
        let mut xs = vec![3.0, -1.0, 0.5, 7.0, 2.0];
        let order = |v: &[f64]| {
            let mut i: Vec<usize> = (0..v.len()).collect();
            i.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            i
        };
        let before = order(&xs);
        normalize(&mut xs);
        assert_eq!(order(&xs), before);
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-6);
    }

    #[test]
    fn updates_are_deterministic() {
        let cfg = small(DppoConfig::default());
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let agent = Agent::new(&cfg, Algorithm::Dppo, EnvKind::GapStep, &mut rng).unwrap();
            let mut learner = Learner::new(agent, 7);
            let mut c = Collector::new(EnvSpec::new(EnvKind::GapStep), 4, Algorithm::Dppo, (-1.5, 1.5), 7);
            let mut stats = Vec::new();
            for _ in 0..3 {
                let r = c.collect(&learner.agent, Behavior::Sample, 32).unwrap();
                stats.push(dppo_update(&mut learner, &r).unwrap());
            }
            (learner.agent, stats)
        };
        let (a1, s1) = run();
        let (a2, s2) = run();
        assert_eq!(a1, a2);
        assert_eq!(s1, s2);
        assert!(s1.iter().all(|s| s.critic_loss.is_finite() && s.approx_kl >= 0.0));
    }

    #[test]
    fn critic_only_update_keeps_actor() {
        let cfg = small(DppoConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let agent = Agent::new(&cfg, Algorithm::Dppo, EnvKind::RiskyCliff, &mut rng).unwrap();
        let actor = agent.actor.clone();
        let critic = agent.critic.clone();
        let mut learner = Learner::new(agent, 3);
        let mut c = Collector::new(EnvSpec::new(EnvKind::RiskyCliff), 4, Algorithm::Dppo, (-1.5, 1.5), 3);
        let r = c.collect(&learner.agent, Behavior::Sample, 32).unwrap();
        learner.update_critic(&r).unwrap();
        assert_eq!(learner.agent.actor, actor);
        assert_ne!(learner.agent.critic, critic);
    }

    #[test]
    fn wrong_update_kind_rejected() {
        let cfg = small(DppoConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let agent = Agent::new(&cfg, Algorithm::Ppo, EnvKind::RiskyCliff, &mut rng).unwrap();
        let mut learner = Learner::new(agent, 3);
        let mut c = Collector::new(EnvSpec::new(EnvKind::RiskyCliff), 4, Algorithm::Ppo, (0.0, 0.0), 3);
        let r = c.collect(&learner.agent, Behavior::Sample, 8).unwrap();
        assert!(dppo_update(&mut learner, &r).is_err());
        assert!(ppo_update(&mut learner, &r).is_ok());
    }
}
