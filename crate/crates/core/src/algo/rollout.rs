//! Fixed-horizon data collection over parallel environment lanes.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algo::agent::Agent;
use crate::algo::config::Algorithm;
use crate::algo::shaping::training_reward;
use crate::distribution::QuantileDistribution;
use crate::envs::{classify_path, DeterministicPolicy, Env, EnvSpec, Event, PathClass, Trajectory};
use crate::error::{Error, Result};

/// How actions are chosen during collection.
#[derive(Clone, Copy)]
pub enum Behavior<'a> {
    /// Sample from the agent's Gaussian policy.
    Sample,
    /// Follow a fixed deterministic policy on the raw observation. Stored
    /// log-probs are still those of the agent.
    Fixed(&'a dyn DeterministicPolicy),
}

/// One lane's share of a rollout. Critic quantities carry one extra entry
/// for the bootstrap state after the last step.
#[derive(Debug, Clone)]
pub struct LaneRollout {
    pub actor_inputs: Array2<f64>,
    pub critic_inputs: Array2<f64>,
    pub actions: Array2<f64>,
    /// Training rewards, shaped for the reward-shaping baselines.
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub logprobs: Vec<f64>,
    pub betas: Vec<f64>,
    pub atoms: Vec<QuantileDistribution>,
}

impl LaneRollout {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// `Z(s_{t+1})` for every step `t`.
    pub fn next_atoms(&self) -> &[QuantileDistribution] {
        &self.atoms[1..]
    }
}

/// Outcome of an episode that finished during collection.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub lane: usize,
    pub beta: f64,
    /// Undiscounted return of the unshaped reward.
    pub raw_return: f64,
    pub length: usize,
    pub early_termination: bool,
    pub reached_goal: bool,
    pub path: PathClass,
    pub tracking_error: f64,
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub lanes: Vec<LaneRollout>,
    pub episodes: Vec<EpisodeSummary>,
}

impl Rollout {
    pub fn num_steps(&self) -> usize {
        self.lanes.iter().map(LaneRollout::len).sum()
    }
}

struct Lane {
    env: Env,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
    beta: f64,
    raw_return: f64,
    trajectory: Trajectory,
}

/// Environment lanes with their own random streams. The stream of lane `i`
/// is `i + 1` of the run seed; stream 0 belongs to the learner.
pub struct Collector {
    lanes: Vec<Lane>,
    algorithm: Algorithm,
    beta_range: (f64, f64),
}

/// Draws from `(lo, hi]` so that a CVaR range never yields zero.
pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    hi - rng.random::<f64>() * (hi - lo)
}

impl Collector {
    pub fn new(
        spec: EnvSpec,
        num_envs: usize,
        algorithm: Algorithm,
        beta_range: (f64, f64),
        seed: u64,
    ) -> Self {
        let lanes = (0..num_envs)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64 + 1);
                let mut env = spec.build();
                let obs = env.reset(&mut rng);
                let beta = sample_beta(&mut rng, beta_range);
                let trajectory = Trajectory::start(&env);
                Lane {
                    env,
                    rng,
                    obs,
                    beta,
                    raw_return: 0.0,
                    trajectory,
                }
            })
            .collect();
        Self {
            lanes,
            algorithm,
            beta_range,
        }
    }

    pub fn num_envs(&self) -> usize {
        self.lanes.len()
    }

    /// Current risk parameter of every lane.
    pub fn betas(&self) -> Vec<f64> {
        self.lanes.iter().map(|l| l.beta).collect()
    }

    /// Runs `horizon` steps on every lane.
    pub fn collect(&mut self, agent: &Agent, behavior: Behavior<'_>, horizon: usize) -> Result<Rollout> {
        let n = self.lanes.len();
        let obs_dim = agent.env.obs_dim();
        let act_dim = agent.env.action_dim();
        let actor_in = agent.actor.input_dim();
        let critic_in = agent.critic.input_dim();

        let mut out: Vec<LaneRollout> = (0..n)
            .map(|_| LaneRollout {
                actor_inputs: Array2::zeros((horizon, actor_in)),
                critic_inputs: Array2::zeros((horizon + 1, critic_in)),
                actions: Array2::zeros((horizon, act_dim)),
                rewards: Vec::with_capacity(horizon),
                dones: Vec::with_capacity(horizon),
                logprobs: Vec::with_capacity(horizon),
                betas: Vec::with_capacity(horizon + 1),
                atoms: Vec::new(),
            })
            .collect();
        let mut episodes = Vec::new();
        let mut batch = Array2::zeros((n, actor_in));

        for t in 0..horizon {
            for (i, lane) in self.lanes.iter().enumerate() {
                debug_assert_eq!(lane.obs.len(), obs_dim);
                let x = agent.actor_input(&lane.obs, lane.beta);
                batch.row_mut(i).assign(&ndarray::ArrayView1::from(&x));
                out[i].actor_inputs.row_mut(t).assign(&ndarray::ArrayView1::from(&x));
                let c = agent.critic_input(&lane.obs, lane.beta);
                out[i].critic_inputs.row_mut(t).assign(&ndarray::ArrayView1::from(&c));
            }
            let cache = agent.actor.forward_batch(batch.view())?;
            let means = cache.output();

            for (i, lane) in self.lanes.iter_mut().enumerate() {
                let mean = means.row(i).to_vec();
                let action = match behavior {
                    Behavior::Sample => {
                        let noise: Vec<f64> =
                            (0..act_dim).map(|_| lane.rng.sample(StandardNormal)).collect();
                        agent.head.sample_with(&mean, &noise)
                    }
                    Behavior::Fixed(policy) => policy.act(&lane.obs),
                };
                let logprob = agent.head.logprob(&mean, &action);
                let step = lane
                    .env
                    .step(&action, &mut lane.rng)
                    .map_err(|e| Error::Env {
                        lane: i,
                        message: e.to_string(),
                    })?;
                let reward = training_reward(self.algorithm, &step.terms, lane.beta)?;
                lane.raw_return += step.reward;
                lane.trajectory.record(&lane.env, &step);

                let rec = &mut out[i];
                rec.actions.row_mut(t).assign(&ndarray::ArrayView1::from(&action));
                rec.rewards.push(reward);
                rec.dones.push(step.done());
                rec.logprobs.push(logprob);
                rec.betas.push(lane.beta);

                if step.done() {
                    let path = classify_path(&lane.trajectory)?;
                    episodes.push(EpisodeSummary {
                        lane: i,
                        beta: lane.beta,
                        raw_return: lane.raw_return,
                        length: lane.trajectory.len(),
                        early_termination: lane.trajectory.early_termination,
                        reached_goal: lane.trajectory.events.contains(&Event::Goal),
                        path,
                        tracking_error: lane.trajectory.tracking_error(),
                    });
                    lane.obs = lane.env.reset(&mut lane.rng);
                    lane.beta = sample_beta(&mut lane.rng, self.beta_range);
                    lane.raw_return = 0.0;
                    lane.trajectory = Trajectory::start(&lane.env);
                } else {
                    lane.obs = step.observation;
                }
            }
        }

        // bootstrap row, then critic atoms for every lane in one pass
        let mut all = Array2::zeros((n * (horizon + 1), critic_in));
        for (i, lane) in self.lanes.iter().enumerate() {
            let c = agent.critic_input(&lane.obs, lane.beta);
            out[i].critic_inputs.row_mut(horizon).assign(&ndarray::ArrayView1::from(&c));
            out[i].betas.push(lane.beta);
            all.slice_mut(ndarray::s![i * (horizon + 1)..(i + 1) * (horizon + 1), ..])
                .assign(&out[i].critic_inputs);
        }
        let mut atoms = agent.critic_atoms_batch(&all)?.into_iter();
        for rec in &mut out {
            rec.atoms = atoms.by_ref().take(horizon + 1).collect();
        }
        Ok(Rollout {
            lanes: out,
            episodes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algo::config::DppoConfig;
    use crate::envs::{EnvKind, Scripted};

    fn agent(algo: Algorithm, env: EnvKind) -> Agent {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = DppoConfig {
            hidden: vec![8],
            n_atoms: 4,
            ..DppoConfig::default()
        };
        Agent::new(&cfg, algo, env, &mut rng).unwrap()
    }

    #[test]
    fn repeatable_with_seed() {
        let a = agent(Algorithm::Dppo, EnvKind::RiskyCliff);
        let range = a.config.beta_range(Algorithm::Dppo);
        let spec = EnvSpec::new(EnvKind::RiskyCliff);
        let mut c1 = Collector::new(spec, 3, Algorithm::Dppo, range, 9);
        let mut c2 = Collector::new(spec, 3, Algorithm::Dppo, range, 9);
        let r1 = c1.collect(&a, Behavior::Sample, 50).unwrap();
        let r2 = c2.collect(&a, Behavior::Sample, 50).unwrap();
        for (x, y) in r1.lanes.iter().zip(&r2.lanes) {
            assert_eq!(x.actions, y.actions);
            assert_eq!(x.rewards, y.rewards);
            assert_eq!(x.betas, y.betas);
        }
        assert_eq!(r1.episodes, r2.episodes);
    }

    #[test]
    fn shapes_and_beta_consistency() {
        let a = agent(Algorithm::Dppo, EnvKind::GapStep);
        let range = (-1.5, 1.5);
        let mut c = Collector::new(EnvSpec::new(EnvKind::GapStep), 4, Algorithm::Dppo, range, 1);
        let r = c.collect(&a, Behavior::Sample, 40).unwrap();
        assert_eq!(r.num_steps(), 160);
        for lane in &r.lanes {
            assert_eq!(lane.atoms.len(), 41);
            assert_eq!(lane.betas.len(), 41);
            assert_eq!(lane.critic_inputs.nrows(), 41);
            for (t, &beta) in lane.betas[..40].iter().enumerate() {
                assert!(beta > range.0 && beta <= range.1);
                assert_eq!(lane.actor_inputs[[t, 2]], a.beta_feature(beta));
                assert_eq!(lane.critic_inputs[[t, 2]], a.beta_feature(beta));
                // risk parameter only changes at episode boundaries
                if t > 0 && !lane.dones[t - 1] {
                    assert_eq!(beta, lane.betas[t - 1]);
                }
            }
        }
        // gap episodes last at most 16 steps
        assert!(r.episodes.len() >= 8);
    }

    #[test]
    fn fixed_behavior_follows_script() {
        let a = agent(Algorithm::Dppo, EnvKind::RiskyCliff);
        let mut c = Collector::new(
            EnvSpec::new(EnvKind::RiskyCliffDeterministic),
            2,
            Algorithm::Dppo,
            (-1.5, 1.5),
            3,
        );
        let r = c.collect(&a, Behavior::Fixed(&Scripted::Safe), 25).unwrap();
        // safe line reaches the goal in 10 steps with return 15
        assert_eq!(r.episodes.len(), 4);
        for ep in &r.episodes {
            assert_eq!(ep.raw_return, 15.0);
            assert_eq!(ep.length, 10);
            assert_eq!(ep.path, PathClass::Safe);
            assert!(ep.reached_goal);
        }
        assert!(r.lanes[0].dones[9] && r.lanes[0].dones[19]);
    }

    #[test]
    fn shaped_rewards_in_rollout() {
        let a = agent(Algorithm::Ppo1, EnvKind::RiskyCliffDeterministic);
        let mut c = Collector::new(
            EnvSpec::new(EnvKind::RiskyCliffDeterministic),
            1,
            Algorithm::Ppo1,
            (0.0, 0.0),
            3,
        );
        let r = c.collect(&a, Behavior::Fixed(&Scripted::Safe), 10).unwrap();
        // with beta = 0 only the alive bonus remains
        assert!(r.lanes[0].rewards.iter().all(|&x| x == 0.5));
        assert_eq!(r.episodes[0].raw_return, 15.0);
    }
}
