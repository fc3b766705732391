//! Collect/update loop and per-iteration metrics.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algo::agent::Agent;
use crate::algo::checkpoint::Checkpoint;
use crate::algo::config::{Algorithm, DppoConfig};
use crate::algo::rollout::{Behavior, Collector, EpisodeSummary};
use crate::algo::update::{UpdateStats, Learner};
use crate::envs::EnvSpec;
use crate::error::Result;

/// Number of equal-width risk-parameter buckets in the metrics.
pub const BETA_BUCKETS: usize = 5;

/// Random stream used for network initialization.
const INIT_STREAM: u64 = u64::MAX;

/// One line of `metrics.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iteration: u64,
    pub env_steps: u64,
    /// Episodes that finished during this iteration's rollout.
    pub episodes: usize,
    pub mean_return: Option<f64>,
    pub early_termination_fraction: Option<f64>,
    pub goal_fraction: Option<f64>,
    pub policy_loss: f64,
    pub critic_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    /// Omitted when the run asks for byte-reproducible metrics.
    pub wall_clock_seconds: Option<f64>,
    /// Mean return per bucket of the training range, low to high.
    pub beta_bucket_returns: Vec<Option<f64>>,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Bucket of `beta` among [`BETA_BUCKETS`] equal slices of `[lo, hi]`.
pub fn beta_bucket(beta: f64, (lo, hi): (f64, f64)) -> usize {
    if hi <= lo {
        return 0;
    }
    let u = (beta - lo) / (hi - lo);
    ((u * BETA_BUCKETS as f64).floor().max(0.0) as usize).min(BETA_BUCKETS - 1)
}

fn summarize(
    episodes: &[EpisodeSummary],
    range: (f64, f64),
) -> (Option<f64>, Option<f64>, Option<f64>, Vec<Option<f64>>) {
    let mean_return = mean_of(episodes.iter().map(|e| e.raw_return));
    let early = mean_of(episodes.iter().map(|e| f64::from(u8::from(e.early_termination))));
    let goal = mean_of(episodes.iter().map(|e| f64::from(u8::from(e.reached_goal))));
    let buckets = (0..BETA_BUCKETS)
        .map(|k| {
            mean_of(
                episodes
                    .iter()
                    .filter(|e| beta_bucket(e.beta, range) == k)
                    .map(|e| e.raw_return),
            )
        })
        .collect();
    (mean_return, early, goal, buckets)
}

/// Owns the learner and the environment lanes of one training run.
pub struct Trainer {
    pub learner: Learner,
    collector: Collector,
    spec: EnvSpec,
    beta_range: (f64, f64),
    iteration: u64,
    env_steps: u64,
    started: Instant,
    record_wall_clock: bool,
}

impl Trainer {
    pub fn new(config: &DppoConfig, algorithm: Algorithm, spec: EnvSpec) -> Result<Self> {
        let mut init = ChaCha8Rng::seed_from_u64(config.seed);
        init.set_stream(INIT_STREAM);
        let agent = Agent::new(config, algorithm, spec.kind, &mut init)?;
        let beta_range = config.beta_range(algorithm);
        let collector = Collector::new(spec, config.num_envs, algorithm, beta_range, config.seed);
        Ok(Self {
            learner: Learner::new(agent, config.seed),
            collector,
            spec,
            beta_range,
            iteration: 0,
            env_steps: 0,
            started: Instant::now(),
            record_wall_clock: true,
        })
    }

    /// Leaves `wall_clock_seconds` empty so metrics are reproducible byte
    /// for byte.
    pub fn without_wall_clock(mut self) -> Self {
        self.record_wall_clock = false;
        self
    }

    pub fn agent(&self) -> &Agent {
        &self.learner.agent
    }

    pub fn spec(&self) -> EnvSpec {
        self.spec
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// One collect-and-update cycle.
    pub fn step(&mut self) -> Result<MetricsRecord> {
        let horizon = self.learner.agent.config.horizon;
        let rollout = self
            .collector
            .collect(&self.learner.agent, Behavior::Sample, horizon)?;
        let stats: UpdateStats = self.learner.update(&rollout)?;
        self.iteration += 1;
        self.env_steps += rollout.num_steps() as u64;
        let (mean_return, early, goal, buckets) = summarize(&rollout.episodes, self.beta_range);
        Ok(MetricsRecord {
            iteration: self.iteration,
            env_steps: self.env_steps,
            episodes: rollout.episodes.len(),
            mean_return,
            early_termination_fraction: early,
            goal_fraction: goal,
            policy_loss: stats.policy_loss,
            critic_loss: stats.critic_loss,
            approx_kl: stats.approx_kl,
            clip_fraction: stats.clip_fraction,
            wall_clock_seconds: self
                .record_wall_clock
                .then(|| self.started.elapsed().as_secs_f64()),
            beta_bucket_returns: buckets,
        })
    }

    /// Runs the configured number of iterations, handing every record to
    /// `sink`.
    pub fn run(&mut self, mut sink: impl FnMut(&Trainer, &MetricsRecord) -> Result<()>) -> Result<()> {
        while self.iteration < self.learner.agent.config.iterations {
            let record = self.step()?;
            sink(self, &record)?;
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_agent(
            &self.learner.agent,
            self.iteration,
            self.env_steps,
            self.learner.rng_word_pos(),
        )
    }
}
