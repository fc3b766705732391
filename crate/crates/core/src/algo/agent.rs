use ndarray::Array2;
use rand::Rng;

use crate::algo::config::{Algorithm, DppoConfig};
use crate::distribution::QuantileDistribution;
use crate::envs::{DeterministicPolicy, EnvKind};
use crate::error::{Error, Result};
use crate::net::{Activation, GaussianPolicyHead, Mlp};

const POLICY_OUTPUT_GAIN: f64 = 0.01;
const CRITIC_OUTPUT_GAIN: f64 = 1.0;

/// Risk-conditioned actor, its Gaussian head and the critic.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub algorithm: Algorithm,
    pub env: EnvKind,
    pub config: DppoConfig,
    pub actor: Mlp,
    pub head: GaussianPolicyHead,
    pub critic: Mlp,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        config: &DppoConfig,
        algorithm: Algorithm,
        env: EnvKind,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate(algorithm)?;
        let obs = env.obs_dim();
        let mut actor_sizes = vec![obs + 1];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(env.action_dim());
        let critic_in = if config.condition_critic_on_beta { obs + 1 } else { obs };
        let mut critic_sizes = vec![critic_in];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(config.critic_width(algorithm));

        // a bounded mean keeps exploration noise meaningful at the action limits
        let mut actor = Mlp::new(&actor_sizes, POLICY_OUTPUT_GAIN, rng).with_output_activation(Activation::Tanh);
        actor.fill_output_bias(config.initial_action_mean.atanh());
        let critic = Mlp::new(&critic_sizes, CRITIC_OUTPUT_GAIN, rng);
        Ok(Self {
            algorithm,
            env,
            config: config.clone(),
            actor,
            head: GaussianPolicyHead::with_dim(env.action_dim(), config.initial_log_std),
            critic,
        })
    }

    /// Assembles an agent from stored parts, checking that the shapes fit
    /// the environment and configuration.
    pub fn from_parts(
        config: DppoConfig,
        algorithm: Algorithm,
        env: EnvKind,
        actor: Mlp,
        head: GaussianPolicyHead,
        critic: Mlp,
    ) -> Result<Self> {
        config.validate(algorithm)?;
        let obs = env.obs_dim();
        let critic_in = if config.condition_critic_on_beta { obs + 1 } else { obs };
        let expect = [
            ("actor input", obs + 1, actor.input_dim()),
            ("actor output", env.action_dim(), actor.output_dim()),
            ("log_std", env.action_dim(), head.dim()),
            ("critic input", critic_in, critic.input_dim()),
            ("critic output", config.critic_width(algorithm), critic.output_dim()),
        ];
        for (what, expected, got) in expect {
            if expected != got {
                return Err(Error::Shape(format!(
                    "{what} has width {got}, expected {expected} for {env} / {algorithm}"
                )));
            }
        }
        Ok(Self {
            algorithm,
            env,
            config,
            actor,
            head,
            critic,
        })
    }

    pub fn beta_feature(&self, beta: f64) -> f64 {
        self.config.beta_feature(self.algorithm, beta)
    }

    pub fn actor_input(&self, obs: &[f64], beta: f64) -> Vec<f64> {
        let mut x = obs.to_vec();
        x.push(self.beta_feature(beta));
        x
    }

    pub fn critic_input(&self, obs: &[f64], beta: f64) -> Vec<f64> {
        let mut x = obs.to_vec();
        if self.config.condition_critic_on_beta {
            x.push(self.beta_feature(beta));
        }
        x
    }

    /// Mean of the action distribution.
    pub fn mean_action(&self, obs: &[f64], beta: f64) -> Result<Vec<f64>> {
        self.actor.predict(&self.actor_input(obs, beta))
    }

    /// Critic atoms for one state, in return units.
    pub fn critic_atoms(&self, obs: &[f64], beta: f64) -> Result<QuantileDistribution> {
        let scale = self.config.value_scale;
        let raw = self.critic.predict(&self.critic_input(obs, beta))?;
        QuantileDistribution::new(raw.into_iter().map(|z| z * scale).collect())
    }

    /// Critic atoms for every row of a batch of critic inputs.
    pub fn critic_atoms_batch(&self, inputs: &Array2<f64>) -> Result<Vec<QuantileDistribution>> {
        let cache = self.critic.forward_batch(inputs.view())?;
        cache
            .output()
            .rows()
            .into_iter()
            .map(|row| QuantileDistribution::new(row.iter().map(|z| z * self.config.value_scale).collect()))
            .collect()
    }

    /// Deterministic view of the policy at a fixed risk parameter.
    pub fn policy(&self, beta: f64) -> AgentPolicy<'_> {
        AgentPolicy { agent: self, beta }
    }
}

/// Mean-action policy with the risk parameter baked in.
#[derive(Debug, Clone, Copy)]
pub struct AgentPolicy<'a> {
    agent: &'a Agent,
    beta: f64,
}

impl AgentPolicy<'_> {
    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl DeterministicPolicy for AgentPolicy<'_> {
    fn act(&self, observation: &[f64]) -> Vec<f64> {
        self.agent
            .mean_action(observation, self.beta)
            .expect("observation width matches the environment the agent was built for")
    }
}
