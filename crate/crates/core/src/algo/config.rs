use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::{MetricKind, RiskMetric};
use crate::error::{Error, Result};

/// Training algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Quantile critic, risk-distorted advantages.
    Dppo,
    /// Scalar critic, expectation values.
    Ppo,
    /// PPO with the progress reward scaled by the risk parameter.
    Ppo1,
    /// PPO with the reward terms combined by a Wang-distorted mean.
    Ppo2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Dppo,
        Algorithm::Ppo,
        Algorithm::Ppo1,
        Algorithm::Ppo2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dppo => "dppo",
            Algorithm::Ppo => "ppo",
            Algorithm::Ppo1 => "ppo1",
            Algorithm::Ppo2 => "ppo2",
        }
    }

    pub fn is_distributional(self) -> bool {
        self == Algorithm::Dppo
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticLoss {
    Energy,
    QuantileHuber,
}

/// Hyperparameters of a training run. Serialized field-for-field as the
/// JSON config file; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DppoConfig {
    pub gamma: f64,
    pub lambda_gae: f64,
    /// Updates that use `gae_warmup_lambda` before switching to
    /// `lambda_gae`. A long-horizon warm-up finds both routes; a short
    /// horizon afterwards lets the distorted critic shape the policy.
    pub gae_warmup_iterations: u64,
    pub gae_warmup_lambda: f64,
    /// Target mixing of SR(lambda); 1 gives N-step targets, 0 one-step.
    pub sr_lambda: f64,
    pub clip_epsilon: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub num_envs: usize,
    pub horizon: usize,
    pub n_atoms: usize,
    pub metric: MetricKind,
    /// Training range of the risk parameter; `None` uses the default for
    /// the metric (DPPO) or the shaping baseline.
    pub beta_range: Option<[f64; 2]>,
    pub iterations: u64,
    pub seed: u64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    pub critic_loss: CriticLoss,
    /// Kappa of the quantile-Huber loss, in units of `value_scale`.
    pub huber_kappa: f64,
    /// Returns are divided by this before they reach the critic network,
    /// keeping its tanh layers out of saturation.
    pub value_scale: f64,
    pub condition_critic_on_beta: bool,
    pub normalize_advantages: bool,
    pub initial_log_std: f64,
    /// Initial policy mean on every action dimension, in (-1, 1). Set
    /// through the actor's output bias; a forward bias helps on tasks whose
    /// reward sits beyond a long walk.
    pub initial_action_mean: f64,
    /// Write a checkpoint every this many iterations; 0 writes only the
    /// final one.
    pub checkpoint_every: u64,
}

impl Default for DppoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda_gae: 0.95,
            gae_warmup_iterations: 0,
            gae_warmup_lambda: 0.95,
            sr_lambda: 1.0,
            clip_epsilon: 0.2,
            learning_rate: 3e-4,
            epochs: 4,
            minibatches: 4,
            num_envs: 16,
            horizon: 64,
            n_atoms: 32,
            metric: MetricKind::Wang,
            beta_range: None,
            iterations: 2000,
            seed: 0,
            entropy_coef: 0.0,
            max_grad_norm: 1.0,
            hidden: vec![64, 64],
            critic_loss: CriticLoss::Energy,
            huber_kappa: 1.0,
            value_scale: 10.0,
            condition_critic_on_beta: true,
            normalize_advantages: true,
            initial_log_std: 0.0,
            initial_action_mean: 0.0,
            checkpoint_every: 0,
        }
    }
}

fn range_err(name: &'static str, value: f64, range: &'static str) -> Error {
    Error::OutOfRange { name, value, range }
}

impl DppoConfig {
    pub fn validate(&self, algo: Algorithm) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(range_err("gamma", self.gamma, "(0, 1]"));
        }
        for (name, v) in [
            ("lambda_gae", self.lambda_gae),
            ("gae_warmup_lambda", self.gae_warmup_lambda),
            ("sr_lambda", self.sr_lambda),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(range_err(name, v, "[0, 1]"));
            }
        }
        if !(self.clip_epsilon > 0.0) {
            return Err(range_err("clip_epsilon", self.clip_epsilon, "> 0"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(range_err("learning_rate", self.learning_rate, "> 0"));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(range_err("max_grad_norm", self.max_grad_norm, "> 0"));
        }
        if !(self.huber_kappa > 0.0) {
            return Err(range_err("huber_kappa", self.huber_kappa, "> 0"));
        }
        if !(self.value_scale > 0.0 && self.value_scale.is_finite()) {
            return Err(range_err("value_scale", self.value_scale, "> 0"));
        }
        if !(self.initial_action_mean.abs() < 1.0) {
            return Err(range_err("initial_action_mean", self.initial_action_mean, "(-1, 1)"));
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return Err(range_err("entropy_coef", self.entropy_coef, ">= 0"));
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("minibatches", self.minibatches),
            ("num_envs", self.num_envs),
            ("horizon", self.horizon),
            ("n_atoms", self.n_atoms),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.minibatches > self.num_envs * self.horizon {
            return Err(Error::Config("more minibatches than samples".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        let (lo, hi) = self.beta_range(algo);
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!("invalid beta range [{lo}, {hi}]")));
        }
        if algo == Algorithm::Dppo && self.metric == MetricKind::Cvar {
            if let Some([lo, hi]) = self.beta_range {
                if !(lo >= 0.0 && hi <= 1.0 && hi > 0.0) {
                    return Err(Error::Config(format!(
                        "cvar beta range [{lo}, {hi}] must lie in (0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// GAE lambda for the update with zero-based index `update`.
    pub fn lambda_gae_at(&self, update: u64) -> f64 {
        if update < self.gae_warmup_iterations {
            self.gae_warmup_lambda
        } else {
            self.lambda_gae
        }
    }

    /// Range the risk parameter is sampled from at each episode start.
    /// Samples fall in `(lo, hi]`.
    pub fn beta_range(&self, algo: Algorithm) -> (f64, f64) {
        if let Some([lo, hi]) = self.beta_range {
            return (lo, hi);
        }
        match algo {
            Algorithm::Dppo => self.metric.training_range(),
            Algorithm::Ppo => (0.0, 0.0),
            Algorithm::Ppo1 => (0.0, 2.0),
            Algorithm::Ppo2 => (-0.25, 0.25),
        }
    }

    /// Risk parameter under which the run behaves risk-neutrally.
    pub fn neutral_beta(&self, algo: Algorithm) -> f64 {
        match algo {
            Algorithm::Dppo => self.metric.neutral_beta(),
            Algorithm::Ppo | Algorithm::Ppo2 => 0.0,
            Algorithm::Ppo1 => 1.0,
        }
    }

    /// Number of critic outputs.
    pub fn critic_width(&self, algo: Algorithm) -> usize {
        if algo.is_distributional() {
            self.n_atoms
        } else {
            1
        }
    }

    /// Metric used to turn critic atoms into the advantage baseline.
    pub fn value_metric(&self, algo: Algorithm, beta: f64) -> RiskMetric {
        if algo.is_distributional() {
            self.metric.with_beta(beta)
        } else {
            RiskMetric::Neutral
        }
    }

    /// Observation feature encoding the risk parameter.
    pub fn beta_feature(&self, algo: Algorithm, beta: f64) -> f64 {
        match algo {
            Algorithm::Dppo => match self.metric {
                MetricKind::Neutral => 0.0,
                MetricKind::Cvar => 2.0 * beta - 1.0,
                MetricKind::Wang => beta,
            },
            Algorithm::Ppo => 0.0,
            Algorithm::Ppo1 => beta - 1.0,
            Algorithm::Ppo2 => 4.0 * beta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for algo in Algorithm::ALL {
            DppoConfig::default().validate(algo).unwrap();
        }
    }

    #[test]
    fn cvar_range_rejected_outside_unit_interval() {
        let cfg = DppoConfig {
            metric: MetricKind::Cvar,
            beta_range: Some([0.2, 1.5]),
            ..DppoConfig::default()
        };
        assert!(cfg.validate(Algorithm::Dppo).is_err());
        let cfg = DppoConfig {
            beta_range: Some([-0.5, 1.0]),
            ..cfg
        };
        assert!(cfg.validate(Algorithm::Dppo).is_err());
        let ok = DppoConfig {
            metric: MetricKind::Cvar,
            beta_range: Some([0.0, 1.0]),
            ..DppoConfig::default()
        };
        ok.validate(Algorithm::Dppo).unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<DppoConfig>(r#"{"gamma": 0.9, "gama": 0.9}"#);
        assert!(err.is_err());
        let cfg: DppoConfig = serde_json::from_str(r#"{"gamma": 0.9, "metric": "cvar"}"#).unwrap();
        assert_eq!(cfg.gamma, 0.9);
        assert_eq!(cfg.metric, MetricKind::Cvar);
        assert_eq!(cfg.n_atoms, 32);
    }

    #[test]
    fn invalid_ranges() {
        let bad = [
            DppoConfig { gamma: 0.0, ..DppoConfig::default() },
            DppoConfig { lambda_gae: 1.1, ..DppoConfig::default() },
            DppoConfig { gae_warmup_lambda: -0.1, ..DppoConfig::default() },
            DppoConfig { clip_epsilon: 0.0, ..DppoConfig::default() },
            DppoConfig { initial_action_mean: 1.0, ..DppoConfig::default() },
            DppoConfig { n_atoms: 0, ..DppoConfig::default() },
            DppoConfig { beta_range: Some([1.0, -1.0]), ..DppoConfig::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate(Algorithm::Dppo).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn gae_warmup_switches_lambda() {
        let cfg = DppoConfig {
            lambda_gae: 0.0,
            gae_warmup_iterations: 3,
            gae_warmup_lambda: 0.9,
            ..DppoConfig::default()
        };
        let lambdas: Vec<f64> = (0..5).map(|u| cfg.lambda_gae_at(u)).collect();
        assert_eq!(lambdas, [0.9, 0.9, 0.9, 0.0, 0.0]);
        assert_eq!(DppoConfig::default().lambda_gae_at(0), 0.95);
    }

    #[test]
    fn beta_features() {
        let cfg = DppoConfig { metric: MetricKind::Cvar, ..DppoConfig::default() };
        assert_eq!(cfg.beta_feature(Algorithm::Dppo, 1.0), 1.0);
        assert_eq!(cfg.beta_feature(Algorithm::Dppo, 0.5), 0.0);
        let cfg = DppoConfig::default();
        assert_eq!(cfg.beta_feature(Algorithm::Dppo, -1.5), -1.5);
        assert_eq!(cfg.beta_feature(Algorithm::Ppo, 0.7), 0.0);
        assert_eq!(cfg.critic_width(Algorithm::Ppo2), 1);
        assert_eq!(cfg.critic_width(Algorithm::Dppo), 32);
    }
}
