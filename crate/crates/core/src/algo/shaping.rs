//! Reward shaping used by the PPO1 and PPO2 baselines.

use crate::algo::config::Algorithm;
use crate::distribution::{distorted_value, QuantileDistribution, RiskMetric};
use crate::envs::RewardTerms;
use crate::error::{Error, Result};

/// Name of the reward term scaled by PPO1.
pub const PROGRESS_TERM: &str = "progress";

/// Sum of the terms with the progress term multiplied by `beta`.
pub fn ppo1_shaped_reward(terms: &RewardTerms, beta: f64) -> Result<f64> {
    let mut found = false;
    let mut total = 0.0;
    for (name, value) in terms.iter() {
        if name == PROGRESS_TERM {
            found = true;
            total += beta * value;
        } else {
            total += value;
        }
    }
    if found {
        Ok(total)
    } else {
        Err(Error::MissingTerm(PROGRESS_TERM.to_string()))
    }
}

/// Treats the `M` term values as equally weighted atoms and returns `M`
/// times their Wang-distorted mean, so `beta = 0` gives the plain sum.
pub fn ppo2_shaped_reward(terms: &RewardTerms, beta: f64) -> Result<f64> {
    let values = terms.values();
    let m = values.len() as f64;
    let dist = QuantileDistribution::new(values)?;
    Ok(m * distorted_value(&dist, &RiskMetric::Wang(beta))?)
}

/// Reward the learner sees for one step.
pub fn training_reward(algorithm: Algorithm, terms: &RewardTerms, beta: f64) -> Result<f64> {
    match algorithm {
        Algorithm::Dppo | Algorithm::Ppo => Ok(terms.total()),
        Algorithm::Ppo1 => ppo1_shaped_reward(terms, beta),
        Algorithm::Ppo2 => ppo2_shaped_reward(terms, beta),
    }
}
