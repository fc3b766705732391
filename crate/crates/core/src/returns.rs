//! Value targets for the distributional critic and risk-sensitive
//! advantage estimates.

use rand::Rng;

use crate::distribution::{distorted_value, QuantileDistribution, RiskMetric};
use crate::error::{Error, Result};

/// Per-timestep target sample sets for one lane segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub targets: Vec<Vec<f64>>,
}

/// Output of truncated GAE for one lane segment.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageBatch {
    pub advantages: Vec<f64>,
    /// `V_beta(s_t)` for `t = 0..T`; the bootstrap value is not included.
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl AdvantageBatch {
    /// Scalar value targets `A_t + V_beta(s_t)`.
    pub fn returns(&self) -> Vec<f64> {
        self.advantages
            .iter()
            .zip(&self.values)
            .map(|(a, v)| a + v)
            .collect()
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
            range: "(0, 1]",
        })
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { what, expected, got })
    }
}

/// Sample-replacement SR(lambda) targets.
///
/// `next_atoms[t]` holds the critic atoms of `s_{t+1}`, so the last entry is
/// the bootstrap state `s_T`. Going backwards, the propagated set of step
/// `t+1` has `round((1-lambda) N)` uniformly chosen atoms swapped for the
/// critic atoms of `s_{t+1}`, then is discounted and shifted by `r_t`.
/// Terminal steps bootstrap from an all-zero set.
pub fn sr_lambda_targets<R: Rng + ?Sized>(
    rewards: &[f64],
    dones: &[bool],
    next_atoms: &[QuantileDistribution],
    lambda: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<TargetSet> {
    let horizon = rewards.len();
    check_len("dones", horizon, dones.len())?;
    check_len("next_atoms", horizon, next_atoms.len())?;
    check_unit("sr_lambda", lambda)?;
    check_gamma(gamma)?;
    if horizon == 0 {
        return Ok(TargetSet { targets: vec![] });
    }
    let n = next_atoms[0].len();
    for atoms in next_atoms {
        check_len("critic atoms", n, atoms.len())?;
    }
    let replace = ((1.0 - lambda) * n as f64).round() as usize;

    let mut targets: Vec<Vec<f64>> = vec![Vec::new(); horizon];
    let mut carried: Option<Vec<f64>> = None;
    for t in (0..horizon).rev() {
        let bootstrap = next_atoms[t].supports();
        let next: Vec<f64> = if dones[t] {
            vec![0.0; n]
        } else {
            match carried.take() {
                None => bootstrap.to_vec(),
                Some(mut set) => {
                    if replace == n {
                        set.copy_from_slice(bootstrap);
                    } else if replace > 0 {
                        for i in rand::seq::index::sample(rng, n, replace) {
                            set[i] = bootstrap[i];
                        }
                    }
                    set
                }
            }
        };
        let target: Vec<f64> = next.iter().map(|z| rewards[t] + gamma * z).collect();
        carried = Some(target.clone());
        targets[t] = target;
    }
    Ok(TargetSet { targets })
}

/// Distorted value of every step's critic distribution.
pub fn risk_values(atoms: &[QuantileDistribution], metric: &RiskMetric) -> Result<Vec<f64>> {
    atoms.iter().map(|d| distorted_value(d, metric)).collect()
}

/// Truncated generalized advantage estimation.
///
/// `values` has one more entry than `rewards`: the bootstrap value of the
/// state following the last step. Accumulation restarts at terminal flags,
/// which bootstrap zero.
pub fn truncated_gae(
    rewards: &[f64],
    dones: &[bool],
    values: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<AdvantageBatch> {
    let horizon = rewards.len();
    check_len("dones", horizon, dones.len())?;
    check_len("values", horizon + 1, values.len())?;
    check_unit("lambda_gae", lambda)?;
    check_gamma(gamma)?;

    let mut advantages = vec![0.0; horizon];
    let mut residuals = vec![0.0; horizon];
    let mut acc = 0.0;
    for t in (0..horizon).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        acc = delta + gamma * lambda * live * acc;
        residuals[t] = delta;
        advantages[t] = acc;
    }
    Ok(AdvantageBatch {
        advantages,
        values: values[..horizon].to_vec(),
        residuals,
    })
}
