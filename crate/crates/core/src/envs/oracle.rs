//! Exact enumeration of the outcome tree of a deterministic policy.
//!
//! Every step flips at most one coin, so the tree branches only at hazard
//! or attempt events and stays small for the toy environments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distribution::QuantileDistribution;
use crate::error::{Error, Result};

use super::{DeterministicPolicy, Env, EnvKind, EnvSpec, GapStep, GAP_HEIGHTS};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    /// Discount applied to returns; 1 gives undiscounted episode returns.
    pub gamma: f64,
    pub max_branches: usize,
    pub n_atoms: usize,
    pub mc_episodes: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            max_branches: 1 << 20,
            n_atoms: 32,
            mc_episodes: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// `(return, probability)` pairs with distinct returns, ascending.
    pub atoms: Vec<(f64, f64)>,
    pub quantiles: QuantileDistribution,
    /// False when the tree was too large and Monte Carlo was used instead.
    pub exact: bool,
    pub episodes: usize,
}

impl OracleResult {
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(r, p)| r * p).sum()
    }

    pub fn total_probability(&self) -> f64 {
        self.atoms.iter().map(|(_, p)| p).sum()
    }
}

struct Branch {
    env: Env,
    obs: Vec<f64>,
    prob: f64,
    ret: f64,
    discount: f64,
}

fn start_states(spec: &EnvSpec) -> Vec<(Env, Vec<f64>, f64)> {
    match (spec.kind, spec.gap_height) {
        (EnvKind::GapStep, None) => GAP_HEIGHTS
            .iter()
            .map(|&h| {
                let mut gap = GapStep::new(None);
                let obs = gap.reset_with_height(h);
                (Env::Gap(gap), obs, 1.0 / GAP_HEIGHTS.len() as f64)
            })
            .collect(),
        _ => {
            let mut env = spec.build();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let obs = env.reset(&mut rng);
            vec![(env, obs, 1.0)]
        }
    }
}

/// Return distribution of `policy` on `spec`, by exact enumeration or, past
/// `max_branches` leaves, by Monte Carlo.
pub fn oracle_return_distribution(
    spec: &EnvSpec,
    policy: &dyn DeterministicPolicy,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    if !policy.is_deterministic() {
        return Err(Error::StochasticPolicy);
    }
    match enumerate(spec, policy, opts)? {
        Some(leaves) => {
            let episodes = leaves.len();
            let atoms = merge(leaves);
            Ok(OracleResult {
                quantiles: compress(&atoms, opts.n_atoms),
                atoms,
                exact: true,
                episodes,
            })
        }
        None => monte_carlo(spec, policy, opts),
    }
}

fn enumerate(
    spec: &EnvSpec,
    policy: &dyn DeterministicPolicy,
    opts: &OracleOptions,
) -> Result<Option<Vec<(f64, f64)>>> {
    let mut stack: Vec<Branch> = start_states(spec)
        .into_iter()
        .map(|(env, obs, prob)| Branch {
            env,
            obs,
            prob,
            ret: 0.0,
            discount: 1.0,
        })
        .collect();
    let mut leaves = Vec::new();
    while let Some(mut b) = stack.pop() {
        loop {
            let action = policy.act(&b.obs);
            let mut asked = None;
            let mut miss = b.env.clone();
            let step = miss.step_with(&action, &mut |p| {
                asked = Some(p);
                p >= 1.0
            })?;
            let step = match asked {
                Some(p) if p > 0.0 && p < 1.0 => {
                    let mut hit = b.env.clone();
                    let hit_step = hit.step_with(&action, &mut |_| true)?;
                    let hit_branch = Branch {
                        ret: b.ret + b.discount * hit_step.reward,
                        discount: b.discount * opts.gamma,
                        prob: b.prob * p,
                        obs: hit_step.observation.clone(),
                        env: hit,
                    };
                    if hit_step.done() {
                        leaves.push((hit_branch.ret, hit_branch.prob));
                    } else {
                        stack.push(hit_branch);
                    }
                    b.prob *= 1.0 - p;
                    step
                }
                _ => step,
            };
            b.env = miss;
            b.ret += b.discount * step.reward;
            b.discount *= opts.gamma;
            b.obs = step.observation;
            if step.terminated || step.truncated {
                leaves.push((b.ret, b.prob));
                break;
            }
            if leaves.len() + stack.len() > opts.max_branches {
                return Ok(None);
            }
        }
        if leaves.len() + stack.len() > opts.max_branches {
            return Ok(None);
        }
    }
    Ok(Some(leaves))
}

fn monte_carlo(
    spec: &EnvSpec,
    policy: &dyn DeterministicPolicy,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut env = spec.build();
    let weight = 1.0 / opts.mc_episodes as f64;
    let mut leaves = Vec::with_capacity(opts.mc_episodes);
    for _ in 0..opts.mc_episodes {
        let mut obs = env.reset(&mut rng);
        let (mut ret, mut discount) = (0.0, 1.0);
        loop {
            let step = env.step_with(&policy.act(&obs), &mut |p| rng.random::<f64>() < p)?;
            ret += discount * step.reward;
            discount *= opts.gamma;
            obs = step.observation;
            if step.terminated || step.truncated {
                break;
            }
        }
        leaves.push((ret, weight));
    }
    let atoms = merge(leaves);
    Ok(OracleResult {
        quantiles: compress(&atoms, opts.n_atoms),
        atoms,
        exact: false,
        episodes: opts.mc_episodes,
    })
}

/// Sorts leaves by return and merges equal returns.
fn merge(mut leaves: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    leaves.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for (ret, prob) in leaves {
        match atoms.last_mut() {
            Some(last) if (last.0 - ret).abs() <= 1e-12 * ret.abs().max(1.0) => last.1 += prob,
            _ => atoms.push((ret, prob)),
        }
    }
    atoms
}

/// `n` atoms at the quantile midpoints `(2k-1)/(2n)` of a discrete law.
fn compress(atoms: &[(f64, f64)], n: usize) -> QuantileDistribution {
    let mut supports = Vec::with_capacity(n);
    let mut idx = 0;
    let mut cdf = atoms[0].1;
    for k in 0..n {
        let tau = (2 * k + 1) as f64 / (2 * n) as f64;
        while cdf < tau && idx + 1 < atoms.len() {
            idx += 1;
            cdf += atoms[idx].1;
        }
        supports.push(atoms[idx].0);
    }
    QuantileDistribution::new(supports).expect("oracle atoms are finite")
}
