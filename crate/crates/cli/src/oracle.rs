use dppo::algo::Agent;
use dppo::distribution::{distorted_value, QuantileDistribution, RiskMetric};
use dppo::envs::{oracle_return_distribution, DeterministicPolicy, EnvKind, OracleOptions, Scripted};
use serde::Serialize;

use crate::args::OracleArgs;
use crate::error::{CliError, CliResult};
use crate::eval::{env_spec, load_agent, write_output};

/// CVaR levels at which distorted values are reported.
pub const CVAR_GRID: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 1.0];
/// Wang parameters at which distorted values are reported.
pub const WANG_GRID: [f64; 7] = [-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5];

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Atom {
    #[serde(rename = "return")]
    pub ret: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistortedPoint {
    pub beta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortedValues {
    pub neutral: f64,
    pub cvar: Vec<DistortedPoint>,
    pub wang: Vec<DistortedPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub env: EnvKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_height: Option<f64>,
    pub policy: String,
    pub beta: f64,
    pub gamma: f64,
    pub exact: bool,
    pub episodes: usize,
    pub mean: f64,
    pub atoms: Vec<Atom>,
    pub quantiles: QuantileDistribution,
    pub distorted: DistortedValues,
}

/// Distorted values of `dist` on the fixed CVaR and Wang grids.
pub fn distorted_grid(dist: &QuantileDistribution) -> CliResult<DistortedValues> {
    let at = |metric: RiskMetric| -> CliResult<DistortedPoint> {
        Ok(DistortedPoint {
            beta: metric.beta(),
            value: distorted_value(dist, &metric)?,
        })
    };
    Ok(DistortedValues {
        neutral: distorted_value(dist, &RiskMetric::Neutral)?,
        cvar: CVAR_GRID.iter().map(|&b| at(RiskMetric::Cvar(b))).collect::<CliResult<_>>()?,
        wang: WANG_GRID.iter().map(|&b| at(RiskMetric::Wang(b))).collect::<CliResult<_>>()?,
    })
}

/// Mean-action policy of a checkpoint that claims to be stochastic.
struct Sampling<'a>(dppo::algo::AgentPolicy<'a>);

impl DeterministicPolicy for Sampling<'_> {
    fn act(&self, observation: &[f64]) -> Vec<f64> {
        self.0.act(observation)
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}

enum PolicySource {
    Checkpoint(Agent, bool),
    Scripted(Scripted),
}

fn parse_policy(text: &str) -> CliResult<PolicySource> {
    let (kind, rest) = text
        .split_once(':')
        .ok_or_else(|| CliError::usage(format!("policy `{text}` must be kind:value")))?;
    match kind {
        "ckpt" => Ok(PolicySource::Checkpoint(load_agent(rest.as_ref())?, false)),
        "sample" => Ok(PolicySource::Checkpoint(load_agent(rest.as_ref())?, true)),
        "scripted" => Ok(PolicySource::Scripted(rest.parse()?)),
        other => Err(CliError::usage(format!("unknown policy kind `{other}`"))),
    }
}

fn scripted_fits(script: Scripted, env: EnvKind) -> bool {
    match script {
        Scripted::Safe | Scripted::Risky => env.is_cliff(),
        Scripted::Refuse | Scripted::Attempt => !env.is_cliff(),
    }
}

pub fn run(args: &OracleArgs) -> CliResult<()> {
    if args.atoms == 0 {
        return Err(CliError::usage("--atoms must be at least 1"));
    }
    let opts = OracleOptions {
        gamma: args.gamma,
        max_branches: args.max_branches,
        n_atoms: args.atoms,
        seed: args.seed,
        ..OracleOptions::default()
    };
    if !(args.gamma > 0.0 && args.gamma <= 1.0) {
        return Err(CliError::usage("--gamma must lie in (0, 1]"));
    }
    let source = parse_policy(&args.policy)?;
    let result = match &source {
        PolicySource::Checkpoint(agent, stochastic) => {
            let spec = env_spec(agent, args.env, args.gap_height)?;
            let policy = agent.policy(args.beta);
            if *stochastic {
                oracle_return_distribution(&spec, &Sampling(policy), &opts)?
            } else {
                oracle_return_distribution(&spec, &policy, &opts)?
            }
        }
        PolicySource::Scripted(script) => {
            if !scripted_fits(*script, args.env) {
                return Err(CliError::usage(format!(
                    "policy `{}` does not apply to {}",
                    args.policy, args.env
                )));
            }
            if args.gap_height.is_some() && args.env.is_cliff() {
                return Err(CliError::usage("--gap-height only applies to gap-step"));
            }
            let spec = dppo::envs::EnvSpec {
                kind: args.env,
                gap_height: args.gap_height,
            };
            oracle_return_distribution(&spec, script, &opts)?
        }
    };
    let report = OracleReport {
        env: args.env,
        gap_height: args.gap_height,
        policy: args.policy.clone(),
        beta: args.beta,
        gamma: args.gamma,
        exact: result.exact,
        episodes: result.episodes,
        mean: result.mean(),
        atoms: result
            .atoms
            .iter()
            .map(|&(ret, probability)| Atom { ret, probability })
            .collect(),
        distorted: distorted_grid(&result.quantiles)?,
        quantiles: result.quantiles,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_output(args.out.as_deref(), &(text + "\n"))
}
