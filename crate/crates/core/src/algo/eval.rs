//! Deterministic evaluation over a grid of risk parameters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algo::agent::Agent;
use crate::algo::config::Algorithm;
use crate::distribution::MetricKind;
use crate::envs::{classify_path, EnvSpec, PathClass, Trajectory};
use crate::error::{Error, Result};

const Z95: f64 = 1.959_963_984_540_054;

/// Results for one risk parameter. Confidence half-widths are `None` when
/// fewer than two episodes were run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub beta: f64,
    pub episodes: usize,
    pub mean_return: f64,
    pub return_ci95: Option<f64>,
    pub early_termination_fraction: f64,
    pub early_termination_ci95: Option<f64>,
    pub tracking_error: f64,
    pub tracking_error_ci95: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risky_path_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refusal_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub env: EnvSpec,
    pub algorithm: Algorithm,
    pub metric: MetricKind,
    pub rows: Vec<EvalRow>,
}

/// Mean and 95% normal-approximation half-width.
fn mean_ci(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(Z95 * (var / n).sqrt()))
}

fn fraction(classes: &[PathClass], class: PathClass) -> f64 {
    classes.iter().filter(|&&c| c == class).count() as f64 / classes.len() as f64
}

fn check_beta(agent: &Agent, beta: f64) -> Result<()> {
    if !beta.is_finite() {
        return Err(Error::NonFinite("beta grid"));
    }
    match agent.algorithm {
        Algorithm::Dppo => agent.config.metric.with_beta(beta).validate(),
        _ => Ok(()),
    }
}

/// Runs `episodes` mean-action episodes per risk parameter. Row `i` uses
/// random stream `i` of `seed`.
pub fn evaluate(agent: &Agent, spec: &EnvSpec, betas: &[f64], episodes: usize, seed: u64) -> Result<EvalReport> {
    if betas.is_empty() {
        return Err(Error::Empty("beta grid"));
    }
    if episodes == 0 {
        return Err(Error::Empty("evaluation episodes"));
    }
    if spec.kind.is_cliff() != agent.env.is_cliff() {
        return Err(Error::Config(format!(
            "agent trained on {} cannot be evaluated on {}",
            agent.env, spec.kind
        )));
    }
    for &b in betas {
        check_beta(agent, b)?;
    }

    let mut rows = Vec::with_capacity(betas.len());
    for (i, &beta) in betas.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut env = spec.build();
        let mut returns = Vec::with_capacity(episodes);
        let mut early = Vec::with_capacity(episodes);
        let mut tracking = Vec::with_capacity(episodes);
        let mut classes = Vec::with_capacity(episodes);
        for _ in 0..episodes {
            let mut obs = env.reset(&mut rng);
            let mut traj = Trajectory::start(&env);
            loop {
                let action = agent.mean_action(&obs, beta)?;
                let step = env.step(&action, &mut rng)?;
                traj.record(&env, &step);
                if step.done() {
                    break;
                }
                obs = step.observation;
            }
            returns.push(traj.total_return());
            early.push(f64::from(u8::from(traj.early_termination)));
            tracking.push(traj.tracking_error());
            classes.push(classify_path(&traj)?);
        }
        let (mean_return, return_ci95) = mean_ci(&returns);
        let (early_fraction, early_ci) = mean_ci(&early);
        let (tracking_error, tracking_ci) = mean_ci(&tracking);
        let cliff = spec.kind.is_cliff();
        rows.push(EvalRow {
            beta,
            episodes,
            mean_return,
            return_ci95,
            early_termination_fraction: early_fraction,
            early_termination_ci95: early_ci,
            tracking_error,
            tracking_error_ci95: tracking_ci,
            risky_path_fraction: cliff.then(|| fraction(&classes, PathClass::Risky)),
            refusal_rate: (!cliff).then(|| fraction(&classes, PathClass::Refusal)),
            failure_rate: (!cliff).then(|| fraction(&classes, PathClass::Failure)),
            success_rate: (!cliff).then(|| fraction(&classes, PathClass::Success)),
        });
    }
    Ok(EvalReport {
        env: *spec,
        algorithm: agent.algorithm,
        metric: agent.config.metric,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algo::config::DppoConfig;
    use crate::envs::EnvKind;
    use crate::net::Mlp;

    fn still_agent(env: EnvKind) -> Agent {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = DppoConfig { hidden: vec![4], n_atoms: 4, ..DppoConfig::default() };
        let mut agent = Agent::new(&cfg, Algorithm::Dppo, env, &mut rng).unwrap();
        let zeros = vec![0.0; agent.actor.num_params()];
        agent.actor.set_params_flat(&zeros).unwrap();
        agent
    }

    #[test]
    fn motionless_policy_always_refuses() {
        let agent = still_agent(EnvKind::GapStep);
        let report = evaluate(&agent, &EnvSpec::new(EnvKind::GapStep), &[0.0], 20, 1).unwrap();
        assert_eq!(report.rows.len(), 1);
        let row = &report.rows[0];
        assert_eq!(row.refusal_rate, Some(1.0));
        assert_eq!(row.success_rate, Some(0.0));
        assert!((row.mean_return - 3.2).abs() < 1e-12);
        assert_eq!(row.risky_path_fraction, None);
        assert!((row.tracking_error - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_episode_has_no_interval() {
        let agent = still_agent(EnvKind::RiskyCliff);
        let report = evaluate(&agent, &EnvSpec::new(EnvKind::RiskyCliff), &[-1.0, 1.0], 1, 1).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows.iter().all(|r| r.return_ci95.is_none()));
        assert_eq!(report.rows[0].risky_path_fraction, Some(0.0));
    }

    #[test]
    fn rejects_bad_requests() {
        let agent = still_agent(EnvKind::RiskyCliff);
        let spec = EnvSpec::new(EnvKind::RiskyCliff);
        assert!(evaluate(&agent, &spec, &[], 5, 0).is_err());
        assert!(evaluate(&agent, &spec, &[0.0], 0, 0).is_err());
        assert!(evaluate(&agent, &EnvSpec::new(EnvKind::GapStep), &[0.0], 5, 0).is_err());
        let mut cvar = agent.clone();
        cvar.config.metric = MetricKind::Cvar;
        assert!(evaluate(&cvar, &spec, &[0.0], 5, 0).is_err());
        assert!(evaluate(&cvar, &spec, &[0.5], 5, 0).is_ok());
    }

    #[test]
    fn repeatable_reports() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut agent = still_agent(EnvKind::RiskyCliff);
        agent.actor = Mlp::new(&[3, 4, 2], 1.0, &mut rng);
        let spec = EnvSpec::new(EnvKind::RiskyCliff);
        let a = evaluate(&agent, &spec, &[-1.5, 0.0, 1.5], 30, 9).unwrap();
        let b = evaluate(&agent, &spec, &[-1.5, 0.0, 1.5], 30, 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
