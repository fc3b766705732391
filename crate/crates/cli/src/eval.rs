use std::path::Path;

use dppo::algo::{evaluate, Agent, Checkpoint};
use dppo::envs::{EnvKind, EnvSpec};

use crate::args::EvalArgs;
use crate::error::{CliError, CliResult};

/// Parses `lo:hi:n` into `n` evenly spaced values from `lo` to `hi`.
pub fn parse_beta_grid(text: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::usage(format!("beta grid `{text}` is not of the form lo:hi:n"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    if n == 0 {
        return Err(CliError::usage("beta grid is empty"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect())
}

pub fn load_agent(path: &Path) -> CliResult<Agent> {
    let ckpt = Checkpoint::load(path).map_err(|e| CliError::input(path, e))?;
    ckpt.to_agent().map_err(|e| CliError::input(path, e))
}

/// Environment spec for a checkpoint, refusing cross-family use.
pub fn env_spec(agent: &Agent, kind: EnvKind, gap_height: Option<f64>) -> CliResult<EnvSpec> {
    if agent.env.is_cliff() != kind.is_cliff() {
        return Err(CliError::usage(format!(
            "checkpoint was trained on {}, cannot run on {kind}",
            agent.env
        )));
    }
    if gap_height.is_some() && kind.is_cliff() {
        return Err(CliError::usage("--gap-height only applies to gap-step"));
    }
    Ok(EnvSpec { kind, gap_height })
}

pub fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::output(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    if args.episodes == 0 {
        return Err(CliError::usage("--episodes must be at least 1"));
    }
    let grid = parse_beta_grid(&args.beta_grid)?;
    let agent = load_agent(&args.ckpt)?;
    let spec = env_spec(&agent, args.env, args.gap_height)?;
    let report = evaluate(&agent, &spec, &grid, args.episodes, args.seed)?;
    let text = serde_json::to_string_pretty(&report.rows).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_output(args.out.as_deref(), &(text + "\n"))
}
