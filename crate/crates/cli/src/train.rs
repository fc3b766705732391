use std::fs::{self, File};
use std::io::{BufWriter, Write};

use dppo::algo::{DppoConfig, Trainer};
use dppo::envs::EnvSpec;

use crate::args::TrainArgs;
use crate::error::{read_input, CliError, CliResult};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";

/// Config file plus command-line overrides, validated for the algorithm.
pub fn resolve_config(args: &TrainArgs) -> CliResult<DppoConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = read_input(path)?;
            serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?
        }
        None => DppoConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(metric) = args.metric {
        config.metric = metric;
    }
    if let Some(iterations) = args.iterations {
        config.iterations = iterations;
    }
    config.validate(args.algo)?;
    Ok(config)
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let config = resolve_config(args)?;
    if args.gap_height.is_some() && args.env.is_cliff() {
        return Err(CliError::usage("--gap-height only applies to gap-step"));
    }
    let spec = EnvSpec {
        kind: args.env,
        gap_height: args.gap_height,
    };
    fs::create_dir_all(&args.out).map_err(|e| CliError::output(&args.out, e))?;

    let resolved = args.out.join(RESOLVED_CONFIG_FILE);
    let text = serde_json::to_string_pretty(&config).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(&resolved, text + "\n").map_err(|e| CliError::output(&resolved, e))?;

    let mut trainer = Trainer::new(&config, args.algo, spec)?;
    if args.no_wall_clock {
        trainer = trainer.without_wall_clock();
    }
    let metrics_path = args.out.join(METRICS_FILE);
    let file = File::create(&metrics_path).map_err(|e| CliError::output(&metrics_path, e))?;
    let mut metrics = BufWriter::new(file);
    let every = config.checkpoint_every;
    let report_every = (config.iterations / 20).max(1);
    let out = args.out.clone();
    let quiet = args.quiet;

    let result = trainer.run(|t, record| {
        let line = serde_json::to_string(record)?;
        writeln!(metrics, "{line}")?;
        metrics.flush()?;
        if every > 0 && record.iteration % every == 0 {
            t.checkpoint()
                .save(&out.join(format!("checkpoint-{:06}.json", record.iteration)))?;
        }
        if !quiet && record.iteration % report_every == 0 {
            eprintln!(
                "iter {:>6}  steps {:>9}  return {}  early {}",
                record.iteration,
                record.env_steps,
                fmt_opt(record.mean_return),
                fmt_opt(record.early_termination_fraction),
            );
        }
        Ok(())
    });
    // keep whatever was learned before a failure
    let ckpt_path = args.out.join(CHECKPOINT_FILE);
    trainer
        .checkpoint()
        .save(&ckpt_path)
        .map_err(|e| CliError::output(&ckpt_path, e))?;
    result.map_err(|e| CliError::Runtime(e.to_string()))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}
