//! The `dppo` command line: training, evaluation, the exact return oracle,
//! SVG plots and the live steering server.

pub mod args;
pub mod error;
pub mod eval;
pub mod oracle;
pub mod plot;
pub mod steer;
pub mod train;

pub use error::{CliError, CliResult};

/// Runs one parsed command.
pub fn run(cli: &args::Cli) -> CliResult<()> {
    use args::Command;
    match &cli.command {
        Command::Train(a) => train::run(a),
        Command::Eval(a) => eval::run(a),
        Command::Oracle(a) => oracle::run(a),
        Command::Plot(a) => plot::run(a),
        Command::Serve(a) => steer::run(a),
    }
}
