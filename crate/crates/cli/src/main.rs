mod args;
mod commands;
mod failure;
mod manifest;
mod settings;
mod table;

use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use args::{Cli, Command, IndexCommand};
use commands::Ctx;
use failure::CliError;
use settings::FileConfig;

fn init_logging() {
    let filter = std::env::var("LEXLABEL_LOG")
        .ok()
        .and_then(|s| EnvFilter::try_new(s).ok())
        .or_else(|| EnvFilter::try_from_default_env().ok())
        .unwrap_or_else(|| EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(true)
        .init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        file: FileConfig::load(cli.config.as_deref())?,
        json: cli.json,
        manifest: cli.manifest,
    };
    match &cli.command {
        Command::Index(IndexCommand::Build(a)) => commands::index_build(&ctx, a),
        Command::Predict(a) => commands::predict(&ctx, a),
        Command::Tune(a) => commands::tune(&ctx, a),
        Command::Evaluate(a) => commands::evaluate_cmd(&ctx, a),
        Command::Audit(a) => commands::audit(&ctx, a),
        Command::Scaling(a) => commands::scaling(&ctx, a),
        Command::Stats(a) => commands::stats(&ctx, a),
        Command::Cost(a) => commands::cost(&ctx, a),
        Command::Serve(a) => commands::serve(&ctx, a),
        Command::Synth(a) => commands::synth(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code())
        }
    }
}
