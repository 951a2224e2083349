mod args;
mod commands;
mod exit;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn run(cli: &Cli) -> anyhow::Result<u8> {
    match &cli.command {
        Command::Score(a) => commands::score(a),
        Command::Batch(a) => commands::batch(a),
        Command::Correlate(a) => commands::correlate(a),
        Command::Validate(a) => commands::validate(a),
        Command::Bias(a) => commands::bias(a),
        Command::Viz(a) => commands::viz(a),
        Command::TrainNgram(a) => commands::train_ngram(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit::code(&err))
        }
    }
}
