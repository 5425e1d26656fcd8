//! The `qipf` command-line pipeline: sine-wave demonstration, toy model
//! training, corruption, scoring, evaluation, baselines and severity sweeps.
//!
//! Every subcommand writes into its `--out` directory, including a
//! `config.json` echo of its arguments and derived settings. Plots are SVG
//! files rendered from the CSVs written in the same run.

pub mod args;
pub mod commands;
pub mod output;
pub mod pipeline;
pub mod plot;

pub use args::{Cli, Command};

pub fn run(cli: &Cli) -> qipf_core::Result<()> {
    match &cli.command {
        Command::DemoSine(a) => commands::demo_sine(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Corrupt(a) => commands::corrupt_cmd(a),
        Command::Score(a) => commands::score_cmd(a),
        Command::Evaluate(a) => commands::evaluate_cmd(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
        Command::Baseline(a) => commands::baseline_cmd(a),
    }
}

/// Flattens a message to one line for the `error: <category>: <message>` report.
pub fn one_line(message: &str) -> String {
    message.split_whitespace().collect::<Vec<_>>().join(" ")
}
