//! Command-line front end and HTTP server over `stvq-core`.

pub mod cli;
pub mod commands;
pub mod server;

use cli::{Cli, Command};

pub async fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Serve(a) => commands::serve(a).await,
        other => tokio::task::spawn_blocking(move || run_blocking(other)).await?,
    }
}

fn run_blocking(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Scene(a) => commands::scene(a),
        Command::Conform(a) => commands::conform(a),
        Command::Features(a) => commands::features(a),
        Command::Ladder(a) => commands::ladder(a),
        Command::Design(a) => commands::design(a),
        Command::InitStudy(a) => commands::init_study(a),
        Command::ProcessScores(a) => commands::process_scores(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Cv(a) => commands::cv(a),
        Command::Hull(a) => commands::hull(a),
        Command::Serve(_) => unreachable!("served on the async runtime"),
    }
}
