//! `bozk`: configuration-driven batch runs for the generalized BO-ZK equation.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "bozk", version, about = "Solitary waves and dynamics of the generalized BO-ZK equation")]
struct Cli {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Run outside the existence regime.
    #[arg(long)]
    force: bool,
    /// Upper bound on concurrent sweep jobs.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out_dir = cli.out.clone();
    let result = commands::prepare(&cli.config, cli.out.as_deref(), cli.force, cli.jobs as usize)
        .and_then(|ctx| {
            out_dir = Some(ctx.out.clone());
            commands::run(&ctx)
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report(out_dir.as_deref());
            ExitCode::from(f.code)
        }
    }
}
