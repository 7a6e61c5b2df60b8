mod args;
mod commands;
mod output;

use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use args::{Cli, Command};
use output::RunConfig;

const THREADS_ENV: &str = "HYBRID_SKETCH_THREADS";

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        anyhow::bail!("{THREADS_ENV} must be at least 1");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    configure_threads()?;
    let cmd = &cli.command;
    let args = cmd.args();
    if let Some(dir) = args.out.as_deref().and_then(|p| p.parent()).filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let cfg = RunConfig {
        command: cmd.name(),
        version: env!("CARGO_PKG_VERSION"),
        args,
    };
    match cmd {
        Command::AlphaOpt(_) => commands::alpha_opt(&cfg, args),
        Command::Sparsify(_) => commands::sparsify(&cfg, args),
        Command::Stream(_) => commands::stream(&cfg, args),
        Command::Pca(_) => commands::pca(&cfg, args),
        Command::Bench(_) => commands::bench(&cfg, args),
        Command::Generate(_) => commands::generate(&cfg, args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
