use std::process::ExitCode;

use clap::Parser;
use lcfuse::cli::{Cli, Command};
use lcfuse::config::ConfigError;
use lcfuse::pipeline;

const EXIT_DOMAIN: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn run(cli: Cli) -> anyhow::Result<pipeline::Outcome> {
    match cli.command {
        Command::Fuse(a) => pipeline::cmd_fuse(&a.settings()?),
        Command::Assess(a) => pipeline::cmd_assess(&a.settings()?),
        Command::Synth(a) => pipeline::cmd_synth(&a.settings()?),
        Command::Unmix(a) => pipeline::cmd_unmix(&a.settings()?),
        Command::Features(a) => pipeline::cmd_features(&a.settings()?),
        Command::Smooth(a) => pipeline::cmd_smooth(&a.settings()?),
        Command::Classify(a) => pipeline::cmd_classify(&a.settings()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_DOMAIN)
            }
        }
    }
}
