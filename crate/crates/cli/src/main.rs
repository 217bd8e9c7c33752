mod args;
mod commands;
mod settings;

use std::process::ExitCode;

use clap::Parser;
use vgd_core::VgdError;

use args::Cli;
use settings::Settings;

const USAGE: u8 = 2;
const RUNTIME: u8 = 1;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<settings::Usage>().is_some() {
        return USAGE;
    }
    match err.downcast_ref::<VgdError>() {
        Some(
            VgdError::InvalidConfig(_) | VgdError::NothingToDistill { .. } | VgdError::TemplateNotFound(_),
        ) => USAGE,
        _ => RUNTIME,
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on malformed arguments
    let cli = Cli::parse();
    let settings = match Settings::from_args(&cli.global) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("vgd: {e:#}");
            return ExitCode::from(USAGE);
        }
    };
    match commands::run(&cli.command, &settings) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vgd: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
