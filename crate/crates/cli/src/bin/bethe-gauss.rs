use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use bethe_gauss::cli::Cli;
use bethe_gauss::{execute, Context, Outcome};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = Context::from_env().and_then(|ctx| execute(&cli, &ctx, &mut out));
    let _ = out.flush();
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged(status)) => {
            eprintln!("status={status}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
