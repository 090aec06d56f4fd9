use std::process::ExitCode;

use clap::Parser;

use collvote_gateway::cli::{self, Cli, CliError, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Serve { addr, tick } => serve(&cli, *addr, *tick),
        _ => cli::run(&cli),
    };
    match result {
        Ok(outcome) => {
            println!("{}", outcome.stdout);
            if outcome.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            println!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}

fn serve(cli: &Cli, addr: std::net::SocketAddr, tick: Option<u64>) -> Result<cli::Outcome, CliError> {
    let log = cli
        .log
        .clone()
        .ok_or_else(|| CliError { code: "Usage".into(), message: "pass --log or set COLLVOTE_LOG".into() })?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError { code: "Io".into(), message: e.to_string() })?;
    runtime.block_on(cli::serve(&log, addr, tick))?;
    Ok(cli::Outcome { stdout: String::new(), success: true })
}
