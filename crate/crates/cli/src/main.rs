use std::io::Write;
use std::process::ExitCode;

use anyhow::Context;
use choquet::run::{run, Cli};
use choquet::CliError;
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let code = e.downcast_ref::<CliError>().map_or(4, CliError::exit_code);
            let error = serde_json::json!({ "error": format!("{e:#}"), "exit_code": code });
            eprintln!("{error}");
            ExitCode::from(code)
        }
    }
}

fn execute(cli: &Cli) -> anyhow::Result<u8> {
    let outcome = run(cli)?;
    let report = &outcome.report;
    if let Some(path) = report.destination(cli.out.as_deref()) {
        report.write(&path)?;
    }
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{}", report.to_json()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
        other => other.context("writing report")?,
    }
    Ok(outcome.exit_code)
}
