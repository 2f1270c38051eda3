use std::process::ExitCode;

use clap::Parser;
use volforms_cli::{exit_status, render, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let bytes = match render(&report, cli.common.format) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let written = match &cli.common.output {
        Some(path) => std::fs::write(path, &bytes),
        None => std::io::Write::write_all(&mut std::io::stdout().lock(), &bytes),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let s = report.summary();
    eprintln!(
        "{} decisive checks: {} passed, {} failed; {} informational",
        s.decisive, s.passed, s.failed, s.informational
    );
    ExitCode::from(exit_status(&report))
}
