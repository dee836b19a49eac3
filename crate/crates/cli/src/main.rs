mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use stablecf::{Error, ErrorKind};

use args::{Cli, Format};

fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Validation => 1,
        ErrorKind::Numerical => 2,
        ErrorKind::Io => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(t) = cli.common.threads {
        log::info!("--threads {t} noted; computation is single-threaded");
    }

    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            let mut stderr = std::io::stderr().lock();
            let _ = writeln!(stderr, "error: {err}");
            if cli.common.format == Some(Format::Json) {
                let body = serde_json::json!({
                    "error": err.code(),
                    "message": err.to_string(),
                    "exit_code": code,
                });
                let _ = writeln!(stderr, "{body}");
            }
            ExitCode::from(code)
        }
    }
}
