use std::process::ExitCode;

use clap::Parser;
use quasiavg::cli::{run, to_json_string, ErrorReport, RunConfig};

const THREADS_VAR: &str = "QUASIAVG_THREADS";

fn fail(subcommand: Option<&str>, kind: &str, message: String, code: u8) -> ExitCode {
    let report = ErrorReport {
        subcommand,
        kind,
        message,
        exit_code: code as i32,
    };
    eprint!("{}", to_json_string(&report));
    ExitCode::from(code)
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let config = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(None, "usage", e.to_string(), 2),
    };
    if let Err(msg) = configure_threads() {
        return fail(Some(config.subcommand()), "usage", msg, 2);
    }
    match run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(
            Some(config.subcommand()),
            e.kind(),
            e.to_string(),
            e.exit_class() as u8,
        ),
    }
}
