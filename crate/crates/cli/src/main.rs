use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde_json::json;

use cvbell::Execution;

mod args;
mod commands;
mod output;

use args::{Cli, Common};
use output::{write_table, Header};

pub const OUT_DIR_ENV: &str = "CVBELL_OUT_DIR";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(io::Error),
}

impl From<cvbell::Error> for CliError {
    fn from(e: cvbell::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

enum Destination {
    Stdout,
    File(PathBuf),
}

fn destination(common: &Common, command: &str) -> Destination {
    match &common.out {
        Some(p) if p.as_os_str() == "-" => Destination::Stdout,
        Some(p) => Destination::File(p.clone()),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => {
                Destination::File(PathBuf::from(dir).join(format!("{command}.{}", common.format.extension())))
            }
            _ => Destination::Stdout,
        },
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let common = &cli.common;
    if !(common.tail_tol > 0.0 && common.tail_tol < 1.0) {
        return Err(CliError::Usage(format!("--tail-tol must lie in (0, 1), got {}", common.tail_tol)));
    }
    let exec = match common.jobs {
        Some(1) => Execution::Sequential,
        _ => Execution::Parallel,
    };
    let ctx = commands::Context {
        exec,
        tail_tol: common.tail_tol,
    };
    let table = with_jobs(common.jobs, || commands::run(&cli.command, &ctx))??;

    let name = commands::name(&cli.command);
    let mut config = serde_json::to_value(&cli.command).expect("plain data");
    config["tail_tol"] = json!(common.tail_tol);
    config["format"] = json!(common.format);
    let header = Header {
        command: name,
        config,
        timestamp: (!common.no_timestamp)
            .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)),
    };
    let mut buf = Vec::new();
    write_table(&mut buf, common.format, &header, &table)?;
    match destination(common, name) {
        Destination::Stdout => match io::stdout().lock().write_all(&buf) {
            // A closed downstream pipe (`| head`) is not a failure.
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => {}
            other => other?,
        },
        Destination::File(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, &buf)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn with_jobs<T: Send>(jobs: Option<u16>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        Some(n) if n > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n as usize)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_jobs<T: Send>(_jobs: Option<u16>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    Ok(f())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(e)) => {
            eprintln!("i/o error: {e}");
            ExitCode::from(1)
        }
    }
}
