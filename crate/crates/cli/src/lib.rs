//! Batch front end for the `a2b` binary: scene generation, matching runs,
//! mode comparison and parameter sweeps. Every command is deterministic in
//! its seed and independent of the worker count.

pub mod args;
pub mod commands;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use serde::Serialize;

pub use args::Cli;
use args::Command;

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: String,
}

#[derive(Debug, Serialize)]
struct ErrorEnvelope<'a> {
    error: ErrorBody<'a>,
}

/// Single-line error JSON as written to stderr.
pub fn error_json(code: &str, message: impl Into<String>) -> String {
    serde_json::to_string(&ErrorEnvelope { error: ErrorBody { code, message: message.into() } })
        .expect("error envelope serializes")
}

fn dispatch(cli: &Cli) -> a2b_core::Result<()> {
    let stdout = std::io::stdout();
    match &cli.command {
        Command::Gen(a) => {
            commands::cmd_gen(a)?;
        }
        Command::Run(a) => {
            let summary = commands::cmd_run(a)?;
            // Reports on stdout would collide with the summary.
            if a.out.as_os_str() != "-" {
                let mut out = stdout.lock();
                serde_json::to_writer_pretty(&mut out, &summary)?;
                out.write_all(b"\n")?;
            }
        }
        Command::Compare(a) => {
            commands::cmd_compare(a)?;
        }
        Command::Sweep(a) => {
            commands::cmd_sweep(a)?;
        }
    }
    Ok(())
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 1 on a runtime error, 2 on a usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!("{}", error_json("cli.usage", e.kind().to_string()));
            eprintln!("{e}");
            return 2;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(a2b_core::Error::ConfigInvalid("threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| a2b_core::Error::ConfigInvalid(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(&cli))),
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => 0,
        // downstream closed the pipe (`a2b gen | head`); nothing left to report
        Err(e) if is_broken_pipe(&e) => 0,
        Err(e) => {
            eprintln!("{}", error_json(e.code(), e.to_string()));
            1
        }
    }
}

fn is_broken_pipe(e: &a2b_core::Error) -> bool {
    use std::io::ErrorKind::BrokenPipe;
    match e {
        a2b_core::Error::Io(io) => io.kind() == BrokenPipe,
        a2b_core::Error::Json(j) => j.io_error_kind() == Some(BrokenPipe),
        _ => false,
    }
}
