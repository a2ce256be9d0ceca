//! Command-line front end for the `bcsoftmax` crate.
//!
//! Each subcommand lives in its own module with a `run` that writes to a
//! caller-supplied sink, so the integration tests can drive them in-process.

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand};

pub mod bench;
pub mod calibrate;
pub mod error;
pub mod eval;
pub mod gen;
pub mod io;
pub mod verify;

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "bcsoftmax",
    version,
    about = "Box-constrained softmax and calibration"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the bounded softmax on every row of a logit file.
    Eval(eval::EvalArgs),
    /// Compare every algorithm against the brute-force oracle.
    Verify(verify::VerifyArgs),
    /// Time the algorithms across K and write a CSV.
    Bench(bench::BenchArgs),
    /// Fit a calibration map and report ECE and accuracy.
    Calibrate(calibrate::CalibrateArgs),
    /// Write a synthetic overconfident dataset.
    Gen(gen::GenArgs),
}

pub fn dispatch(command: Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Eval(args) => eval::run(&args, out),
        Command::Verify(args) => verify::run(&args, out),
        Command::Bench(args) => bench::run(&args, out),
        Command::Calibrate(args) => calibrate::run(&args, out),
        Command::Gen(args) => gen::run(&args, out),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
/// Errors go to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 1;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    match dispatch(cli.command, out).and_then(|()| Ok(out.flush()?)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
