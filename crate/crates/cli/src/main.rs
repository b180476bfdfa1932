//! `subboot` command line.
//!
//! Results go to stdout as `key=value` lines or an aligned table; progress
//! and timings go to stderr. Exit codes:
//!
//! | code | meaning                                              |
//! |------|------------------------------------------------------|
//! | 0    | success                                              |
//! | 1    | failed to write output                               |
//! | 2    | usage error (unknown flag, missing argument)         |
//! | 3    | invalid argument or out-of-range record              |
//! | 4    | degenerate statistic or moments                      |
//! | 5    | statistic not supported by the method                |
//! | 6    | cost-model fit failed (singular or nonpositive)      |
//! | 7    | I/O error                                            |
//! | 8    | malformed data file or record index                  |
//! | 9    | bad config file or experiment configuration          |

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use subboot::Error;

use args::Cli;

/// Failure of a command, before mapping to an exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
    Output(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Output(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Output(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Core(e) => match e.root() {
                Error::InvalidArgument(_) | Error::OutOfRange { .. } => 3,
                Error::DegenerateStatistic(_) | Error::DegenerateMoments(_) => 4,
                Error::UnsupportedStatistic(_) => 5,
                Error::SingularDesign(_) | Error::NonpositiveCoefficient { .. } => 6,
                Error::Io { .. } => 7,
                Error::Parse { .. } | Error::IndexFormat { .. } => 8,
                Error::Config(_) => 9,
                Error::Cell { .. } => unreachable!("root() unwraps cells"),
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}\n\nFor more information, try '--help'."),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Output(e) => write!(f, "writing output: {e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 0 for --help and --version, 2 otherwise
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
