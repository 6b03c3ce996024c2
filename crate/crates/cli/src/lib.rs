//! Command-line front end for the occupancy toolkit.
//!
//! [`run`] parses an argument vector, executes one subcommand and returns the
//! process exit status: 0 on success, 1 when a computation fails and 2 on a
//! usage error.

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub mod args;
pub mod commands;
pub mod counts;
pub mod error;
pub mod output;

pub use counts::{parse_counts_file, Counts};
pub use error::{CliError, CliResult};
pub use output::{emit_scan, SCAN_COLUMNS, SCAN_CSV_VERSION};

use args::{Cli, Command};
use commands::CoupleOptions;

/// Runs one invocation. `argv` includes the program name.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    match execute(&cli) {
        Ok((buf, code)) => {
            let written = match &cli.global.output {
                Some(path) => std::fs::write(path, &buf).map_err(|source| CliError::Io { path: path.clone(), source }),
                None => out.write_all(&buf).map_err(CliError::from),
            };
            match written {
                Ok(()) => code,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    e.exit_code()
                }
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> CliResult<(Vec<u8>, i32)> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", cli.global.threads)))?;
    pool.install(|| {
        let mut buf = Vec::new();
        let code = dispatch(cli, &mut buf)?;
        Ok((buf, code))
    })
}

fn dispatch(cli: &Cli, out: &mut Vec<u8>) -> CliResult<i32> {
    let g = &cli.global;
    match &cli.command {
        Command::Moments { point, exact, atoms } => commands::moments_cmd(*point, *exact, *atoms, g.format, out)?,
        Command::Pmf { point, mode, budget, size_biased } => commands::pmf_cmd(*point, *mode, *budget, *size_biased, g.format, out)?,
        Command::Kolmogorov { point, mode, budget } => commands::kolmogorov_cmd(*point, *mode, *budget, g.format, out)?,
        Command::Couple { point, samples, budget, dump, dump_count, verbose } => {
            let opts = CoupleOptions {
                samples: *samples,
                budget: *budget,
                dump: dump.as_deref(),
                dump_count: *dump_count,
                verbose: *verbose,
            };
            commands::couple_cmd(*point, opts, g.seed, g.format, out)?
        }
        Command::Verify(a) => {
            let pass = commands::verify_cmd(a, g.seed, g.format, out)?;
            if a.strict && !pass {
                return Ok(1);
            }
        }
        Command::Scan(a) => commands::scan_cmd(a, g.seed, g.format, out)?,
        Command::Domain { point, thresholds } => commands::domain_cmd(*point, *thresholds, g.format, out)?,
        Command::Starr { counts, n0, n } => commands::starr_cmd(counts, *n0, *n, g.format, out)?,
    }
    Ok(0)
}
