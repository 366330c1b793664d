//! Command-line front end. Thin by design: argument handling here, all the
//! work in the library's `runner` module.
//!
//! Usage: `sgfem <solve|convergence|conservation|interp-study>
//! [--config FILE] [--<key> <value> ...]` where every configuration key can
//! be overridden by the flag of the same name (`mesh-sizes=10,20` in a file
//! is `--mesh-sizes 10,20` on the command line).
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use sgfem::config::RunConfig;
use sgfem::runner::{cmd_conservation, cmd_convergence, cmd_interp_study, cmd_solve, CliError};
use std::path::Path;
use std::process::ExitCode;

const USAGE: &str = "\
usage: sgfem <command> [--config FILE] [--<key> <value> ...]

commands:
  solve         single solve; writes solution.csv and report.txt
  convergence   mesh-refinement study; writes rates.csv, h1.svg, l2.svg
  conservation  constrained-solve study; writes lce.csv, lce_mean.csv,
                rates_lc.csv, and plots
  interp-study  interpolation-rate study; writes interp_rates.csv

keys (file form key=value, flag form --key value):
  problem       example1 | example2 | custom
  params        comma list of coefficient parameters a_i
  method        fem | sgfem | both
  orders        comma list of polynomial degrees (1..4)
  mesh-sizes    comma list of element counts, strictly increasing
  constrained   true | false
  volumes       whole-domain | per-subdomain | dual-midpoint
  tol           nonlinear solve tolerance (default 1e-10)
  max-iter      iteration cap (default 50)
  output-dir    where files are written (default .)
  seed          reserved for randomized diagnostics
  kappa         custom problems: piecewise-constant coefficient values
  interfaces    custom problems: interface coordinates
  source-kind   custom problems: constant | linear | sinpi
  source-scale  custom problems: source amplitude

environment:
  SGFEM_THREADS caps study parallelism (default: available cores)
";

fn run() -> Result<(), CliError> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        print!("{USAGE}");
        return Ok(());
    }
    let command = args[0].as_str();
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut config_path: Option<String> = None;
    let mut it = args[1..].iter();
    while let Some(flag) = it.next() {
        let key = flag
            .strip_prefix("--")
            .ok_or_else(|| CliError::Usage(format!("expected --key, got {flag:?}")))?;
        let value = it
            .next()
            .ok_or_else(|| CliError::Usage(format!("flag --{key} needs a value")))?;
        if key == "config" {
            config_path = Some(value.clone());
        } else {
            pairs.push((key.to_string(), value.clone()));
        }
    }

    let mut config = match config_path {
        Some(path) => RunConfig::from_file(Path::new(&path))?,
        None => RunConfig::default(),
    };
    for (key, value) in &pairs {
        config.set(key, value)?;
    }

    match command {
        "solve" => cmd_solve(&config),
        "convergence" => cmd_convergence(&config),
        "conservation" => cmd_conservation(&config),
        "interp-study" => cmd_interp_study(&config),
        other => Err(CliError::Usage(format!(
            "unknown command {other:?}; try --help"
        ))),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("sgfem: error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
