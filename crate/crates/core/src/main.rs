// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rvb_core::config::Config;
use rvb_core::{experiments, verify};

#[derive(Parser)]
#[command(name = "rvb", version, about = "2x2 quantum dot exchange simulator")]
struct Cli {
    /// Key-value spec file (TOML). Built-in defaults are used when absent.
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Regenerate the data behind a figure (or `all`).
    Figure { name: String },
    /// Run the calibration loop against a simulated device.
    Calibrate,
    /// Run invariant checks and acceptance criteria.
    Verify {
        /// Run only these criteria (1-10); invariants are always run.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
    /// Simulate a pulse sequence file and write outcome probabilities.
    Simulate { sequence: PathBuf },
}

fn run(cli: Cli) -> rvb_core::Result<bool> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| rvb_core::Error::Domain(e.to_string()))?;
    }
    let cfg = match &cli.spec {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Figure { name } => {
            let names: Vec<&str> = if name == "all" {
                experiments::FIGURES.to_vec()
            } else {
                vec![name.as_str()]
            };
            for n in names {
                for p in experiments::cmd_figure(n, &cfg, cli.seed, &cli.out)? {
                    println!("{}", p.display());
                }
            }
            Ok(true)
        }
        Command::Calibrate => {
            let (report, paths) = experiments::write_calibration(&cfg, cli.seed, &cli.out)?;
            println!(
                "center ({:.3}, {:.3}) mV after {} iterations; J0 = ({:.2}, {:.2}) MHz; sigma_J = ({:.2}, {:.2}) MHz",
                report.center_mv[0],
                report.center_mv[1],
                report.iterations,
                report.j0x_estimate_mhz,
                report.j0y_estimate_mhz,
                report.sigma_jx_mhz,
                report.sigma_jy_mhz
            );
            for p in paths {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::Verify { only } => {
            let mut reports = verify::invariant_suite(cli.seed);
            for (k, c) in verify::CRITERIA.iter().enumerate() {
                if only.is_empty() || only.contains(&(k + 1)) {
                    reports.push(c(cli.seed));
                }
            }
            for r in &reports {
                println!("{}", r.line());
            }
            let failed = reports.iter().filter(|r| !r.passed).count();
            println!("{} checks, {failed} failed", reports.len());
            Ok(failed == 0)
        }
        Command::Simulate { sequence } => {
            let p = experiments::cmd_simulate(&sequence, cli.seed, &cli.out)?;
            println!("{}", p.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
