use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use rda_lab::{estimate, parse_range, simulate, verify, warn, EstimateArgs, SimulateArgs};

#[derive(Parser)]
#[command(name = "rda-lab", version, about = "Simulate, estimate and audit the grid distributed array")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a TOML experiment config and write seed-averaged metrics.
    Simulate {
        config: PathBuf,
        /// First seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Metrics CSV, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON-lines event log of a single engine run.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Fail instead of warning on an inadmissible schedule.
        #[arg(long)]
        strict: bool,
    },
    /// Trade-off curve of maximal rows per column count.
    Estimate {
        #[arg(long = "N", alias = "n")]
        n: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1e-9)]
        eps_target: f64,
        #[arg(long, default_value = "1..=200")]
        k2_range: String,
        #[arg(long, default_value = "paper")]
        assumptions: String,
        #[arg(long)]
        k1_max: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a logged run for both robustness properties.
    Verify {
        #[arg(long)]
        log: PathBuf,
        /// Corruption bound; defaults to the run's audited maximum.
        #[arg(long)]
        beta: Option<f64>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Simulate {
            config,
            seed,
            out,
            log,
            strict,
        } => {
            let r = simulate(&SimulateArgs {
                config,
                seed,
                out,
                log,
                strict,
            })?;
            warn(&r.warnings);
            if r.csv.is_none() {
                for (k1, s) in &r.series {
                    if let Some(last) = s.last() {
                        println!(
                            "k1={k1}: final max corruption {:.4e}, max peers {:.1}",
                            last.max_corruption_fraction, last.max_peers
                        );
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Estimate {
            n,
            beta,
            eps_target,
            k2_range,
            assumptions,
            k1_max,
            out,
        } => {
            let print = out.is_none();
            let (curve, warnings) = estimate(&EstimateArgs {
                n,
                beta,
                eps_target,
                k2: parse_range(&k2_range)?,
                assumptions,
                k1_max,
                out,
            })?;
            warn(&warnings);
            if print {
                rda_analysis::write_estimates_csv(std::io::stdout().lock(), &curve.rows)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify { log, beta } => {
            let r = verify(&log, beta)?;
            println!("beta = {}", r.beta);
            println!("{}", r.rda);
            println!("{}", r.subnet);
            Ok(if r.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
