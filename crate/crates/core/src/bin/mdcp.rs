use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mdcp::harness::{run_experiment, verify_report, with_threads, write_reports, ExperimentConfig};
use mdcp::oracle::{solve_instance, verify_certificate, DiscreteInstance};

#[derive(Parser)]
#[command(name = "mdcp", version, about = "Multi-distribution conformal prediction toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write reports to a directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the number of Monte Carlo runs.
        #[arg(long)]
        runs: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated method list, e.g. `mdcp,baseline-agg`.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Worker threads; the MDCP_THREADS environment variable wins.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Solve a discrete instance exactly and print its dual certificate.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Re-check the metric identities of a report directory.
    Verify {
        #[arg(long)]
        report: PathBuf,
    },
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, String> {
    match std::env::var("MDCP_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| format!("MDCP_THREADS must be a positive integer, got `{v}`")),
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run {
            config,
            out,
            runs,
            seed,
            methods,
            threads: flag,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(r) = runs {
                cfg.runs = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = methods {
                cfg.methods = m;
            }
            let report = with_threads(threads(flag)?, || run_experiment(&cfg))??;
            write_reports(&report, &out)?;
            for s in &report.summary {
                if ["overall_cov", "worst_cov", "mean_size"].contains(&s.metric.as_str()) {
                    println!(
                        "{:<40} {:<16} {:<12} {:.4} (sd {:.4})",
                        s.suite, s.method, s.metric, s.mean, s.sd
                    );
                }
            }
            println!("wrote {} rows to {}", report.rows.len(), out.display());
            Ok(true)
        }
        Command::Oracle { instance } => {
            let inst = DiscreteInstance::from_json(&std::fs::read_to_string(&instance)?)?;
            let cert = solve_instance(&inst)?;
            let checks = verify_certificate(&cert, &inst);
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "certificate": cert,
                    "verification": checks,
                }))?
            );
            Ok(checks.all_passed())
        }
        Command::Verify { report } => {
            let v = verify_report(&report)?;
            let failed: Vec<_> = v.checks.iter().filter(|c| !c.passed).collect();
            for c in &failed {
                println!("FAIL {} (residual {:e})", c.name, c.residual);
            }
            println!("{} checks, {} failed", v.checks.len(), failed.len());
            Ok(failed.is_empty())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = e.source();
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(2)
        }
    }
}
