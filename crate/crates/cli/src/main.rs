use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use pon_mpc::experiment::{emit_plot_data, run_experiment, ExperimentSpec, PlotRequest};
use pon_mpc::opt::random::{lp_ilp_suite, maxflow_suite, tu_suite, InstanceBounds, SuiteReport};
use pon_mpc::Scenario;

#[derive(Parser)]
#[command(name = "pon-mpc", version, about = "Delay-aware bandwidth allocation experiments on a polled PON")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config.
    Run {
        config: PathBuf,
        /// Where results.csv and summary.json go; overrides the config.
        #[arg(long, env = "PONMPC_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
        #[command(flatten)]
        scale: Scale,
    },
    /// Turn a results CSV into one data file per curve.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        metric: String,
        /// Comma-separated columns that split rows into curves.
        #[arg(long, value_delimiter = ',', default_value = "allocator")]
        group_by: Vec<String>,
        #[arg(long, default_value = "class_load")]
        x: String,
        /// Defaults to a `plots` directory next to the CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every sweep point of a config without running it.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        scale: Scale,
    },
    /// Cross-check the LP, max-flow, exhaustive search and unimodularity routines.
    Oracle {
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct Scale {
    /// Start from the sixteen-ONU setup instead of the four-ONU desk defaults.
    #[arg(long)]
    full_scale: bool,
}

impl Scale {
    fn load(&self, path: &Path) -> Result<ExperimentSpec> {
        let mut defaults = ExperimentSpec::default();
        if self.full_scale {
            defaults.base = Scenario::full_scale();
        }
        ExperimentSpec::load(path, &defaults).with_context(|| format!("loading {}", path.display()))
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, output_dir, scale } => {
            let mut spec = scale.load(&config)?;
            if let Some(dir) = output_dir {
                spec.output_dir = dir;
            }
            let outcome = run_experiment(&spec)?;
            println!(
                "{} points run, {} failed; wrote {} and {}",
                outcome.results.len() + outcome.failures.len(),
                outcome.failures.len(),
                outcome.csv_path.display(),
                outcome.summary_path.display()
            );
            for f in &outcome.failures {
                eprintln!("point {} failed: {}", f.point, f.error);
            }
            Ok(outcome.succeeded())
        }
        Command::Plot { csv, metric, group_by, x, out } => {
            let out = out.unwrap_or_else(|| csv.parent().unwrap_or(Path::new(".")).join("plots"));
            let groups: Vec<&str> = group_by.iter().map(String::as_str).filter(|g| !g.is_empty()).collect();
            let mut req = PlotRequest::new(&metric, &groups);
            req.x = x;
            for path in emit_plot_data(&csv, &req, &out)? {
                println!("{}", path.display());
            }
            Ok(true)
        }
        Command::Validate { config, scale } => {
            let spec = scale.load(&config)?;
            let points = spec.points()?;
            if let Some(first) = points.first() {
                let slot = first.scenario.slot_config()?;
                println!(
                    "slot {} s, link budget {} packets ({} after overheads)",
                    slot.slot_s, slot.lambda_packets, slot.budget_packets
                );
                for s in first.scenario.class_specs()? {
                    println!(
                        "class {}: deadline {} s, {} virtual queues, {} packets per window",
                        s.id, s.deadline_s, s.k_slots, s.lambda_c_packets
                    );
                }
            }
            println!("{} sweep points valid", points.len());
            Ok(true)
        }
        Command::Oracle { cases, seed } => {
            let bounds = InstanceBounds::default();
            let reports = [
                lp_ilp_suite(cases, seed, bounds),
                maxflow_suite(cases, seed.wrapping_add(1), bounds),
                tu_suite()?,
            ];
            Ok(reports.iter().map(print_suite).collect::<Vec<_>>().iter().all(|&ok| ok))
        }
    }
}

fn print_suite(r: &SuiteReport) -> bool {
    let verdict = if r.passed() { "PASS" } else { "FAIL" };
    println!("{verdict} {}: {} cases, {} failures", r.name, r.cases, r.failures.len());
    for f in r.failures.iter().take(10) {
        println!("  {f}");
    }
    r.passed()
}
