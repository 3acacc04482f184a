//! Command-line front end: run one experiment from a JSON config, validate a
//! config, or sweep one parameter across several runs.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on numerical
//! failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cheby_sysid::harness::{self, RunConfig};

#[derive(Parser)]
#[command(name = "cheby-sysid", version, about = "Online sliding-window Chebyshev system identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trajectory.csv, windows.csv and
    /// manifest.json to the output directory.
    Run {
        /// JSON run configuration (a manifest.json from a previous run works
        /// too).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `out_dir` or `./out`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Override the configured horizon (seconds).
        #[arg(long)]
        horizon: Option<f64>,
        /// Override the configured error threshold.
        #[arg(long)]
        eps_th: Option<f64>,
        /// Suppress the run summary.
        #[arg(long)]
        quiet: bool,
        /// Additionally write per-figure plot data files.
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Parse and validate a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the base configuration once per value of one parameter
    /// (runs execute in parallel).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Parameter to vary, e.g. eps_th, kappa, gamma1, gamma2, tau,
        /// delta_t, m_init, m_min, m_max, horizon, sim_step, ridge.
        #[arg(long)]
        param: String,
        /// Comma-separated list of values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Base output directory; one subdirectory is written per value.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut cause = std::error::Error::source(&err);
            while let Some(c) = cause {
                eprintln!("  caused by: {c}");
                cause = c.source();
            }
            if err.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn dispatch(command: Command) -> cheby_sysid::Result<()> {
    match command {
        Command::Run {
            config,
            out_dir,
            horizon,
            eps_th,
            quiet,
            emit_plot_data,
        } => {
            let mut run_config = harness::load_config(&config)?;
            if let Some(h) = horizon {
                run_config.horizon = h;
            }
            if let Some(e) = eps_th {
                run_config.selector.eps_th = e;
            }
            run_config.validate()?;

            let out = resolve_out_dir(&run_config, out_dir);
            let report = harness::run_experiment(&run_config)?;
            let files = harness::export_csv(&report, &run_config, &out)?;
            if emit_plot_data {
                harness::export_plot_data(&report, &out)?;
            }
            if !quiet {
                print!("{}", harness::summarize(&report));
                for f in files {
                    println!("wrote {}", f.display());
                }
            }
            Ok(())
        }
        Command::Validate { config } => {
            let run_config = harness::load_config(&config)?;
            let warnings = run_config.validate()?;
            println!(
                "{}: ok ({} windows, plant `{}`)",
                config.display(),
                run_config.window_count(),
                run_config.plant.name
            );
            for w in warnings {
                println!("warning: {w}");
            }
            Ok(())
        }
        Command::Sweep {
            config,
            param,
            values,
            out_dir,
            quiet,
        } => {
            let base = harness::load_config(&config)?;
            let outcomes = harness::sweep(&base, &param, &values)?;
            let out_base = resolve_out_dir(&base, out_dir);
            for outcome in &outcomes {
                let sub = out_base.join(format!("{param}={}", outcome.value));
                let config_for_point = harness::apply_param(&base, &param, outcome.value)?;
                harness::export_csv(&outcome.report, &config_for_point, &sub)?;
                if !quiet {
                    println!(
                        "{param} = {:<12} windows {:>4}  node samples {:>6}  final M {}",
                        outcome.value,
                        outcome.report.windows.len(),
                        outcome.report.total_node_samples,
                        outcome.report.final_order
                    );
                }
            }
            Ok(())
        }
    }
}

fn resolve_out_dir(config: &RunConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}
