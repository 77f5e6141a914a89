//! `arbsched`: day-ahead battery arbitrage backtests from the command line.

mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use arb_core::exec::Exec;
use arb_milp::{MpsFormat, SolverOptions, Status};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::AppConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "arbsched", version, about = "Day-ahead battery arbitrage scheduling backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// `key=value` or `section.key=value`, applied over the file.
    #[arg(long = "override", short = 'o', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self, extra: &[String]) -> Result<AppConfig, CliError> {
        let mut all = self.overrides.clone();
        all.extend_from_slice(extra);
        AppConfig::load(self.config.as_deref(), &all)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Free,
    Fixed,
}

#[derive(Subcommand)]
enum Command {
    /// Run one backtest and write results and summary CSVs.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// milp-p or milp-o.
        #[arg(long)]
        mode: Option<String>,
        /// Forecast window in days.
        #[arg(long)]
        l: Option<usize>,
        /// Output directory; `paths.output_dir` when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// MILP-P for each window plus MILP-O, with a comparison CSV.
    SweepL {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Windows, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        l: Vec<usize>,
        /// Days per run for the dominance audit; 0 skips it.
        #[arg(long, default_value_t = 30)]
        audit_days: usize,
        #[arg(long)]
        sequential: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check branch-and-bound against enumeration and DP on random small days.
    OracleCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long)]
        sequential: bool,
    },
    /// Write one day's MILP as an MPS file.
    ExportMps {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        date: NaiveDate,
        /// Start from the battery state the run reaches on `date`.
        #[arg(long)]
        replay: bool,
        #[arg(long, value_enum, default_value = "free")]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit a tidy CSV series for a figure from results files.
    PlotData {
        /// profit-daily, reldiff, degradation or totals.
        figure: String,
        /// Results CSVs; reldiff takes MILP-P then MILP-O, degradation takes
        /// with then without.
        #[arg(long = "results", required = true)]
        results: Vec<PathBuf>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    DumpConfig {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print the PWL bound table of the configured battery.
    PwlTable {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Solve an MPS file with the built-in solver, writing a backend solution file.
    SolveMps {
        mps: PathBuf,
        solution: PathBuf,
        #[arg(long)]
        time_limit_s: Option<f64>,
    },
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Simulate { cfg, mode, l, out: dir } => {
            let mut extra = Vec::new();
            if let Some(m) = mode {
                extra.push(format!("run.mode={m:?}"));
            }
            if let Some(l) = l {
                extra.push(format!("run.l={l}"));
            }
            let app = cfg.load(&extra)?;
            let dir = dir.unwrap_or_else(|| app.paths.output_dir.clone());
            commands::simulate(&app, &dir, &mut out)?;
        }
        Command::SweepL {
            cfg,
            l,
            audit_days,
            sequential,
            out: dir,
        } => {
            let app = cfg.load(&[])?;
            let dir = dir.unwrap_or_else(|| app.paths.output_dir.clone());
            let opts = commands::SweepOptions {
                windows: l,
                audit_days,
                exec: exec(sequential),
            };
            commands::sweep_l(&app, &opts, &dir, &mut out)?;
        }
        Command::OracleCheck { seed, count, sequential } => {
            commands::cmd_oracle_check(seed, count, exec(sequential), &mut out)?;
        }
        Command::ExportMps {
            cfg,
            date,
            replay,
            format,
            out: path,
        } => {
            let app = cfg.load(&[])?;
            let format = match format {
                Format::Free => MpsFormat::Free,
                Format::Fixed => MpsFormat::Fixed,
            };
            commands::export_mps(&app, date, replay, format, &path)?;
        }
        Command::PlotData {
            figure,
            results,
            out: path,
        } => match path {
            Some(p) => {
                let mut buf = Vec::new();
                commands::plot_data(&figure, &results, &mut buf)?;
                std::fs::write(&p, buf).map_err(|e| CliError::io(&p, e))?;
            }
            None => commands::plot_data(&figure, &results, &mut out)?,
        },
        Command::DumpConfig { cfg } => {
            let app = cfg.load(&[])?;
            write!(out, "{}", app.to_toml()).map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e))?;
        }
        Command::PwlTable { cfg } => {
            let app = cfg.load(&[])?;
            commands::pwl_table(&app, &mut out)?;
        }
        Command::SolveMps {
            mps,
            solution,
            time_limit_s,
        } => {
            let opts = SolverOptions {
                time_limit: time_limit_s.map(std::time::Duration::from_secs_f64),
                ..SolverOptions::default()
            };
            let status = commands::solve_mps(&mps, &solution, &opts)?;
            if status == Status::Infeasible || status == Status::Unbounded {
                eprintln!("status {status}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error kind=usage code=1: {first}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
