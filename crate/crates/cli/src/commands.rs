use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use arb_core::exec::Exec;
use arb_core::model::build_milp;
use arb_core::oracle::{oracle_check, OracleCase, CHECK_GRIDS};
use arb_core::prices::{forecast, load_price_csv, LoadOptions, PriceSeries};
use arb_core::pwl::PwlTable;
use arb_core::simulate::{
    self, compare, day_problem, emit_results, emit_timings, load_results, relative_difference, run_many, AuditSpec, Mode,
    RunConfig, RunSummary,
};
use arb_core::synth::{synthetic_prices, SynthConfig};
use arb_core::ArbError;
use arb_milp::{import_mps, solve, MpsFormat, SolverOptions, Status};
use chrono::NaiveDate;

use crate::config::AppConfig;
use crate::error::CliError;

type Out<'a> = &'a mut dyn Write;

fn w(out: Out<'_>, s: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    out.write_fmt(s)
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => { w($out, format_args!("{}\n", format_args!($($arg)*))) };
}

/// Prices for the configured range: the price file when given, synthetic otherwise.
pub fn load_prices(cfg: &AppConfig) -> Result<PriceSeries, CliError> {
    let (start, end) = cfg.dates()?;
    if end < start {
        return Err(CliError::Config(format!("empty date range {start}..{end}")));
    }
    match &cfg.paths.prices {
        Some(p) => Ok(load_price_csv(
            p,
            &cfg.market.country,
            start,
            end,
            LoadOptions {
                drop_incomplete_boundary_days: cfg.market.drop_incomplete_days,
            },
        )?),
        None => {
            let days = (end - start).num_days() as usize + 1;
            Ok(synthetic_prices(
                &cfg.market.country,
                start,
                days,
                &SynthConfig::default(),
                cfg.market.synthetic_seed,
            )?)
        }
    }
}

/// Run configuration clipped to the days actually loaded.
fn run_config_for(cfg: &AppConfig, series: &PriceSeries) -> Result<RunConfig, CliError> {
    let mut rc = cfg.run_config()?;
    let (Some(first), Some(last)) = (series.first_day(), series.last_day()) else {
        return Err(ArbError::Data("no price data in range".into()).into());
    };
    rc.start = rc.start.max(first);
    rc.end = rc.end.min(last);
    Ok(rc)
}

fn file_label(s: &RunSummary) -> String {
    match s.window {
        Some(l) => format!("{}_l{l}", s.mode),
        None => s.mode.to_string(),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into())
}

fn summary_header(out: Out<'_>) -> Result<(), CliError> {
    say!(
        out,
        "{:<14} {:>6} {:>14} {:>14} {:>10} {:>9} {:>10}",
        "run",
        "days",
        "avg_profit",
        "total_profit",
        "cycles",
        "neg_days",
        "mean_mae"
    )
}

fn summary_row(out: Out<'_>, s: &RunSummary) -> Result<(), CliError> {
    say!(
        out,
        "{:<14} {:>6} {:>14.2} {:>14.2} {:>10.2} {:>9} {:>10}",
        s.label(),
        s.days.len(),
        s.avg_daily_profit,
        s.total_profit,
        s.total_cycles,
        s.negative_profit_days,
        fmt_opt(s.mean_mae, 2)
    )
}

pub fn simulate(cfg: &AppConfig, out_dir: &Path, out: Out<'_>) -> Result<RunSummary, CliError> {
    let series = load_prices(cfg)?;
    let rc = run_config_for(cfg, &series)?;
    rc.validate()?;
    let summary = simulate::run(&rc, &series)?;
    create_dir(out_dir)?;
    emit_results(&summary, &out_dir.join(format!("{}_results.csv", file_label(&summary))))?;
    emit_timings(&summary, &out_dir.join(format!("{}_timings.csv", file_label(&summary))))?;
    simulate::write_summary_csv(std::slice::from_ref(&summary), &out_dir.join("summary.csv"))?;
    summary_header(out)?;
    summary_row(out, &summary)?;
    Ok(summary)
}

pub struct SweepOptions {
    pub windows: Vec<usize>,
    pub audit_days: usize,
    pub exec: Exec,
}

/// One MILP-P run per distinct window plus one MILP-O run, compared on
/// common dates.
pub fn sweep_l(cfg: &AppConfig, opts: &SweepOptions, out_dir: &Path, out: Out<'_>) -> Result<(), CliError> {
    let mut windows = opts.windows.clone();
    windows.sort_unstable();
    windows.dedup();
    if windows.is_empty() {
        return Err(CliError::Usage("sweep-l needs at least one window".into()));
    }
    if windows.contains(&0) {
        return Err(CliError::Config("window l must be at least 1 for milp-p".into()));
    }
    let series = load_prices(cfg)?;
    let base = run_config_for(cfg, &series)?;
    let mut configs = Vec::with_capacity(windows.len() + 1);
    for &l in &windows {
        let mut c = base.clone();
        c.mode = Mode::Predictive;
        c.window = l;
        c.validate()?;
        configs.push(c);
    }
    let mut oracle_cfg = base.clone();
    oracle_cfg.mode = Mode::Oracle;
    configs.push(oracle_cfg);

    let runs = run_many(&configs, &series, opts.exec)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let (oracle, predictive) = runs.split_last().expect("at least two runs");

    create_dir(out_dir)?;
    for r in &runs {
        emit_results(r, &out_dir.join(format!("{}_results.csv", file_label(r))))?;
        emit_timings(r, &out_dir.join(format!("{}_timings.csv", file_label(r))))?;
    }
    simulate::write_summary_csv(&runs, &out_dir.join("summary.csv"))?;

    let path = out_dir.join("comparison.csv");
    let mut csv = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    csv.write_record([
        "run",
        "l",
        "days",
        "avg_daily_profit_eur",
        "total_profit_eur",
        "oracle_total_common_eur",
        "relative_difference",
        "cycles",
        "oracle_cycles_common",
        "oracle_cycles_full",
        "negative_profit_days",
        "mean_mae_eur_mwh",
        "audit_days",
        "audit_passed",
    ])
    .map_err(|e| csv_err(&path, e))?;

    summary_header(out)?;
    let mut audit_failures = Vec::new();
    for (p, c) in predictive.iter().zip(&configs) {
        let audit = (opts.audit_days > 0).then_some(AuditSpec {
            config: c,
            series: &series,
            days: opts.audit_days,
            exec: opts.exec,
        });
        let report = compare(p, oracle, audit)?;
        summary_row(out, p)?;
        if !report.audit_passed() {
            audit_failures.push(p.label());
        }
        csv.write_record([
            p.label(),
            p.window.map(|l| l.to_string()).unwrap_or_default(),
            p.days.len().to_string(),
            p.avg_daily_profit.to_string(),
            report.predictive_total.to_string(),
            report.oracle_total.to_string(),
            report.relative_difference.to_string(),
            report.predictive_cycles.to_string(),
            report.oracle_cycles_common.to_string(),
            report.oracle_cycles_full.to_string(),
            p.negative_profit_days.to_string(),
            p.mean_mae.map(|m| m.to_string()).unwrap_or_default(),
            report.audit.len().to_string(),
            report.audit_passed().to_string(),
        ])
        .map_err(|e| csv_err(&path, e))?;
        say!(
            out,
            "  vs {} on {} common days: relative difference {:+.2}%",
            report.oracle_label,
            report.per_day.len(),
            100.0 * report.relative_difference
        )?;
    }
    csv.write_record([
        oracle.label(),
        String::new(),
        oracle.days.len().to_string(),
        oracle.avg_daily_profit.to_string(),
        oracle.total_profit.to_string(),
        oracle.total_profit.to_string(),
        "0".into(),
        oracle.total_cycles.to_string(),
        oracle.total_cycles.to_string(),
        oracle.total_cycles.to_string(),
        oracle.negative_profit_days.to_string(),
        String::new(),
        "0".into(),
        "true".into(),
    ])
    .map_err(|e| csv_err(&path, e))?;
    csv.flush().map_err(|e| CliError::io(&path, e))?;
    summary_row(out, oracle)?;
    if !audit_failures.is_empty() {
        return Err(CliError::Check(format!(
            "dominance audit failed for {}",
            audit_failures.join(", ")
        )));
    }
    Ok(())
}

fn csv_err(path: &Path, source: csv::Error) -> CliError {
    CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn oracle_report(cases: &[OracleCase], out: Out<'_>) -> Result<(), CliError> {
    say!(
        out,
        "{:>5} {:>8} {:>5} {:>5} {:>4} {:>12} {:>12} {:>9} {:>12} {:>12} {:>12}  result",
        "index",
        "seed",
        "hours",
        "n_int",
        "bins",
        "milp",
        "enum",
        "rel_diff",
        format!("dp{}", CHECK_GRIDS[0]),
        format!("dp{}", CHECK_GRIDS[1]),
        format!("dp{}", CHECK_GRIDS[2])
    )?;
    for c in cases {
        let verdict = match &c.error {
            Some(e) => format!("FAIL ({e})"),
            None if c.passed() => "pass".into(),
            None => {
                let mut why = Vec::new();
                if !c.matches() {
                    why.push("milp!=enum");
                }
                if !c.dp_below() {
                    why.push("dp>milp");
                }
                if !c.dp_monotone() {
                    why.push("dp not monotone");
                }
                format!("FAIL ({})", why.join(", "))
            }
        };
        say!(
            out,
            "{:>5} {:>8} {:>5} {:>5} {:>4} {:>12.6} {:>12.6} {:>9.2e} {:>12.6} {:>12.6} {:>12.6}  {verdict}",
            c.index,
            c.seed,
            c.hours,
            c.n_int,
            c.binaries,
            c.milp_profit,
            c.enum_profit,
            c.rel_diff,
            c.dp_profit[0],
            c.dp_profit[1],
            c.dp_profit[2]
        )?;
    }
    let failed: Vec<String> = cases
        .iter()
        .filter(|c| !c.passed())
        .map(|c| format!("{}/{}", c.index, c.seed))
        .collect();
    say!(out, "{} of {} passed", cases.len() - failed.len(), cases.len())?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "oracle check failed for index/seed {}",
            failed.join(" ")
        )))
    }
}

pub fn cmd_oracle_check(seed: u64, count: usize, exec: Exec, out: Out<'_>) -> Result<(), CliError> {
    if count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let cases = oracle_check(seed, count, exec);
    oracle_report(&cases, out)
}

/// Write the MILP of `date` as MPS. With `replay`, the battery state is the
/// one the configured run reaches on that date; otherwise it is fresh.
pub fn export_mps(
    cfg: &AppConfig,
    date: NaiveDate,
    replay: bool,
    format: MpsFormat,
    path: &Path,
) -> Result<(), CliError> {
    let series = load_prices(cfg)?;
    let mut rc = run_config_for(cfg, &series)?;
    if series.index_of(date).is_none() {
        return Err(ArbError::Data(format!(
            "{date} is outside the loaded data {}..={}",
            rc.start, rc.end
        ))
        .into());
    }
    rc.validate()?;
    let plan = match rc.mode {
        Mode::Oracle => series.actual(date).expect("date checked"),
        Mode::Predictive => forecast(&series, date, rc.window)?,
    };
    let (q, eta) = if replay && date > rc.start {
        rc.end = date;
        let s = simulate::run(&rc, &series)?;
        let d = s
            .days
            .last()
            .filter(|d| d.date == date)
            .ok_or_else(|| ArbError::Data(format!("{date} is not a trading day of this run")))?;
        (d.q_start, d.eta_start)
    } else {
        (rc.battery.q0, rc.battery.eta0)
    };
    let table = PwlTable::build(&rc.battery, rc.n_int, rc.rate_scale)?;
    let problem = day_problem(&rc, &table, &plan, q, eta);
    let milp = build_milp(&problem)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    arb_milp::export_mps(&milp.instance, path, format)?;
    Ok(())
}

pub const FIGURES: [&str; 4] = ["profit-daily", "reldiff", "degradation", "totals"];

fn load_any(path: &Path) -> Result<RunSummary, CliError> {
    Ok(load_results(path, Mode::Oracle)?)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().trim_end_matches("_results").to_string())
        .unwrap_or_default()
}

/// Tidy CSV series for one figure.
pub fn plot_data(figure: &str, results: &[PathBuf], out: Out<'_>) -> Result<(), CliError> {
    let need = |n: usize| -> Result<(), CliError> {
        if results.len() == n {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "figure `{figure}` takes {n} results file(s), got {}",
                results.len()
            )))
        }
    };
    match figure {
        "profit-daily" => {
            if results.is_empty() {
                return Err(CliError::Usage("profit-daily needs at least one results file".into()));
            }
            say!(out, "run,date,realized_profit_eur")?;
            for p in results {
                let s = load_any(p)?;
                for d in &s.days {
                    say!(out, "{},{},{}", s.label(), d.date, d.realized_profit)?;
                }
            }
        }
        "reldiff" => {
            need(2)?;
            let (p, o) = (load_any(&results[0])?, load_any(&results[1])?);
            let report = compare(&p, &o, None)?;
            say!(out, "date,predictive_eur,oracle_eur,relative_difference")?;
            for d in &report.per_day {
                say!(
                    out,
                    "{},{},{},{}",
                    d.date,
                    d.predictive,
                    d.oracle,
                    d.relative.map(|r| r.to_string()).unwrap_or_default()
                )?;
            }
        }
        "degradation" => {
            need(2)?;
            let (with, without) = (load_any(&results[0])?, load_any(&results[1])?);
            let other: BTreeMap<NaiveDate, f64> =
                without.days.iter().map(|d| (d.date, d.realized_profit)).collect();
            say!(out, "date,with_degradation_eur,without_degradation_eur,delta_eur,cumulative_delta_eur,q_wh")?;
            let mut cum = 0.0;
            for d in &with.days {
                let Some(&nd) = other.get(&d.date) else { continue };
                let delta = nd - d.realized_profit;
                cum += delta;
                say!(out, "{},{},{},{},{},{}", d.date, d.realized_profit, nd, delta, cum, d.q_start)?;
            }
        }
        "totals" => {
            if results.is_empty() {
                return Err(CliError::Usage("totals needs at least one results file".into()));
            }
            say!(out, "series,run,days,total_profit_eur,avg_daily_profit_eur,total_cycles,negative_profit_days,relative_to_first")?;
            let mut first = None;
            for p in results {
                let s = load_any(p)?;
                let base = *first.get_or_insert(s.total_profit);
                say!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    stem(p),
                    s.label(),
                    s.days.len(),
                    s.total_profit,
                    s.avg_daily_profit,
                    s.total_cycles,
                    s.negative_profit_days,
                    relative_difference(s.total_profit, base).map(|r| r.to_string()).unwrap_or_default()
                )?;
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown figure id `{other}`; valid ids: {}",
                FIGURES.join(", ")
            )))
        }
    }
    Ok(())
}

/// Solve an MPS file with the built-in solver and write a backend-protocol
/// solution file.
pub fn solve_mps(mps: &Path, sol: &Path, options: &SolverOptions) -> Result<Status, CliError> {
    let inst = import_mps(mps)?;
    let s = solve(&inst, options)?;
    let mut text = format!("status {}\n", s.status);
    if !s.values.is_empty() {
        text.push_str(&format!("objective {}\n", s.objective));
        for (v, x) in inst.variables.iter().zip(&s.values) {
            text.push_str(&format!("{} {}\n", v.name, x));
        }
    }
    std::fs::write(sol, text).map_err(|e| CliError::io(sol, e))?;
    Ok(s.status)
}

pub fn pwl_table(cfg: &AppConfig, out: Out<'_>) -> Result<(), CliError> {
    let rc = cfg.run_config()?;
    let t = PwlTable::build(&rc.battery, rc.n_int, rc.rate_scale)?;
    say!(out, "k,soc,upper,lower")?;
    for k in 0..=t.n_int() {
        say!(
            out,
            "{k},{},{},{}",
            arb_core::pwl::cut_point(k, t.n_int()),
            t.upper()[k],
            t.lower()[k]
        )?;
    }
    Ok(())
}
