//! Rolling daily backtests.
//!
//! A run walks a date range one day at a time: plan on forecast (MILP-P) or
//! realized (MILP-O) prices, settle the schedule against realized prices,
//! then fade the battery by the energy it moved.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use arb_milp::{solve, solve_via_backend, BackendConfig, Solution, SolverOptions, Status};
use chrono::{Duration, NaiveDate};

use crate::battery::{update_degradation, BatteryConfig, BatteryState};
use crate::exec::Exec;
use crate::model::{
    build_milp, extract_schedule, schedule_profit, AvailabilityBounds, DayProblem,
    GridCostSchedule, Schedule, DEFAULT_EPSILON,
};
use crate::prices::{forecast, mae, DayPrices, PriceSeries};
use crate::pwl::{PwlTable, DEFAULT_INTERVALS};
use crate::{ArbError, Result, HOURS};

/// Days with realized profit below `-NEG_PROFIT_TOL` EUR count as losses.
pub const NEG_PROFIT_TOL: f64 = 1e-6;
/// Relative slack of the dominance audit.
pub const AUDIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    /// Plan on rolling-mean forecasts.
    Predictive,
    /// Plan on the realized prices.
    Oracle,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Predictive => "milp-p",
            Mode::Oracle => "milp-o",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = ArbError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "milp-p" | "p" | "predictive" => Ok(Mode::Predictive),
            "milp-o" | "o" | "oracle" => Ok(Mode::Oracle),
            _ => Err(ArbError::Validation(format!(
                "unknown mode {s:?} (expected milp-p or milp-o)"
            ))),
        }
    }
}

/// What MILP-P does on days without a full forecast window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistoryPolicy {
    /// The first `window` days of the range only feed the forecast.
    #[default]
    Consume,
    /// Trade from the first day with whatever history exists (at least one day).
    Shrink,
}

impl FromStr for HistoryPolicy {
    type Err = ArbError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consume" => Ok(HistoryPolicy::Consume),
            "shrink" => Ok(HistoryPolicy::Shrink),
            _ => Err(ArbError::Validation(format!(
                "unknown history policy {s:?} (expected consume or shrink)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverChoice {
    BuiltIn(SolverOptions),
    Backend(BackendConfig),
}

impl Default for SolverChoice {
    fn default() -> Self {
        SolverChoice::BuiltIn(SolverOptions::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    /// Forecast window `l`, days.
    pub window: usize,
    pub history: HistoryPolicy,
    pub n_int: usize,
    /// First and last day, inclusive.
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub battery: BatteryConfig,
    pub grid: GridCostSchedule,
    pub bounds: AvailabilityBounds,
    pub rate_scale: f64,
    pub degradation: bool,
    /// Activity threshold, Wh.
    pub epsilon: f64,
    pub solver: SolverChoice,
}

impl RunConfig {
    /// Reference setup: 1 MWh, 99%, 4000 cycles, 5 EUR/MWh grid cost, empty at
    /// midnight, five intervals.
    pub fn new(mode: Mode, window: usize, start: NaiveDate, end: NaiveDate) -> Self {
        RunConfig {
            mode,
            window,
            history: HistoryPolicy::Consume,
            n_int: DEFAULT_INTERVALS,
            start,
            end,
            battery: BatteryConfig::default(),
            grid: GridCostSchedule::flat(HOURS, 5.0, 0.0),
            bounds: AvailabilityBounds::empty_at_end(HOURS),
            rate_scale: 1.0,
            degradation: true,
            epsilon: DEFAULT_EPSILON,
            solver: SolverChoice::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == Mode::Predictive && self.window == 0 {
            return Err(ArbError::Validation("window l must be at least 1 for milp-p".into()));
        }
        if self.n_int == 0 {
            return Err(ArbError::Validation("n_int must be at least 1".into()));
        }
        if self.end < self.start {
            return Err(ArbError::Validation(format!(
                "empty date range {}..={}",
                self.start, self.end
            )));
        }
        if !(self.rate_scale > 0.0 && self.rate_scale.is_finite()) {
            return Err(ArbError::Validation("rate_scale must be positive".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(ArbError::Validation("epsilon must be positive".into()));
        }
        self.battery.validate()?;
        self.grid.validate(HOURS)?;
        self.bounds.validate(HOURS)?;
        Ok(())
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        let n = (self.end - self.start).num_days();
        (0..=n).map(move |k| self.start + Duration::days(k))
    }

    /// The window recorded in results; MILP-O has none.
    pub fn reported_window(&self) -> Option<usize> {
        (self.mode == Mode::Predictive).then_some(self.window)
    }

    fn degradation_model(&self) -> BatteryConfig {
        let mut b = self.battery.clone();
        if !self.degradation {
            b.cycle_max = f64::INFINITY;
        }
        b
    }
}

/// Outcome of one traded day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayResult {
    pub date: NaiveDate,
    pub schedule: Schedule,
    /// Profit the planner expected (on the prices it planned with), EUR.
    pub forecast_profit: f64,
    /// Profit settled at realized prices, EUR.
    pub realized_profit: f64,
    /// Forecast error, EUR/MWh; MILP-P only.
    pub mae: Option<f64>,
    /// `sum |E(h)| / (2 Q0)`.
    pub cycles_used: f64,
    pub q_start: f64,
    pub eta_start: f64,
    pub nodes: usize,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mode: Mode,
    pub window: Option<usize>,
    pub days: Vec<DayResult>,
    pub total_profit: f64,
    pub avg_daily_profit: f64,
    pub total_cycles: f64,
    pub negative_profit_days: usize,
    pub mean_mae: Option<f64>,
}

impl RunSummary {
    /// Aggregate per-day results.
    pub fn from_days(mode: Mode, window: Option<usize>, days: Vec<DayResult>) -> Self {
        let total_profit: f64 = days.iter().map(|d| d.realized_profit).sum();
        let avg_daily_profit = if days.is_empty() {
            0.0
        } else {
            total_profit / days.len() as f64
        };
        let total_cycles = days.iter().map(|d| d.cycles_used).sum();
        let negative_profit_days = days
            .iter()
            .filter(|d| d.realized_profit < -NEG_PROFIT_TOL)
            .count();
        let maes: Vec<f64> = days.iter().filter_map(|d| d.mae).collect();
        let mean_mae = (!maes.is_empty()).then(|| maes.iter().sum::<f64>() / maes.len() as f64);
        RunSummary {
            mode,
            window,
            days,
            total_profit,
            avg_daily_profit,
            total_cycles,
            negative_profit_days,
            mean_mae,
        }
    }

    pub fn label(&self) -> String {
        match self.window {
            Some(l) => format!("{}(l={l})", self.mode),
            None => self.mode.to_string(),
        }
    }

    pub fn median_solve_seconds(&self) -> Option<f64> {
        let mut t: Vec<f64> = self.days.iter().map(|d| d.solve_seconds).collect();
        if t.is_empty() {
            return None;
        }
        t.sort_by(f64::total_cmp);
        let n = t.len();
        Some(if n % 2 == 1 {
            t[n / 2]
        } else {
            0.5 * (t[n / 2 - 1] + t[n / 2])
        })
    }
}

/// Build the day problem a run would solve on `date` with `prices`, from
/// battery state `(q, eta)`.
pub fn day_problem(cfg: &RunConfig, table: &PwlTable, prices: &DayPrices, q: f64, eta: f64) -> DayProblem {
    DayProblem::from_day_prices(
        prices,
        cfg.grid.clone(),
        cfg.bounds.clone(),
        table.clone(),
        q,
        eta,
        cfg.battery.e_init.min(q),
        cfg.battery.q0,
        cfg.epsilon,
    )
}

/// Solve one day problem with the configured solver.
pub fn solve_day(problem: &DayProblem, solver: &SolverChoice) -> Result<(Schedule, Solution)> {
    let milp = build_milp(problem)?;
    let date = problem.date;
    let solution = match solver {
        SolverChoice::BuiltIn(opts) => solve(&milp.instance, opts),
        SolverChoice::Backend(b) => solve_via_backend(&milp.instance, b),
    }
    .map_err(|source| ArbError::Solver { date, source })?;
    match solution.status {
        Status::Optimal | Status::Feasible => {}
        Status::LimitReached if !solution.values.is_empty() => {}
        status => return Err(ArbError::SolverStatus { date, status }),
    }
    let schedule = extract_schedule(problem, &milp, &solution)?;
    Ok((schedule, solution))
}

/// Which prices the planner sees on `date`, or `None` for a history day.
fn planning_prices(cfg: &RunConfig, series: &PriceSeries, date: NaiveDate) -> Result<Option<DayPrices>> {
    match cfg.mode {
        Mode::Oracle => Ok(Some(actual(series, date)?)),
        Mode::Predictive => {
            let window = match cfg.history {
                HistoryPolicy::Consume => {
                    if (date - cfg.start).num_days() < cfg.window as i64 {
                        return Ok(None);
                    }
                    cfg.window
                }
                HistoryPolicy::Shrink => {
                    let first = series.first_day().expect("series checked nonempty");
                    let available = (date - first).num_days().max(0) as usize;
                    if available == 0 {
                        return Ok(None);
                    }
                    cfg.window.min(available)
                }
            };
            forecast(series, date, window).map(Some)
        }
    }
}

fn actual(series: &PriceSeries, date: NaiveDate) -> Result<DayPrices> {
    series
        .actual(date)
        .ok_or_else(|| ArbError::Data(format!("no prices for {date}")))
}

/// Run a backtest. Days are strictly sequential: each day starts from the
/// battery state the previous day left.
pub fn run(cfg: &RunConfig, series: &PriceSeries) -> Result<RunSummary> {
    cfg.validate()?;
    if series.is_empty() {
        return Err(ArbError::Data("empty price series".into()));
    }
    for date in [cfg.start, cfg.end] {
        actual(series, date)?;
    }
    let table = PwlTable::build(&cfg.battery, cfg.n_int, cfg.rate_scale)?;
    let fade = cfg.degradation_model();
    let mut state = BatteryState::initial(&cfg.battery);
    let mut days = Vec::new();
    for date in cfg.dates() {
        let Some(plan) = planning_prices(cfg, series, date)? else {
            continue;
        };
        let realized = actual(series, date)?;
        let problem = day_problem(cfg, &table, &plan, state.q, state.eta);
        let started = Instant::now();
        let (schedule, solution) = solve_day(&problem, &cfg.solver)?;
        let solve_seconds = started.elapsed().as_secs_f64();
        let realized_profit = schedule_profit(
            &schedule,
            &realized.values,
            state.eta,
            &cfg.grid,
            cfg.epsilon,
        );
        let forecast_profit = -solution.objective;
        let e_day = schedule.energy_exchanged();
        days.push(DayResult {
            date,
            forecast_profit,
            realized_profit,
            mae: match cfg.mode {
                Mode::Predictive => Some(mae(&plan, &realized)?),
                Mode::Oracle => None,
            },
            cycles_used: e_day / (2.0 * cfg.battery.q0),
            q_start: state.q,
            eta_start: state.eta,
            nodes: solution.stats.nodes,
            solve_seconds,
            schedule,
        });
        state = update_degradation(&state, &fade, e_day)?;
    }
    Ok(RunSummary::from_days(cfg.mode, cfg.reported_window(), days))
}

/// Run independent configurations, keeping input order.
pub fn run_many(configs: &[RunConfig], series: &PriceSeries, exec: Exec) -> Vec<Result<RunSummary>> {
    exec.map(configs, |cfg| run(cfg, series))
}

/// One re-solved day of the dominance audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditDay {
    pub date: NaiveDate,
    /// MILP-P realized profit.
    pub predictive: f64,
    /// MILP-O optimum at MILP-P's battery state.
    pub oracle: f64,
    pub holds: bool,
}

/// Inputs for re-solving MILP-O on sampled MILP-P days.
#[derive(Debug, Clone, Copy)]
pub struct AuditSpec<'a> {
    /// The configuration the MILP-P run used.
    pub config: &'a RunConfig,
    pub series: &'a PriceSeries,
    /// Days to sample, spread evenly over the run.
    pub days: usize,
    pub exec: Exec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayComparison {
    pub date: NaiveDate,
    pub predictive: f64,
    pub oracle: f64,
    /// `(p - o) / |o|`; `None` when the oracle made nothing.
    pub relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub predictive_label: String,
    pub oracle_label: String,
    /// Totals over the dates both runs traded.
    pub predictive_total: f64,
    pub oracle_total: f64,
    /// `(p_total - o_total) / |o_total|`.
    pub relative_difference: f64,
    pub per_day: Vec<DayComparison>,
    pub predictive_cycles: f64,
    /// MILP-O cycles on the common dates only.
    pub oracle_cycles_common: f64,
    /// MILP-O cycles over its whole range.
    pub oracle_cycles_full: f64,
    pub audit: Vec<AuditDay>,
}

impl ComparisonReport {
    pub fn audit_passed(&self) -> bool {
        self.audit.iter().all(|a| a.holds)
    }
}

/// `(a - b) / |b|`, or `None` when `b` is zero.
pub fn relative_difference(a: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| (a - b) / b.abs())
}

/// Compare a predictive run against an oracle run on their common dates,
/// optionally auditing dominance on sampled days.
pub fn compare(p_run: &RunSummary, o_run: &RunSummary, audit: Option<AuditSpec<'_>>) -> Result<ComparisonReport> {
    let o_by_date: BTreeMap<NaiveDate, &DayResult> = o_run.days.iter().map(|d| (d.date, d)).collect();
    let mut per_day = Vec::with_capacity(p_run.days.len());
    let mut oracle_cycles_common = 0.0;
    for p in &p_run.days {
        let o = o_by_date.get(&p.date).ok_or_else(|| {
            ArbError::Validation(format!(
                "{} has {} but {} does not",
                p_run.label(),
                p.date,
                o_run.label()
            ))
        })?;
        oracle_cycles_common += o.cycles_used;
        per_day.push(DayComparison {
            date: p.date,
            predictive: p.realized_profit,
            oracle: o.realized_profit,
            relative: relative_difference(p.realized_profit, o.realized_profit),
        });
    }
    if per_day.is_empty() && !o_run.days.is_empty() {
        return Err(ArbError::Validation("runs share no dates".into()));
    }
    let predictive_total: f64 = per_day.iter().map(|d| d.predictive).sum();
    let oracle_total: f64 = per_day.iter().map(|d| d.oracle).sum();
    let audit = match audit {
        Some(spec) => audit_dominance(p_run, spec)?,
        None => Vec::new(),
    };
    Ok(ComparisonReport {
        predictive_label: p_run.label(),
        oracle_label: o_run.label(),
        predictive_total,
        oracle_total,
        relative_difference: relative_difference(predictive_total, oracle_total).unwrap_or(0.0),
        per_day,
        predictive_cycles: p_run.total_cycles,
        oracle_cycles_common,
        oracle_cycles_full: o_run.total_cycles,
        audit,
    })
}

/// Evenly spaced sample of `k` indices out of `n`.
fn spread(n: usize, k: usize) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    (0..k).map(|i| i * n / k).collect()
}

/// Re-solve MILP-O at MILP-P's battery state on sampled days and check the
/// realized MILP-P profit never beats it.
pub fn audit_dominance(p_run: &RunSummary, spec: AuditSpec<'_>) -> Result<Vec<AuditDay>> {
    let cfg = spec.config;
    let table = PwlTable::build(&cfg.battery, cfg.n_int, cfg.rate_scale)?;
    let picks: Vec<&DayResult> = spread(p_run.days.len(), spec.days)
        .into_iter()
        .map(|i| &p_run.days[i])
        .collect();
    spec.exec
        .map(&picks, |day| {
            let prices = actual(spec.series, day.date)?;
            let problem = day_problem(cfg, &table, &prices, day.q_start, day.eta_start);
            let (_, sol) = solve_day(&problem, &cfg.solver)?;
            let oracle = -sol.objective;
            let slack = AUDIT_TOL * oracle.abs().max(1.0);
            Ok(AuditDay {
                date: day.date,
                predictive: day.realized_profit,
                oracle,
                holds: day.realized_profit <= oracle + slack,
            })
        })
        .into_iter()
        .collect()
}

const RESULT_HEADER: [&str; 9] = [
    "date",
    "mode",
    "l",
    "forecast_profit_eur",
    "realized_profit_eur",
    "mae_eur_mwh",
    "cycles_used",
    "q_wh",
    "eta",
];

fn hour_column(h: usize) -> String {
    format!("e_h{h:02}")
}

fn opt_field<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write per-day results. The documented columns come first, then the
/// hourly set points and node count. Wall-clock times go to
/// [`emit_timings`] so this file is reproducible byte for byte.
pub fn emit_results(summary: &RunSummary, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ArbError::csv(path, e))?;
    let mut header: Vec<String> = RESULT_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend((0..HOURS).map(hour_column));
    header.push("nodes".into());
    w.write_record(&header).map_err(|e| ArbError::csv(path, e))?;
    for d in &summary.days {
        let mut rec = vec![
            d.date.to_string(),
            summary.mode.to_string(),
            opt_field(summary.window),
            d.forecast_profit.to_string(),
            d.realized_profit.to_string(),
            opt_field(d.mae),
            d.cycles_used.to_string(),
            d.q_start.to_string(),
            d.eta_start.to_string(),
        ];
        if d.schedule.energy.len() != HOURS {
            return Err(ArbError::Validation(format!(
                "{}: schedule has {} hours",
                d.date,
                d.schedule.energy.len()
            )));
        }
        rec.extend(d.schedule.energy.iter().map(|e| e.to_string()));
        rec.push(d.nodes.to_string());
        w.write_record(&rec).map_err(|e| ArbError::csv(path, e))?;
    }
    w.flush().map_err(|e| ArbError::io(path, e))
}

/// Per-day solve times: `date,nodes,solve_seconds`.
pub fn emit_timings(summary: &RunSummary, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ArbError::csv(path, e))?;
    w.write_record(["date", "nodes", "solve_seconds"])
        .map_err(|e| ArbError::csv(path, e))?;
    for d in &summary.days {
        w.write_record([d.date.to_string(), d.nodes.to_string(), d.solve_seconds.to_string()])
            .map_err(|e| ArbError::csv(path, e))?;
    }
    w.flush().map_err(|e| ArbError::io(path, e))
}

/// Read a results file written by [`emit_results`]. An empty file yields
/// an empty summary in `fallback_mode`. Solve times read as zero unless a
/// `solve_seconds` column is present.
pub fn load_results(path: &Path, fallback_mode: Mode) -> Result<RunSummary> {
    let mut r = csv::Reader::from_path(path).map_err(|e| ArbError::csv(path, e))?;
    let headers = r.headers().map_err(|e| ArbError::csv(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ArbError::Data(format!("{}: missing column {name}", path.display())))
    };
    let idx: Vec<usize> = RESULT_HEADER.iter().map(|h| col(h)).collect::<Result<_>>()?;
    let hour_idx: Vec<usize> = (0..HOURS).map(|h| col(&hour_column(h))).collect::<Result<_>>()?;
    let nodes_idx = col("nodes")?;
    let secs_idx = col("solve_seconds").ok();

    let mut mode_window: Option<(Mode, Option<usize>)> = None;
    let mut days = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| ArbError::csv(path, e))?;
        let bad = |what: &str| ArbError::Data(format!("{}: row {}: bad {what}", path.display(), line + 2));
        let num = |i: usize, what: &str| -> Result<f64> { rec[i].parse::<f64>().map_err(|_| bad(what)) };
        let date: NaiveDate = rec[idx[0]].parse().map_err(|_| bad("date"))?;
        let mode: Mode = rec[idx[1]].parse()?;
        let window = match &rec[idx[2]] {
            "" => None,
            s => Some(s.parse::<usize>().map_err(|_| bad("l"))?),
        };
        match mode_window {
            None => mode_window = Some((mode, window)),
            Some(mw) if mw != (mode, window) => {
                return Err(ArbError::Data(format!(
                    "{}: rows from more than one run",
                    path.display()
                )));
            }
            Some(_) => {}
        }
        let energy = hour_idx
            .iter()
            .map(|&i| num(i, "hourly energy"))
            .collect::<Result<Vec<_>>>()?;
        days.push(DayResult {
            date,
            schedule: Schedule { date, energy },
            forecast_profit: num(idx[3], "forecast profit")?,
            realized_profit: num(idx[4], "realized profit")?,
            mae: match &rec[idx[5]] {
                "" => None,
                _ => Some(num(idx[5], "mae")?),
            },
            cycles_used: num(idx[6], "cycles")?,
            q_start: num(idx[7], "q")?,
            eta_start: num(idx[8], "eta")?,
            nodes: rec[nodes_idx].parse().map_err(|_| bad("nodes"))?,
            solve_seconds: match secs_idx {
                Some(i) => num(i, "solve time")?,
                None => 0.0,
            },
        });
    }
    let (mode, window) = mode_window.unwrap_or((fallback_mode, None));
    Ok(RunSummary::from_days(mode, window, days))
}

/// One row per run: label, day count and the headline metrics.
pub fn write_summary_csv(summaries: &[RunSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ArbError::csv(path, e))?;
    w.write_record([
        "mode",
        "l",
        "days",
        "total_profit_eur",
        "avg_daily_profit_eur",
        "total_cycles",
        "negative_profit_days",
        "mean_mae_eur_mwh",
    ])
    .map_err(|e| ArbError::csv(path, e))?;
    for s in summaries {
        w.write_record([
            s.mode.to_string(),
            opt_field(s.window),
            s.days.len().to_string(),
            s.total_profit.to_string(),
            s.avg_daily_profit.to_string(),
            s.total_cycles.to_string(),
            s.negative_profit_days.to_string(),
            opt_field(s.mean_mae),
        ])
        .map_err(|e| ArbError::csv(path, e))?;
    }
    w.flush().map_err(|e| ArbError::io(path, e))
}
