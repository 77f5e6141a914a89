//! One day's scheduling MILP: construction, schedule extraction, profit.
//!
//! Per hour `h` the model carries the energy change `E(h)` (Wh, positive =
//! charge), its positive and negative parts, a direction binary `y(h)`, an
//! activity binary `z(h)`, and per PWL interval `k` the convex-combination
//! weights `lambda`, `mu` with interval selector `y_k`. The SOC at hour `h`
//! is the linear expression `(E_init + sum_{t<h} E(t)) / Q`.

use arb_milp::{MilpInstance, Relation, Solution};
use chrono::NaiveDate;

use crate::battery::soc_trajectory;
use crate::prices::DayPrices;
use crate::pwl::PwlTable;
use crate::{ArbError, Result, PER_MWH_TO_PER_WH};

/// Default activity threshold, Wh.
pub const DEFAULT_EPSILON: f64 = 0.01;
/// Relative tolerance (fraction of capacity) for post-solve checks.
pub const CHECK_TOL: f64 = 1e-6;

/// Variable (EUR/Wh) and fixed (EUR per active hour) grid costs.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCostSchedule {
    pub vgc: Vec<f64>,
    pub fgc: Vec<f64>,
}

impl GridCostSchedule {
    /// Same costs every hour; `vgc_eur_mwh` is converted to EUR/Wh.
    pub fn flat(hours: usize, vgc_eur_mwh: f64, fgc_eur: f64) -> Self {
        GridCostSchedule {
            vgc: vec![vgc_eur_mwh * PER_MWH_TO_PER_WH; hours],
            fgc: vec![fgc_eur; hours],
        }
    }

    pub fn validate(&self, hours: usize) -> Result<()> {
        if self.vgc.len() != hours || self.fgc.len() != hours {
            return Err(ArbError::Validation(format!(
                "grid costs must have {hours} hourly values"
            )));
        }
        if self
            .vgc
            .iter()
            .chain(&self.fgc)
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(ArbError::Validation(
                "grid costs must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// SOC bounds at the end of each hour (hours 1..=H).
#[derive(Debug, Clone, PartialEq)]
pub struct AvailabilityBounds {
    pub soc_min: Vec<f64>,
    pub soc_max: Vec<f64>,
}

impl AvailabilityBounds {
    /// Free SOC during the day, empty at the end.
    pub fn empty_at_end(hours: usize) -> Self {
        let mut soc_max = vec![1.0; hours];
        soc_max[hours - 1] = 0.0;
        AvailabilityBounds {
            soc_min: vec![0.0; hours],
            soc_max,
        }
    }

    pub fn unrestricted(hours: usize) -> Self {
        AvailabilityBounds {
            soc_min: vec![0.0; hours],
            soc_max: vec![1.0; hours],
        }
    }

    pub fn validate(&self, hours: usize) -> Result<()> {
        if self.soc_min.len() != hours || self.soc_max.len() != hours {
            return Err(ArbError::Validation(format!(
                "availability bounds must have {hours} hourly values"
            )));
        }
        for h in 0..hours {
            let (lo, hi) = (self.soc_min[h], self.soc_max[h]);
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return Err(ArbError::Validation(format!(
                    "infeasible availability bounds at hour {}: [{lo}, {hi}]",
                    h + 1
                )));
            }
        }
        Ok(())
    }
}

/// Everything needed to schedule one day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayProblem {
    pub date: NaiveDate,
    /// Prices used for planning, EUR/MWh; one per hour.
    pub prices: Vec<f64>,
    pub grid: GridCostSchedule,
    pub bounds: AvailabilityBounds,
    pub table: PwlTable,
    /// Today's capacity, Wh.
    pub q: f64,
    pub eta: f64,
    pub e_init: f64,
    pub big_m: f64,
    pub epsilon: f64,
}

impl DayProblem {
    pub fn from_day_prices(
        prices: &DayPrices,
        grid: GridCostSchedule,
        bounds: AvailabilityBounds,
        table: PwlTable,
        q: f64,
        eta: f64,
        e_init: f64,
        big_m: f64,
        epsilon: f64,
    ) -> Self {
        DayProblem {
            date: prices.date,
            prices: prices.values.to_vec(),
            grid,
            bounds,
            table,
            q,
            eta,
            e_init,
            big_m,
            epsilon,
        }
    }

    pub fn hours(&self) -> usize {
        self.prices.len()
    }

    pub fn validate(&self) -> Result<()> {
        let hours = self.hours();
        if hours == 0 {
            return Err(ArbError::Validation("day problem has no hours".into()));
        }
        if self.prices.iter().any(|p| !p.is_finite()) {
            return Err(ArbError::Validation("non-finite price".into()));
        }
        self.grid.validate(hours)?;
        self.bounds.validate(hours)?;
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(ArbError::Validation("capacity must be positive".into()));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(ArbError::Validation("efficiency must lie in (0, 1]".into()));
        }
        if !(0.0 <= self.e_init && self.e_init <= self.q) {
            return Err(ArbError::Validation("e_init must lie in [0, Q]".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(ArbError::Validation("epsilon must be positive".into()));
        }
        if !(self.big_m >= self.q) {
            return Err(ArbError::Validation("big-M must be at least Q".into()));
        }
        Ok(())
    }
}

/// Hourly energy set points, Wh (positive = charge).
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub date: NaiveDate,
    pub energy: Vec<f64>,
}

impl Schedule {
    pub fn zeros(date: NaiveDate, hours: usize) -> Self {
        Schedule {
            date,
            energy: vec![0.0; hours],
        }
    }

    /// Sum of |E(h)|, Wh.
    pub fn energy_exchanged(&self) -> f64 {
        self.energy.iter().map(|e| e.abs()).sum()
    }
}

/// Column indices of one hour's variables.
#[derive(Debug, Clone, PartialEq)]
pub struct HourVars {
    pub e: usize,
    pub e_plus: usize,
    pub e_minus: usize,
    pub y: usize,
    pub z: usize,
    pub lambda: Vec<usize>,
    pub mu: Vec<usize>,
    pub y_k: Vec<usize>,
}

/// A built day instance together with its variable map.
#[derive(Debug, Clone)]
pub struct DayMilp {
    pub instance: MilpInstance,
    pub hours: Vec<HourVars>,
}

/// Branching class of the direction and activity binaries.
const PRIORITY_SWITCH: u32 = 1;
const PRIORITY_INTERVAL: u32 = 0;

pub fn build_milp(problem: &DayProblem) -> Result<DayMilp> {
    problem.validate()?;
    let hours = problem.hours();
    let n = problem.table.n_int();
    let nf = n as f64;
    let q = problem.q;
    let m = problem.big_m;
    let mut inst = MilpInstance::new(format!("day_{}", problem.date));

    let mut vars = Vec::with_capacity(hours);
    for h in 0..hours {
        let e = inst.add_continuous(format!("E_{h}"), f64::NEG_INFINITY, f64::INFINITY);
        let e_plus = inst.add_continuous(format!("Ep_{h}"), 0.0, f64::INFINITY);
        let e_minus = inst.add_continuous(format!("Em_{h}"), 0.0, f64::INFINITY);
        let y = inst.add_binary(format!("y_{h}"), PRIORITY_SWITCH);
        let z = inst.add_binary(format!("z_{h}"), PRIORITY_SWITCH);
        let mut lambda = Vec::with_capacity(n);
        let mut mu = Vec::with_capacity(n);
        let mut y_k = Vec::with_capacity(n);
        for k in 1..=n {
            lambda.push(inst.add_continuous(format!("lam_{h}_{k}"), 0.0, 1.0));
            mu.push(inst.add_continuous(format!("mu_{h}_{k}"), 0.0, 1.0));
            y_k.push(inst.add_binary(format!("yk_{h}_{k}"), PRIORITY_INTERVAL));
        }
        vars.push(HourVars {
            e,
            e_plus,
            e_minus,
            y,
            z,
            lambda,
            mu,
            y_k,
        });
    }

    let upper = problem.table.upper();
    let lower = problem.table.lower();
    for h in 0..hours {
        let v = &vars[h];
        // Convex-combination weights reproduce SOC(h).
        let mut row = Vec::with_capacity(2 * n + h);
        for k in 1..=n {
            if k > 1 {
                row.push((v.lambda[k - 1], (k - 1) as f64 / nf));
            }
            row.push((v.mu[k - 1], k as f64 / nf));
        }
        row.extend(vars[..h].iter().map(|w| (w.e, -1.0 / q)));
        inst.add_constraint(format!("soc_{h}"), row, Relation::Eq, problem.e_init / q);
        for k in 0..n {
            inst.add_constraint(
                format!("cvx_{h}_{}", k + 1),
                vec![(v.lambda[k], 1.0), (v.mu[k], 1.0), (v.y_k[k], -1.0)],
                Relation::Eq,
                0.0,
            );
        }
        inst.add_constraint(
            format!("one_{h}"),
            v.y_k.iter().map(|&j| (j, 1.0)).collect(),
            Relation::Eq,
            1.0,
        );
        // Reach limits at the interpolated SOC.
        let mut up_row = vec![(v.e, 1.0)];
        let mut lo_row = vec![(v.e, 1.0)];
        for k in 1..=n {
            push_nonzero(&mut up_row, v.lambda[k - 1], -q * upper[k - 1]);
            push_nonzero(&mut up_row, v.mu[k - 1], -q * upper[k]);
            push_nonzero(&mut lo_row, v.lambda[k - 1], -q * lower[k - 1]);
            push_nonzero(&mut lo_row, v.mu[k - 1], -q * lower[k]);
        }
        inst.add_constraint(format!("ub_{h}"), up_row, Relation::Le, 0.0);
        inst.add_constraint(format!("lb_{h}"), lo_row, Relation::Ge, 0.0);
        // Split into charge and discharge parts with direction and activity.
        inst.add_constraint(
            format!("spl_{h}"),
            vec![(v.e_plus, 1.0), (v.e_minus, -1.0), (v.e, -1.0)],
            Relation::Eq,
            0.0,
        );
        inst.add_constraint(
            format!("pos_{h}"),
            vec![(v.e_plus, 1.0), (v.y, -m)],
            Relation::Le,
            0.0,
        );
        inst.add_constraint(
            format!("neg_{h}"),
            vec![(v.e_minus, 1.0), (v.y, m)],
            Relation::Le,
            m,
        );
        inst.add_constraint(
            format!("alo_{h}"),
            vec![(v.e_plus, 1.0), (v.e_minus, 1.0), (v.z, -problem.epsilon)],
            Relation::Ge,
            0.0,
        );
        inst.add_constraint(
            format!("ahi_{h}"),
            vec![(v.e_plus, 1.0), (v.e_minus, 1.0), (v.z, -m)],
            Relation::Le,
            0.0,
        );
        // Availability of SOC(h + 1).
        let cum: Vec<(usize, f64)> = vars[..=h].iter().map(|w| (w.e, 1.0 / q)).collect();
        let base = problem.e_init / q;
        inst.add_constraint(
            format!("smin_{}", h + 1),
            cum.clone(),
            Relation::Ge,
            problem.bounds.soc_min[h] - base,
        );
        inst.add_constraint(
            format!("smax_{}", h + 1),
            cum,
            Relation::Le,
            problem.bounds.soc_max[h] - base,
        );
    }

    for h in 0..hours {
        let v = &vars[h];
        let p = problem.prices[h] * PER_MWH_TO_PER_WH;
        let vgc = problem.grid.vgc[h];
        let eta = problem.eta;
        inst.set_objective(v.e_plus, p + vgc);
        inst.set_objective(v.e_minus, -eta * p + eta * vgc);
        if problem.grid.fgc[h] != 0.0 {
            inst.set_objective(v.z, problem.grid.fgc[h]);
        }
    }
    Ok(DayMilp {
        instance: inst,
        hours: vars,
    })
}

fn push_nonzero(row: &mut Vec<(usize, f64)>, j: usize, a: f64) {
    if a != 0.0 {
        row.push((j, a));
    }
}

/// Read the schedule out of a solved day instance and check it against the
/// problem: complementarity, activity linking, SOC bounds and reach limits
/// at the realized SOC.
pub fn extract_schedule(problem: &DayProblem, milp: &DayMilp, solution: &Solution) -> Result<Schedule> {
    if solution.values.len() != milp.instance.variables.len() {
        return Err(ArbError::Invariant(format!(
            "{}: solution has no assignment (status {})",
            problem.date, solution.status
        )));
    }
    let q = problem.q;
    let tol = CHECK_TOL * q;
    let x = &solution.values;
    let energy: Vec<f64> = milp.hours.iter().map(|v| x[v.e]).collect();
    let fail = |msg: String| Err(ArbError::Invariant(format!("{}: {msg}", problem.date)));
    for (h, v) in milp.hours.iter().enumerate() {
        let (ep, em) = (x[v.e_plus], x[v.e_minus]);
        if ep.min(em) > tol {
            return fail(format!("hour {h}: charge {ep} and discharge {em} both active"));
        }
        if (ep - em - energy[h]).abs() > tol {
            return fail(format!("hour {h}: split {ep} - {em} != {}", energy[h]));
        }
        let active = ep + em;
        if x[v.z] > 0.5 && active < problem.epsilon - tol {
            return fail(format!("hour {h}: z = 1 with activity {active}"));
        }
        if x[v.z] < 0.5 && active > tol {
            return fail(format!("hour {h}: z = 0 with activity {active}"));
        }
    }
    let schedule = Schedule {
        date: problem.date,
        energy,
    };
    check_schedule(problem, &schedule)?;
    Ok(schedule)
}

/// Verify SOC bounds and reach limits of `schedule` for `problem`.
pub fn check_schedule(problem: &DayProblem, schedule: &Schedule) -> Result<()> {
    let q = problem.q;
    let soc = soc_trajectory(problem.e_init, &schedule.energy, q);
    for (h, &e) in schedule.energy.iter().enumerate() {
        let s = soc[h + 1];
        if s < problem.bounds.soc_min[h] - CHECK_TOL || s > problem.bounds.soc_max[h] + CHECK_TOL {
            return Err(ArbError::Invariant(format!(
                "{}: SOC({}) = {s} outside [{}, {}]",
                problem.date,
                h + 1,
                problem.bounds.soc_min[h],
                problem.bounds.soc_max[h]
            )));
        }
        let (up, lo) = problem.table.eval(soc[h]);
        if e > q * up + CHECK_TOL * q || e < q * lo - CHECK_TOL * q {
            return Err(ArbError::Invariant(format!(
                "{}: E({h}) = {e} outside [{}, {}] at SOC {}",
                problem.date,
                q * lo,
                q * up,
                soc[h]
            )));
        }
    }
    Ok(())
}

/// Profit in EUR of executing `schedule` at `prices` (EUR/MWh): energy sold
/// earns `eta * (p - vgc)` per Wh discharged, energy bought costs `p + vgc`
/// per Wh charged, and every hour with `|E| >= epsilon` pays `fgc`.
pub fn schedule_profit(
    schedule: &Schedule,
    prices: &[f64],
    eta: f64,
    grid: &GridCostSchedule,
    epsilon: f64,
) -> f64 {
    schedule
        .energy
        .iter()
        .enumerate()
        .map(|(h, &e)| hour_profit(e, prices[h], eta, grid.vgc[h], grid.fgc[h], epsilon))
        .sum()
}

/// One hour's term of [`schedule_profit`]; `price` in EUR/MWh, `vgc` in EUR/Wh.
pub fn hour_profit(e: f64, price: f64, eta: f64, vgc: f64, fgc: f64, epsilon: f64) -> f64 {
    let p = price * PER_MWH_TO_PER_WH;
    let (ep, em) = (e.max(0.0), (-e).max(0.0));
    let fixed = if e.abs() >= epsilon * (1.0 - 1e-6) { fgc } else { 0.0 };
    eta * em * (p - vgc) - ep * (p + vgc) - fixed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::{BatteryConfig, RateCurve};
    use arb_milp::{solve, SolverOptions, Status};

    fn date() -> NaiveDate {
        "2022-06-01".parse().unwrap()
    }

    fn constant_table(rate: f64, n: usize) -> PwlTable {
        let cfg = BatteryConfig {
            charge_curve: RateCurve::constant(rate).unwrap(),
            discharge_curve: RateCurve::constant(rate).unwrap(),
            ..BatteryConfig::default()
        };
        PwlTable::build(&cfg, n, 1.0).unwrap()
    }

    fn problem(prices: Vec<f64>, table: PwlTable, vgc: f64, eta: f64) -> DayProblem {
        let hours = prices.len();
        DayProblem {
            date: date(),
            prices,
            grid: GridCostSchedule::flat(hours, vgc, 0.0),
            bounds: AvailabilityBounds::empty_at_end(hours),
            table,
            q: 1e6,
            eta,
            e_init: 0.0,
            big_m: 1e6,
            epsilon: DEFAULT_EPSILON,
        }
    }

    #[test]
    fn variable_and_binary_counts() {
        let p = problem(vec![50.0; 24], PwlTable::build(&BatteryConfig::default(), 5, 1.0).unwrap(), 5.0, 0.99);
        let milp = build_milp(&p).unwrap();
        assert_eq!(milp.instance.variables.len(), 480);
        assert_eq!(milp.instance.num_binaries(), 168);
    }

    #[test]
    fn hand_trade_profit() {
        let mut e = vec![0.0; 24];
        e[0] = 0.5e6;
        e[1] = -0.5e6;
        let s = Schedule {
            date: date(),
            energy: e,
        };
        let mut prices = vec![0.0; 24];
        prices[0] = 10.0;
        prices[1] = 50.0;
        let grid = GridCostSchedule::flat(24, 5.0, 0.0);
        assert!((schedule_profit(&s, &prices, 1.0, &grid, 0.01) - 15.0).abs() < 1e-9);
        assert!((schedule_profit(&s, &prices, 0.99, &grid, 0.01) - 14.775).abs() < 1e-9);
        assert_eq!(schedule_profit(&Schedule::zeros(date(), 24), &prices, 1.0, &grid, 0.01), 0.0);
    }

    #[test]
    fn fixed_cost_charged_on_active_hours() {
        let mut s = Schedule::zeros(date(), 24);
        s.energy[3] = 0.02;
        let mut grid = GridCostSchedule::flat(24, 0.0, 2.0);
        grid.fgc[4] = 100.0;
        let p = schedule_profit(&s, &[0.0; 24], 1.0, &grid, 0.01);
        assert!((p + 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_hour_trade_is_optimal() {
        let mut prices = vec![10.0, 50.0];
        prices.truncate(2);
        let p = problem(prices.clone(), constant_table(0.5, 2), 5.0, 1.0);
        let milp = build_milp(&p).unwrap();
        let sol = solve(&milp.instance, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        let s = extract_schedule(&p, &milp, &sol).unwrap();
        assert!((s.energy[0] - 0.5e6).abs() < 1e-3);
        assert!((s.energy[1] + 0.5e6).abs() < 1e-3);
        let profit = schedule_profit(&s, &prices, 1.0, &p.grid, p.epsilon);
        assert!((profit - 15.0).abs() < 1e-6);
        assert!((profit + sol.objective).abs() < 1e-6 * profit.abs().max(1.0));
    }

    #[test]
    fn closed_battery_forces_zero_schedule() {
        let mut p = problem(vec![10.0, 80.0, 5.0, 90.0], constant_table(0.5, 2), 0.0, 1.0);
        p.bounds.soc_max = vec![0.0; 4];
        let milp = build_milp(&p).unwrap();
        let sol = solve(&milp.instance, &SolverOptions::default()).unwrap();
        let s = extract_schedule(&p, &milp, &sol).unwrap();
        assert!(s.energy.iter().all(|e| e.abs() < 1e-6));
        assert!(sol.objective.abs() < 1e-9);
    }

    #[test]
    fn rejects_inverted_bounds() {
        let mut p = problem(vec![10.0; 4], constant_table(0.5, 2), 0.0, 1.0);
        p.bounds.soc_min[1] = 0.7;
        p.bounds.soc_max[1] = 0.6;
        assert!(matches!(build_milp(&p), Err(ArbError::Validation(_))));
    }

    #[test]
    fn complementarity_violation_detected() {
        let p = problem(vec![10.0, 50.0], constant_table(0.5, 2), 5.0, 1.0);
        let milp = build_milp(&p).unwrap();
        let mut values = vec![0.0; milp.instance.variables.len()];
        let v = &milp.hours[0];
        values[v.e_plus] = 100.0;
        values[v.e_minus] = 100.0;
        values[v.z] = 1.0;
        let fake = Solution {
            status: Status::Optimal,
            values,
            objective: 0.0,
            bound: 0.0,
            gap: 0.0,
            stats: Default::default(),
        };
        assert!(matches!(extract_schedule(&p, &milp, &fake), Err(ArbError::Invariant(_))));
    }
}
