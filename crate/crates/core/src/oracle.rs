//! Exhaustive and dynamic-programming reference solvers for small problems.

use arb_milp::{LpEngine, LpOutcome, MilpInstance, Relation, Solution, SolveStats, Status, VarKind};

use crate::model::{hour_profit, DayProblem, Schedule};
use crate::pwl::cut_point;
use crate::{ArbError, Result};

/// Largest binary count [`enumerate_optimal`] accepts.
pub const MAX_ENUM_BINARIES: usize = 22;

const SCREEN_TOL: f64 = 1e-9;

/// Outcome of exhaustive enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumResult {
    pub status: Status,
    /// Best objective (minimization); `+inf` when infeasible.
    pub objective: f64,
    pub values: Vec<f64>,
    /// LPs solved, over partial and complete assignments.
    pub lps_solved: usize,
}

/// Solve the LP for every binary assignment and keep the best.
///
/// Assignments are walked depth-first in binary index order. A subtree is
/// skipped only when its partial assignment is already infeasible: some
/// row cannot be met with every free variable at its most favourable
/// bound, or the LP with the remaining binaries relaxed is infeasible.
/// No objective bound is ever used to prune.
pub fn enumerate_optimal(instance: &MilpInstance) -> Result<EnumResult> {
    let bins = instance.binary_indices();
    let b = bins.len();
    if b > MAX_ENUM_BINARIES {
        return Err(ArbError::Validation(format!(
            "enumeration supports at most {MAX_ENUM_BINARIES} binaries, instance has {b}"
        )));
    }
    let mut walk = Walk {
        engine: LpEngine::new(instance).map_err(solver_err)?,
        screen: Screen::new(instance, &bins),
        bins,
        assign: vec![0; b],
        best: EnumResult {
            status: Status::Infeasible,
            objective: f64::INFINITY,
            values: Vec::new(),
            lps_solved: 0,
        },
        unbounded: false,
    };
    walk.visit(0)?;
    let mut best = walk.best;
    if walk.unbounded {
        best.status = Status::Unbounded;
        best.objective = f64::NEG_INFINITY;
        best.values.clear();
    }
    Ok(best)
}

fn solver_err(e: arb_milp::MilpError) -> ArbError {
    ArbError::Invariant(format!("enumeration LP failed: {e}"))
}

struct Walk {
    engine: LpEngine,
    screen: Screen,
    bins: Vec<usize>,
    assign: Vec<u8>,
    best: EnumResult,
    unbounded: bool,
}

impl Walk {
    /// Binaries before `depth` are fixed to `assign`, the rest are free.
    fn visit(&mut self, depth: usize) -> Result<()> {
        if self.unbounded || !self.screen.admits(&self.assign, depth) {
            return Ok(());
        }
        let b = self.bins.len();
        for k in 0..b {
            if k < depth {
                let v = f64::from(self.assign[k]);
                self.engine.set_bounds(self.bins[k], v, v);
            } else {
                self.engine.reset_bounds(self.bins[k]);
            }
        }
        self.best.lps_solved += 1;
        let outcome = self.engine.solve().map_err(solver_err)?;
        if outcome == LpOutcome::Infeasible {
            return Ok(());
        }
        if depth == b {
            match outcome {
                LpOutcome::Unbounded => self.unbounded = true,
                _ => {
                    let obj = self.engine.objective();
                    if obj < self.best.objective {
                        self.best.objective = obj;
                        self.best.values = self.engine.values();
                        self.best.status = Status::Optimal;
                    }
                }
            }
            return Ok(());
        }
        for v in [0, 1] {
            self.assign[depth] = v;
            self.visit(depth + 1)?;
        }
        Ok(())
    }
}

impl EnumResult {
    /// View as a solver [`Solution`].
    pub fn to_solution(&self) -> Solution {
        Solution {
            status: self.status,
            values: self.values.clone(),
            objective: self.objective,
            bound: self.objective,
            gap: if self.status == Status::Optimal { 0.0 } else { f64::INFINITY },
            stats: SolveStats::default(),
        }
    }
}

/// Row screening for partial assignments: each row's activity range over
/// the continuous variables, plus the binaries' contribution.
struct Screen {
    rows: Vec<ScreenRow>,
}

struct ScreenRow {
    /// `(binary position, coefficient)`.
    bin_terms: Vec<(usize, f64)>,
    cont_min: f64,
    cont_max: f64,
    relation: Relation,
    rhs: f64,
}

impl Screen {
    fn new(instance: &MilpInstance, bins: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; instance.variables.len()];
        for (k, &j) in bins.iter().enumerate() {
            pos[j] = k;
        }
        let rows = instance
            .constraints
            .iter()
            .filter_map(|c| {
                let mut bin_terms = Vec::new();
                let (mut lo, mut hi) = (0.0, 0.0);
                for &(j, a) in &c.coeffs {
                    let v = &instance.variables[j];
                    if v.kind == VarKind::Binary {
                        bin_terms.push((pos[j], a));
                    } else if a > 0.0 {
                        lo += a * v.lower;
                        hi += a * v.upper;
                    } else {
                        lo += a * v.upper;
                        hi += a * v.lower;
                    }
                }
                let useful = !bin_terms.is_empty() && (lo.is_finite() || hi.is_finite());
                useful.then_some(ScreenRow {
                    bin_terms,
                    cont_min: lo,
                    cont_max: hi,
                    relation: c.relation,
                    rhs: c.rhs,
                })
            })
            .collect();
        Screen { rows }
    }

    /// Binaries at positions `depth..` range over `{0, 1}`.
    fn admits(&self, assign: &[u8], depth: usize) -> bool {
        self.rows.iter().all(|r| {
            let (mut lo, mut hi) = (r.cont_min, r.cont_max);
            for &(k, a) in &r.bin_terms {
                if k < depth {
                    let v = a * f64::from(assign[k]);
                    lo += v;
                    hi += v;
                } else if a > 0.0 {
                    hi += a;
                } else {
                    lo += a;
                }
            }
            let tol = SCREEN_TOL * r.rhs.abs().max(1.0);
            let min_ok = lo <= r.rhs + tol;
            let max_ok = hi >= r.rhs - tol;
            match r.relation {
                Relation::Le => min_ok,
                Relation::Ge => max_ok,
                Relation::Eq => min_ok && max_ok,
            }
        })
    }
}

/// Discretization for [`dp_schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DpConfig {
    /// Uniform SOC levels `i / (grid_points - 1)`; PWL cut points are added.
    pub grid_points: usize,
    /// Hours to schedule, at most the problem's length.
    pub hours: usize,
}

impl DpConfig {
    pub fn new(grid_points: usize, hours: usize) -> Self {
        DpConfig { grid_points, hours }
    }
}

/// SOC grid of `cfg` for a problem: uniform levels plus the PWL cut points,
/// sorted and deduplicated.
pub fn dp_grid(problem: &DayProblem, cfg: &DpConfig) -> Vec<f64> {
    let g = cfg.grid_points;
    let n = problem.table.n_int();
    let mut grid: Vec<f64> = (0..g).map(|i| i as f64 / (g - 1) as f64).collect();
    grid.extend((0..=n).map(|k| cut_point(k, n)));
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    grid
}

/// Best schedule whose SOC stays on the grid after every hour, by backward
/// induction over hours. Returns the schedule and its profit.
pub fn dp_schedule(problem: &DayProblem, cfg: &DpConfig) -> Result<(Schedule, f64)> {
    problem.validate()?;
    if cfg.grid_points < 2 {
        return Err(ArbError::Validation("grid_points must be at least 2".into()));
    }
    if cfg.hours == 0 || cfg.hours > problem.hours() {
        return Err(ArbError::Validation(format!(
            "dp hours must lie in 1..={}",
            problem.hours()
        )));
    }
    let hours = cfg.hours;
    let q = problem.q;
    let s0 = problem.e_init / q;
    let grid = dp_grid(problem, cfg);
    let tol = 1e-12;

    // States per stage: stage 0 is the initial SOC alone.
    let mut stages: Vec<Vec<f64>> = vec![vec![s0]];
    for h in 0..hours {
        let (lo, hi) = (problem.bounds.soc_min[h], problem.bounds.soc_max[h]);
        let states: Vec<f64> = grid
            .iter()
            .copied()
            .filter(|&s| s >= lo - tol && s <= hi + tol)
            .collect();
        if states.is_empty() {
            return Err(ArbError::Validation(format!(
                "no grid state within the SOC bounds after hour {}",
                h + 1
            )));
        }
        stages.push(states);
    }

    let reward = |h: usize, e: f64| {
        hour_profit(
            e,
            problem.prices[h],
            problem.eta,
            problem.grid.vgc[h],
            problem.grid.fgc[h],
            problem.epsilon,
        )
    };

    // value[h][i]: best profit from state i of stage h to the end.
    let mut value: Vec<Vec<f64>> = stages.iter().map(|s| vec![f64::NEG_INFINITY; s.len()]).collect();
    let mut choice: Vec<Vec<usize>> = stages.iter().map(|s| vec![usize::MAX; s.len()]).collect();
    value[hours].iter_mut().for_each(|v| *v = 0.0);
    for h in (0..hours).rev() {
        for (i, &s) in stages[h].iter().enumerate() {
            let (up, lo) = problem.table.eval(s);
            let (emin, emax) = (q * lo - tol * q, q * up + tol * q);
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for (k, &t) in stages[h + 1].iter().enumerate() {
                let next = value[h + 1][k];
                if next == f64::NEG_INFINITY {
                    continue;
                }
                let e = (t - s) * q;
                if e < emin || e > emax {
                    continue;
                }
                // Moves below the activity threshold are not representable.
                if e != 0.0 && e.abs() < problem.epsilon {
                    continue;
                }
                let v = reward(h, e) + next;
                if v > best.0 {
                    best = (v, k);
                }
            }
            value[h][i] = best.0;
            choice[h][i] = best.1;
        }
    }
    if value[0][0] == f64::NEG_INFINITY {
        return Err(ArbError::Validation(
            "no feasible SOC path on the dp grid".into(),
        ));
    }
    let mut energy = Vec::with_capacity(hours);
    let mut i = 0;
    for h in 0..hours {
        let k = choice[h][i];
        energy.push((stages[h + 1][k] - stages[h][i]) * q);
        i = k;
    }
    let schedule = Schedule {
        date: problem.date,
        energy,
    };
    let profit = value[0][0];
    Ok((schedule, profit))
}

/// DP grids of the oracle check, coarse to fine.
pub const CHECK_GRIDS: [usize; 3] = [101, 201, 401];

/// Relative tolerance between branch-and-bound and enumeration.
pub const CHECK_REL_TOL: f64 = 1e-6;

/// Absolute slack for `dp <= milp` and for grid monotonicity, EUR.
pub const CHECK_ABS_TOL: f64 = 1e-6;

/// One random instance of the oracle check.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCase {
    pub index: usize,
    pub seed: u64,
    pub hours: usize,
    pub n_int: usize,
    pub binaries: usize,
    /// Profit from branch-and-bound, EUR.
    pub milp_profit: f64,
    /// Profit from enumeration, EUR.
    pub enum_profit: f64,
    pub rel_diff: f64,
    /// DP profit per grid of [`CHECK_GRIDS`].
    pub dp_profit: [f64; 3],
    pub error: Option<String>,
}

impl OracleCase {
    pub fn matches(&self) -> bool {
        self.error.is_none() && self.rel_diff <= CHECK_REL_TOL
    }

    pub fn dp_below(&self) -> bool {
        self.error.is_none() && self.dp_profit.iter().all(|&d| d <= self.milp_profit + CHECK_ABS_TOL)
    }

    /// The DP gap never widens as the grid is refined.
    pub fn dp_monotone(&self) -> bool {
        self.error.is_none() && self.dp_profit.windows(2).all(|w| w[1] >= w[0] - CHECK_ABS_TOL)
    }

    pub fn passed(&self) -> bool {
        self.matches() && self.dp_below() && self.dp_monotone()
    }
}

/// Compare branch-and-bound, enumeration and DP on the instance of `seed`.
pub fn check_case(index: usize, seed: u64, options: &arb_milp::SolverOptions) -> OracleCase {
    let mut case = OracleCase {
        index,
        seed,
        hours: 0,
        n_int: 0,
        binaries: 0,
        milp_profit: f64::NAN,
        enum_profit: f64::NAN,
        rel_diff: f64::NAN,
        dp_profit: [f64::NAN; 3],
        error: None,
    };
    if let Err(e) = fill_case(&mut case, options) {
        case.error = Some(e.to_string());
    }
    case
}

fn fill_case(case: &mut OracleCase, options: &arb_milp::SolverOptions) -> Result<()> {
    let small = crate::synth::random_small_problem(case.seed)?;
    let p = &small.problem;
    case.hours = p.hours();
    case.n_int = p.table.n_int();
    let milp = crate::model::build_milp(p)?;
    case.binaries = milp.instance.num_binaries();
    let sol = arb_milp::solve(&milp.instance, options)
        .map_err(|e| ArbError::Invariant(format!("branch-and-bound: {e}")))?;
    if sol.status != Status::Optimal {
        return Err(ArbError::Invariant(format!("branch-and-bound status {}", sol.status)));
    }
    let en = enumerate_optimal(&milp.instance)?;
    if en.status != Status::Optimal {
        return Err(ArbError::Invariant(format!("enumeration status {}", en.status)));
    }
    case.milp_profit = -sol.objective;
    case.enum_profit = -en.objective;
    case.rel_diff = (sol.objective - en.objective).abs() / en.objective.abs().max(1.0);
    for (slot, &g) in case.dp_profit.iter_mut().zip(&CHECK_GRIDS) {
        *slot = dp_schedule(p, &DpConfig::new(g, p.hours()))?.1;
    }
    Ok(())
}

/// Run [`check_case`] on seeds `seed, seed + 1, ...`; output is in index order.
pub fn oracle_check(seed: u64, count: usize, exec: crate::exec::Exec) -> Vec<OracleCase> {
    let options = arb_milp::SolverOptions::default();
    let idx: Vec<usize> = (0..count).collect();
    exec.map(&idx, |&i| check_case(i, seed.wrapping_add(i as u64), &options))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::{BatteryConfig, RateCurve};
    use crate::model::{build_milp, AvailabilityBounds, GridCostSchedule, DEFAULT_EPSILON};
    use crate::pwl::PwlTable;
    use arb_milp::{solve, solve_lp, SolverOptions};

    fn constant_problem(prices: Vec<f64>, n: usize) -> DayProblem {
        let cfg = BatteryConfig {
            charge_curve: RateCurve::constant(0.5).unwrap(),
            discharge_curve: RateCurve::constant(0.5).unwrap(),
            ..BatteryConfig::default()
        };
        let hours = prices.len();
        DayProblem {
            date: "2022-03-01".parse().unwrap(),
            prices,
            grid: GridCostSchedule::flat(hours, 5.0, 0.0),
            bounds: AvailabilityBounds::empty_at_end(hours),
            table: PwlTable::build(&cfg, n, 1.0).unwrap(),
            q: 1e6,
            eta: 1.0,
            e_init: 0.0,
            big_m: 1e6,
            epsilon: DEFAULT_EPSILON,
        }
    }

    #[test]
    fn no_binaries_matches_lp() {
        let mut inst = MilpInstance::new("lp");
        let x = inst.add_continuous("x", 0.0, 10.0);
        inst.add_constraint("c", vec![(x, 1.0)], Relation::Ge, 3.0);
        inst.add_constraint("d", vec![(x, 2.0)], Relation::Le, 19.0);
        inst.set_objective(x, 1.0);
        let e = enumerate_optimal(&inst).unwrap();
        let lp = solve_lp(&inst).unwrap();
        assert_eq!(e.status, Status::Optimal);
        assert!((e.objective - lp.objective).abs() < 1e-12);
        assert_eq!(e.lps_solved, 1);
    }

    #[test]
    fn infeasible_toy() {
        let mut inst = MilpInstance::new("inf");
        let a = inst.add_binary("a", 0);
        let b = inst.add_binary("b", 0);
        inst.add_constraint("c", vec![(a, 1.0), (b, 1.0)], Relation::Ge, 3.0);
        assert_eq!(enumerate_optimal(&inst).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn too_many_binaries_rejected() {
        let mut inst = MilpInstance::new("big");
        for k in 0..23 {
            inst.add_binary(format!("b{k}"), 0);
        }
        assert!(matches!(enumerate_optimal(&inst), Err(ArbError::Validation(_))));
    }

    #[test]
    fn four_hour_instance_matches_branch_and_bound() {
        let p = constant_problem(vec![30.0, 12.0, 80.0, 55.0], 2);
        let milp = build_milp(&p).unwrap();
        let e = enumerate_optimal(&milp.instance).unwrap();
        let s = solve(&milp.instance, &SolverOptions::default()).unwrap();
        assert!((e.objective - s.objective).abs() <= 1e-6 * s.objective.abs().max(1.0));
        assert!(e.lps_solved < 1 << milp.instance.num_binaries());
    }

    #[test]
    fn dp_two_hour_toy_approaches_hand_value() {
        let p = constant_problem(vec![10.0, 50.0], 2);
        let (s, profit) = dp_schedule(&p, &DpConfig::new(401, 2)).unwrap();
        assert!(profit <= 15.0 + 1e-9);
        assert!((profit - 15.0).abs() < 1e-6);
        assert!((s.energy[0] - 0.5e6).abs() < 1e-3);
    }

    #[test]
    fn dp_closed_battery_is_idle() {
        let mut p = constant_problem(vec![10.0, 50.0, 5.0, 90.0], 2);
        p.bounds.soc_max = vec![0.0; 4];
        let (s, profit) = dp_schedule(&p, &DpConfig::new(11, 4)).unwrap();
        assert_eq!(profit, 0.0);
        assert!(s.energy.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn grid_contains_cut_points() {
        let p = constant_problem(vec![1.0; 3], 3);
        let g = dp_grid(&p, &DpConfig::new(101, 3));
        for k in 0..=3 {
            assert!(g.iter().any(|&s| (s - k as f64 / 3.0).abs() < 1e-15));
        }
        assert!(dp_schedule(&p, &DpConfig::new(1, 3)).is_err());
    }
}
