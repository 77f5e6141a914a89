//! Dense bounded-variable simplex.
//!
//! Every row `i` gets a logical column `s_i` so the working system is
//! `A x + s = 0`, with the row bounds carried as bounds on `s`. The tableau
//! holds `B^-1 [A I]` for the current basis; basic values are always
//! `x_B = -B^-1 N x_N`. Bounds may change between solves (branch-and-bound)
//! without touching the tableau, which is what makes warm starts cheap.

use crate::instance::{MilpInstance, Relation, VarKind};
use crate::MilpError;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-7;
const DROP_TOL: f64 = 1e-14;
const REFACTOR_EVERY: usize = 200;
const VERIFY_AFTER: usize = 20;
const NONBASIC: usize = usize::MAX;
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase1 {
    Feasible,
    Infeasible,
}

enum Step {
    Optimal,
    Unbounded,
    Continue,
    Restart,
}

/// Bounds implied by the rows, used for scaling only.
fn implied_bounds(
    rows: &[(Vec<(usize, f64)>, Relation, f64)],
    lo: &[f64],
    up: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut lo = lo.to_vec();
    let mut up = up.to_vec();
    for _ in 0..3 {
        for (row, rel, rhs) in rows {
            // Activity range of a*x over the row.
            let term = |lo: &[f64], up: &[f64], j: usize, a: f64| {
                if a > 0.0 {
                    (a * lo[j], a * up[j])
                } else {
                    (a * up[j], a * lo[j])
                }
            };
            let (mut min_sum, mut max_sum) = (0.0, 0.0);
            let (mut min_inf, mut max_inf) = (0usize, 0usize);
            for &(j, a) in row {
                let (mn, mx) = term(&lo, &up, j, a);
                if mn.is_finite() {
                    min_sum += mn;
                } else {
                    min_inf += 1;
                }
                if mx.is_finite() {
                    max_sum += mx;
                } else {
                    max_inf += 1;
                }
            }
            let le = matches!(rel, Relation::Le | Relation::Eq);
            let ge = matches!(rel, Relation::Ge | Relation::Eq);
            let snapshot: Vec<(f64, f64)> = row.iter().map(|&(j, a)| term(&lo, &up, j, a)).collect();
            for (&(j, a), &(mn, mx)) in row.iter().zip(&snapshot) {
                // a*x_j <= rhs - min(others) when the row is <=.
                if le {
                    let others = match (mn.is_finite(), min_inf) {
                        (true, 0) => Some(min_sum - mn),
                        (false, 1) => Some(min_sum),
                        _ => None,
                    };
                    if let Some(o) = others {
                        let v = (rhs - o) / a;
                        if a > 0.0 {
                            up[j] = up[j].min(v);
                        } else {
                            lo[j] = lo[j].max(v);
                        }
                    }
                }
                if ge {
                    let others = match (mx.is_finite(), max_inf) {
                        (true, 0) => Some(max_sum - mx),
                        (false, 1) => Some(max_sum),
                        _ => None,
                    };
                    if let Some(o) = others {
                        let v = (rhs - o) / a;
                        if a > 0.0 {
                            lo[j] = lo[j].max(v);
                        } else {
                            up[j] = up[j].min(v);
                        }
                    }
                }
            }
        }
    }
    (lo, up)
}

/// Reusable LP engine over a fixed constraint matrix with mutable bounds.
pub struct LpEngine {
    n: usize,
    m: usize,
    ncol: usize,
    /// Scaled structural columns, `(row, value)`.
    cols: Vec<Vec<(usize, f64)>>,
    col_scale: Vec<f64>,
    orig_cost: Vec<f64>,
    cost: Vec<f64>,
    base_lo: Vec<f64>,
    base_up: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    binary: Vec<bool>,
    t: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<usize>,
    x: Vec<f64>,
    d: Vec<f64>,
    presolve_infeasible: bool,
    since_refactor: usize,
    iterations: usize,
    /// Iteration count when the current `solve` began.
    solve_start: usize,
    /// Per-`solve` cap.
    iteration_limit: usize,
    degenerate_run: usize,
    /// Set when a refactorization had to replace a basic column.
    repaired: bool,
}

impl LpEngine {
    pub fn new(instance: &MilpInstance) -> Result<Self, MilpError> {
        instance.validate()?;
        let n = instance.variables.len();
        let mut lo: Vec<f64> = instance.variables.iter().map(|v| v.lower).collect();
        let mut up: Vec<f64> = instance.variables.iter().map(|v| v.upper).collect();
        let binary: Vec<bool> = instance
            .variables
            .iter()
            .map(|v| v.kind == VarKind::Binary)
            .collect();
        let mut presolve_infeasible = false;

        // Singleton rows become bounds, empty rows are checked and dropped.
        let mut kept = Vec::new();
        for c in &instance.constraints {
            let nz: Vec<(usize, f64)> = c.coeffs.iter().copied().filter(|&(_, a)| a != 0.0).collect();
            match nz.len() {
                0 => {
                    let ok = match c.relation {
                        Relation::Le => 0.0 <= c.rhs + PRIMAL_TOL,
                        Relation::Ge => 0.0 >= c.rhs - PRIMAL_TOL,
                        Relation::Eq => c.rhs.abs() <= PRIMAL_TOL,
                    };
                    presolve_infeasible |= !ok;
                }
                1 => {
                    let (j, a) = nz[0];
                    let v = c.rhs / a;
                    let rel = if a > 0.0 {
                        c.relation
                    } else {
                        match c.relation {
                            Relation::Le => Relation::Ge,
                            Relation::Ge => Relation::Le,
                            Relation::Eq => Relation::Eq,
                        }
                    };
                    if matches!(rel, Relation::Le | Relation::Eq) {
                        up[j] = up[j].min(v);
                    }
                    if matches!(rel, Relation::Ge | Relation::Eq) {
                        lo[j] = lo[j].max(v);
                    }
                }
                _ => kept.push((nz, c.relation, c.rhs)),
            }
        }
        for j in 0..n {
            if binary[j] {
                lo[j] = (lo[j] - 1e-6).ceil().max(0.0);
                up[j] = (up[j] + 1e-6).floor().min(1.0);
            }
            if lo[j] > up[j] {
                let scale = lo[j].abs().max(up[j].abs()).max(1.0);
                if lo[j] - up[j] <= 1e-9 * scale {
                    up[j] = lo[j];
                } else {
                    presolve_infeasible = true;
                }
            }
        }

        let m = kept.len();
        let ncol = n + m;

        // Columns are scaled by the magnitude of their (implied) bounds so
        // scaled values are O(1); rows are then scaled to unit max norm.
        // Everything is rounded to powers of two.
        let pow2 = |s: f64| 2f64.powi(s.log2().round() as i32);
        let (ilo, iup) = implied_bounds(&kept, &lo, &up);
        let col_scale: Vec<f64> = (0..n)
            .map(|j| {
                let mag = ilo[j].abs().max(iup[j].abs());
                if mag.is_finite() && mag > 0.0 {
                    pow2(mag)
                } else {
                    1.0
                }
            })
            .collect();
        let row_scale: Vec<f64> = kept
            .iter()
            .map(|(row, _, _)| {
                let mx = row
                    .iter()
                    .map(|&(j, a)| (a * col_scale[j]).abs())
                    .fold(0.0, f64::max);
                if mx > 0.0 {
                    pow2(1.0 / mx)
                } else {
                    1.0
                }
            })
            .collect();
        let mut cols = vec![Vec::new(); n];
        for (i, (row, _, _)) in kept.iter().enumerate() {
            for &(j, a) in row {
                cols[j].push((i, a * row_scale[i] * col_scale[j]));
            }
        }

        let orig_cost = instance.objective_dense();
        let cmax = orig_cost
            .iter()
            .zip(&col_scale)
            .map(|(c, s)| (c * s).abs())
            .fold(0.0, f64::max);
        let obj_scale = if cmax > 0.0 { pow2(1.0 / cmax) } else { 1.0 };
        let mut cost = vec![0.0; ncol];
        for j in 0..n {
            cost[j] = orig_cost[j] * col_scale[j] * obj_scale;
        }

        let mut base_lo = vec![0.0; ncol];
        let mut base_up = vec![0.0; ncol];
        for j in 0..n {
            base_lo[j] = lo[j] / col_scale[j];
            base_up[j] = up[j] / col_scale[j];
        }
        for (i, &(_, rel, rhs)) in kept.iter().enumerate() {
            let (rlo, rhi) = match rel {
                Relation::Le => (f64::NEG_INFINITY, rhs),
                Relation::Ge => (rhs, f64::INFINITY),
                Relation::Eq => (rhs, rhs),
            };
            base_lo[n + i] = -rhi * row_scale[i];
            base_up[n + i] = -rlo * row_scale[i];
        }

        let mut engine = LpEngine {
            n,
            m,
            ncol,
            cols,
            col_scale,
            orig_cost,
            cost,
            lo: base_lo.clone(),
            up: base_up.clone(),
            base_lo,
            base_up,
            binary,
            t: vec![0.0; m * ncol],
            basis: (n..ncol).collect(),
            pos: (0..ncol).map(|j| if j < n { NONBASIC } else { j - n }).collect(),
            x: vec![0.0; ncol],
            d: vec![0.0; ncol],
            presolve_infeasible,
            since_refactor: 0,
            iterations: 0,
            solve_start: 0,
            iteration_limit: 200_000,
            degenerate_run: 0,
            repaired: false,
        };
        for j in 0..n {
            for &(i, a) in &engine.cols[j] {
                engine.t[i * ncol + j] = a;
            }
        }
        for i in 0..m {
            engine.t[i * ncol + n + i] = 1.0;
        }
        engine.d.copy_from_slice(&engine.cost);
        for j in 0..n {
            engine.x[j] = engine.default_position(j);
        }
        Ok(engine)
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn set_iteration_limit(&mut self, limit: usize) {
        self.iteration_limit = limit;
    }

    /// Restrict variable `j` to `[lower, upper]` intersected with its
    /// original (presolved) bounds.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        let s = self.col_scale[j];
        self.lo[j] = self.base_lo[j].max(lower / s);
        self.up[j] = self.base_up[j].min(upper / s);
    }

    pub fn reset_bounds(&mut self, j: usize) {
        self.lo[j] = self.base_lo[j];
        self.up[j] = self.base_up[j];
    }

    /// Presolved bounds of variable `j` in original units.
    pub fn base_bounds(&self, j: usize) -> (f64, f64) {
        let s = self.col_scale[j];
        (self.base_lo[j] * s, self.base_up[j] * s)
    }

    /// Current structural values in original units, clamped onto bounds.
    pub fn values(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                let s = self.col_scale[j];
                let v = self.x[j].clamp(self.lo[j], self.up[j]) * s;
                if self.binary[j] && (v - v.round()).abs() < 1e-12 {
                    v.round()
                } else {
                    v
                }
            })
            .collect()
    }

    pub fn objective(&self) -> f64 {
        self.values()
            .iter()
            .zip(&self.orig_cost)
            .map(|(x, c)| x * c)
            .sum()
    }

    /// Optimize for the current bounds, warm-starting from the last basis.
    pub fn solve(&mut self) -> Result<LpOutcome, MilpError> {
        self.solve_start = self.iterations;
        if self.presolve_infeasible {
            return Ok(LpOutcome::Infeasible);
        }
        for j in 0..self.ncol {
            if self.lo[j] > self.up[j] + PRIMAL_TOL {
                return Ok(LpOutcome::Infeasible);
            }
        }
        const ROUNDS: usize = 8;
        for _ in 0..ROUNDS {
            self.repaired = false;
            self.place_nonbasics();
            self.recompute_basics();
            if self.max_primal_infeasibility() > PRIMAL_TOL {
                let feasible = if self.dual_feasible() {
                    match self.dual_simplex()? {
                        Some(f) => f,
                        None => continue,
                    }
                } else {
                    self.phase1()? == Phase1::Feasible
                };
                if !feasible {
                    // Confirm with a fresh factorization and the primal
                    // phase 1 before declaring it.
                    if self.since_refactor > 0 {
                        self.refactor()?;
                    }
                    self.repaired = false;
                    if self.phase1()? == Phase1::Infeasible {
                        return Ok(LpOutcome::Infeasible);
                    }
                }
            }
            self.repaired = false;
            match self.phase2()? {
                None => continue,
                Some(LpOutcome::Unbounded) => return Ok(LpOutcome::Unbounded),
                Some(LpOutcome::Infeasible) => unreachable!(),
                Some(LpOutcome::Optimal) => {}
            }
            // Short warm re-solves keep the updated tableau; longer runs are
            // verified against a fresh factorization.
            if self.since_refactor <= VERIFY_AFTER {
                return Ok(LpOutcome::Optimal);
            }
            self.refactor()?;
            if !self.repaired
                && self.max_primal_infeasibility() <= PRIMAL_TOL
                && self.is_dual_optimal()
            {
                return Ok(LpOutcome::Optimal);
            }
        }
        Err(MilpError::Numerical(
            "simplex failed to reach a stable optimum after refactorization".into(),
        ))
    }

    fn default_position(&self, j: usize) -> f64 {
        if self.lo[j].is_finite() {
            self.lo[j]
        } else if self.up[j].is_finite() {
            self.up[j]
        } else {
            0.0
        }
    }

    fn place_nonbasics(&mut self) {
        for j in 0..self.ncol {
            if self.pos[j] != NONBASIC {
                continue;
            }
            let (lo, up, x, d) = (self.lo[j], self.up[j], self.x[j], self.d[j]);
            self.x[j] = if lo == up {
                lo
            } else if d > DUAL_TOL && lo.is_finite() {
                lo
            } else if d < -DUAL_TOL && up.is_finite() {
                up
            } else if (x == lo || x == up) && x.is_finite() {
                x
            } else if !lo.is_finite() && !up.is_finite() {
                0.0
            } else {
                self.default_position(j)
            };
        }
    }

    fn recompute_basics(&mut self) {
        let ncol = self.ncol;
        let nonzero: Vec<(usize, f64)> = (0..ncol)
            .filter(|&j| self.pos[j] == NONBASIC && self.x[j] != 0.0)
            .map(|j| (j, self.x[j]))
            .collect();
        for i in 0..self.m {
            let row = &self.t[i * ncol..(i + 1) * ncol];
            let v: f64 = nonzero.iter().map(|&(j, xj)| row[j] * xj).sum();
            self.x[self.basis[i]] = -v;
        }
    }

    fn recompute_reduced_costs(&mut self) {
        let ncol = self.ncol;
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * ncol..(i + 1) * ncol];
            for (dj, &tij) in self.d.iter_mut().zip(row) {
                *dj -= cb * tij;
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let x = self.x[j];
        if x < self.lo[j] - PRIMAL_TOL {
            self.lo[j] - x
        } else if x > self.up[j] + PRIMAL_TOL {
            x - self.up[j]
        } else {
            0.0
        }
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&b| self.infeasibility(b))
            .fold(0.0, f64::max)
    }

    fn dual_feasible(&self) -> bool {
        (0..self.ncol).all(|j| {
            if self.pos[j] != NONBASIC || self.lo[j] == self.up[j] {
                return true;
            }
            let d = self.d[j];
            let can_up = self.x[j] < self.up[j] - PRIMAL_TOL;
            let can_down = self.x[j] > self.lo[j] + PRIMAL_TOL;
            !((d < -DUAL_TOL && can_up) || (d > DUAL_TOL && can_down))
        })
    }

    fn is_dual_optimal(&self) -> bool {
        self.dual_feasible()
    }

    fn bump_iteration(&mut self) -> Result<(), MilpError> {
        self.iterations += 1;
        self.since_refactor += 1;
        self.check_limit()
    }

    fn check_limit(&self) -> Result<(), MilpError> {
        if self.iterations - self.solve_start > self.iteration_limit {
            return Err(MilpError::IterationLimit(self.iteration_limit));
        }
        Ok(())
    }

    fn bland(&self) -> bool {
        self.degenerate_run > 10 * self.ncol
    }

    /// Pick an entering column for reduced costs `dvec`.
    fn choose_entering(&self, dvec: &[f64]) -> Option<(usize, f64)> {
        let bland = self.bland();
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncol {
            if self.pos[j] != NONBASIC || self.lo[j] == self.up[j] {
                continue;
            }
            let dj = dvec[j];
            let dir = if dj < -DUAL_TOL && self.x[j] < self.up[j] - PRIMAL_TOL {
                1.0
            } else if dj > DUAL_TOL && self.x[j] > self.lo[j] + PRIMAL_TOL {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            let score = dj.abs();
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Move entering column `q` in direction `dir` by `theta` and update basics.
    fn apply_move(&mut self, q: usize, dir: f64, theta: f64) {
        if theta == 0.0 {
            return;
        }
        let step = dir * theta;
        self.x[q] += step;
        let ncol = self.ncol;
        for i in 0..self.m {
            let a = self.t[i * ncol + q];
            if a != 0.0 {
                self.x[self.basis[i]] -= a * step;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let ncol = self.ncol;
        let p = self.t[r * ncol + q];
        let inv = 1.0 / p;
        let mut prow: Vec<(usize, f64)> = Vec::with_capacity(ncol);
        {
            let row = &mut self.t[r * ncol..(r + 1) * ncol];
            for (j, v) in row.iter_mut().enumerate() {
                if *v == 0.0 {
                    continue;
                }
                *v *= inv;
                if v.abs() < DROP_TOL {
                    *v = 0.0;
                } else {
                    prow.push((j, *v));
                }
            }
            row[q] = 1.0;
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * ncol + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * ncol..(i + 1) * ncol];
            for &(j, v) in &prow {
                row[j] -= f * v;
            }
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &(j, v) in &prow {
                self.d[j] -= f * v;
            }
        }
        self.d[q] = 0.0;
        let leaving = self.basis[r];
        self.pos[leaving] = NONBASIC;
        self.basis[r] = q;
        self.pos[q] = r;
    }

    /// Rebuild the tableau as `B^-1 [A I]` from the original scaled matrix.
    fn refactor(&mut self) -> Result<(), MilpError> {
        let m = self.m;
        let ncol = self.ncol;
        let n = self.n;
        self.since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        // Augmented [B | I] reduced by Gauss-Jordan with partial pivoting.
        let w = 2 * m;
        let mut aug = vec![0.0; m * w];
        for (k, &b) in self.basis.iter().enumerate() {
            if b < n {
                for &(i, a) in &self.cols[b] {
                    aug[i * w + k] = a;
                }
            } else {
                aug[(b - n) * w + k] = 1.0;
            }
        }
        for i in 0..m {
            aug[i * w + m + i] = 1.0;
        }
        for k in 0..m {
            let (pr, pv) = (k..m)
                .map(|i| (i, aug[i * w + k].abs()))
                .fold((k, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
            let (pr, pv) = if pv < SINGULAR_TOL {
                self.repair_column(&mut aug, k)?
            } else {
                (pr, pv)
            };
            debug_assert!(pv >= SINGULAR_TOL);
            if pr != k {
                for c in 0..w {
                    aug.swap(k * w + c, pr * w + c);
                }
            }
            let inv = 1.0 / aug[k * w + k];
            for c in 0..w {
                aug[k * w + c] *= inv;
            }
            let pivot_row: Vec<(usize, f64)> = (0..w)
                .filter(|&c| aug[k * w + c] != 0.0)
                .map(|c| (c, aug[k * w + c]))
                .collect();
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = aug[i * w + k];
                if f == 0.0 {
                    continue;
                }
                for &(c, v) in &pivot_row {
                    aug[i * w + c] -= f * v;
                }
            }
        }
        // Row k of B^-1 lives in aug[k][m..2m].
        self.t.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..m {
            let binv = &aug[k * w + m..(k + 1) * w];
            let trow = &mut self.t[k * ncol..(k + 1) * ncol];
            for j in 0..n {
                let v: f64 = self.cols[j].iter().map(|&(i, a)| binv[i] * a).sum();
                if v.abs() > DROP_TOL {
                    trow[j] = v;
                }
            }
            for i in 0..m {
                if binv[i].abs() > DROP_TOL {
                    trow[n + i] = binv[i];
                }
            }
        }
        for (k, &b) in self.basis.iter().enumerate() {
            let trow = &mut self.t[k * ncol..(k + 1) * ncol];
            for &bb in &self.basis {
                trow[bb] = 0.0;
            }
            trow[b] = 1.0;
        }
        self.recompute_reduced_costs();
        self.recompute_basics();
        Ok(())
    }

    /// Swap the dependent basic column at position `k` for the logical
    /// whose transformed column has the largest entry in the rows not yet
    /// pivoted. The displaced variable becomes nonbasic at a bound.
    fn repair_column(&mut self, aug: &mut [f64], k: usize) -> Result<(usize, f64), MilpError> {
        let m = self.m;
        let w = 2 * m;
        let mut best: Option<(usize, usize, f64)> = None;
        for r in 0..m {
            if self.pos[self.n + r] != NONBASIC {
                continue;
            }
            for i in k..m {
                let v = aug[i * w + m + r].abs();
                if best.is_none_or(|(_, _, bv)| v > bv) {
                    best = Some((r, i, v));
                }
            }
        }
        let Some((r, pr, pv)) = best.filter(|b| b.2 >= SINGULAR_TOL) else {
            return Err(MilpError::Numerical(format!(
                "singular basis during refactorization at column {k}"
            )));
        };
        for i in 0..m {
            aug[i * w + k] = aug[i * w + m + r];
        }
        let old = self.basis[k];
        self.pos[old] = NONBASIC;
        let (lo, up) = (self.lo[old], self.up[old]);
        let x = self.x[old];
        self.x[old] = if lo.is_finite() && (x - lo).abs() <= (x - up).abs() {
            lo
        } else if up.is_finite() {
            up
        } else if lo.is_finite() {
            lo
        } else {
            x
        };
        self.basis[k] = self.n + r;
        self.pos[self.n + r] = k;
        self.repaired = true;
        Ok((pr, pv))
    }

    fn maybe_refactor(&mut self) -> Result<(), MilpError> {
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Bounded ratio test. Returns `(theta, Some((row, to_upper)))` for a
    /// blocking basic variable or `(theta, None)` for an entering bound flip.
    ///
    /// Two passes (Harris): the first finds the step allowed with bounds
    /// relaxed by the primal tolerance, the second picks the largest pivot
    /// among rows blocking within that step. Bland mode takes the smallest
    /// ratio, ties to the lowest basic index.
    fn ratio_test(&self, q: usize, dir: f64, phase1: bool) -> (f64, Option<(usize, bool)>) {
        let ncol = self.ncol;
        let bland = self.bland();
        // (row, exact limit, relaxed limit, to_upper, |alpha|)
        let mut cands: Vec<(usize, f64, f64, bool, f64)> = Vec::new();
        for i in 0..self.m {
            let alpha = self.t[i * ncol + q];
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let rate = -dir * alpha;
            let (x, lo, up) = (self.x[b], self.lo[b], self.up[b]);
            let (gap, to_upper) = if phase1 && x < lo - PRIMAL_TOL {
                if rate > 0.0 {
                    (lo - x, false)
                } else {
                    continue;
                }
            } else if phase1 && x > up + PRIMAL_TOL {
                if rate < 0.0 {
                    (x - up, true)
                } else {
                    continue;
                }
            } else if rate < 0.0 {
                if !lo.is_finite() {
                    continue;
                }
                ((x - lo).max(0.0), false)
            } else {
                if !up.is_finite() {
                    continue;
                }
                ((up - x).max(0.0), true)
            };
            let r = rate.abs();
            cands.push((i, gap / r, (gap + PRIMAL_TOL) / r, to_upper, alpha.abs()));
        }
        let range = self.up[q] - self.lo[q];
        let flip = if range.is_finite() { range.max(0.0) } else { f64::INFINITY };
        if bland {
            let mut theta = flip;
            let mut leave: Option<(usize, bool)> = None;
            for &(i, limit, _, to_upper, _) in &cands {
                let wins = leave.is_none_or(|(r, _)| self.basis[i] < self.basis[r]);
                if limit < theta - 1e-12 || (limit <= theta + 1e-12 && wins) {
                    theta = theta.min(limit);
                    leave = Some((i, to_upper));
                }
            }
            return (theta, leave);
        }
        let bound = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
        if flip <= bound {
            return (flip, None);
        }
        let mut best: Option<(usize, f64, bool, f64)> = None;
        for &(i, limit, _, to_upper, a) in &cands {
            if limit <= bound && best.is_none_or(|(_, _, _, ba)| a > ba) {
                best = Some((i, limit, to_upper, a));
            }
        }
        match best {
            Some((i, limit, to_upper, _)) => (limit, Some((i, to_upper))),
            None => (f64::INFINITY, None),
        }
    }

    fn finish_step(
        &mut self,
        q: usize,
        dir: f64,
        theta: f64,
        leave: Option<(usize, bool)>,
    ) -> Result<(), MilpError> {
        self.apply_move(q, dir, theta);
        if theta <= 1e-12 {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
        match leave {
            None => {
                self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
                self.iterations += 1;
            }
            Some((r, to_upper)) => {
                let b = self.basis[r];
                self.x[b] = if to_upper { self.up[b] } else { self.lo[b] };
                self.pivot(r, q);
                self.bump_iteration()?;
                self.maybe_refactor()?;
            }
        }
        Ok(())
    }

    fn phase1(&mut self) -> Result<Phase1, MilpError> {
        let ncol = self.ncol;
        let mut d1 = vec![0.0; ncol];
        loop {
            self.check_limit()?;
            let mut any = false;
            d1.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..self.m {
                let b = self.basis[i];
                let w = if self.x[b] < self.lo[b] - PRIMAL_TOL {
                    -1.0
                } else if self.x[b] > self.up[b] + PRIMAL_TOL {
                    1.0
                } else {
                    continue;
                };
                any = true;
                let row = &self.t[i * ncol..(i + 1) * ncol];
                for (dj, &tij) in d1.iter_mut().zip(row) {
                    *dj -= w * tij;
                }
            }
            if !any {
                return Ok(Phase1::Feasible);
            }
            for &b in &self.basis {
                d1[b] = 0.0;
            }
            let Some((q, dir)) = self.choose_entering(&d1) else {
                return Ok(Phase1::Infeasible);
            };
            let (theta, leave) = self.ratio_test(q, dir, true);
            if !theta.is_finite() {
                return Err(MilpError::Numerical(
                    "unbounded step while reducing infeasibility".into(),
                ));
            }
            self.finish_step(q, dir, theta, leave)?;
        }
    }

    /// `None` when a basis repair invalidated primal feasibility.
    fn phase2(&mut self) -> Result<Option<LpOutcome>, MilpError> {
        loop {
            self.check_limit()?;
            match self.phase2_step()? {
                Step::Optimal => return Ok(Some(LpOutcome::Optimal)),
                Step::Unbounded => return Ok(Some(LpOutcome::Unbounded)),
                Step::Restart => return Ok(None),
                Step::Continue => {}
            }
        }
    }

    fn phase2_step(&mut self) -> Result<Step, MilpError> {
        let Some((q, dir)) = self.choose_entering(&self.d) else {
            return Ok(Step::Optimal);
        };
        let (theta, leave) = self.ratio_test(q, dir, false);
        if !theta.is_finite() {
            return Ok(Step::Unbounded);
        }
        self.finish_step(q, dir, theta, leave)?;
        if self.repaired {
            return Ok(Step::Restart);
        }
        Ok(Step::Continue)
    }

    /// Dual simplex from a dual-feasible basis. Returns `Some(false)` if
    /// the primal problem is infeasible, `None` after a basis repair.
    fn dual_simplex(&mut self) -> Result<Option<bool>, MilpError> {
        let ncol = self.ncol;
        loop {
            self.check_limit()?;
            let mut r = NONBASIC;
            let mut worst = PRIMAL_TOL;
            for i in 0..self.m {
                let v = self.infeasibility(self.basis[i]);
                if v > worst {
                    worst = v;
                    r = i;
                }
            }
            if r == NONBASIC {
                return Ok(Some(true));
            }
            let b = self.basis[r];
            let below = self.x[b] < self.lo[b];
            let target = if below { self.lo[b] } else { self.up[b] };
            // x_b = -sum t_rj x_j; to raise x_b, move x_j against sign(t_rj).
            let row = &self.t[r * ncol..(r + 1) * ncol];
            let mut best: Option<(usize, f64, f64)> = None;
            for j in 0..ncol {
                if self.pos[j] != NONBASIC || self.lo[j] == self.up[j] {
                    continue;
                }
                let a = row[j];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let want_increase_xj = if below { a < 0.0 } else { a > 0.0 };
                let can_up = self.x[j] < self.up[j] - PRIMAL_TOL;
                let can_down = self.x[j] > self.lo[j] + PRIMAL_TOL;
                let dj = self.d[j];
                let ratio = if want_increase_xj {
                    if !can_up {
                        continue;
                    }
                    dj.max(0.0) / a.abs()
                } else {
                    if !can_down {
                        continue;
                    }
                    (-dj).max(0.0) / a.abs()
                };
                let better = match best {
                    None => true,
                    Some((_, br, ba)) => {
                        ratio < br - 1e-12 || (ratio <= br + 1e-12 && a.abs() > ba)
                    }
                };
                if better {
                    best = Some((j, ratio, a.abs()));
                }
            }
            let Some((q, _, _)) = best else {
                return Ok(Some(false));
            };
            let a = self.t[r * ncol + q];
            let delta_q = -(target - self.x[b]) / a;
            let (dir, theta) = if delta_q >= 0.0 {
                (1.0, delta_q)
            } else {
                (-1.0, -delta_q)
            };
            self.apply_move(q, dir, theta);
            self.x[b] = target;
            self.pivot(r, q);
            self.bump_iteration()?;
            self.maybe_refactor()?;
            if self.repaired {
                return Ok(None);
            }
        }
    }
}
