//! Best-bound branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::instance::{relative_gap, MilpInstance, Solution, SolveStats, Status};
use crate::simplex::{LpEngine, LpOutcome};
use crate::MilpError;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// A binary within this distance of 0 or 1 counts as integral.
    pub int_tol: f64,
    /// Relative gap `(incumbent - bound) / max(1, |incumbent|)` at which
    /// the search stops.
    pub gap_tol: f64,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Simplex iterations allowed over the whole search.
    pub iteration_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            int_tol: 1e-6,
            gap_tol: 1e-6,
            node_limit: None,
            time_limit: None,
            iteration_limit: 50_000_000,
        }
    }
}

/// Solve the LP relaxation (binaries treated as continuous on their bounds).
pub fn solve_lp(instance: &MilpInstance) -> Result<Solution, MilpError> {
    let start = Instant::now();
    let mut engine = LpEngine::new(&instance.relaxed())?;
    let outcome = engine.solve()?;
    let stats = SolveStats {
        nodes: 1,
        simplex_iterations: engine.iterations(),
        wall_time: start.elapsed(),
    };
    Ok(match outcome {
        LpOutcome::Optimal => {
            let values = engine.values();
            let objective = instance.objective_value(&values);
            Solution {
                status: Status::Optimal,
                values,
                objective,
                bound: objective,
                gap: 0.0,
                stats,
            }
        }
        LpOutcome::Infeasible => Solution::without_assignment(Status::Infeasible, stats),
        LpOutcome::Unbounded => Solution::without_assignment(Status::Unbounded, stats),
    })
}

struct OpenNode {
    bound: f64,
    depth: usize,
    id: usize,
    fixings: Vec<(usize, f64)>,
    branch_var: usize,
    branch_value: f64,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    // Max-heap: the "greatest" node is the one with the smallest bound,
    // then the deepest, then the oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

enum Evaluation {
    Infeasible,
    Unbounded,
    Integral { objective: f64, values: Vec<f64> },
    Fractional { objective: f64, var: usize, value: f64 },
}

struct Search<'a> {
    instance: &'a MilpInstance,
    engine: LpEngine,
    binaries: Vec<usize>,
    options: &'a SolverOptions,
    incumbent: Option<(f64, Vec<f64>)>,
    nodes: usize,
}

impl Search<'_> {
    fn apply(&mut self, fixings: &[(usize, f64)]) {
        for &j in &self.binaries {
            self.engine.reset_bounds(j);
        }
        for &(j, v) in fixings {
            self.engine.set_bounds(j, v, v);
        }
    }

    fn prune_level(&self) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => obj - self.options.gap_tol * obj.abs().max(1.0),
            None => f64::INFINITY,
        }
    }

    fn evaluate(&mut self, fixings: &[(usize, f64)]) -> Result<Evaluation, MilpError> {
        self.nodes += 1;
        self.apply(fixings);
        match self.engine.solve()? {
            LpOutcome::Infeasible => return Ok(Evaluation::Infeasible),
            LpOutcome::Unbounded => return Ok(Evaluation::Unbounded),
            LpOutcome::Optimal => {}
        }
        let values = self.engine.values();
        let objective = self.instance.objective_value(&values);
        let mut pick: Option<(u32, f64, usize)> = None;
        for &j in &self.binaries {
            let v = values[j];
            let frac = (v - v.round()).abs();
            if frac <= self.options.int_tol {
                continue;
            }
            let prio = self.instance.variables[j].priority;
            let better = match pick {
                None => true,
                Some((p, f, _)) => prio > p || (prio == p && frac > f + 1e-12),
            };
            if better {
                pick = Some((prio, frac, j));
            }
        }
        match pick {
            Some((_, _, var)) => Ok(Evaluation::Fractional {
                objective,
                var,
                value: values[var],
            }),
            None => match self.polish(&values)? {
                Some(e) => Ok(e),
                // Rounding within the tolerance cut the LP off; branch on
                // the least integral binary instead.
                None => {
                    let var = self
                        .binaries
                        .iter()
                        .copied()
                        .map(|j| (j, (values[j] - values[j].round()).abs()))
                        .filter(|&(_, f)| f > 0.0)
                        .fold(None, |best: Option<(usize, f64)>, c| match best {
                            Some(b) if b.1 >= c.1 => Some(b),
                            _ => Some(c),
                        })
                        .map(|(j, _)| j)
                        .ok_or_else(|| {
                            MilpError::Numerical(
                                "integral relaxation became infeasible after rounding binaries".into(),
                            )
                        })?;
                    Ok(Evaluation::Fractional {
                        objective,
                        var,
                        value: values[var],
                    })
                }
            },
        }
    }

    /// Re-solve with every binary pinned to its rounded value so the
    /// returned assignment is exactly integral.
    fn polish(&mut self, values: &[f64]) -> Result<Option<Evaluation>, MilpError> {
        let pinned: Vec<(usize, f64)> = self
            .binaries
            .iter()
            .map(|&j| (j, values[j].round()))
            .collect();
        self.apply(&pinned);
        if self.engine.solve()? != LpOutcome::Optimal {
            return Ok(None);
        }
        let values = self.engine.values();
        let objective = self.instance.objective_value(&values);
        Ok(Some(Evaluation::Integral { objective, values }))
    }

    fn offer(&mut self, objective: f64, values: Vec<f64>) {
        if self
            .incumbent
            .as_ref()
            .is_none_or(|(best, _)| objective < *best)
        {
            self.incumbent = Some((objective, values));
        }
    }
}

/// Solve a MILP to the configured relative gap.
///
/// Nodes are selected by best bound (ties: deepest, then oldest). Branching
/// takes the most fractional binary within the highest priority class,
/// ties broken by lowest index. Both children are evaluated as soon as they
/// are created so the queue is keyed on their own relaxation values.
pub fn solve(instance: &MilpInstance, options: &SolverOptions) -> Result<Solution, MilpError> {
    let start = Instant::now();
    let engine = LpEngine::new(instance)?;
    let mut search = Search {
        instance,
        engine,
        binaries: instance.binary_indices(),
        options,
        incumbent: None,
        nodes: 0,
    };
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut pruned_bound = f64::INFINITY;
    let mut limit_hit = false;

    match search.evaluate(&[])? {
        Evaluation::Infeasible => {
            return Ok(finish(&search, Status::Infeasible, f64::INFINITY, start));
        }
        Evaluation::Unbounded => {
            return Ok(finish(&search, Status::Unbounded, f64::NEG_INFINITY, start));
        }
        Evaluation::Integral { objective, values } => search.offer(objective, values),
        Evaluation::Fractional {
            objective,
            var,
            value,
        } => {
            heap.push(OpenNode {
                bound: objective,
                depth: 0,
                id: next_id,
                fixings: Vec::new(),
                branch_var: var,
                branch_value: value,
            });
            next_id += 1;
        }
    }

    while let Some(node) = heap.pop() {
        if node.bound >= search.prune_level() {
            pruned_bound = pruned_bound.min(node.bound);
            continue;
        }
        let over_nodes = options.node_limit.is_some_and(|n| search.nodes >= n);
        let over_time = options.time_limit.is_some_and(|t| start.elapsed() >= t);
        let over_iters = search.engine.iterations() >= options.iteration_limit;
        if over_nodes || over_time || over_iters {
            heap.push(node);
            limit_hit = true;
            break;
        }
        // Dive toward the nearer integer first.
        let first = if node.branch_value >= 0.5 { 1.0 } else { 0.0 };
        for side in [first, 1.0 - first] {
            let mut fixings = node.fixings.clone();
            fixings.push((node.branch_var, side));
            match search.evaluate(&fixings)? {
                Evaluation::Infeasible => {}
                Evaluation::Unbounded => {
                    return Err(MilpError::Numerical(
                        "unbounded relaxation below a bounded parent".into(),
                    ));
                }
                Evaluation::Integral { objective, values } => search.offer(objective, values),
                Evaluation::Fractional {
                    objective,
                    var,
                    value,
                } => {
                    if objective >= search.prune_level() {
                        pruned_bound = pruned_bound.min(objective);
                        continue;
                    }
                    heap.push(OpenNode {
                        bound: objective.max(node.bound),
                        depth: node.depth + 1,
                        id: next_id,
                        fixings,
                        branch_var: var,
                        branch_value: value,
                    });
                    next_id += 1;
                }
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let status = match (&search.incumbent, limit_hit) {
        (None, false) => Status::Infeasible,
        (None, true) => Status::LimitReached,
        (Some(_), false) => Status::Optimal,
        (Some(_), true) => Status::LimitReached,
    };
    let bound = open_bound.min(pruned_bound);
    Ok(finish(&search, status, bound, start))
}

fn finish(search: &Search<'_>, status: Status, bound: f64, start: Instant) -> Solution {
    let stats = SolveStats {
        nodes: search.nodes,
        simplex_iterations: search.engine.iterations(),
        wall_time: start.elapsed(),
    };
    match &search.incumbent {
        Some((objective, values)) => {
            let bound = bound.min(*objective);
            Solution {
                status,
                values: values.clone(),
                objective: *objective,
                bound,
                gap: relative_gap(*objective, bound),
                stats,
            }
        }
        None => Solution::without_assignment(status, stats),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Relation;

    fn knapsack() -> MilpInstance {
        let mut inst = MilpInstance::new("knap");
        let a = inst.add_binary("a", 0);
        let b = inst.add_binary("b", 0);
        inst.add_constraint("cap", vec![(a, 3.0), (b, 2.0)], Relation::Le, 3.0);
        inst.set_objective(a, -5.0);
        inst.set_objective(b, -4.0);
        inst
    }

    #[test]
    fn knapsack_optimum() {
        let sol = solve(&knapsack(), &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective + 5.0).abs() < 1e-9);
        assert_eq!(sol.values, vec![1.0, 0.0]);
        assert!(sol.gap <= 1e-6);
    }

    #[test]
    fn relaxation_bounds_milp() {
        let lp = solve_lp(&knapsack()).unwrap();
        let ip = solve(&knapsack(), &SolverOptions::default()).unwrap();
        assert!(lp.objective <= ip.objective + 1e-9);
        assert!((lp.objective + 17.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_binaries_solve_at_root() {
        let mut inst = knapsack();
        inst.variables[0].lower = 1.0;
        inst.variables[1].upper = 0.0;
        let sol = solve(&inst, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert_eq!(sol.stats.nodes, 1);
    }

    #[test]
    fn infeasible_milp() {
        let mut inst = MilpInstance::new("inf");
        let a = inst.add_binary("a", 0);
        let b = inst.add_binary("b", 0);
        inst.add_constraint("half", vec![(a, 2.0), (b, 2.0)], Relation::Eq, 1.0);
        let sol = solve(&inst, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Infeasible);
        assert!(sol.values.is_empty());
    }

    #[test]
    fn node_limit_reports_limit() {
        // Parity-style instance whose relaxation stays fractional for a while.
        let mut inst = MilpInstance::new("par");
        let xs: Vec<usize> = (0..8).map(|k| inst.add_binary(format!("x{k}"), 0)).collect();
        inst.add_constraint(
            "odd",
            xs.iter().map(|&j| (j, 2.0)).collect(),
            Relation::Eq,
            7.0,
        );
        for &j in &xs {
            inst.set_objective(j, 1.0);
        }
        let opts = SolverOptions {
            node_limit: Some(5),
            ..Default::default()
        };
        let sol = solve(&inst, &opts).unwrap();
        assert_eq!(sol.status, Status::LimitReached);
        let full = solve(&inst, &SolverOptions::default()).unwrap();
        assert_eq!(full.status, Status::Infeasible);
    }
}
