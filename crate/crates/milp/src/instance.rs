//! Instance and solution types.

use std::fmt;
use std::time::Duration;

use crate::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    /// Branching class; binaries in a higher class are branched on first.
    pub priority: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Sparse row as `(variable index, coefficient)`; indices are unique.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A minimization problem over continuous and binary variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpInstance {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Sparse objective as `(variable index, coefficient)`.
    pub objective: Vec<(usize, f64)>,
}

impl MilpInstance {
    pub fn new(name: impl Into<String>) -> Self {
        MilpInstance {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind: VarKind::Continuous,
            priority: 0,
        });
        self.variables.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>, priority: u32) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            kind: VarKind::Binary,
            priority,
        });
        self.variables.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        match self.objective.iter_mut().find(|(j, _)| *j == var) {
            Some(entry) => entry.1 = coeff,
            None => self.objective.push((var, coeff)),
        }
    }

    pub fn num_binaries(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    pub fn binary_indices(&self) -> Vec<usize> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Dense objective vector.
    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for &(j, v) in &self.objective {
            c[j] += v;
        }
        c
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * values[j]).sum()
    }

    /// Copy with every binary relaxed to a continuous variable on its bounds.
    pub fn relaxed(&self) -> MilpInstance {
        let mut out = self.clone();
        for v in &mut out.variables {
            v.kind = VarKind::Continuous;
        }
        out
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        let n = self.variables.len();
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(MilpError::InvalidInstance(format!(
                    "variable {} has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(MilpError::InvalidInstance(format!(
                    "variable {} has an empty infinite bound",
                    v.name
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(MilpError::InvalidInstance(format!(
                    "binary {} has bounds outside [0, 1]",
                    v.name
                )));
            }
        }
        let check_row = |what: &str, row: &[(usize, f64)]| -> Result<(), MilpError> {
            let mut seen = vec![false; n];
            for &(j, a) in row {
                if j >= n {
                    return Err(MilpError::InvalidInstance(format!(
                        "{what}: variable index {j} out of range"
                    )));
                }
                if !a.is_finite() {
                    return Err(MilpError::InvalidInstance(format!(
                        "{what}: non-finite coefficient on {}",
                        self.variables[j].name
                    )));
                }
                if std::mem::replace(&mut seen[j], true) {
                    return Err(MilpError::InvalidInstance(format!(
                        "{what}: duplicate entry for {}",
                        self.variables[j].name
                    )));
                }
            }
            Ok(())
        };
        for c in &self.constraints {
            check_row(&c.name, &c.coeffs)?;
            if !c.rhs.is_finite() {
                return Err(MilpError::InvalidInstance(format!(
                    "{}: non-finite right-hand side",
                    c.name
                )));
            }
        }
        check_row("objective", &self.objective)
    }

    /// Largest absolute violation of any row or bound by `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for c in &self.constraints {
            let act: f64 = c.coeffs.iter().map(|&(j, a)| a * values[j]).sum();
            let viol = match c.relation {
                Relation::Le => act - c.rhs,
                Relation::Ge => c.rhs - act,
                Relation::Eq => (act - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    Unbounded,
    LimitReached,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Feasible => "feasible",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::LimitReached => "limit-reached",
        }
    }

    pub fn parse(s: &str) -> Option<Status> {
        Some(match s {
            "optimal" => Status::Optimal,
            "feasible" => Status::Feasible,
            "infeasible" => Status::Infeasible,
            "unbounded" => Status::Unbounded,
            "limit-reached" => Status::LimitReached,
            _ => return None,
        })
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub nodes: usize,
    pub simplex_iterations: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// One value per instance variable; empty when no assignment exists.
    pub values: Vec<f64>,
    pub objective: f64,
    /// Best proven lower bound on the optimum.
    pub bound: f64,
    pub gap: f64,
    pub stats: SolveStats,
}

impl Solution {
    pub(crate) fn without_assignment(status: Status, stats: SolveStats) -> Self {
        let (objective, bound) = match status {
            Status::Unbounded => (f64::NEG_INFINITY, f64::NEG_INFINITY),
            _ => (f64::INFINITY, f64::INFINITY),
        };
        Solution {
            status,
            values: Vec::new(),
            objective,
            bound,
            gap: f64::INFINITY,
            stats,
        }
    }

    pub fn value(&self, var: usize) -> f64 {
        self.values[var]
    }
}

/// Relative gap between an incumbent and a lower bound.
pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() || !bound.is_finite() {
        return f64::INFINITY;
    }
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}
