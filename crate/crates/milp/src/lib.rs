//! Mixed-integer linear programming for small scheduling models.
//!
//! The engine is a dense bounded-variable simplex (primal with a composite
//! phase 1, plus a dual simplex used to re-optimize after bound changes)
//! wrapped in a best-bound branch-and-bound over binary variables.
//! Instances can be exported to MPS and solved by an external executable
//! through a file-exchange protocol, see [`backend`].

pub mod backend;
pub mod bnb;
mod error;
pub mod instance;
pub mod mps;
mod simplex;

pub use backend::{parse_solution, solve_via_backend, BackendConfig};
pub use bnb::{solve, solve_lp, SolverOptions};
pub use mps::{export_mps, import_mps, parse_mps, write_mps, MpsFormat};
pub use error::MilpError;
pub use instance::{
    relative_gap, Constraint, MilpInstance, Relation, Solution, SolveStats, Status, VarKind,
    Variable,
};
pub use simplex::{LpEngine, LpOutcome};
