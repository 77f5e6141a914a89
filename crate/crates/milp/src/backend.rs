//! External solver adapter.
//!
//! The backend is run as `command [args...] <instance.mps> <solution.txt>`.
//! It must write a solution file of whitespace-separated lines:
//!
//! ```text
//! status optimal
//! objective -12.5
//! x1 0.5
//! b3 1
//! ```
//!
//! `status` is one of the [`Status`] words and defaults to `optimal`;
//! `objective` is optional (recomputed from the values either way). Every
//! other line is `variable value`, and all variables must be present when
//! an assignment is reported. Lines starting with `#` are ignored.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use crate::instance::{relative_gap, MilpInstance, Solution, SolveStats, Status};
use crate::mps::{export_mps, MpsFormat};
use crate::MilpError;

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub command: PathBuf,
    /// Extra arguments placed before the two file paths.
    pub args: Vec<String>,
    pub format: MpsFormat,
    /// Directory for the exchanged files; a fresh temporary directory when unset.
    pub work_dir: Option<PathBuf>,
}

impl BackendConfig {
    pub fn new(command: impl Into<PathBuf>) -> Self {
        BackendConfig {
            command: command.into(),
            args: Vec::new(),
            format: MpsFormat::Free,
            work_dir: None,
        }
    }
}

/// Look `command` up the way a shell would: as a path if it contains a
/// separator, otherwise on `PATH`.
fn resolve(command: &Path) -> Option<PathBuf> {
    if command.components().count() > 1 {
        return command.is_file().then(|| command.to_path_buf());
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|dir| dir.join(command))
        .find(|p| p.is_file())
}

pub fn solve_via_backend(instance: &MilpInstance, backend: &BackendConfig) -> Result<Solution, MilpError> {
    let start = Instant::now();
    let exe = resolve(&backend.command)
        .ok_or_else(|| MilpError::BackendMissing(backend.command.display().to_string()))?;
    let (dir, _guard) = match &backend.work_dir {
        Some(d) => (d.clone(), None),
        None => {
            let d = std::env::temp_dir().join(format!(
                "arb-backend-{}-{}",
                std::process::id(),
                unique_suffix()
            ));
            std::fs::create_dir_all(&d).map_err(|e| MilpError::io(&d, e))?;
            (d.clone(), Some(RemoveOnDrop(d)))
        }
    };
    let mps = dir.join("instance.mps");
    let sol = dir.join("solution.txt");
    let _ = std::fs::remove_file(&sol);
    export_mps(instance, &mps, backend.format)?;
    let output = Command::new(&exe)
        .args(&backend.args)
        .arg(&mps)
        .arg(&sol)
        .output()
        .map_err(|e| MilpError::io(&exe, e))?;
    if !output.status.success() {
        return Err(MilpError::BackendFailed {
            code: output.status.code(),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }
    let text = std::fs::read_to_string(&sol).map_err(|e| MilpError::io(&sol, e))?;
    let stats = SolveStats {
        nodes: 0,
        simplex_iterations: 0,
        wall_time: start.elapsed(),
    };
    parse_solution(instance, &text, &sol, stats)
}

fn unique_suffix() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static NEXT: AtomicU64 = AtomicU64::new(0);
    NEXT.fetch_add(1, Ordering::Relaxed)
}

struct RemoveOnDrop(PathBuf);

impl Drop for RemoveOnDrop {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

/// Parse a solution file in the documented line format.
pub fn parse_solution(
    instance: &MilpInstance,
    text: &str,
    path: &Path,
    stats: SolveStats,
) -> Result<Solution, MilpError> {
    let err = |msg: String| MilpError::SolutionParse {
        path: path.to_path_buf(),
        msg,
    };
    let index: HashMap<&str, usize> = instance
        .variables
        .iter()
        .enumerate()
        .map(|(j, v)| (v.name.as_str(), j))
        .collect();
    let mut status = Status::Optimal;
    let mut values = vec![f64::NAN; instance.variables.len()];
    let mut seen = 0usize;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 2 {
            return Err(err(format!("line {}: expected two fields", ln + 1)));
        }
        match f[0] {
            "status" => {
                status = Status::parse(f[1])
                    .ok_or_else(|| err(format!("line {}: unknown status {}", ln + 1, f[1])))?;
            }
            "objective" => {
                f[1].parse::<f64>()
                    .map_err(|_| err(format!("line {}: bad objective {}", ln + 1, f[1])))?;
            }
            name => {
                let &j = index
                    .get(name)
                    .ok_or_else(|| err(format!("line {}: unknown variable {name}", ln + 1)))?;
                let v: f64 = f[1]
                    .parse()
                    .map_err(|_| err(format!("line {}: bad value {}", ln + 1, f[1])))?;
                if !v.is_finite() {
                    return Err(err(format!("line {}: non-finite value", ln + 1)));
                }
                if values[j].is_nan() {
                    seen += 1;
                }
                values[j] = v;
            }
        }
    }
    match status {
        Status::Infeasible | Status::Unbounded => {
            return Ok(Solution::without_assignment(status, stats));
        }
        Status::LimitReached if seen == 0 => {
            return Ok(Solution::without_assignment(status, stats));
        }
        _ => {}
    }
    if seen != values.len() {
        let missing = instance
            .variables
            .iter()
            .zip(&values)
            .find(|(_, v)| v.is_nan())
            .map(|(v, _)| v.name.clone())
            .unwrap_or_default();
        return Err(err(format!("no value for variable {missing}")));
    }
    let objective = instance.objective_value(&values);
    let (bound, gap) = if status == Status::Optimal {
        (objective, 0.0)
    } else {
        (f64::NEG_INFINITY, relative_gap(objective, f64::NEG_INFINITY))
    };
    Ok(Solution {
        status,
        values,
        objective,
        bound,
        gap,
        stats,
    })
}
