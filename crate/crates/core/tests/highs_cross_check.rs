//! Cross-solver check through the MPS backend adapter. Skipped when python3
//! with highspy is not installed.

use std::path::PathBuf;
use std::process::Command;

use arb_core::battery::BatteryConfig;
use arb_core::model::{build_milp, AvailabilityBounds, DayProblem, GridCostSchedule, DEFAULT_EPSILON};
use arb_core::pwl::PwlTable;
use arb_core::synth::{synthetic_prices, SynthConfig};
use arb_core::HOURS;
use arb_milp::{solve, solve_via_backend, BackendConfig, MpsFormat, SolverOptions, Status};
use chrono::NaiveDate;

fn highs_available() -> bool {
    Command::new("python3")
        .args(["-c", "import highspy"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn backend(format: MpsFormat) -> BackendConfig {
    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scripts/highs_backend.py");
    let mut b = BackendConfig::new("python3");
    b.args = vec![script.display().to_string()];
    b.format = format;
    b
}

#[test]
fn builtin_matches_highs_on_daily_instances() {
    if !highs_available() {
        eprintln!("highspy not available; skipping");
        return;
    }
    let start = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap();
    let series = synthetic_prices("DE", start, 4, &SynthConfig::default(), 99).unwrap();
    let table = PwlTable::build(&BatteryConfig::default(), 5, 1.0).unwrap();
    for (k, date) in series.days().iter().enumerate() {
        let prices = series.actual(*date).unwrap();
        let p = DayProblem::from_day_prices(
            &prices,
            GridCostSchedule::flat(HOURS, 5.0, if k % 2 == 0 { 0.0 } else { 3.0 }),
            AvailabilityBounds::empty_at_end(HOURS),
            table.clone(),
            1e6 - 1e4 * k as f64,
            0.99,
            0.0,
            1e6,
            DEFAULT_EPSILON,
        );
        let milp = build_milp(&p).unwrap();
        let ours = solve(&milp.instance, &SolverOptions::default()).unwrap();
        let theirs = solve_via_backend(&milp.instance, &backend(MpsFormat::Free)).unwrap();
        assert_eq!(ours.status, Status::Optimal);
        assert_eq!(theirs.status, Status::Optimal);
        let tol = 1e-6 * ours.objective.abs().max(1.0);
        assert!((ours.objective - theirs.objective).abs() <= tol, "{date}: {} vs {}", ours.objective, theirs.objective);
    }
}
