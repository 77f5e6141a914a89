use arb_core::battery::BatteryConfig;
use arb_core::model::{build_milp, schedule_profit, AvailabilityBounds, DayProblem, GridCostSchedule, Schedule, DEFAULT_EPSILON};
use arb_core::pwl::PwlTable;
use arb_core::HOURS;
use arb_milp::{solve, SolverOptions, Status};
use chrono::NaiveDate;
use proptest::prelude::*;

fn problem(prices: Vec<f64>, eta: f64, fgc: f64, rate_scale: f64) -> DayProblem {
    let table = PwlTable::build(&BatteryConfig::default(), 5, rate_scale).unwrap();
    DayProblem {
        date: NaiveDate::from_ymd_opt(2022, 6, 1).unwrap(),
        prices,
        grid: GridCostSchedule::flat(HOURS, 5.0, fgc),
        bounds: AvailabilityBounds::empty_at_end(HOURS),
        table,
        q: 1e6,
        eta,
        e_init: 0.0,
        big_m: 1e6,
        epsilon: DEFAULT_EPSILON,
    }
}

/// Returns the optimal profit and the solved schedule after checking the
/// per-hour structure directly on the solver's values.
fn solve_checked(p: &DayProblem) -> Result<(f64, Schedule), TestCaseError> {
    let milp = build_milp(p).unwrap();
    let sol = solve(&milp.instance, &SolverOptions::default()).unwrap();
    prop_assert_eq!(sol.status, Status::Optimal);
    let x = &sol.values;
    let tol = 1e-6 * p.q;
    for v in &milp.hours {
        let (e, ep, em, z) = (x[v.e], x[v.e_plus], x[v.e_minus], x[v.z]);
        prop_assert!((ep + em - e.abs()).abs() <= tol, "split {ep} {em} {e}");
        prop_assert!(ep.min(em) <= tol);
        let active = e.abs() >= p.epsilon * (1.0 - 1e-6);
        prop_assert_eq!(z > 0.5, active, "z {} |E| {}", z, e.abs());
    }
    let schedule = Schedule {
        date: p.date,
        energy: milp.hours.iter().map(|v| x[v.e]).collect(),
    };
    let profit = schedule_profit(&schedule, &p.prices, p.eta, &p.grid, p.epsilon);
    prop_assert!((profit + sol.objective).abs() <= 1e-6 * profit.abs().max(1.0), "{profit} vs {}", -sol.objective);
    Ok((-sol.objective, schedule))
}

fn prices() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..400.0, HOURS)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn solutions_are_structurally_sound(pr in prices(), eta in 0.8f64..=1.0, fgc in prop_oneof![Just(0.0), 0.0f64..20.0]) {
        solve_checked(&problem(pr, eta, fgc, 1.0))?;
    }

    #[test]
    fn faster_rates_never_lose_profit(pr in prices(), c in 1.0f64..2.5) {
        let (slow, _) = solve_checked(&problem(pr.clone(), 0.99, 0.0, 1.0))?;
        let (fast, _) = solve_checked(&problem(pr, 0.99, 0.0, c))?;
        prop_assert!(fast >= slow - 1e-6 * slow.abs().max(1.0), "{fast} < {slow}");
    }

    #[test]
    fn constant_shift_leaves_lossless_optimum(pr in prices(), c in -40.0f64..40.0) {
        let (base, sched) = solve_checked(&problem(pr.clone(), 1.0, 0.0, 1.0))?;
        let shifted: Vec<f64> = pr.iter().map(|p| p + c).collect();
        let (moved, _) = solve_checked(&problem(shifted.clone(), 1.0, 0.0, 1.0))?;
        prop_assert!((base - moved).abs() <= 1e-6 * base.abs().max(1.0), "{base} vs {moved}");
        // Any fixed schedule moves by -c (sum E+ - eta sum E-) 1e-6.
        let eta = 0.9;
        let grid = GridCostSchedule::flat(HOURS, 5.0, 0.0);
        let a = schedule_profit(&sched, &pr, eta, &grid, DEFAULT_EPSILON);
        let b = schedule_profit(&sched, &shifted, eta, &grid, DEFAULT_EPSILON);
        let ep: f64 = sched.energy.iter().map(|e| e.max(0.0)).sum();
        let em: f64 = sched.energy.iter().map(|e| (-e).max(0.0)).sum();
        let want = -c * (ep - eta * em) * 1e-6;
        prop_assert!((b - a - want).abs() <= 1e-9 * (1.0 + a.abs()));
    }
}
