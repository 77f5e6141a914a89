use arb_core::battery::{update_degradation, BatteryState};
use arb_core::simulate::{run, Mode, RunConfig, NEG_PROFIT_TOL};
use arb_core::synth::{synthetic_prices, SynthConfig};
use chrono::{Duration, NaiveDate};
use proptest::prelude::*;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 4, 1).unwrap()
}

fn config(mode: Mode, window: usize, days: i64, cycle_max: f64) -> RunConfig {
    let mut cfg = RunConfig::new(mode, window, start(), start() + Duration::days(days - 1));
    cfg.battery.cycle_max = cycle_max;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    #[test]
    fn oracle_runs_are_consistent(seed in 0u64..10_000, cycle_max in 20.0f64..200.0) {
        let days = 20;
        let series = synthetic_prices("DE", start(), days as usize, &SynthConfig::default(), seed).unwrap();
        let on_cfg = config(Mode::Oracle, 0, days, cycle_max);
        let on = run(&on_cfg, &series).unwrap();
        let mut off_cfg = on_cfg.clone();
        off_cfg.degradation = false;
        let off = run(&off_cfg, &series).unwrap();

        // Zero schedule is feasible and fgc = 0, so hindsight never loses money.
        for d in &on.days {
            prop_assert!(d.realized_profit >= -NEG_PROFIT_TOL, "{} {}", d.date, d.realized_profit);
        }

        let sum: f64 = on.days.iter().map(|d| d.cycles_used).sum();
        prop_assert!((on.total_cycles - sum).abs() <= 1e-9 * (1.0 + sum));
        let mut state = BatteryState::initial(&on_cfg.battery);
        for d in &on.days {
            prop_assert!((state.q - d.q_start).abs() <= 1e-6);
            prop_assert!((state.eta - d.eta_start).abs() <= 1e-12);
            state = update_degradation(&state, &on_cfg.battery, d.schedule.energy_exchanged()).unwrap();
        }
        prop_assert!((state.n_cycles - on.total_cycles).abs() <= 1e-9 * (1.0 + sum));

        for (a, b) in on.days.iter().zip(&off.days) {
            prop_assert!(b.q_start >= a.q_start && b.eta_start >= a.eta_start);
        }
        let slack = 1e-6 * on.total_profit.abs().max(1.0);
        prop_assert!(off.total_profit >= on.total_profit - slack, "{} < {}", off.total_profit, on.total_profit);
    }

    #[test]
    fn predictive_never_beats_hindsight_per_day_from_fresh_state(seed in 0u64..10_000, window in 1usize..5) {
        // Without fading every day starts from the same state, so the MILP-O
        // run is the per-day hindsight optimum for MILP-P's state.
        let days = 12;
        let series = synthetic_prices("DE", start(), days as usize, &SynthConfig::default(), seed).unwrap();
        let mut p_cfg = config(Mode::Predictive, window, days, 4000.0);
        p_cfg.degradation = false;
        let mut o_cfg = p_cfg.clone();
        o_cfg.mode = Mode::Oracle;
        let p = run(&p_cfg, &series).unwrap();
        let o = run(&o_cfg, &series).unwrap();
        for d in &p.days {
            let od = o.days.iter().find(|x| x.date == d.date).unwrap();
            prop_assert!(d.realized_profit <= od.realized_profit + 1e-6 * od.realized_profit.abs().max(1.0));
        }
    }
}
