//! Synthetic prices and random small problems.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::battery::{BatteryConfig, RateCurve};
use crate::model::{AvailabilityBounds, DayProblem, GridCostSchedule, DEFAULT_EPSILON};
use crate::prices::PriceSeries;
use crate::pwl::PwlTable;
use crate::{Result, HOURS};

/// Shape parameters for [`synthetic_prices`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Mean price level, EUR/MWh.
    pub level: f64,
    /// Relative amplitude of the yearly cycle.
    pub seasonal: f64,
    /// Relative amplitude of the intraday shape.
    pub intraday: f64,
    /// Day-to-day persistence of the level shock.
    pub persistence: f64,
    /// Std. dev. of the daily log-level shock.
    pub daily_sigma: f64,
    /// Std. dev. of hourly noise relative to the day level.
    pub hourly_sigma: f64,
    /// Weekend level multiplier.
    pub weekend: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            level: 230.0,
            seasonal: 0.35,
            intraday: 0.45,
            persistence: 0.85,
            daily_sigma: 0.12,
            hourly_sigma: 0.08,
            weekend: 0.8,
        }
    }
}

// Typical day-ahead hourly profile: night trough, morning ramp, midday solar
// dip, evening peak. Mean zero.
const PROFILE: [f64; HOURS] = [
    -0.55, -0.70, -0.80, -0.85, -0.75, -0.45, 0.05, 0.55, 0.70, 0.45, 0.10, -0.15, -0.30, -0.35,
    -0.20, 0.05, 0.40, 0.85, 1.10, 1.00, 0.70, 0.40, 0.10, -0.25,
];

/// Deterministic Germany-like hourly prices for `days` days from `start`.
pub fn synthetic_prices(
    country: &str,
    start: NaiveDate,
    days: usize,
    cfg: &SynthConfig,
    seed: u64,
) -> Result<PriceSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shock = Normal::new(0.0, cfg.daily_sigma).expect("finite sigma");
    let noise = Normal::new(0.0, cfg.hourly_sigma).expect("finite sigma");
    let profile_mean = PROFILE.iter().sum::<f64>() / HOURS as f64;
    let mut log_level = 0.0f64;
    let mut rows = Vec::with_capacity(days);
    for i in 0..days {
        let date = start + chrono::Duration::days(i as i64);
        log_level = cfg.persistence * log_level + shock.sample(&mut rng);
        let phase = 2.0 * std::f64::consts::PI * f64::from(date.ordinal0()) / 365.0;
        let mut level = cfg.level * (1.0 + cfg.seasonal * phase.cos()) * log_level.exp();
        if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            level *= cfg.weekend;
        }
        let swing = cfg.intraday * rng.random_range(0.6..1.4);
        let mut day = [0.0; HOURS];
        for (h, p) in day.iter_mut().enumerate() {
            let shape = 1.0 + swing * (PROFILE[h] - profile_mean);
            *p = level * (shape + noise.sample(&mut rng));
            *p = (*p * 100.0).round() / 100.0;
        }
        rows.push(day);
    }
    PriceSeries::new(country, start, rows)
}

/// A random small scheduling problem and the parameters used to build it.
#[derive(Debug, Clone)]
pub struct SmallProblem {
    pub problem: DayProblem,
    pub battery: BatteryConfig,
}

/// Largest binary count accepted for oracle-sized problems.
pub const MAX_ORACLE_BINARIES: usize = 20;

/// `(hours, n_int)` pairs with 4 to 8 hours, two or three intervals and at
/// most [`MAX_ORACLE_BINARIES`] binaries.
pub fn oracle_shapes() -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for hours in 4..=8 {
        for n_int in [2, 3] {
            if hours * (2 + n_int) <= MAX_ORACLE_BINARIES {
                out.push((hours, n_int));
            }
        }
    }
    out
}

/// `floor` bounds every rate from below.
fn random_curve(rng: &mut ChaCha8Rng, charging: bool, floor: f64) -> RateCurve {
    let inner = rng.random_range(0..=2usize);
    let mut socs: Vec<f64> = (0..inner).map(|_| rng.random_range(0.1..0.9)).collect();
    socs.sort_by(f64::total_cmp);
    socs.dedup_by(|a, b| (*a - *b).abs() < 0.05);
    let mut points = vec![(0.0, 0.0)];
    points.extend(socs.into_iter().map(|s| (s, 0.0)));
    points.push((1.0, 0.0));
    let top = rng.random_range(0.2..1.0);
    let n = points.len();
    for (i, p) in points.iter_mut().enumerate() {
        // Charging slows toward full, discharging toward empty.
        let t = i as f64 / (n - 1) as f64;
        let taper = if charging { 1.0 - 0.8 * t } else { 0.2 + 0.8 * t };
        p.1 = (top * taper * rng.random_range(0.8..1.0)).max(floor);
    }
    RateCurve::new(points).expect("generated curve is valid")
}

/// Random oracle-sized problem; deterministic in `seed`.
pub fn random_small_problem(seed: u64) -> Result<SmallProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = oracle_shapes();
    let (hours, n_int) = shapes[rng.random_range(0..shapes.len())];
    let battery = BatteryConfig {
        charge_curve: random_curve(&mut rng, true, 0.02),
        // Fast enough near empty to drain the first interval within an
        // hour; slower curves only approach empty geometrically.
        discharge_curve: random_curve(&mut rng, false, 1.05 / n_int as f64),
        ..BatteryConfig::default()
    };
    let table = PwlTable::build(&battery, n_int, 1.0)?;
    let q = rng.random_range(0.5e6..1.0e6);
    let prices: Vec<f64> = (0..hours)
        .map(|_| (rng.random_range(-30.0..250.0f64) * 100.0).round() / 100.0)
        .collect();
    let vgc = rng.random_range(0.0..10.0);
    let fgc = if rng.random_bool(0.5) {
        0.0
    } else {
        rng.random_range(0.0..5.0)
    };
    // Idle must stay feasible: a nonzero start forbids the empty terminal
    // bound, and lowered caps never fall below the starting SOC.
    let empty_at_end = rng.random_bool(0.5);
    let e_init = if empty_at_end || rng.random_bool(0.5) {
        0.0
    } else {
        q * rng.random_range(0.0..0.5)
    };
    let mut bounds = AvailabilityBounds::unrestricted(hours);
    for h in 0..hours {
        if rng.random_bool(0.2) {
            bounds.soc_max[h] = rng.random_range(0.3..1.0f64).max(e_init / q);
        }
    }
    if empty_at_end {
        bounds.soc_max[hours - 1] = 0.0;
    }
    let problem = DayProblem {
        date: NaiveDate::from_ymd_opt(2022, 1, 1).expect("valid date"),
        prices,
        grid: GridCostSchedule::flat(hours, vgc, fgc),
        bounds,
        table,
        q,
        eta: rng.random_range(0.85..=1.0),
        e_init,
        big_m: q,
        epsilon: DEFAULT_EPSILON,
    };
    Ok(SmallProblem { problem, battery })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_milp;

    #[test]
    fn prices_are_deterministic() {
        let start = NaiveDate::from_ymd_opt(2022, 1, 1).unwrap();
        let a = synthetic_prices("DE", start, 30, &SynthConfig::default(), 7).unwrap();
        let b = synthetic_prices("DE", start, 30, &SynthConfig::default(), 7).unwrap();
        let c = synthetic_prices("DE", start, 30, &SynthConfig::default(), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 30);
    }

    #[test]
    fn shapes_respect_binary_cap() {
        let shapes = oracle_shapes();
        assert_eq!(shapes, vec![(4, 2), (4, 3), (5, 2)]);
        for seed in 0..50 {
            let sp = random_small_problem(seed).unwrap();
            let milp = build_milp(&sp.problem).unwrap();
            assert!(milp.instance.num_binaries() <= MAX_ORACLE_BINARIES);
        }
    }
}
