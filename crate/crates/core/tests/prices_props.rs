use arb_core::prices::{forecast, mae, DayPrices, PriceKind, PriceSeries};
use arb_core::HOURS;
use chrono::NaiveDate;
use proptest::prelude::*;

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 1, 1).unwrap()
}

fn day_strategy() -> impl Strategy<Value = [f64; HOURS]> {
    prop::array::uniform24(-100.0f64..500.0)
}

fn as_day(values: [f64; HOURS]) -> DayPrices {
    DayPrices {
        date: start(),
        values,
        kind: PriceKind::Actual,
    }
}

proptest! {
    #[test]
    fn forecast_is_linear(rows in prop::collection::vec(day_strategy(), 2..12), c in -3.0f64..3.0, pick in 0usize..100) {
        let series = PriceSeries::new("DE", start(), rows.clone()).unwrap();
        let scaled = series.scaled(c);
        let n = rows.len();
        let target = start() + chrono::Duration::days((n - 1) as i64);
        let window = 1 + pick % (n - 1);
        let f = forecast(&series, target, window).unwrap();
        let g = forecast(&scaled, target, window).unwrap();
        for h in 0..HOURS {
            let want = c * f.values[h];
            prop_assert!((g.values[h] - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
        // Independent mean over the window.
        for h in 0..HOURS {
            let mean: f64 = rows[n - 1 - window..n - 1].iter().map(|r| r[h]).sum::<f64>() / window as f64;
            prop_assert!((f.values[h] - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
        }
    }

    #[test]
    fn constant_series_forecasts_itself(day in day_strategy(), len in 2usize..30, pick in 0usize..100) {
        let series = PriceSeries::new("DE", start(), vec![day; len]).unwrap();
        let target = start() + chrono::Duration::days((len - 1) as i64);
        let window = 1 + pick % (len - 1);
        let f = forecast(&series, target, window).unwrap();
        for h in 0..HOURS {
            prop_assert!((f.values[h] - day[h]).abs() <= 1e-9 * (1.0 + day[h].abs()));
        }
    }

    #[test]
    fn mae_is_a_distance(a in day_strategy(), b in day_strategy()) {
        let (da, db) = (as_day(a), as_day(b));
        let m = mae(&da, &db).unwrap();
        prop_assert!(m >= 0.0);
        prop_assert_eq!(mae(&da, &da).unwrap(), 0.0);
        prop_assert_eq!(m == 0.0, a == b);
        prop_assert_eq!(m, mae(&db, &da).unwrap());
    }
}
