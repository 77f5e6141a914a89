//! Hourly day-ahead price data, rolling-mean forecasts and forecast error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, Timelike, Utc};

use crate::{ArbError, Result, HOURS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceKind {
    Actual,
    Forecast,
}

/// 24 hourly prices (EUR/MWh) for one date.
#[derive(Debug, Clone, PartialEq)]
pub struct DayPrices {
    pub date: NaiveDate,
    pub values: [f64; HOURS],
    pub kind: PriceKind,
}

/// Consecutive days of hourly prices for one country, EUR/MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    country: String,
    days: Vec<NaiveDate>,
    prices: Vec<[f64; HOURS]>,
}

impl PriceSeries {
    pub fn new(country: impl Into<String>, start: NaiveDate, prices: Vec<[f64; HOURS]>) -> Result<Self> {
        if prices.iter().flatten().any(|p| !p.is_finite()) {
            return Err(ArbError::Data("price series contains non-finite values".into()));
        }
        let days = (0..prices.len())
            .map(|k| start + Duration::days(k as i64))
            .collect();
        Ok(PriceSeries {
            country: country.into(),
            days,
            prices,
        })
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn first_day(&self) -> Option<NaiveDate> {
        self.days.first().copied()
    }

    pub fn last_day(&self) -> Option<NaiveDate> {
        self.days.last().copied()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let first = self.first_day()?;
        let k = (date - first).num_days();
        (k >= 0 && (k as usize) < self.days.len()).then_some(k as usize)
    }

    pub fn actual(&self, date: NaiveDate) -> Option<DayPrices> {
        self.index_of(date).map(|k| DayPrices {
            date,
            values: self.prices[k],
            kind: PriceKind::Actual,
        })
    }

    /// Copy with every price multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> PriceSeries {
        PriceSeries {
            country: self.country.clone(),
            days: self.days.clone(),
            prices: self
                .prices
                .iter()
                .map(|row| row.map(|p| p * factor))
                .collect(),
        }
    }

    /// Write in the `datetime,country,price_eur_mwh` input schema.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "datetime,country,price_eur_mwh").expect("write to vec");
        for (day, row) in self.days.iter().zip(&self.prices) {
            for (h, p) in row.iter().enumerate() {
                writeln!(out, "{}T{:02}:00:00Z,{},{}", day, h, self.country, p)
                    .expect("write to vec");
            }
        }
        std::fs::write(path, out).map_err(|e| ArbError::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Drop an incomplete first or last day instead of failing.
    pub drop_incomplete_boundary_days: bool,
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc).naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
}

/// Load `[start, end]` for `country` from a CSV with columns `datetime`
/// (ISO-8601, UTC, hourly), `country` and `price_eur_mwh`.
///
/// Every UTC day in the range must carry exactly 24 distinct hourly
/// records. Nothing is interpolated.
pub fn load_price_csv(
    path: &Path,
    country: &str,
    start: NaiveDate,
    end: NaiveDate,
    options: LoadOptions,
) -> Result<PriceSeries> {
    if end < start {
        return Err(ArbError::Validation(format!("empty date range {start}..{end}")));
    }
    if !path.exists() {
        return Err(ArbError::Data(format!("price file {} not found", path.display())));
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| ArbError::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| ArbError::csv(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| ArbError::Data(format!("{}: missing column `{name}`", path.display())))
    };
    let (dt_col, country_col, price_col) = (col("datetime")?, col("country")?, col("price_eur_mwh")?);

    let mut seen_country = false;
    let mut by_day: BTreeMap<NaiveDate, [Option<f64>; HOURS]> = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| ArbError::csv(path, e))?;
        if rec.get(country_col).map(str::trim) != Some(country) {
            continue;
        }
        seen_country = true;
        let raw_ts = rec.get(dt_col).unwrap_or("");
        let ts = parse_timestamp(raw_ts).ok_or_else(|| {
            ArbError::Data(format!("line {line}: bad timestamp `{raw_ts}`"))
        })?;
        if ts.minute() != 0 || ts.second() != 0 {
            return Err(ArbError::Data(format!(
                "line {line}: timestamp `{raw_ts}` is not on the hour"
            )));
        }
        let date = ts.date();
        if date < start || date > end {
            continue;
        }
        let price: f64 = rec
            .get(price_col)
            .and_then(|v| v.trim().parse().ok())
            .filter(|p: &f64| p.is_finite())
            .ok_or_else(|| ArbError::Data(format!("line {line}: bad price")))?;
        let slot = &mut by_day.entry(date).or_insert([None; HOURS])[ts.hour() as usize];
        if slot.replace(price).is_some() {
            return Err(ArbError::Data(format!(
                "duplicate hour {} on {date} for {country}",
                ts.hour()
            )));
        }
    }
    if !seen_country {
        return Err(ArbError::Data(format!(
            "unknown country `{country}` in {}",
            path.display()
        )));
    }

    let mut first = start;
    let mut last = end;
    let complete = |d: NaiveDate| by_day.get(&d).is_some_and(|h| h.iter().all(Option::is_some));
    if options.drop_incomplete_boundary_days {
        if !complete(first) {
            first += Duration::days(1);
        }
        if last >= first && !complete(last) {
            last -= Duration::days(1);
        }
    }
    if last < first {
        return Err(ArbError::Data(format!("no complete days in {start}..{end}")));
    }
    let mut rows = Vec::new();
    let mut day = first;
    while day <= last {
        let hours = by_day.get(&day).copied().unwrap_or([None; HOURS]);
        let missing: Vec<usize> = (0..HOURS).filter(|&h| hours[h].is_none()).collect();
        if !missing.is_empty() {
            return Err(ArbError::Data(format!(
                "incomplete day {day} for {country}: missing hours {missing:?}"
            )));
        }
        rows.push(hours.map(|p| p.expect("checked complete")));
        day += Duration::days(1);
    }
    PriceSeries::new(country, first, rows)
}

/// Mean of each hour over the `window` days preceding `date`.
pub fn forecast(series: &PriceSeries, date: NaiveDate, window: usize) -> Result<DayPrices> {
    if window == 0 {
        return Err(ArbError::Validation("forecast window must be at least 1 day".into()));
    }
    let first_needed = date - Duration::days(window as i64);
    let (Some(lo), Some(_)) = (
        series.index_of(first_needed),
        series.index_of(date - Duration::days(1)),
    ) else {
        return Err(ArbError::Data(format!(
            "insufficient history for {date}: need {window} days from {first_needed}"
        )));
    };
    let mut values = [0.0; HOURS];
    for row in &series.prices[lo..lo + window] {
        for (v, p) in values.iter_mut().zip(row) {
            *v += p;
        }
    }
    for v in &mut values {
        *v /= window as f64;
    }
    Ok(DayPrices {
        date,
        values,
        kind: PriceKind::Forecast,
    })
}

/// Mean absolute error between a forecast and the realized prices.
pub fn mae(forecast: &DayPrices, actual: &DayPrices) -> Result<f64> {
    if forecast.date != actual.date {
        return Err(ArbError::Validation(format!(
            "mae date mismatch: {} vs {}",
            forecast.date, actual.date
        )));
    }
    Ok(forecast
        .values
        .iter()
        .zip(&actual.values)
        .map(|(f, a)| (f - a).abs())
        .sum::<f64>()
        / HOURS as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("prices.csv");
        std::fs::write(&p, body).unwrap();
        p
    }

    fn constant_csv(days: &[&str], skip: Option<(usize, usize)>) -> String {
        let mut s = String::from("datetime,country,price_eur_mwh\n");
        for (k, day) in days.iter().enumerate() {
            for h in 0..24 {
                if skip == Some((k, h)) {
                    continue;
                }
                s.push_str(&format!("{day}T{h:02}:00:00Z,DE,100.0\n"));
                s.push_str(&format!("{day}T{h:02}:00:00Z,FR,50.0\n"));
            }
        }
        s
    }

    #[test]
    fn loads_constant_days() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, &constant_csv(&["2022-01-01", "2022-01-02"], None));
        let s = load_price_csv(&p, "DE", d("2022-01-01"), d("2022-01-02"), LoadOptions::default())
            .unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.prices.iter().flatten().all(|&p| p == 100.0));
    }

    #[test]
    fn rejects_incomplete_and_unknown() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, &constant_csv(&["2022-01-01", "2022-01-02"], Some((0, 13))));
        let err = load_price_csv(&p, "DE", d("2022-01-01"), d("2022-01-02"), LoadOptions::default())
            .unwrap_err();
        assert!(err.to_string().contains("incomplete day"), "{err}");
        let err = load_price_csv(&p, "IT", d("2022-01-01"), d("2022-01-02"), LoadOptions::default())
            .unwrap_err();
        assert!(err.to_string().contains("unknown country"));
        let missing = dir.path().join("nope.csv");
        assert!(load_price_csv(&missing, "DE", d("2022-01-01"), d("2022-01-01"), LoadOptions::default()).is_err());
    }

    #[test]
    fn boundary_days_can_be_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            &constant_csv(&["2022-03-26", "2022-03-27", "2022-03-28"], Some((0, 2))),
        );
        let opts = LoadOptions {
            drop_incomplete_boundary_days: true,
        };
        let s = load_price_csv(&p, "DE", d("2022-03-26"), d("2022-03-28"), opts).unwrap();
        assert_eq!(s.first_day(), Some(d("2022-03-27")));
        assert_eq!(s.len(), 2);
        // An inner gap still aborts.
        let p = write(
            &dir,
            &constant_csv(&["2022-03-26", "2022-03-27", "2022-03-28"], Some((1, 2))),
        );
        assert!(load_price_csv(&p, "DE", d("2022-03-26"), d("2022-03-28"), opts).is_err());
    }

    #[test]
    fn duplicate_hour_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = constant_csv(&["2022-01-01"], None);
        body.push_str("2022-01-01T05:00:00Z,DE,1.0\n");
        let p = write(&dir, &body);
        let err = load_price_csv(&p, "DE", d("2022-01-01"), d("2022-01-01"), LoadOptions::default())
            .unwrap_err();
        assert!(err.to_string().contains("duplicate hour 5"));
    }

    #[test]
    fn offsets_are_normalized_to_utc() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("datetime,country,price_eur_mwh\n");
        for h in 0..24u32 {
            let local = d("2022-01-01").and_hms_opt(h, 0, 0).unwrap() + Duration::hours(1);
            body.push_str(&format!("{}+01:00,DE,{h}\n", local.format("%Y-%m-%dT%H:%M:%S")));
        }
        let p = write(&dir, &body);
        let s = load_price_csv(&p, "DE", d("2022-01-01"), d("2022-01-01"), LoadOptions::default())
            .unwrap();
        assert_eq!(s.actual(d("2022-01-01")).unwrap().values[0], 0.0);
        assert_eq!(s.actual(d("2022-01-01")).unwrap().values[23], 23.0);
    }

    fn series(rows: Vec<[f64; 24]>) -> PriceSeries {
        PriceSeries::new("DE", d("2022-01-01"), rows).unwrap()
    }

    #[test]
    fn forecast_means() {
        let mut a = [0.0; 24];
        let mut b = [0.0; 24];
        a[0] = 10.0;
        b[0] = 30.0;
        b[5] = 7.0;
        let s = series(vec![a, b, [1.0; 24]]);
        let f = forecast(&s, d("2022-01-03"), 2).unwrap();
        assert_eq!(f.values[0], 20.0);
        assert_eq!(f.values[5], 3.5);
        assert_eq!(f.kind, PriceKind::Forecast);
        let f1 = forecast(&s, d("2022-01-03"), 1).unwrap();
        assert_eq!(f1.values, b);
        assert!(forecast(&s, d("2022-01-02"), 2).is_err());
        assert!(forecast(&s, d("2022-01-03"), 0).is_err());
    }

    #[test]
    fn mae_cases() {
        let a = DayPrices {
            date: d("2022-01-01"),
            values: [5.0; 24],
            kind: PriceKind::Actual,
        };
        let f = DayPrices {
            values: [0.0; 24],
            kind: PriceKind::Forecast,
            ..a.clone()
        };
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        assert_eq!(mae(&f, &a).unwrap(), 5.0);
        let other = DayPrices {
            date: d("2022-01-02"),
            ..f
        };
        assert!(mae(&other, &a).is_err());
    }
}
