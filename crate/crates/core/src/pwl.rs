//! Piecewise-linear tables of the one-hour SOC reach functions.

use std::io::Write;
use std::path::Path;

use crate::battery::{max_soc_delta, min_soc_delta, BatteryConfig};
use crate::{ArbError, Result};

pub const DEFAULT_INTERVALS: usize = 5;

/// Samples of the upper and lower one-hour SOC deltas at the cut points
/// `k / n_int`, `k = 0..=n_int`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlTable {
    n_int: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
}

impl PwlTable {
    pub fn build(config: &BatteryConfig, n_int: usize, rate_scale: f64) -> Result<Self> {
        if n_int == 0 {
            return Err(ArbError::Validation("n_int must be at least 1".into()));
        }
        if !(rate_scale > 0.0 && rate_scale.is_finite()) {
            return Err(ArbError::Validation("rate_scale must be positive".into()));
        }
        let charge = config.charge_curve.scaled(rate_scale);
        let discharge = config.discharge_curve.scaled(rate_scale);
        let mut upper = Vec::with_capacity(n_int + 1);
        let mut lower = Vec::with_capacity(n_int + 1);
        for k in 0..=n_int {
            let s = cut_point(k, n_int);
            upper.push(max_soc_delta(&charge, s)?);
            lower.push(min_soc_delta(&discharge, s)?);
        }
        Ok(PwlTable { n_int, upper, lower })
    }

    /// Build from explicit samples, checking the table invariants.
    pub fn from_samples(upper: Vec<f64>, lower: Vec<f64>) -> Result<Self> {
        if upper.len() < 2 || upper.len() != lower.len() {
            return Err(ArbError::Validation(
                "pwl table needs matching upper/lower samples with at least 2 points".into(),
            ));
        }
        let n_int = upper.len() - 1;
        for k in 0..=n_int {
            let s = cut_point(k, n_int);
            let tol = 1e-12;
            if !(upper[k] >= -tol && upper[k] <= 1.0 - s + tol) {
                return Err(ArbError::Validation(format!(
                    "upper[{k}] = {} outside [0, {}]",
                    upper[k],
                    1.0 - s
                )));
            }
            if !(lower[k] <= tol && lower[k] >= -s - tol) {
                return Err(ArbError::Validation(format!(
                    "lower[{k}] = {} outside [{}, 0]",
                    lower[k], -s
                )));
            }
        }
        Ok(PwlTable { n_int, upper, lower })
    }

    pub fn n_int(&self) -> usize {
        self.n_int
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// `(upper, lower)` bound on the hourly SOC change at `soc`.
    pub fn interpolate(&self, soc: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&soc) {
            return Err(ArbError::Validation(format!("soc {soc} outside [0, 1]")));
        }
        Ok(self.eval(soc))
    }

    pub(crate) fn eval(&self, soc: f64) -> (f64, f64) {
        let n = self.n_int as f64;
        let pos = soc.clamp(0.0, 1.0) * n;
        let k = (pos.floor() as usize).min(self.n_int - 1);
        let w = pos - k as f64;
        if w == 0.0 {
            return (self.upper[k], self.lower[k]);
        }
        if w == 1.0 {
            return (self.upper[k + 1], self.lower[k + 1]);
        }
        (
            self.upper[k] + w * (self.upper[k + 1] - self.upper[k]),
            self.lower[k] + w * (self.lower[k + 1] - self.lower[k]),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "k,soc,upper,lower").expect("write to vec");
        for k in 0..=self.n_int {
            writeln!(
                out,
                "{k},{},{},{}",
                cut_point(k, self.n_int),
                self.upper[k],
                self.lower[k]
            )
            .expect("write to vec");
        }
        std::fs::write(path, out).map_err(|e| ArbError::io(path, e))
    }
}

/// `k / n_int`, exact at the end points.
pub fn cut_point(k: usize, n_int: usize) -> f64 {
    k as f64 / n_int as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::RateCurve;

    fn constant_config(rate: f64) -> BatteryConfig {
        BatteryConfig {
            charge_curve: RateCurve::constant(rate).unwrap(),
            discharge_curve: RateCurve::constant(rate).unwrap(),
            ..BatteryConfig::default()
        }
    }

    #[test]
    fn constant_rate_table() {
        let t = PwlTable::build(&constant_config(0.5), 2, 1.0).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
        assert!(close(t.upper(), &[0.5, 0.5, 0.0]));
        assert!(close(t.lower(), &[0.0, -0.5, -0.5]));
    }

    #[test]
    fn single_interval_is_endpoints() {
        let cfg = BatteryConfig::default();
        let t = PwlTable::build(&cfg, 1, 1.0).unwrap();
        assert_eq!(t.upper().len(), 2);
        assert_eq!(t.upper()[1], 0.0);
        assert_eq!(t.lower()[0], 0.0);
        assert_eq!(
            t.upper()[0],
            max_soc_delta(&cfg.charge_curve, 0.0).unwrap()
        );
    }

    #[test]
    fn interpolation_exact_at_cut_points() {
        let t = PwlTable::build(&BatteryConfig::default(), 5, 1.0).unwrap();
        for k in 0..=5 {
            let (u, l) = t.interpolate(k as f64 / 5.0).unwrap();
            assert_eq!(u, t.upper()[k]);
            assert_eq!(l, t.lower()[k]);
        }
        assert!(t.interpolate(1.2).is_err());
    }

    #[test]
    fn rejects_bad_arguments() {
        let cfg = BatteryConfig::default();
        assert!(PwlTable::build(&cfg, 0, 1.0).is_err());
        assert!(PwlTable::build(&cfg, 3, 0.0).is_err());
        assert!(PwlTable::from_samples(vec![0.5, 0.1], vec![0.0, -0.5]).is_err());
    }

    #[test]
    fn scaling_rates_widens_table() {
        let cfg = BatteryConfig::default();
        let half = PwlTable::build(&cfg, 5, 1.0).unwrap();
        let full = PwlTable::build(&cfg, 5, 2.0).unwrap();
        for k in 0..=5 {
            assert!(full.upper()[k] >= half.upper()[k] - 1e-12);
            assert!(full.lower()[k] <= half.lower()[k] + 1e-12);
        }
    }
}
