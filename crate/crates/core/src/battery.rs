//! Battery model: rate curves, one-hour SOC reach, degradation.

use std::path::Path;

use crate::{ArbError, Result};

/// RK4 steps per simulated hour.
pub const RK4_STEPS_PER_HOUR: usize = 1000;

/// Charge or discharge rate (W/Wh) as a piecewise-linear function of SOC.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    points: Vec<(f64, f64)>,
}

impl RateCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(ArbError::Validation(
                "rate curve needs at least 2 breakpoints".into(),
            ));
        }
        if points[0].0 != 0.0 || points[points.len() - 1].0 != 1.0 {
            return Err(ArbError::Validation(
                "rate curve must start at soc 0 and end at soc 1".into(),
            ));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ArbError::Validation(
                "rate curve soc values must be strictly increasing".into(),
            ));
        }
        if points.iter().any(|&(_, r)| !r.is_finite() || r < 0.0) {
            return Err(ArbError::Validation(
                "rate curve rates must be finite and nonnegative".into(),
            ));
        }
        Ok(RateCurve { points })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        RateCurve::new(vec![(0.0, rate), (1.0, rate)])
    }

    /// Stand-in lithium-ion charge curve: flat 0.5 W/Wh to half charge,
    /// tapering towards full.
    pub fn default_charge() -> Self {
        RateCurve {
            points: vec![(0.0, 0.5), (0.5, 0.5), (0.9, 0.15), (1.0, 0.05)],
        }
    }

    /// Stand-in discharge curve: flat 0.5 W/Wh above half charge, tapering
    /// to 0.2 W/Wh at empty. From the first default cut point (SOC 0.2) the
    /// battery still drains completely within one hour.
    pub fn default_discharge() -> Self {
        RateCurve {
            points: vec![(0.0, 0.2), (0.1, 0.3), (0.5, 0.5), (1.0, 0.5)],
        }
    }

    /// Exact mirror of [`RateCurve::default_charge`]. With five intervals
    /// its interpolated lower bound near empty is proportional to SOC, so a
    /// battery that charges can never return to exactly empty.
    pub fn mirrored_stand_in() -> Self {
        RateCurve {
            points: vec![(0.0, 0.05), (0.1, 0.15), (0.5, 0.5), (1.0, 0.5)],
        }
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// The curve reflected about half charge: `g(s) = f(1 - s)`.
    pub fn mirrored(&self) -> Self {
        RateCurve {
            points: self.points.iter().rev().map(|&(s, r)| (1.0 - s, r)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        RateCurve {
            points: self.points.iter().map(|&(s, r)| (s, r * factor)).collect(),
        }
    }

    pub fn rate_at(&self, soc: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&soc) {
            return Err(ArbError::Validation(format!("soc {soc} outside [0, 1]")));
        }
        Ok(self.eval(soc))
    }

    /// Interpolated rate with the argument clamped onto [0, 1].
    pub(crate) fn eval(&self, soc: f64) -> f64 {
        let s = soc.clamp(0.0, 1.0);
        let k = self.points.partition_point(|&(x, _)| x <= s);
        if k == 0 {
            return self.points[0].1;
        }
        if k == self.points.len() {
            return self.points[k - 1].1;
        }
        let (x0, r0) = self.points[k - 1];
        let (x1, r1) = self.points[k];
        if s == x0 {
            return r0;
        }
        r0 + (r1 - r0) * (s - x0) / (x1 - x0)
    }

    /// Read a curve from a CSV with `soc` and `rate_w_per_wh` columns.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| ArbError::csv(path, e))?;
        let headers = rdr.headers().map_err(|e| ArbError::csv(path, e))?.clone();
        let col = |name: &str| {
            headers.iter().position(|h| h.trim() == name).ok_or_else(|| {
                ArbError::Data(format!("{}: missing column `{name}`", path.display()))
            })
        };
        let (soc_col, rate_col) = (col("soc")?, col("rate_w_per_wh")?);
        let mut points = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| ArbError::csv(path, e))?;
            let num = |c: usize| -> Result<f64> {
                rec.get(c)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| {
                        ArbError::Data(format!("{}: bad number on row {}", path.display(), line + 2))
                    })
            };
            points.push((num(soc_col)?, num(rate_col)?));
        }
        RateCurve::new(points)
    }
}

fn integrate(curve: &RateCurve, soc0: f64, sign: f64) -> f64 {
    let h = 1.0 / RK4_STEPS_PER_HOUR as f64;
    let f = |s: f64| sign * curve.eval(s);
    let mut s = soc0;
    for _ in 0..RK4_STEPS_PER_HOUR {
        if (sign > 0.0 && s >= 1.0) || (sign < 0.0 && s <= 0.0) {
            break;
        }
        let k1 = f(s);
        let k2 = f(s + 0.5 * h * k1);
        let k3 = f(s + 0.5 * h * k2);
        let k4 = f(s + h * k3);
        s = (s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).clamp(0.0, 1.0);
    }
    s
}

fn check_soc(soc: f64) -> Result<()> {
    if (0.0..=1.0).contains(&soc) {
        Ok(())
    } else {
        Err(ArbError::Validation(format!("soc {soc} outside [0, 1]")))
    }
}

/// Largest SOC increase reachable in one hour of charging from `soc0`.
pub fn max_soc_delta(charge: &RateCurve, soc0: f64) -> Result<f64> {
    check_soc(soc0)?;
    let reached = integrate(charge, soc0, 1.0);
    Ok((reached - soc0).clamp(0.0, 1.0 - soc0))
}

/// Largest SOC decrease (as a nonpositive number) reachable in one hour of
/// discharging from `soc0`.
pub fn min_soc_delta(discharge: &RateCurve, soc0: f64) -> Result<f64> {
    check_soc(soc0)?;
    let reached = integrate(discharge, soc0, -1.0);
    Ok((reached - soc0).clamp(-soc0, 0.0))
}

/// SOC at hours 0..=H given hourly energy changes `energy` (Wh).
pub fn soc_trajectory(e_init: f64, energy: &[f64], capacity: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(energy.len() + 1);
    let mut stored = e_init;
    out.push(stored / capacity);
    for e in energy {
        stored += e;
        out.push(stored / capacity);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryConfig {
    /// Initial capacity, Wh.
    pub q0: f64,
    pub eta0: f64,
    /// Cycle life; `f64::INFINITY` disables fading.
    pub cycle_max: f64,
    pub charge_curve: RateCurve,
    pub discharge_curve: RateCurve,
    pub q_min_frac: f64,
    pub eta_min_frac: f64,
    /// Energy stored at the start of every day, Wh.
    pub e_init: f64,
}

impl Default for BatteryConfig {
    /// 1 MWh battery, 99% efficiency, 4000-cycle life, stand-in curves.
    fn default() -> Self {
        BatteryConfig {
            q0: 1e6,
            eta0: 0.99,
            cycle_max: 4000.0,
            charge_curve: RateCurve::default_charge(),
            discharge_curve: RateCurve::default_discharge(),
            q_min_frac: 0.8,
            eta_min_frac: 0.8,
            e_init: 0.0,
        }
    }
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ArbError::Validation(format!("battery: {msg}")));
        if !(self.q0 > 0.0 && self.q0.is_finite()) {
            return bad("q0 must be positive");
        }
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return bad("eta0 must lie in (0, 1]");
        }
        if !(self.cycle_max > 0.0) {
            return bad("cycle_max must be positive");
        }
        if !(self.q_min_frac > 0.0 && self.q_min_frac <= 1.0) {
            return bad("q_min_frac must lie in (0, 1]");
        }
        if !(self.eta_min_frac > 0.0 && self.eta_min_frac <= 1.0) {
            return bad("eta_min_frac must lie in (0, 1]");
        }
        if !(self.e_init >= 0.0 && self.e_init <= self.q0) {
            return bad("e_init must lie in [0, q0]");
        }
        Ok(())
    }

    /// Capacity lost per cycle, Wh.
    pub fn alpha(&self) -> f64 {
        self.q0 * (1.0 - self.q_min_frac) / self.cycle_max
    }

    /// Efficiency lost per cycle.
    pub fn beta(&self) -> f64 {
        self.eta0 * (1.0 - self.eta_min_frac) / self.cycle_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryState {
    pub day: usize,
    pub n_cycles: f64,
    /// Capacity, Wh.
    pub q: f64,
    pub eta: f64,
    /// Total energy exchanged so far, Wh.
    pub cum_energy_exchanged: f64,
}

impl BatteryState {
    pub fn initial(config: &BatteryConfig) -> Self {
        BatteryState {
            day: 0,
            n_cycles: 0.0,
            q: config.q0,
            eta: config.eta0,
            cum_energy_exchanged: 0.0,
        }
    }
}

/// Advance the state by one day in which `e_day` Wh (sum of |E(h)|) were
/// exchanged. Capacity and efficiency fade linearly in cycles down to
/// their floors.
pub fn update_degradation(
    state: &BatteryState,
    config: &BatteryConfig,
    e_day: f64,
) -> Result<BatteryState> {
    if !(e_day >= 0.0) || !e_day.is_finite() {
        return Err(ArbError::Validation(format!(
            "daily energy exchanged must be finite and nonnegative, got {e_day}"
        )));
    }
    let cum = state.cum_energy_exchanged + e_day;
    let n_cycles = cum / (2.0 * config.q0);
    let q = (config.q0 - config.alpha() * n_cycles).max(config.q_min_frac * config.q0);
    let eta = (config.eta0 - config.beta() * n_cycles).max(config.eta_min_frac * config.eta0);
    Ok(BatteryState {
        day: state.day + 1,
        n_cycles,
        q: q.min(state.q),
        eta: eta.min(state.eta),
        cum_energy_exchanged: cum,
    })
}
