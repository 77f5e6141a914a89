//! Experiment configuration file.

use std::path::{Path, PathBuf};

use arb_core::battery::{BatteryConfig, RateCurve};
use arb_core::model::{AvailabilityBounds, GridCostSchedule, DEFAULT_EPSILON};
use arb_core::pwl::DEFAULT_INTERVALS;
use arb_core::simulate::{HistoryPolicy, Mode, RunConfig, SolverChoice};
use arb_core::HOURS;
use arb_milp::{BackendConfig, MpsFormat, SolverOptions};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct AppConfig {
    pub paths: Paths,
    pub battery: Battery,
    pub market: Market,
    pub run: Run,
    pub bounds: Bounds,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Price CSV; synthetic prices are generated when unset.
    pub prices: Option<PathBuf>,
    pub charge_curve: Option<PathBuf>,
    pub discharge_curve: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            prices: None,
            charge_curve: None,
            discharge_curve: None,
            output_dir: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Battery {
    /// Wh.
    pub q0: f64,
    pub eta0: f64,
    /// `inf` disables fading.
    pub cycle_max: f64,
    pub q_min_frac: f64,
    pub eta_min_frac: f64,
    /// Wh.
    pub e_init: f64,
}

impl Default for Battery {
    fn default() -> Self {
        let b = BatteryConfig::default();
        Battery {
            q0: b.q0,
            eta0: b.eta0,
            cycle_max: b.cycle_max,
            q_min_frac: b.q_min_frac,
            eta_min_frac: b.eta_min_frac,
            e_init: b.e_init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Market {
    pub country: String,
    /// `YYYY-MM-DD`, inclusive.
    pub start: String,
    pub end: String,
    /// EUR/MWh.
    pub vgc: f64,
    /// EUR per active hour.
    pub fgc: f64,
    pub drop_incomplete_days: bool,
    /// Seed for synthetic prices when no price file is given.
    pub synthetic_seed: u64,
}

impl Default for Market {
    fn default() -> Self {
        Market {
            country: "DE".into(),
            start: "2022-01-01".into(),
            end: "2022-12-31".into(),
            vgc: 5.0,
            fgc: 0.0,
            drop_incomplete_days: false,
            synthetic_seed: 2022,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Run {
    /// `milp-p` or `milp-o`.
    pub mode: String,
    pub l: usize,
    /// `consume` or `shrink`.
    pub history: String,
    pub n_int: usize,
    pub rate_scale: f64,
    pub degradation: bool,
    /// Wh.
    pub epsilon: f64,
    /// `builtin`, or an executable speaking the backend protocol.
    pub backend: String,
    pub backend_args: Vec<String>,
    /// `free` or `fixed`.
    pub backend_format: String,
    pub gap_tol: f64,
    pub int_tol: f64,
    pub time_limit_s: Option<f64>,
    pub node_limit: Option<usize>,
}

impl Default for Run {
    fn default() -> Self {
        let o = SolverOptions::default();
        Run {
            mode: "milp-o".into(),
            l: 28,
            history: "consume".into(),
            n_int: DEFAULT_INTERVALS,
            rate_scale: 1.0,
            degradation: true,
            epsilon: DEFAULT_EPSILON,
            backend: "builtin".into(),
            backend_args: Vec::new(),
            backend_format: "free".into(),
            gap_tol: o.gap_tol,
            int_tol: o.int_tol,
            time_limit_s: None,
            node_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bounds {
    /// SOC floor after each hour; 24 values or empty for all zero.
    pub soc_min: Vec<f64>,
    /// SOC cap after each hour; 24 values or empty for all one.
    pub soc_max: Vec<f64>,
    /// Cap on the SOC after the last hour, applied over `soc_max`.
    pub terminal_soc_max: Option<f64>,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            soc_min: Vec::new(),
            soc_max: Vec::new(),
            terminal_soc_max: Some(0.0),
        }
    }
}

fn parse_date(field: &str, s: &str) -> Result<NaiveDate, CliError> {
    s.parse()
        .map_err(|_| CliError::Config(format!("{field}: `{s}` is not a YYYY-MM-DD date")))
}

fn hourly(field: &str, v: &[f64], default: f64) -> Result<Vec<f64>, CliError> {
    match v.len() {
        0 => Ok(vec![default; HOURS]),
        HOURS => Ok(v.to_vec()),
        n => Err(CliError::Config(format!("{field}: expected {HOURS} values, got {n}"))),
    }
}

impl AppConfig {
    /// Read `path` (if any), apply `key=value` overrides, and deserialize.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {}", p.display(), one_line(&e.to_string()))))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: AppConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(one_line(&e.to_string())))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check(&self) -> Result<(), CliError> {
        for p in [&self.paths.prices, &self.paths.charge_curve, &self.paths.discharge_curve]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(CliError::Config(format!("file {} does not exist", p.display())));
            }
        }
        self.mode()?;
        self.history()?;
        self.dates()?;
        self.backend_format()?;
        Ok(())
    }

    pub fn mode(&self) -> Result<Mode, CliError> {
        Ok(self.run.mode.parse()?)
    }

    fn history(&self) -> Result<HistoryPolicy, CliError> {
        Ok(self.run.history.parse()?)
    }

    pub fn dates(&self) -> Result<(NaiveDate, NaiveDate), CliError> {
        Ok((
            parse_date("market.start", &self.market.start)?,
            parse_date("market.end", &self.market.end)?,
        ))
    }

    fn backend_format(&self) -> Result<MpsFormat, CliError> {
        match self.run.backend_format.as_str() {
            "free" => Ok(MpsFormat::Free),
            "fixed" => Ok(MpsFormat::Fixed),
            s => Err(CliError::Config(format!(
                "run.backend_format: `{s}` (expected free or fixed)"
            ))),
        }
    }

    pub fn battery_config(&self) -> Result<BatteryConfig, CliError> {
        let b = &self.battery;
        let charge_curve = match &self.paths.charge_curve {
            Some(p) => RateCurve::from_csv(p)?,
            None => RateCurve::default_charge(),
        };
        let discharge_curve = match &self.paths.discharge_curve {
            Some(p) => RateCurve::from_csv(p)?,
            None => RateCurve::default_discharge(),
        };
        let cfg = BatteryConfig {
            q0: b.q0,
            eta0: b.eta0,
            cycle_max: b.cycle_max,
            charge_curve,
            discharge_curve,
            q_min_frac: b.q_min_frac,
            eta_min_frac: b.eta_min_frac,
            e_init: b.e_init,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn solver(&self) -> Result<SolverChoice, CliError> {
        let r = &self.run;
        if r.backend == "builtin" {
            let opts = SolverOptions {
                int_tol: r.int_tol,
                gap_tol: r.gap_tol,
                node_limit: r.node_limit,
                time_limit: r.time_limit_s.map(std::time::Duration::from_secs_f64),
                ..SolverOptions::default()
            };
            Ok(SolverChoice::BuiltIn(opts))
        } else {
            let mut b = BackendConfig::new(&r.backend);
            b.args = r.backend_args.clone();
            b.format = self.backend_format()?;
            Ok(SolverChoice::Backend(b))
        }
    }

    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let (start, end) = self.dates()?;
        let mut soc_max = hourly("bounds.soc_max", &self.bounds.soc_max, 1.0)?;
        if let Some(t) = self.bounds.terminal_soc_max {
            soc_max[HOURS - 1] = soc_max[HOURS - 1].min(t);
        }
        let bounds = AvailabilityBounds {
            soc_min: hourly("bounds.soc_min", &self.bounds.soc_min, 0.0)?,
            soc_max,
        };
        if self.market.vgc < 0.0 || self.market.fgc < 0.0 {
            return Err(CliError::Config("market.vgc and market.fgc must be nonnegative".into()));
        }
        let mut cfg = RunConfig::new(self.mode()?, self.run.l, start, end);
        cfg.history = self.history()?;
        cfg.n_int = self.run.n_int;
        cfg.battery = self.battery_config()?;
        cfg.grid = GridCostSchedule::flat(HOURS, self.market.vgc, self.market.fgc);
        cfg.bounds = bounds;
        cfg.rate_scale = self.run.rate_scale;
        cfg.degradation = self.run.degradation;
        cfg.epsilon = self.run.epsilon;
        cfg.solver = self.solver()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

const SECTIONS: [&str; 5] = ["paths", "battery", "market", "run", "bounds"];

/// Keys of each section, from the defaults.
fn known_keys(section: &str) -> Vec<String> {
    let defaults = toml::Table::try_from(AppConfig::default()).expect("defaults serialize");
    let mut keys: Vec<String> = defaults
        .get(section)
        .and_then(|v| v.as_table())
        .map(|t| t.keys().cloned().collect())
        .unwrap_or_default();
    // Optional fields are absent from serialized defaults.
    let optional: &[&str] = match section {
        "paths" => &["prices", "charge_curve", "discharge_curve"],
        "run" => &["time_limit_s", "node_limit"],
        "bounds" => &["terminal_soc_max"],
        _ => &[],
    };
    for k in optional {
        if !keys.iter().any(|x| x == k) {
            keys.push(k.to_string());
        }
    }
    keys
}

/// Apply `section.key=value` (or a bare `key=value` naming a unique key).
/// Values are read as TOML, falling back to a plain string.
pub fn apply_override(table: &mut toml::Table, raw: &str) -> Result<(), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{raw}` is not key=value")))?;
    let key = key.trim();
    let (section, field) = match key.split_once('.') {
        Some((s, f)) => {
            if !SECTIONS.contains(&s) || !known_keys(s).iter().any(|k| k == f) {
                return Err(CliError::Config(format!("unknown config key `{key}`")));
            }
            (s.to_string(), f.to_string())
        }
        None => {
            let owners: Vec<&str> = SECTIONS
                .iter()
                .copied()
                .filter(|s| known_keys(s).iter().any(|k| k == key))
                .collect();
            match owners.as_slice() {
                [s] => (s.to_string(), key.to_string()),
                [] => return Err(CliError::Config(format!("unknown config key `{key}`"))),
                _ => {
                    return Err(CliError::Config(format!(
                        "ambiguous key `{key}`; qualify it with one of {owners:?}"
                    )))
                }
            }
        }
    };
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let entry = table
        .entry(section.clone())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let sec = entry
        .as_table_mut()
        .ok_or_else(|| CliError::Config(format!("`{section}` is not a table")))?;
    sec.insert(field, parsed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = AppConfig::default();
        let run = c.run_config().unwrap();
        assert_eq!(run.battery.q0, 1e6);
        assert_eq!(run.battery.eta0, 0.99);
        assert_eq!(run.battery.cycle_max, 4000.0);
        assert!((run.grid.vgc[0] - 5e-6).abs() < 1e-18);
        assert_eq!(run.bounds.soc_max[HOURS - 1], 0.0);
        assert_eq!(run.n_int, 5);
    }

    #[test]
    fn override_equals_editing_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.toml");
        let b = dir.path().join("b.toml");
        std::fs::write(&a, "[market]\nvgc = 1.0\n").unwrap();
        std::fs::write(&b, "[market]\nvgc = 5\n").unwrap();
        let via_override = AppConfig::load(Some(&a), &["vgc=5".into()]).unwrap();
        let edited = AppConfig::load(Some(&b), &[]).unwrap();
        assert_eq!(via_override, edited);
        let qualified = AppConfig::load(Some(&a), &["market.vgc=5".into()]).unwrap();
        assert_eq!(qualified, edited);
    }

    #[test]
    fn string_and_optional_overrides() {
        let c = AppConfig::load(None, &["mode=milp-p".into(), "time_limit_s=2.5".into()]).unwrap();
        assert_eq!(c.run.mode, "milp-p");
        assert_eq!(c.run.time_limit_s, Some(2.5));
    }

    #[test]
    fn bad_overrides_are_rejected() {
        assert!(AppConfig::load(None, &["nonsense=1".into()]).is_err());
        assert!(AppConfig::load(None, &["run.vgc=1".into()]).is_err());
        assert!(AppConfig::load(None, &["vgc".into()]).is_err());
        assert!(AppConfig::load(None, &["mode=sideways".into()]).is_err());
        assert!(AppConfig::load(None, &["l=-1".into()]).is_err());
    }

    #[test]
    fn dump_reparses_to_equal_config() {
        let c = AppConfig::load(None, &["l=7".into(), "soc_max=[0.5]".into()]).unwrap();
        let text = c.to_toml();
        let back: AppConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert!(c.run_config().is_err(), "one hourly value is not 24");
    }
}
