use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{level_metrics, pair_metrics, settling_band, LevelMetrics, PairMetrics};
use crate::plant::PAIRS;
use crate::sim::{Outcome, RunResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub scenario: String,
    pub outcome: Outcome,
    pub pd_enabled: bool,
    pub setpoint: f64,
    /// End of the statistics window, s.
    pub duration: f64,
    pub pairs: [PairMetrics; PAIRS],
    pub level: LevelMetrics,
}

impl Report {
    pub fn from_run(run: &RunResult) -> Report {
        let pairs = std::array::from_fn(|k| pair_metrics(&run.gap_series(k), run.setpoint, run.z0[k]));
        Report {
            scenario: run.scenario.clone(),
            outcome: run.outcome,
            pd_enabled: run.pd_enabled,
            setpoint: run.setpoint,
            duration: run.duration(),
            pairs,
            level: level_metrics(&run.level_series()),
        }
    }
}

/// Scientific notation with a two-digit signed exponent, e.g. `6.200E-02`.
pub fn format_sci(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$e}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let exp: i32 = exp.parse().unwrap_or(0);
            let sign = if exp < 0 { '-' } else { '+' };
            format!("{mantissa}E{sign}{:02}", exp.abs())
        }
        None => s,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format_sci(v, 3))
}

/// Fixed-layout text table: the four gaps, then the level-error statistics.
pub fn render_text(r: &Report) -> String {
    let mut out = String::new();
    let leveler = if r.pd_enabled { "on" } else { "off" };
    let _ = writeln!(out, "RESULTS FOR {} (outcome: {}, PD leveler: {leveler})", r.scenario, r.outcome);
    let _ = writeln!(
        out,
        "set-point {} m, settling band {} m, statistics over t in [0, {}] s",
        format_sci(r.setpoint, 3),
        format_sci(settling_band(r.setpoint), 3),
        format_sci(r.duration, 3)
    );
    let _ = writeln!(out, "rise time: first t with |z - z*| <= 0.1 |z0 - z*|");
    let _ = writeln!(out, "overshoot: max |z - z*| after the first crossing of z* (0 if none)");
    let _ = writeln!(out, "settling time: first t after which |z - z*| stays within the band");
    let _ = writeln!(out, "level statistics: all samples of the run, population std. deviation");
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<26}{:>12}{:>12}{:>12}{:>12}", "", "z1(t)", "z2(t)", "z3(t)", "z4(t)");
    let rows: [(&str, [String; PAIRS]); 3] = [
        ("Rise Time, s", r.pairs.map(|p| cell(p.rise_time))),
        ("Max. Abs. Overshoot, m", r.pairs.map(|p| cell(Some(p.max_abs_overshoot)))),
        ("Settling Time, s", r.pairs.map(|p| cell(p.settling_time))),
    ];
    for (label, cells) in rows {
        let _ = write!(out, "{label:<26}");
        for c in cells {
            let _ = write!(out, "{c:>12}");
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<26}{:>20}{:>12}{:>16}", "", "Largest Abs. Value", "Mean", "Std. Deviation");
    let _ = writeln!(
        out,
        "{:<26}{:>20}{:>12}{:>16}",
        "z1(t)+z3(t)-z2(t)-z4(t)",
        format_sci(r.level.largest_abs, 3),
        format_sci(r.level.mean, 3),
        format_sci(r.level.std_dev, 3)
    );
    out
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

/// Flat `key = value` record; floats are written in shortest round-trip form.
pub fn render_record(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario = {}", r.scenario);
    let _ = writeln!(out, "outcome = {}", r.outcome);
    let _ = writeln!(out, "pd_enabled = {}", r.pd_enabled);
    let _ = writeln!(out, "setpoint = {}", r.setpoint);
    let _ = writeln!(out, "duration = {}", r.duration);
    for (k, p) in r.pairs.iter().enumerate() {
        let _ = writeln!(out, "z{}.rise_time = {}", k + 1, opt(p.rise_time));
        let _ = writeln!(out, "z{}.max_abs_overshoot = {}", k + 1, p.max_abs_overshoot);
        let _ = writeln!(out, "z{}.settling_time = {}", k + 1, opt(p.settling_time));
    }
    let _ = writeln!(out, "level.largest_abs = {}", r.level.largest_abs);
    let _ = writeln!(out, "level.mean = {}", r.level.mean);
    let _ = writeln!(out, "level.std_dev = {}", r.level.std_dev);
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportParseError {
    #[error("line {0}: expected `key = value`")]
    Syntax(usize),
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot parse `{value}`")]
    Value { key: String, value: String },
}

pub fn parse_record(text: &str) -> Result<Report, ReportParseError> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once(" = ").ok_or(ReportParseError::Syntax(n + 1))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |key: &str| map.get(key).ok_or_else(|| ReportParseError::Missing(key.to_string()));
    let bad = |key: &str, value: &str| ReportParseError::Value { key: key.into(), value: value.into() };
    let num = |key: &str| -> Result<f64, ReportParseError> {
        let v = get(key)?;
        v.parse().map_err(|_| bad(key, v))
    };
    let opt_num = |key: &str| -> Result<Option<f64>, ReportParseError> {
        let v = get(key)?;
        if v == "none" {
            Ok(None)
        } else {
            v.parse().map(Some).map_err(|_| bad(key, v))
        }
    };
    let outcome_text = get("outcome")?;
    let pd_text = get("pd_enabled")?;
    let mut pairs = [PairMetrics::default(); PAIRS];
    for (k, p) in pairs.iter_mut().enumerate() {
        let z = k + 1;
        *p = PairMetrics {
            rise_time: opt_num(&format!("z{z}.rise_time"))?,
            max_abs_overshoot: num(&format!("z{z}.max_abs_overshoot"))?,
            settling_time: opt_num(&format!("z{z}.settling_time"))?,
        };
    }
    Ok(Report {
        scenario: get("scenario")?.clone(),
        outcome: Outcome::parse(outcome_text).ok_or_else(|| bad("outcome", outcome_text))?,
        pd_enabled: pd_text.parse().map_err(|_| bad("pd_enabled", pd_text))?,
        setpoint: num("setpoint")?,
        duration: num("duration")?,
        pairs,
        level: LevelMetrics {
            largest_abs: num("level.largest_abs")?,
            mean: num("level.mean")?,
            std_dev: num("level.std_dev")?,
        },
    })
}
