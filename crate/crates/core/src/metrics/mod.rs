//! Step-response and leveling metrics.
//!
//! Definitions used throughout (times are measured from the first sample):
//!
//! * rise time: first `t` with `|z - z*| <= 0.1 |z0 - z*|`;
//! * max abs overshoot: largest `|z - z*|` from the first crossing of `z*`
//!   onwards, 0 when `z` never crosses;
//! * settling time: smallest `t` after which `|z - z*|` stays within the
//!   settling band `max(0.02 z*, 5e-5 m)`.

mod report;

pub use report::{format_sci, parse_record, render_record, render_text, Report, ReportParseError};

use serde::{Deserialize, Serialize};

/// Relative part of the settling band.
pub const BAND_FRACTION: f64 = 0.02;
/// Absolute floor of the settling band, m.
pub const BAND_FLOOR: f64 = 5e-5;
/// Rise threshold as a fraction of the initial offset.
pub const RISE_FRACTION: f64 = 0.1;

pub fn settling_band(setpoint: f64) -> f64 {
    (BAND_FRACTION * setpoint.abs()).max(BAND_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairMetrics {
    /// s; `None` if the threshold is never reached.
    pub rise_time: Option<f64>,
    /// m.
    pub max_abs_overshoot: f64,
    /// s; `None` if the series never settles.
    pub settling_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub largest_abs: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
}

/// Metrics of one gap series given as `(t, z)` samples.
pub fn pair_metrics(series: &[(f64, f64)], setpoint: f64, z0: f64) -> PairMetrics {
    let Some(&(t0, _)) = series.first() else {
        return PairMetrics::default();
    };
    let offset = |z: f64| z - setpoint;

    let rise_limit = RISE_FRACTION * offset(z0).abs();
    let rise_time = series
        .iter()
        .find(|(_, z)| offset(*z).abs() <= rise_limit)
        .map(|(t, _)| t - t0);

    let start_sign = match offset(z0) {
        d if d > 0.0 => 1.0,
        d if d < 0.0 => -1.0,
        _ => 0.0,
    };
    let crossing = if start_sign == 0.0 {
        Some(0)
    } else {
        series.iter().position(|(_, z)| offset(*z) * start_sign < 0.0)
    };
    let max_abs_overshoot = crossing.map_or(0.0, |c| {
        series[c..].iter().map(|(_, z)| offset(*z).abs()).fold(0.0, f64::max)
    });

    let band = settling_band(setpoint);
    let settling_time = match series.iter().rposition(|(_, z)| offset(*z).abs() > band) {
        None => Some(0.0),
        Some(j) if j + 1 < series.len() => Some(series[j + 1].0 - t0),
        Some(_) => None,
    };

    PairMetrics { rise_time, max_abs_overshoot, settling_time }
}

/// Largest |l|, mean and population standard deviation (Welford update).
pub fn level_metrics(series: &[f64]) -> LevelMetrics {
    let mut largest_abs = 0.0_f64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (n, &x) in series.iter().enumerate() {
        largest_abs = largest_abs.max(x.abs());
        let delta = x - mean;
        mean += delta / (n + 1) as f64;
        m2 += delta * (x - mean);
    }
    let std_dev = if series.is_empty() { 0.0 } else { (m2 / series.len() as f64).max(0.0).sqrt() };
    LevelMetrics { largest_abs, mean, std_dev }
}
