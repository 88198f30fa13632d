//! Offline gain tuning by cyclic coordinate descent.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::metrics::pair_metrics;
use crate::plant::PAIRS;
use crate::sim::{self, Outcome, RunResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuningError {
    #[error("unknown tunable parameter '{0}'")]
    UnknownParam(String),
    #[error("parameter '{name}': bounds [{lo}, {hi}] must be finite, positive and ordered")]
    Bounds { name: String, lo: f64, hi: f64 },
    #[error("parameter '{name}': start value {value} is outside [{lo}, {hi}]")]
    StartOutOfBounds { name: String, value: f64, lo: f64, hi: f64 },
    #[error("tuning spec needs at least one parameter and one scenario")]
    Empty,
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("invalid tuning spec: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBounds {
    /// `kp`, `kd`, or one of `g_e`, `g_de`, `g_max`, `sg_e` optionally
    /// suffixed with an actuator number (`g_e3`). Without a suffix the
    /// parameter drives all four actuators together.
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// Objective weights. Lengths are normalized by 1 mm (level error by 0.1 mm)
/// and times by 0.1 s before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Weights {
    pub overshoot: f64,
    pub settling: f64,
    pub level: f64,
    /// Settling time beyond this is penalized, s.
    pub settling_target: f64,
    /// Added once per failed (dropped, contact or errored) run.
    pub failure_penalty: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights { overshoot: 1.0, settling: 1.0, level: 1.0, settling_target: 0.15, failure_penalty: 1e6 }
    }
}

const LENGTH_SCALE: f64 = 1e-3;
const LEVEL_SCALE: f64 = 1e-4;
const TIME_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSpec {
    pub params: Vec<ParamBounds>,
    pub scenarios: Vec<String>,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_initial_step")]
    pub initial_step: f64,
    #[serde(default = "default_min_step")]
    pub min_step: f64,
}

fn default_sweeps() -> usize {
    12
}
fn default_initial_step() -> f64 {
    0.25
}
fn default_min_step() -> f64 {
    0.01
}

impl TuningSpec {
    pub fn parse(text: &str) -> Result<Self, TuningError> {
        toml::from_str(text).map_err(|e| TuningError::Parse(e.to_string()))
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions { max_sweeps: self.max_sweeps, initial_step: self.initial_step, min_step: self.min_step }
    }

    pub fn validate(&self, config: &Config) -> Result<(), TuningError> {
        if self.params.is_empty() || self.scenarios.is_empty() {
            return Err(TuningError::Empty);
        }
        for p in &self.params {
            Tunable::parse(&p.name)?;
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo > 0.0 && p.hi > p.lo) {
                return Err(TuningError::Bounds { name: p.name.clone(), lo: p.lo, hi: p.hi });
            }
        }
        for s in &self.scenarios {
            if !config.scenarios.contains_key(s) {
                return Err(TuningError::UnknownScenario(s.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Kp,
    Kd,
    Ge,
    Gde,
    Gmax,
    SupervisorGe,
}

/// A parsed parameter name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tunable {
    field: Field,
    /// `None` = all actuators.
    actuator: Option<usize>,
}

impl Tunable {
    pub fn parse(name: &str) -> Result<Self, TuningError> {
        let unknown = || TuningError::UnknownParam(name.to_string());
        match name {
            "kp" => return Ok(Tunable { field: Field::Kp, actuator: None }),
            "kd" => return Ok(Tunable { field: Field::Kd, actuator: None }),
            _ => {}
        }
        let stem = name.trim_end_matches(|c: char| c.is_ascii_digit());
        let suffix = &name[stem.len()..];
        let field = match stem {
            "g_e" => Field::Ge,
            "g_de" => Field::Gde,
            "g_max" => Field::Gmax,
            "sg_e" => Field::SupervisorGe,
            _ => return Err(unknown()),
        };
        let actuator = match suffix {
            "" => None,
            s => match s.parse::<usize>() {
                Ok(k) if (1..=PAIRS).contains(&k) => Some(k - 1),
                _ => return Err(unknown()),
            },
        };
        Ok(Tunable { field, actuator })
    }

    fn slots(&self) -> std::ops::Range<usize> {
        match self.actuator {
            Some(k) => k..k + 1,
            None => 0..PAIRS,
        }
    }

    /// Current value (actuator 1's when the parameter spans all four).
    pub fn get(&self, cfg: &Config) -> f64 {
        let c = &cfg.controller;
        let k = self.slots().start;
        match self.field {
            Field::Kp => c.pd.kp,
            Field::Kd => c.pd.kd,
            Field::Ge => c.main[k].g_e,
            Field::Gde => c.main[k].g_de,
            Field::Gmax => c.supervisor[k].g_max,
            Field::SupervisorGe => c.supervisor[k].g_e,
        }
    }

    pub fn set(&self, cfg: &mut Config, value: f64) {
        let c = &mut cfg.controller;
        match self.field {
            Field::Kp => c.pd.kp = value,
            Field::Kd => c.pd.kd = value,
            _ => {
                for k in self.slots() {
                    match self.field {
                        Field::Ge => c.main[k].g_e = value,
                        Field::Gde => c.main[k].g_de = value,
                        Field::Gmax => c.supervisor[k].g_max = value,
                        Field::SupervisorGe => c.supervisor[k].g_e = value,
                        Field::Kp | Field::Kd => unreachable!(),
                    }
                }
            }
        }
    }
}

/// Cost contribution of one finished run.
pub fn run_cost(run: &RunResult, w: &Weights) -> f64 {
    let mut cost = 0.0;
    if matches!(run.outcome, Outcome::Dropped | Outcome::Contact) {
        cost += w.failure_penalty;
    }
    let horizon = run.duration();
    for k in 0..PAIRS {
        let series = run.gap_series(k);
        let mut itae = 0.0;
        for pair in series.windows(2) {
            let (t0, z0) = pair[0];
            let (t1, z1) = pair[1];
            let f0 = t0 * (z0 - run.setpoint).abs();
            let f1 = t1 * (z1 - run.setpoint).abs();
            itae += 0.5 * (f0 + f1) * (t1 - t0);
        }
        let m = pair_metrics(&series, run.setpoint, run.z0[k]);
        let settle = m.settling_time.unwrap_or(horizon + TIME_SCALE);
        cost += itae / (LENGTH_SCALE * TIME_SCALE * TIME_SCALE)
            + w.overshoot * m.max_abs_overshoot / LENGTH_SCALE
            + w.settling * (settle - w.settling_target).max(0.0) / TIME_SCALE;
    }
    cost + w.level * run.max_abs_level() / LEVEL_SCALE
}

/// Total cost of a configuration over the named scenarios. Runs execute in
/// parallel; the sum is taken in scenario order.
pub fn evaluate(config: &Config, scenarios: &[String], w: &Weights) -> f64 {
    let Ok(stack) = config.stack() else {
        return w.failure_penalty * (scenarios.len() as f64 + 1.0);
    };
    let plant = config.plant();
    let costs: Vec<f64> = std::thread::scope(|s| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|name| {
                let stack = &stack;
                let plant = &plant;
                s.spawn(move || match config.scenario(name) {
                    Ok(sc) => match sim::run(sc, stack, plant) {
                        Ok(r) => run_cost(&r, w),
                        Err(sim::SimError::Diverged { partial, .. }) => w.failure_penalty + run_cost(&partial, w),
                        Err(_) => 2.0 * w.failure_penalty,
                    },
                    Err(_) => 2.0 * w.failure_penalty,
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation thread panicked")).collect()
    });
    costs.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub max_sweeps: usize,
    /// Initial step as a fraction of each parameter's range.
    pub initial_step: f64,
    /// Stop once every step is below this fraction of its range.
    pub min_step: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { max_sweeps: 12, initial_step: 0.25, min_step: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub eval: usize,
    pub sweep: usize,
    /// Parameter moved for this candidate; `None` for the start point and
    /// the final best row.
    pub param: Option<usize>,
    pub candidate: Vec<f64>,
    pub cost: f64,
    pub best_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: Vec<f64>,
    pub best_cost: f64,
    pub trace: Vec<TraceRow>,
}

/// Cyclic coordinate descent inside a box. For each coordinate the `+step`
/// and `-step` candidates are evaluated together and accepted in that order;
/// a coordinate whose step yields no improvement has its step halved.
pub fn coordinate_search<F>(
    bounds: &[(f64, f64)],
    start: &[f64],
    opts: &SearchOptions,
    objective: F,
) -> SearchResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = bounds.len();
    assert_eq!(start.len(), n, "start point and bounds differ in length");
    let range: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let mut step: Vec<f64> = range.iter().map(|r| r * opts.initial_step).collect();
    let mut x = start.to_vec();
    let mut best = objective(&x);
    let mut trace = vec![TraceRow { eval: 0, sweep: 0, param: None, candidate: x.clone(), cost: best, best_cost: best }];

    for sweep in 1..=opts.max_sweeps {
        if (0..n).all(|i| step[i] < opts.min_step * range[i]) {
            break;
        }
        for i in 0..n {
            if step[i] < opts.min_step * range[i] {
                continue;
            }
            let (lo, hi) = bounds[i];
            let candidates: Vec<Vec<f64>> = [1.0, -1.0]
                .iter()
                .filter_map(|dir| {
                    let v = (x[i] + dir * step[i]).clamp(lo, hi);
                    (v != x[i]).then(|| {
                        let mut c = x.clone();
                        c[i] = v;
                        c
                    })
                })
                .collect();
            let costs: Vec<f64> = std::thread::scope(|s| {
                let handles: Vec<_> = candidates.iter().map(|c| s.spawn(|| objective(c))).collect();
                handles.into_iter().map(|h| h.join().expect("objective panicked")).collect()
            });
            let mut improved = false;
            for (c, cost) in candidates.into_iter().zip(costs) {
                let accept = !improved && cost < best;
                if accept {
                    best = cost;
                    x = c.clone();
                    improved = true;
                }
                trace.push(TraceRow { eval: trace.len(), sweep, param: Some(i), candidate: c, cost, best_cost: best });
            }
            if !improved {
                step[i] *= 0.5;
            }
        }
    }
    trace.push(TraceRow {
        eval: trace.len(),
        sweep: trace.last().map_or(0, |r| r.sweep),
        param: None,
        candidate: x.clone(),
        cost: best,
        best_cost: best,
    });
    SearchResult { best: x, best_cost: best, trace }
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub config: Config,
    pub names: Vec<String>,
    pub search: SearchResult,
}

/// Tune `config` according to `spec`, starting from the config's own values.
pub fn tune(config: &Config, spec: &TuningSpec) -> Result<TuneOutcome, TuningError> {
    spec.validate(config)?;
    let tunables: Vec<Tunable> = spec.params.iter().map(|p| Tunable::parse(&p.name)).collect::<Result<_, _>>()?;
    let bounds: Vec<(f64, f64)> = spec.params.iter().map(|p| (p.lo, p.hi)).collect();
    let start: Vec<f64> = tunables.iter().map(|t| t.get(config)).collect();
    for ((p, &v), t) in spec.params.iter().zip(&start).zip(&tunables) {
        if !(p.lo..=p.hi).contains(&v) {
            return Err(TuningError::StartOutOfBounds { name: p.name.clone(), value: v, lo: p.lo, hi: p.hi });
        }
        debug_assert_eq!(t.get(config), v);
    }
    let apply = |x: &[f64]| {
        let mut c = config.clone();
        for (t, &v) in tunables.iter().zip(x) {
            t.set(&mut c, v);
        }
        c
    };
    let search = coordinate_search(&bounds, &start, &spec.search_options(), |x| {
        evaluate(&apply(x), &spec.scenarios, &spec.weights)
    });
    Ok(TuneOutcome {
        config: apply(&search.best),
        names: spec.params.iter().map(|p| p.name.clone()).collect(),
        search,
    })
}

pub fn write_trace<W: Write>(names: &[String], trace: &[TraceRow], mut out: W) -> io::Result<()> {
    writeln!(out, "eval,sweep,param,{},cost,best_cost", names.join(","))?;
    for r in trace {
        let param = r.param.map_or_else(|| "-".to_string(), |i| names[i].clone());
        let values: Vec<String> = r.candidate.iter().map(|v| format!("{v:.12e}")).collect();
        writeln!(out, "{},{},{},{},{:.12e},{:.12e}", r.eval, r.sweep, param, values.join(","), r.cost, r.best_cost)?;
    }
    Ok(())
}
