//! Closed-loop scenario execution.
//!
//! The controller runs every `period` seconds; between updates the plant is
//! integrated at `dt` with the commanded voltages held.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControlError, ControllerMemory, ControllerStack};
use crate::metrics::settling_band;
use crate::plant::{self, ActuatorParams, GapLimits, PairState, PhysicalConstants, PlantError, PlantState, PAIRS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(skip)]
    pub name: String,
    /// Initial gaps, m.
    pub z0: [f64; PAIRS],
    /// Initial gap rates, m/s.
    #[serde(default)]
    pub v0: [f64; PAIRS],
    /// Initial coil currents, A.
    #[serde(default)]
    pub i0: [f64; PAIRS],
    /// s.
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Plant integration step, s.
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_duration() -> f64 {
    0.5
}

fn default_dt() -> f64 {
    1e-5
}

impl Scenario {
    pub fn new(name: &str, z0: [f64; PAIRS]) -> Self {
        Scenario {
            name: name.to_string(),
            z0,
            v0: [0.0; PAIRS],
            i0: [0.0; PAIRS],
            duration: default_duration(),
            dt: default_dt(),
        }
    }

    /// The three initial-position settings.
    pub fn builtin() -> Vec<Scenario> {
        vec![
            Scenario::new("setting1", [0.001, 0.003, 0.009, 0.007]),
            Scenario::new("setting2", [0.005, 0.003, 0.011, 0.013]),
            Scenario::new("setting3", [0.006, 0.008, 0.014, 0.012]),
        ]
    }

    /// Number of plant steps per control period.
    pub fn substeps(&self, period: f64) -> Result<usize, SimError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::Scenario(format!("dt must be positive, got {}", self.dt)));
        }
        let n = (period / self.dt).round();
        if n < 1.0 || (n * self.dt - period).abs() > 1e-9 * period {
            return Err(SimError::Scenario(format!(
                "control period {period} s is not an integer multiple of dt = {} s",
                self.dt
            )));
        }
        Ok(n as usize)
    }

    /// `floor(duration / period) + 1`.
    pub fn sample_count(&self, period: f64) -> usize {
        (self.duration / period + 1e-9).floor() as usize + 1
    }

    pub fn validate(&self, period: f64, limits: &GapLimits, params: &[ActuatorParams; PAIRS]) -> Result<(), SimError> {
        let name = &self.name;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(SimError::Scenario(format!("{name}: duration must be positive")));
        }
        self.substeps(period)?;
        for k in 0..PAIRS {
            let z = self.z0[k];
            if !(z > limits.z_min && z < limits.z_drop) {
                return Err(SimError::Scenario(format!(
                    "{name}: z0[{}] = {z} m is outside ({}, {})",
                    k + 1,
                    limits.z_min,
                    limits.z_drop
                )));
            }
            if !self.v0[k].is_finite() {
                return Err(SimError::Scenario(format!("{name}: v0[{}] is not finite", k + 1)));
            }
            if !(self.i0[k] >= 0.0 && self.i0[k] <= params[k].i_max) {
                return Err(SimError::Scenario(format!(
                    "{name}: i0[{}] = {} A is outside [0, {}]",
                    k + 1,
                    self.i0[k],
                    params[k].i_max
                )));
            }
        }
        Ok(())
    }
}

/// The plant side of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantModel {
    pub params: [ActuatorParams; PAIRS],
    pub constants: PhysicalConstants,
    pub limits: GapLimits,
}

impl Default for PlantModel {
    fn default() -> Self {
        PlantModel {
            params: ActuatorParams::table(),
            constants: PhysicalConstants::default(),
            limits: GapLimits::default(),
        }
    }
}

/// One record per control period.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample {
    pub t: f64,
    pub z: [f64; PAIRS],
    pub v: [f64; PAIRS],
    pub i: [f64; PAIRS],
    pub u: [f64; PAIRS],
    pub l: f64,
    pub w: f64,
    pub gain: [f64; PAIRS],
    pub e: [f64; PAIRS],
    pub de: [f64; PAIRS],
    pub flc: [f64; PAIRS],
    pub u_raw: [f64; PAIRS],
}

/// First-occurrence times of each sticky event, s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairEvents {
    pub contact: Option<f64>,
    pub dropped: Option<f64>,
    pub current_clamped: Option<f64>,
    pub voltage_clamped: Option<f64>,
}

impl PairEvents {
    fn note(&mut self, flags: &plant::PairFlags, t: f64) {
        let mark = |slot: &mut Option<f64>, raised: bool| {
            if raised && slot.is_none() {
                *slot = Some(t);
            }
        };
        mark(&mut self.contact, flags.contact);
        mark(&mut self.dropped, flags.dropped);
        mark(&mut self.current_clamped, flags.current_clamped);
        mark(&mut self.voltage_clamped, flags.voltage_clamped);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Stabilized,
    Dropped,
    Contact,
    Timeout,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Stabilized => "stabilized",
            Outcome::Dropped => "dropped",
            Outcome::Contact => "contact",
            Outcome::Timeout => "timeout",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "stabilized" => Outcome::Stabilized,
            "dropped" => Outcome::Dropped,
            "contact" => Outcome::Contact,
            "timeout" => Outcome::Timeout,
            _ => return None,
        })
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub scenario: String,
    pub setpoint: f64,
    pub period: f64,
    pub pd_enabled: bool,
    pub z0: [f64; PAIRS],
    pub samples: Vec<Sample>,
    pub events: [PairEvents; PAIRS],
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepFailure {
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("run failed at t = {t} s: {source}")]
    Diverged {
        t: f64,
        #[source]
        source: StepFailure,
        partial: Box<RunResult>,
    },
}

pub const TRAJECTORY_HEADER: &str = "t,z1,z2,z3,z4,v1,v2,v3,v4,i1,i2,i3,i4,u1,u2,u3,u4,l,w";
pub const DIAGNOSTICS_HEADER: &str =
    "t,e1,e2,e3,e4,de1,de2,de3,de4,gain1,gain2,gain3,gain4,flc1,flc2,flc3,flc4,uraw1,uraw2,uraw3,uraw4";

impl RunResult {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn gap_series(&self, k: usize) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t, s.z[k])).collect()
    }

    pub fn level_series(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.l).collect()
    }

    pub fn max_abs_level(&self) -> f64 {
        self.samples.iter().map(|s| s.l.abs()).fold(0.0, f64::max)
    }

    pub fn write_trajectory<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        for s in &self.samples {
            let mut row = vec![s.t];
            row.extend(s.z);
            row.extend(s.v);
            row.extend(s.i);
            row.extend(s.u);
            row.push(s.l);
            row.push(s.w);
            writeln!(out, "{}", csv_row(&row))?;
        }
        Ok(())
    }

    pub fn write_diagnostics<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{DIAGNOSTICS_HEADER}")?;
        for s in &self.samples {
            let mut row = vec![s.t];
            row.extend(s.e);
            row.extend(s.de);
            row.extend(s.gain);
            row.extend(s.flc);
            row.extend(s.u_raw);
            writeln!(out, "{}", csv_row(&row))?;
        }
        Ok(())
    }
}

/// Comma-joined values in scientific notation with 13 significant digits.
pub fn csv_row(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.12e}")).collect::<Vec<_>>().join(",")
}

fn initial_state(sc: &Scenario) -> PlantState {
    let mut s = PlantState::default();
    for k in 0..PAIRS {
        s.pairs[k] = PairState { z: sc.z0[k], v: sc.v0[k], i: sc.i0[k] };
    }
    s
}

fn classify(samples: &[Sample], events: &[PairEvents; PAIRS], setpoint: f64) -> Outcome {
    if events.iter().any(|e| e.dropped.is_some()) {
        return Outcome::Dropped;
    }
    if events.iter().any(|e| e.contact.is_some()) {
        return Outcome::Contact;
    }
    let band = settling_band(setpoint);
    match samples.last() {
        Some(last) if last.z.iter().all(|z| (z - setpoint).abs() <= band) => Outcome::Stabilized,
        _ => Outcome::Timeout,
    }
}

/// Run one scenario to completion (or until a floater drops).
pub fn run(scenario: &Scenario, stack: &ControllerStack, plant_model: &PlantModel) -> Result<RunResult, SimError> {
    let PlantModel { params, constants, limits } = plant_model;
    scenario.validate(stack.period, limits, params)?;
    let substeps = scenario.substeps(stack.period)?;
    let n_samples = scenario.sample_count(stack.period);

    let mut result = RunResult {
        scenario: scenario.name.clone(),
        setpoint: stack.setpoint,
        period: stack.period,
        pd_enabled: stack.pd_enabled,
        z0: scenario.z0,
        samples: Vec::with_capacity(n_samples),
        events: [PairEvents::default(); PAIRS],
        outcome: Outcome::Timeout,
    };
    let mut state = initial_state(scenario);
    let mut mem = ControllerMemory::default();

    let fail = |result: &mut RunResult, t: f64, source: StepFailure| {
        result.outcome = classify(&result.samples, &result.events, stack.setpoint);
        SimError::Diverged { t, source, partial: Box::new(result.clone()) }
    };

    for k in 0..n_samples {
        let t = k as f64 * stack.period;
        state.t = t;
        let (u, next_mem, d) = match stack.control_step(&mem, &state.gaps()) {
            Ok(v) => v,
            Err(e) => return Err(fail(&mut result, t, e.into())),
        };
        mem = next_mem;
        for j in 0..PAIRS {
            if d.clamped[j] {
                state.flags[j].voltage_clamped = true;
            }
            result.events[j].note(&state.flags[j], t);
        }
        result.samples.push(Sample {
            t,
            z: state.pairs.map(|p| p.z),
            v: state.pairs.map(|p| p.v),
            i: state.pairs.map(|p| p.i),
            u,
            l: d.l,
            w: d.w,
            gain: d.gain,
            e: d.e,
            de: d.de,
            flc: d.flc,
            u_raw: d.u_raw,
        });
        if state.any_dropped() || k + 1 == n_samples {
            break;
        }
        for _ in 0..substeps {
            state = match plant::step(params, constants, limits, &state, &u, scenario.dt) {
                Ok(s) => s,
                Err(e) => {
                    let at = state.t;
                    return Err(fail(&mut result, at, e.into()));
                }
            };
            for j in 0..PAIRS {
                result.events[j].note(&state.flags[j], state.t);
            }
            if state.any_dropped() {
                break;
            }
        }
    }
    result.outcome = classify(&result.samples, &result.events, stack.setpoint);
    Ok(result)
}

/// Run the same scenario with the leveler enabled and disabled, in parallel.
/// Returns `(with_pd, without_pd)`.
pub fn run_pair_comparison(
    scenario: &Scenario,
    stack: &ControllerStack,
    plant_model: &PlantModel,
) -> Result<(RunResult, RunResult), SimError> {
    let on = ControllerStack { pd_enabled: true, ..stack.clone() };
    let off = ControllerStack { pd_enabled: false, ..stack.clone() };
    std::thread::scope(|s| {
        let with_pd = s.spawn(|| run(scenario, &on, plant_model));
        let without_pd = run(scenario, &off, plant_model);
        let with_pd = with_pd.join().expect("simulation thread panicked");
        Ok((with_pd?, without_pd?))
    })
}
