//! Hybrid controller: a main fuzzy controller and a supervisory gain
//! scheduler per actuator, plus a shared PD leveler on the level error.
//!
//! Conventions: the tracking error is `e = z* - z` and the leveler output is
//! applied as `u_k += s_k * w` with `s = (-1, +1, -1, +1)` by default.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{
    main_rule_table, rules_from_list, rules_from_table, symmetric_terms, uniform_terms, FuzzyError, FuzzySystem,
    LinguisticVariable, MembershipFunction, SUPERVISOR_RULES,
};
use crate::plant::{ActuatorParams, PhysicalConstants, PAIRS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error("actuator {actuator}: nonfinite {what}")]
    NonFinite { actuator: usize, what: &'static str },
    #[error("invalid controller setting: {0}")]
    Setting(String),
}

/// Term layout of one linguistic variable. Explicit `terms` win over a
/// uniform partition of `count` terms. Uniform inputs end in shoulders;
/// uniform outputs use symmetric end triangles centred on the edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableLayout {
    pub lo: f64,
    pub hi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<MembershipFunction>>,
}

impl VariableLayout {
    fn uniform(lo: f64, hi: f64, count: usize) -> Self {
        VariableLayout { lo, hi, count: Some(count), terms: None }
    }

    pub fn build_input(&self, name: &str) -> Result<LinguisticVariable, FuzzyError> {
        self.build(name, uniform_terms)
    }

    pub fn build_output(&self, name: &str) -> Result<LinguisticVariable, FuzzyError> {
        self.build(name, symmetric_terms)
    }

    fn build(
        &self,
        name: &str,
        uniform: fn(f64, f64, usize) -> Result<Vec<MembershipFunction>, FuzzyError>,
    ) -> Result<LinguisticVariable, FuzzyError> {
        let terms = match (&self.terms, self.count) {
            (Some(t), _) => t.clone(),
            (None, Some(n)) => uniform(self.lo, self.hi, n)?,
            (None, None) => {
                return Err(FuzzyError::Breakpoints(format!(
                    "variable '{name}' needs either `count` or `terms`"
                )))
            }
        };
        LinguisticVariable::new(name, self.lo, self.hi, terms)
    }
}

/// Layout and rule table shared by the four main controllers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MainFisLayout {
    pub error: VariableLayout,
    pub rate: VariableLayout,
    pub output: VariableLayout,
    /// Rows: error-rate terms; columns: error terms; 1-based output terms.
    pub rules: Vec<Vec<usize>>,
}

impl Default for MainFisLayout {
    fn default() -> Self {
        MainFisLayout {
            error: VariableLayout::uniform(-1.0, 1.0, 5),
            rate: VariableLayout::uniform(-1.0, 1.0, 5),
            output: VariableLayout::uniform(0.0, 1.0, 5),
            rules: main_rule_table(),
        }
    }
}

impl MainFisLayout {
    pub fn build(&self) -> Result<FuzzySystem, FuzzyError> {
        FuzzySystem::new(
            vec![self.error.build_input("error")?, self.rate.build_input("error_rate")?],
            self.output.build_output("output")?,
            rules_from_table(&self.rules)?,
        )
    }
}

/// Layout of the supervisors. The output universe is always `[1, g_max]`
/// with a unity term centred on 1 and a boost term centred on `g_max`; only
/// the input side is configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupervisorFisLayout {
    pub input: VariableLayout,
    /// 1-based output term (1 = unity, 2 = boost) per input term.
    pub rules: Vec<usize>,
}

impl Default for SupervisorFisLayout {
    fn default() -> Self {
        SupervisorFisLayout {
            input: VariableLayout::uniform(0.0, 1.0, 3),
            rules: SUPERVISOR_RULES.to_vec(),
        }
    }
}

impl SupervisorFisLayout {
    pub fn build(&self, g_max: f64) -> Result<FuzzySystem, FuzzyError> {
        FuzzySystem::new(
            vec![self.input.build_input("abs_error")?],
            LinguisticVariable::new("gain", 1.0, g_max, symmetric_terms(1.0, g_max, 2)?)?,
            rules_from_list(&self.rules)?,
        )
    }
}

/// Per-actuator gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MainGains {
    /// Error input gain, 1/m.
    pub g_e: f64,
    /// Error-rate input gain, s/m.
    pub g_de: f64,
    /// Output gain, V. Calibrated from the equilibrium voltage when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_u: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupervisorGains {
    /// |error| input gain, 1/m.
    pub g_e: f64,
    /// Largest output-gain multiplier.
    pub g_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdConfig {
    /// V/m.
    pub kp: f64,
    /// V·s/m.
    pub kd: f64,
    pub signs: [f64; PAIRS],
}

impl Default for PdConfig {
    fn default() -> Self {
        PdConfig { kp: 0.0, kd: 0.0, signs: [-1.0, 1.0, -1.0, 1.0] }
    }
}

/// Everything needed to build a [`ControllerStack`] against a given plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// Common set-point z*, m.
    pub setpoint: f64,
    /// Control period T_c, s.
    pub period: f64,
    pub pd_enabled: bool,
    /// Time constant of the optional low-pass on derivative terms, s; 0 disables it.
    pub derivative_filter: f64,
    pub pd: PdConfig,
    pub main: [MainGains; PAIRS],
    pub supervisor: [SupervisorGains; PAIRS],
    pub main_fis: MainFisLayout,
    pub supervisor_fis: SupervisorFisLayout,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            setpoint: 0.004,
            period: 5e-4,
            pd_enabled: true,
            derivative_filter: 0.0,
            // Kp, Kd and g_de come from a coordinate-descent run over all
            // three built-in scenarios; see reference.config.
            pd: PdConfig { kp: 196890.625, kd: 894.21875, ..PdConfig::default() },
            main: [MainGains { g_e: 1.0 / 0.008, g_de: 8.25, g_u: None }; PAIRS],
            supervisor: [SupervisorGains { g_e: 1.0 / 0.008, g_max: 1.5 }; PAIRS],
            main_fis: MainFisLayout::default(),
            supervisor_fis: SupervisorFisLayout::default(),
        }
    }
}

/// Main fuzzy controller of one actuator: (error, error rate) -> voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct MainFlc {
    fis: FuzzySystem,
    pub g_e: f64,
    pub g_de: f64,
    pub g_u: f64,
}

impl MainFlc {
    pub fn new(fis: FuzzySystem, g_e: f64, g_de: f64, g_u: f64) -> Result<Self, ControlError> {
        if fis.inputs().len() != 2 {
            return Err(ControlError::Setting("main controller needs two inputs".into()));
        }
        for (name, v) in [("g_e", g_e), ("g_de", g_de), ("g_u", g_u)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ControlError::Setting(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(MainFlc { fis, g_e, g_de, g_u })
    }

    /// Output gain that makes the zero-error output equal `u_eq`.
    pub fn calibrate_g_u(fis: &FuzzySystem, u_eq: f64) -> Result<f64, ControlError> {
        let centre = fis.infer(&[0.0, 0.0])?.value;
        if centre <= 0.0 {
            return Err(ControlError::Setting("zero-error output is at the bottom of the range".into()));
        }
        Ok(u_eq / centre)
    }

    pub fn fis(&self) -> &FuzzySystem {
        &self.fis
    }

    /// Raw inference result for already scaled inputs.
    pub fn unit_output(&self, x_e: f64, x_de: f64) -> Result<f64, FuzzyError> {
        Ok(self.fis.infer(&[x_e, x_de])?.value)
    }

    /// Voltage command before supervisory scaling and leveling.
    pub fn output(&self, e: f64, de: f64) -> Result<f64, FuzzyError> {
        Ok(self.g_u * self.unit_output(self.g_e * e, self.g_de * de)?)
    }

    /// Control surface in physical units: `(e [m], de [m/s], u [V])`.
    pub fn surface(&self, grid: usize) -> Result<Vec<Vec<f64>>, FuzzyError> {
        let vars = self.fis.inputs();
        let scaled = [scale_var(&vars[0], self.g_e), scale_var(&vars[1], self.g_de)];
        crate::fuzzy::grid_rows(&scaled, &[grid, grid], |x| self.output(x[0], x[1]))
    }
}

fn scale_var(v: &LinguisticVariable, gain: f64) -> LinguisticVariable {
    LinguisticVariable { name: v.name.clone(), lo: v.lo / gain, hi: v.hi / gain, terms: Vec::new() }
}

/// Supervisory controller: |error| -> output-gain multiplier in `[1, g_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Supervisor {
    fis: Option<FuzzySystem>,
    pub g_e: f64,
    pub g_max: f64,
}

impl Supervisor {
    pub fn new(layout: &SupervisorFisLayout, g_e: f64, g_max: f64) -> Result<Self, ControlError> {
        if !(g_e.is_finite() && g_e > 0.0) {
            return Err(ControlError::Setting(format!("supervisor g_e must be positive, got {g_e}")));
        }
        if !(g_max.is_finite() && g_max >= 1.0) {
            return Err(ControlError::Setting(format!("g_max must be at least 1, got {g_max}")));
        }
        // g_max = 1 means no scheduling; the output universe would be empty.
        let fis = if g_max > 1.0 { Some(layout.build(g_max)?) } else { None };
        Ok(Supervisor { fis, g_e, g_max })
    }

    pub fn fis(&self) -> Option<&FuzzySystem> {
        self.fis.as_ref()
    }

    pub fn gain(&self, e: f64) -> Result<f64, FuzzyError> {
        match &self.fis {
            None => Ok(1.0),
            Some(fis) => Ok(fis.infer(&[self.g_e * e.abs()])?.value),
        }
    }

    /// `(e [m], multiplier)` over `[0, full scale]`.
    pub fn surface(&self, grid: usize) -> Result<Vec<Vec<f64>>, FuzzyError> {
        let (lo, hi) = match self.fis() {
            Some(f) => (f.inputs()[0].lo, f.inputs()[0].hi),
            None => (0.0, 1.0),
        };
        let var = LinguisticVariable {
            name: "abs_error".into(),
            lo: lo / self.g_e,
            hi: hi / self.g_e,
            terms: Vec::new(),
        };
        crate::fuzzy::grid_rows(&[var], &[grid], |x| self.gain(x[0]))
    }
}

/// `l = z1 + z3 - z2 - z4`.
pub fn level_error(z: &[f64; PAIRS]) -> f64 {
    z[0] + z[2] - z[1] - z[3]
}

pub fn pd_leveler(cfg: &PdConfig, l: f64, dl: f64) -> f64 {
    cfg.kp * l + cfg.kd * dl
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerMemory {
    pub prev_error: [f64; PAIRS],
    pub prev_level: f64,
    pub error_rate: [f64; PAIRS],
    pub level_rate: f64,
    /// False until the first sample has been seen.
    pub primed: bool,
}

/// Intermediate signals of one control step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub e: [f64; PAIRS],
    pub de: [f64; PAIRS],
    pub gain: [f64; PAIRS],
    pub flc: [f64; PAIRS],
    pub l: f64,
    pub dl: f64,
    pub w: f64,
    pub u_raw: [f64; PAIRS],
    pub u: [f64; PAIRS],
    pub clamped: [bool; PAIRS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerStack {
    pub main: [MainFlc; PAIRS],
    pub supervisor: [Supervisor; PAIRS],
    pub pd: PdConfig,
    pub setpoint: f64,
    pub period: f64,
    pub pd_enabled: bool,
    pub derivative_filter: f64,
    pub u_max: [f64; PAIRS],
}

impl ControllerStack {
    pub fn build(
        cfg: &ControllerConfig,
        params: &[ActuatorParams; PAIRS],
        c: &PhysicalConstants,
    ) -> Result<Self, ControlError> {
        if !(cfg.setpoint.is_finite() && cfg.setpoint > 0.0) {
            return Err(ControlError::Setting(format!("setpoint must be positive, got {}", cfg.setpoint)));
        }
        if !(cfg.period.is_finite() && cfg.period > 0.0) {
            return Err(ControlError::Setting(format!("period must be positive, got {}", cfg.period)));
        }
        if !(cfg.derivative_filter.is_finite() && cfg.derivative_filter >= 0.0) {
            return Err(ControlError::Setting("derivative_filter must be nonnegative".into()));
        }
        if !(cfg.pd.kp >= 0.0 && cfg.pd.kd >= 0.0 && cfg.pd.kp.is_finite() && cfg.pd.kd.is_finite()) {
            return Err(ControlError::Setting("kp and kd must be finite and nonnegative".into()));
        }
        if cfg.pd.signs.iter().any(|s| s.abs() != 1.0) {
            return Err(ControlError::Setting("leveler signs must each be +1 or -1".into()));
        }
        let fis = cfg.main_fis.build()?;
        let mut main = Vec::with_capacity(PAIRS);
        let mut supervisor = Vec::with_capacity(PAIRS);
        for k in 0..PAIRS {
            let g = cfg.main[k];
            let g_u = match g.g_u {
                Some(v) => v,
                None => MainFlc::calibrate_g_u(&fis, params[k].equilibrium_voltage(c, cfg.setpoint))?,
            };
            main.push(MainFlc::new(fis.clone(), g.g_e, g.g_de, g_u).map_err(|e| actuator_ctx(e, k))?);
            let s = cfg.supervisor[k];
            supervisor.push(
                Supervisor::new(&cfg.supervisor_fis, s.g_e, s.g_max).map_err(|e| actuator_ctx(e, k))?,
            );
        }
        Ok(ControllerStack {
            main: main.try_into().expect("four main controllers"),
            supervisor: supervisor.try_into().expect("four supervisors"),
            pd: cfg.pd,
            setpoint: cfg.setpoint,
            period: cfg.period,
            pd_enabled: cfg.pd_enabled,
            derivative_filter: cfg.derivative_filter,
            u_max: params.map(|p| p.u_max),
        })
    }

    fn rate(&self, value: f64, prev: f64, prev_rate: f64, primed: bool) -> f64 {
        if !primed {
            return 0.0;
        }
        let raw = (value - prev) / self.period;
        if self.derivative_filter > 0.0 {
            let alpha = self.period / (self.derivative_filter + self.period);
            prev_rate + alpha * (raw - prev_rate)
        } else {
            raw
        }
    }

    /// One controller update from measured gaps.
    pub fn control_step(
        &self,
        mem: &ControllerMemory,
        z: &[f64; PAIRS],
    ) -> Result<([f64; PAIRS], ControllerMemory, Diagnostics), ControlError> {
        let mut d = Diagnostics::default();
        let mut next = ControllerMemory { primed: true, ..*mem };

        d.l = level_error(z);
        d.dl = self.rate(d.l, mem.prev_level, mem.level_rate, mem.primed);
        d.w = if self.pd_enabled { pd_leveler(&self.pd, d.l, d.dl) } else { 0.0 };
        if !(d.l.is_finite() && d.dl.is_finite() && d.w.is_finite()) {
            return Err(ControlError::NonFinite { actuator: 0, what: "level signal" });
        }
        next.prev_level = d.l;
        next.level_rate = d.dl;

        for k in 0..PAIRS {
            let e = self.setpoint - z[k];
            let de = self.rate(e, mem.prev_error[k], mem.error_rate[k], mem.primed);
            if !(e.is_finite() && de.is_finite()) {
                return Err(ControlError::NonFinite { actuator: k + 1, what: "error signal" });
            }
            let gain = self.supervisor[k].gain(e)?;
            let flc = self.main[k].output(e, de)?;
            let raw = gain * flc + self.pd.signs[k] * d.w;
            if !raw.is_finite() {
                return Err(ControlError::NonFinite { actuator: k + 1, what: "voltage command" });
            }
            let u = raw.clamp(0.0, self.u_max[k]);
            d.e[k] = e;
            d.de[k] = de;
            d.gain[k] = gain;
            d.flc[k] = flc;
            d.u_raw[k] = raw;
            d.u[k] = u;
            d.clamped[k] = u != raw;
            next.prev_error[k] = e;
            next.error_rate[k] = de;
        }
        Ok((d.u, next, d))
    }
}

fn actuator_ctx(e: ControlError, k: usize) -> ControlError {
    match e {
        ControlError::Setting(m) => ControlError::Setting(format!("actuator {}: {m}", k + 1)),
        other => other,
    }
}
