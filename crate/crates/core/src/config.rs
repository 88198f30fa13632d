//! The simulator's TOML configuration file.
//!
//! Every section is optional; missing keys take the values of the shipped
//! reference configuration and are reported back by [`Config::load`].
//! Unknown keys are rejected.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControllerConfig, ControllerStack};
use crate::plant::{ActuatorParams, GapLimits, PhysicalConstants, PAIRS};
use crate::sim::{PlantModel, Scenario};

/// Annotated reference configuration shipped with the crate.
pub const REFERENCE_CONFIG: &str = include_str!("../reference.config");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("{}{path}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { path: String, message: String, line: Option<usize> },
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
}

impl ConfigError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.into(), message: message.into(), line: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub physics: PhysicalConstants,
    pub limits: GapLimits,
    pub actuators: [ActuatorParams; PAIRS],
    pub controller: ControllerConfig,
    pub scenarios: BTreeMap<String, Scenario>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            physics: PhysicalConstants::default(),
            limits: GapLimits::default(),
            actuators: ActuatorParams::table(),
            controller: ControllerConfig::default(),
            scenarios: Scenario::builtin().into_iter().map(|s| (s.name.clone(), s)).collect(),
        }
    }
}

/// A validated configuration plus the keys that were filled from defaults.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: Config,
    pub defaulted: Vec<String>,
}

impl Config {
    pub fn reference() -> Config {
        Config::load(REFERENCE_CONFIG).expect("shipped reference config is valid").config
    }

    /// Parse and validate. Validation messages carry the offending line when
    /// the key appears in `text`.
    pub fn load(text: &str) -> Result<Loaded, ConfigError> {
        let mut config: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for s in Scenario::builtin() {
            config.scenarios.entry(s.name.clone()).or_insert(s);
        }
        for (name, s) in config.scenarios.iter_mut() {
            s.name = name.clone();
        }
        if let Err(ConfigError::Invalid { path, message, .. }) = config.validate() {
            let line = locate(text, &path);
            return Err(ConfigError::Invalid { path, message, line });
        }
        let user: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let resolved = toml::Table::try_from(&config).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut defaulted = Vec::new();
        missing_keys(&resolved, &user, "", &mut defaulted);
        Ok(Loaded { config, defaulted })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn plant(&self) -> PlantModel {
        PlantModel { params: self.actuators, constants: self.physics, limits: self.limits }
    }

    pub fn stack(&self) -> Result<ControllerStack, ConfigError> {
        ControllerStack::build(&self.controller, &self.actuators, &self.physics)
            .map_err(|e| ConfigError::invalid("controller", e.to_string()))
    }

    pub fn scenario(&self, name: &str) -> Result<&Scenario, ConfigError> {
        self.scenarios.get(name).ok_or_else(|| ConfigError::UnknownScenario(name.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.physics
            .validate()
            .map_err(|e| ConfigError::invalid("physics", e.to_string()))?;
        for (k, a) in self.actuators.iter().enumerate() {
            a.validate(k + 1)
                .map_err(|e| ConfigError::invalid(format!("actuators[{k}]"), e.to_string()))?;
        }
        let GapLimits { z_min, z_drop } = self.limits;
        if !(z_min > 0.0 && z_drop > z_min && z_drop.is_finite()) {
            return Err(ConfigError::invalid("limits", "need 0 < z_min < z_drop"));
        }
        let c = &self.controller;
        if !(c.setpoint > z_min && c.setpoint < z_drop) {
            return Err(ConfigError::invalid(
                "controller.setpoint",
                format!("{} m is outside ({z_min}, {z_drop})", c.setpoint),
            ));
        }
        if !(c.period.is_finite() && c.period > 0.0) {
            return Err(ConfigError::invalid("controller.period", "must be positive"));
        }
        for k in 0..PAIRS {
            let m = &c.main[k];
            for (field, v) in [("g_e", Some(m.g_e)), ("g_de", Some(m.g_de)), ("g_u", m.g_u)] {
                if let Some(v) = v {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(ConfigError::invalid(
                            format!("controller.main[{k}].{field}"),
                            format!("must be positive, got {v}"),
                        ));
                    }
                }
            }
            let s = &c.supervisor[k];
            if !(s.g_e.is_finite() && s.g_e > 0.0) {
                return Err(ConfigError::invalid(format!("controller.supervisor[{k}].g_e"), "must be positive"));
            }
            if !(s.g_max.is_finite() && s.g_max >= 1.0) {
                return Err(ConfigError::invalid(format!("controller.supervisor[{k}].g_max"), "must be at least 1"));
            }
        }
        for (field, v) in [("kp", c.pd.kp), ("kd", c.pd.kd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::invalid(format!("controller.pd.{field}"), "must be nonnegative"));
            }
        }
        c.main_fis
            .build()
            .map_err(|e| ConfigError::invalid("controller.main_fis", e.to_string()))?;
        self.stack()?;
        let plant = self.plant();
        for (name, s) in &self.scenarios {
            s.validate(c.period, &plant.limits, &plant.params)
                .map_err(|e| ConfigError::invalid(format!("scenarios.{name}"), e.to_string()))?;
        }
        Ok(())
    }
}

fn missing_keys(resolved: &toml::Table, user: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (key, value) in resolved {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match (value, user.get(key)) {
            (_, None) => out.push(path),
            (toml::Value::Table(r), Some(toml::Value::Table(u))) => missing_keys(r, u, &path, out),
            (toml::Value::Array(r), Some(toml::Value::Array(u))) => {
                for (i, (rv, uv)) in r.iter().zip(u).enumerate() {
                    if let (toml::Value::Table(rt), toml::Value::Table(ut)) = (rv, uv) {
                        missing_keys(rt, ut, &format!("{path}[{i}]"), out);
                    }
                }
            }
            _ => {}
        }
    }
}

/// Best-effort line lookup for a dotted key path such as
/// `controller.main[2].g_e` or `scenarios.setting1`.
pub fn locate(text: &str, path: &str) -> Option<usize> {
    let mut table = String::new();
    let mut counters: BTreeMap<String, usize> = BTreeMap::new();
    let mut fallback = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(h) = line.strip_prefix("[[").and_then(|l| l.strip_suffix("]]")) {
            let h = h.trim().to_string();
            let idx = counters.entry(h.clone()).and_modify(|c| *c += 1).or_insert(0);
            table = format!("{h}[{idx}]");
        } else if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = h.trim().to_string();
        } else if let Some((key, _)) = line.split_once('=') {
            let key = key.trim();
            let full = if table.is_empty() { key.to_string() } else { format!("{table}.{key}") };
            if full == path {
                return Some(n + 1);
            }
            if fallback.is_none() && path.starts_with(&format!("{full}.")) {
                fallback = Some(n + 1);
            }
            continue;
        } else {
            continue;
        }
        if fallback.is_none() && (table == path || path.starts_with(&format!("{table}."))) {
            fallback = Some(n + 1);
        }
    }
    fallback
}
