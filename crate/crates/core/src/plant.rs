//! Electromagnet/floater dynamics for the four actuator pairs.
//!
//! Each pair has state `(z, v, i)`: gap, gap rate and coil current. With
//! `c = A N² mu0` the governing equations are
//!
//! ```text
//! R i + (c / 2z) di/dt - (c i / 2z²) dz/dt = u
//! f = (c / 4) (i / z)²
//! M d²z/dt² = f - M g
//! ```
//!
//! The coil inductance is `L(z) = c / 2z`, so the electrical equation solves to
//! `di/dt = (2z / c)(u - R i) + (i / z) v`. The mechanical equation is used
//! exactly as written: magnetic force raises `z`, gravity lowers it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PAIRS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("pair {pair}: gap {z} m is not positive")]
    Domain { pair: usize, z: f64 },
    #[error("pair {pair}: state became nonfinite at t = {t} s")]
    NonFinite { pair: usize, t: f64 },
    #[error("integration step must be positive and finite, got {0}")]
    Step(f64),
    #[error("invalid plant parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// Permeability of air, H/m.
    pub mu0: f64,
    /// Floater mass, kg.
    pub mass: f64,
    /// Gravitational acceleration, m/s².
    pub g: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { mu0: 4.0 * std::f64::consts::PI * 1e-7, mass: 3.0, g: 9.8 }
    }
}

impl PhysicalConstants {
    pub fn weight(&self) -> f64 {
        self.mass * self.g
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        for (name, v) in [("mu0", self.mu0), ("mass", self.mass), ("g", self.g)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlantError::Parameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Electromagnetic constants and supply limits of one actuator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorParams {
    /// Coil resistance, ohm.
    pub resistance: f64,
    /// Core sectional area, m².
    pub area: f64,
    /// Coil turns.
    pub turns: f64,
    /// Maximum DC voltage, V.
    pub u_max: f64,
    /// Maximum DC current, A.
    pub i_max: f64,
}

impl ActuatorParams {
    pub fn table() -> [ActuatorParams; PAIRS] {
        let p = |resistance, area, turns, u_max, i_max| ActuatorParams {
            resistance,
            area,
            turns,
            u_max,
            i_max,
        };
        [
            p(5.0, 0.0002, 300.0, 50.0, 10.0),
            p(5.0, 0.000237, 300.0, 50.0, 10.0),
            p(10.0, 0.0005, 600.0, 70.0, 7.0),
            p(8.5, 0.0004, 500.0, 60.0, 7.0),
        ]
    }

    /// `A N² mu0`, H·m.
    pub fn magnetic_constant(&self, c: &PhysicalConstants) -> f64 {
        self.area * self.turns * self.turns * c.mu0
    }

    pub fn inductance(&self, c: &PhysicalConstants, z: f64) -> f64 {
        self.magnetic_constant(c) / (2.0 * z)
    }

    /// Current that holds the floater still at gap `z`.
    pub fn equilibrium_current(&self, c: &PhysicalConstants, z: f64) -> f64 {
        z * (4.0 * c.weight() / self.magnetic_constant(c)).sqrt()
    }

    pub fn equilibrium_voltage(&self, c: &PhysicalConstants, z: f64) -> f64 {
        self.resistance * self.equilibrium_current(c, z)
    }

    pub fn validate(&self, k: usize) -> Result<(), PlantError> {
        let fields = [
            ("resistance", self.resistance),
            ("area", self.area),
            ("turns", self.turns),
            ("u_max", self.u_max),
            ("i_max", self.i_max),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlantError::Parameter(format!(
                    "actuator {k}: {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Gap floor and drop ceiling, m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapLimits {
    pub z_min: f64,
    pub z_drop: f64,
}

impl Default for GapLimits {
    fn default() -> Self {
        GapLimits { z_min: 1e-4, z_drop: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairState {
    /// Gap between actuator and floater, m.
    pub z: f64,
    /// dz/dt, m/s.
    pub v: f64,
    /// Coil current, A.
    pub i: f64,
}

/// Sticky per-pair events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairFlags {
    pub contact: bool,
    pub dropped: bool,
    pub current_clamped: bool,
    pub voltage_clamped: bool,
}

impl PairFlags {
    pub fn merge(&mut self, other: PairFlags) {
        self.contact |= other.contact;
        self.dropped |= other.dropped;
        self.current_clamped |= other.current_clamped;
        self.voltage_clamped |= other.voltage_clamped;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub pairs: [PairState; PAIRS],
    pub t: f64,
    pub flags: [PairFlags; PAIRS],
}

impl PlantState {
    pub fn gaps(&self) -> [f64; PAIRS] {
        self.pairs.map(|p| p.z)
    }

    pub fn any_dropped(&self) -> bool {
        self.flags.iter().any(|f| f.dropped)
    }
}

/// Time derivative of one pair's state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairRate {
    pub dz: f64,
    pub dv: f64,
    pub di: f64,
}

pub fn magnetic_force(
    p: &ActuatorParams,
    c: &PhysicalConstants,
    i: f64,
    z: f64,
) -> Result<f64, PlantError> {
    if !(z > 0.0) {
        return Err(PlantError::Domain { pair: 0, z });
    }
    let ratio = i / z;
    Ok(p.magnetic_constant(c) / 4.0 * ratio * ratio)
}

pub fn coil_current_derivative(
    p: &ActuatorParams,
    c: &PhysicalConstants,
    s: &PairState,
    u: f64,
) -> Result<f64, PlantError> {
    if !(s.z > 0.0) {
        return Err(PlantError::Domain { pair: 0, z: s.z });
    }
    Ok(2.0 * s.z / p.magnetic_constant(c) * (u - p.resistance * s.i) + s.i / s.z * s.v)
}

/// d²z/dt² produced by magnetic force `f`.
pub fn mechanics_derivative(c: &PhysicalConstants, f: f64) -> f64 {
    f / c.mass - c.g
}

pub fn pair_derivative(
    p: &ActuatorParams,
    c: &PhysicalConstants,
    s: &PairState,
    u: f64,
) -> Result<PairRate, PlantError> {
    let f = magnetic_force(p, c, s.i, s.z)?;
    Ok(PairRate {
        dz: s.v,
        dv: mechanics_derivative(c, f),
        di: coil_current_derivative(p, c, s, u)?,
    })
}

/// Derivatives of all pairs. Pairs do not interact here.
pub fn state_derivative(
    params: &[ActuatorParams; PAIRS],
    c: &PhysicalConstants,
    pairs: &[PairState; PAIRS],
    u: &[f64; PAIRS],
) -> Result<[PairRate; PAIRS], PlantError> {
    let mut out = [PairRate::default(); PAIRS];
    for k in 0..PAIRS {
        out[k] = pair_derivative(&params[k], c, &pairs[k], u[k])
            .map_err(|e| tag_pair(e, k + 1))?;
    }
    Ok(out)
}

fn tag_pair(e: PlantError, pair: usize) -> PlantError {
    match e {
        PlantError::Domain { z, .. } => PlantError::Domain { pair, z },
        PlantError::NonFinite { t, .. } => PlantError::NonFinite { pair, t },
        other => other,
    }
}

fn advance(s: &PairState, r: &PairRate, h: f64) -> PairState {
    PairState { z: s.z + h * r.dz, v: s.v + h * r.dv, i: s.i + h * r.di }
}

/// One classical RK4 step of a single pair with `u` held over the step.
pub fn rk4_pair(
    p: &ActuatorParams,
    c: &PhysicalConstants,
    s: &PairState,
    u: f64,
    dt: f64,
) -> Result<PairState, PlantError> {
    let k1 = pair_derivative(p, c, s, u)?;
    let k2 = pair_derivative(p, c, &advance(s, &k1, 0.5 * dt), u)?;
    let k3 = pair_derivative(p, c, &advance(s, &k2, 0.5 * dt), u)?;
    let k4 = pair_derivative(p, c, &advance(s, &k3, dt), u)?;
    let w = dt / 6.0;
    Ok(PairState {
        z: s.z + w * (k1.dz + 2.0 * k2.dz + 2.0 * k3.dz + k4.dz),
        v: s.v + w * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv),
        i: s.i + w * (k1.di + 2.0 * k2.di + 2.0 * k3.di + k4.di),
    })
}

/// Advance the plant by `dt` under zero-order-hold voltages, then apply the
/// current, gap-floor and drop guards. Dropped pairs are frozen.
pub fn step(
    params: &[ActuatorParams; PAIRS],
    c: &PhysicalConstants,
    limits: &GapLimits,
    s: &PlantState,
    u: &[f64; PAIRS],
    dt: f64,
) -> Result<PlantState, PlantError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(PlantError::Step(dt));
    }
    let mut next = *s;
    next.t = s.t + dt;
    for k in 0..PAIRS {
        if s.flags[k].dropped {
            continue;
        }
        let p = &params[k];
        let mut volts = u[k];
        if !(0.0..=p.u_max).contains(&volts) {
            volts = volts.clamp(0.0, p.u_max);
            next.flags[k].voltage_clamped = true;
        }
        let mut pair =
            rk4_pair(p, c, &s.pairs[k], volts, dt).map_err(|e| tag_pair(e, k + 1))?;
        if !(pair.z.is_finite() && pair.v.is_finite() && pair.i.is_finite()) {
            return Err(PlantError::NonFinite { pair: k + 1, t: next.t });
        }
        if pair.i < 0.0 || pair.i > p.i_max {
            pair.i = pair.i.clamp(0.0, p.i_max);
            next.flags[k].current_clamped = true;
        }
        if pair.z < limits.z_min {
            pair.z = limits.z_min;
            pair.v = 0.0;
            next.flags[k].contact = true;
        } else if pair.z > limits.z_drop {
            next.flags[k].dropped = true;
        }
        next.pairs[k] = pair;
    }
    Ok(next)
}
