//! Deterministic closed-loop simulator for a four-actuator magnetic
//! suspension system.
//!
//! Each actuator is driven by a Mamdani fuzzy controller whose output gain is
//! scheduled by a second, supervisory fuzzy controller. A PD controller on the
//! level error `l = z1 + z3 - z2 - z4` adds a common correction that keeps the
//! four floaters coplanar.
//!
//! ```no_run
//! use maglev_core::{config::Config, metrics::Report, sim};
//!
//! let cfg = Config::reference();
//! let stack = cfg.stack().unwrap();
//! let run = sim::run(cfg.scenario("setting1").unwrap(), &stack, &cfg.plant()).unwrap();
//! println!("{}", maglev_core::metrics::render_text(&Report::from_run(&run)));
//! ```

pub mod config;
pub mod control;
pub mod fuzzy;
pub mod metrics;
pub mod plant;
pub mod sim;
pub mod tuning;

pub use config::Config;
pub use control::{ControllerConfig, ControllerMemory, ControllerStack, Diagnostics};
pub use fuzzy::{FuzzySystem, LinguisticVariable, MembershipFunction};
pub use metrics::{LevelMetrics, PairMetrics, Report};
pub use plant::{ActuatorParams, PairState, PhysicalConstants, PlantState, PAIRS};
pub use sim::{Outcome, PlantModel, RunResult, Scenario};
