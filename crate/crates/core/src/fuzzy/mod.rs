//! Mamdani fuzzy inference.
//!
//! Systems are immutable once built; every evaluation is a pure function of
//! the crisp inputs.

mod layout;
mod membership;
mod system;

use thiserror::Error;

pub use layout::{
    main_rule_table, rules_from_list, rules_from_table, symmetric_terms, uniform_terms, uniform_variable,
    MAIN_RULE_TABLE, SUPERVISOR_RULES,
};
pub use membership::MembershipFunction;
pub use system::{FuzzySystem, Inference, LinguisticVariable, Rule};
pub(crate) use system::grid_rows;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuzzyError {
    #[error("malformed membership function: {0}")]
    Breakpoints(String),
    #[error("variable '{name}' has an empty or nonfinite universe [{lo}, {hi}]")]
    Universe { name: String, lo: f64, hi: f64 },
    #[error("term mf{term} of '{name}' extends outside the universe")]
    TermOutsideUniverse { name: String, term: usize },
    #[error("terms of '{name}' leave {at} uncovered")]
    Coverage { name: String, at: f64 },
    #[error("invalid rule base: {0}")]
    Rules(String),
    #[error("expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("input {0} is not finite")]
    NonFiniteInput(f64),
    #[error("grid sample count must be at least 2, got {0}")]
    Grid(usize),
}
