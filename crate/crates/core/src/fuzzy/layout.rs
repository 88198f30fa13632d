//! Standard term layouts and the rule tables used by the controllers.

use super::{FuzzyError, LinguisticVariable, MembershipFunction, Rule};

/// Main-controller rule table. Rows are error-rate terms mf1..mf5, columns
/// are error terms mf1..mf5, entries are 1-based output terms.
pub const MAIN_RULE_TABLE: [[usize; 5]; 5] = [
    [1, 1, 1, 2, 3],
    [1, 1, 2, 3, 4],
    [1, 2, 3, 4, 5],
    [2, 3, 4, 5, 5],
    [3, 4, 5, 5, 5],
];

/// Supervisor rules: |error| small, medium, large -> unity, boost, boost.
pub const SUPERVISOR_RULES: [usize; 3] = [1, 2, 2];

/// `n` evenly spaced triangular terms over `[lo, hi]`, with the two end terms
/// as shoulders whose core sits on the universe edge.
pub fn uniform_terms(lo: f64, hi: f64, n: usize) -> Result<Vec<MembershipFunction>, FuzzyError> {
    if n < 2 {
        return Err(FuzzyError::Breakpoints(format!("a uniform partition needs at least 2 terms, got {n}")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(FuzzyError::Universe { name: "uniform partition".into(), lo, hi });
    }
    let step = (hi - lo) / (n - 1) as f64;
    let center = |k: usize| if k + 1 == n { hi } else { lo + step * k as f64 };
    (0..n)
        .map(|k| {
            if k == 0 {
                MembershipFunction::trapezoidal(lo, lo, lo, center(1))
            } else if k + 1 == n {
                MembershipFunction::trapezoidal(center(k - 1), hi, hi, hi)
            } else {
                MembershipFunction::triangular(center(k - 1), center(k), center(k + 1))
            }
        })
        .collect()
}

/// `n` evenly spaced symmetric triangles centred from `lo` to `hi`. The two
/// end terms reach half a spacing past the universe, so each end term's
/// centroid is exactly the universe edge at any clipping level. Used for
/// output variables.
pub fn symmetric_terms(lo: f64, hi: f64, n: usize) -> Result<Vec<MembershipFunction>, FuzzyError> {
    if n < 2 {
        return Err(FuzzyError::Breakpoints(format!("a uniform partition needs at least 2 terms, got {n}")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(FuzzyError::Universe { name: "uniform partition".into(), lo, hi });
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| {
            let c = if k + 1 == n { hi } else { lo + step * k as f64 };
            MembershipFunction::triangular(c - step, c, c + step)
        })
        .collect()
}

pub fn uniform_variable(
    name: &str,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<LinguisticVariable, FuzzyError> {
    LinguisticVariable::new(name, lo, hi, uniform_terms(lo, hi, n)?)
}

/// Expand a 2-input table (rows = second input, columns = first input,
/// 1-based entries) into rules.
pub fn rules_from_table(table: &[Vec<usize>]) -> Result<Vec<Rule>, FuzzyError> {
    let mut rules = Vec::new();
    for (row, entries) in table.iter().enumerate() {
        for (col, &out) in entries.iter().enumerate() {
            if out == 0 {
                return Err(FuzzyError::Rules(format!(
                    "rule table entry ({}, {}) must be a 1-based term index",
                    row + 1,
                    col + 1
                )));
            }
            rules.push(Rule { antecedent: vec![col, row], consequent: out - 1 });
        }
    }
    Ok(rules)
}

/// Expand a 1-input consequent list (1-based entries) into rules.
pub fn rules_from_list(list: &[usize]) -> Result<Vec<Rule>, FuzzyError> {
    list.iter()
        .enumerate()
        .map(|(k, &out)| {
            if out == 0 {
                Err(FuzzyError::Rules(format!("rule {} must name a 1-based term", k + 1)))
            } else {
                Ok(Rule { antecedent: vec![k], consequent: out - 1 })
            }
        })
        .collect()
}

pub fn main_rule_table() -> Vec<Vec<usize>> {
    MAIN_RULE_TABLE.iter().map(|r| r.to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_five_terms_on_unit_interval() {
        let terms = uniform_terms(-1.0, 1.0, 5).unwrap();
        assert_eq!(terms[0].corners(), [-1.0, -1.0, -1.0, -0.5]);
        assert_eq!(terms[2].corners(), [-0.5, 0.0, 0.0, 0.5]);
        assert_eq!(terms[4].corners(), [0.5, 1.0, 1.0, 1.0]);
        // Neighbouring degrees sum to one across the universe.
        for k in 0..=200 {
            let x = -1.0 + k as f64 * 0.01;
            let s: f64 = terms.iter().map(|m| m.degree(x)).sum();
            assert!((s - 1.0).abs() < 1e-12, "sum {s} at {x}");
        }
    }

    #[test]
    fn symmetric_ends_straddle_the_edges() {
        let terms = symmetric_terms(0.0, 1.0, 5).unwrap();
        assert_eq!(terms[0].corners(), [-0.25, 0.0, 0.0, 0.25]);
        assert_eq!(terms[4].corners(), [0.75, 1.0, 1.0, 1.25]);
    }

    #[test]
    fn table_orientation() {
        let rules = rules_from_table(&main_rule_table()).unwrap();
        // error mf5, error-rate mf1 -> mf3
        let r = rules.iter().find(|r| r.antecedent == vec![4, 0]).unwrap();
        assert_eq!(r.consequent, 2);
        // error mf2, error-rate mf4 -> mf3
        let r = rules.iter().find(|r| r.antecedent == vec![1, 3]).unwrap();
        assert_eq!(r.consequent, 2);
    }

    #[test]
    fn zero_entry_rejected() {
        assert!(rules_from_list(&[1, 0, 2]).is_err());
        assert!(rules_from_table(&[vec![1, 0]]).is_err());
    }
}
