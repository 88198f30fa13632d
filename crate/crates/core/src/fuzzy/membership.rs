use serde::{Deserialize, Serialize};

use super::FuzzyError;

/// Piecewise-linear membership function.
///
/// A triangle `(a, b, c)` is treated as the trapezoid `(a, b, b, c)`.
/// Degenerate edges (`a == b` or `c == d`) give vertical sides, which is how
/// shoulder terms at the ends of a universe are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", content = "params", rename_all = "lowercase")]
pub enum MembershipFunction {
    Triangular([f64; 3]),
    Trapezoidal([f64; 4]),
}

impl MembershipFunction {
    pub fn triangular(a: f64, b: f64, c: f64) -> Result<Self, FuzzyError> {
        let mf = MembershipFunction::Triangular([a, b, c]);
        mf.validate()?;
        Ok(mf)
    }

    pub fn trapezoidal(a: f64, b: f64, c: f64, d: f64) -> Result<Self, FuzzyError> {
        let mf = MembershipFunction::Trapezoidal([a, b, c, d]);
        mf.validate()?;
        Ok(mf)
    }

    /// Breakpoints as a trapezoid `[a, b, c, d]`.
    pub fn corners(&self) -> [f64; 4] {
        match *self {
            MembershipFunction::Triangular([a, b, c]) => [a, b, b, c],
            MembershipFunction::Trapezoidal(p) => p,
        }
    }

    pub fn validate(&self) -> Result<(), FuzzyError> {
        let p = self.corners();
        if p.iter().any(|v| !v.is_finite()) {
            return Err(FuzzyError::Breakpoints(format!("nonfinite breakpoint in {p:?}")));
        }
        if p.windows(2).any(|w| w[0] > w[1]) {
            return Err(FuzzyError::Breakpoints(format!(
                "breakpoints must be nondecreasing, got {p:?}"
            )));
        }
        if p[0] == p[3] {
            return Err(FuzzyError::Breakpoints(format!("zero-width support {p:?}")));
        }
        Ok(())
    }

    /// Support interval `[a, d]`.
    pub fn support(&self) -> (f64, f64) {
        let p = self.corners();
        (p[0], p[3])
    }

    /// Membership degree of `x`, in `[0, 1]`.
    pub fn degree(&self, x: f64) -> f64 {
        let [a, b, c, d] = self.corners();
        if x < a || x > d {
            0.0
        } else if x >= b && x <= c {
            1.0
        } else if x < b {
            (x - a) / (b - a)
        } else {
            (d - x) / (d - c)
        }
    }

    /// Points where `min(degree, level)` changes slope, for `0 < level <= 1`.
    pub(crate) fn clipped_kinks(&self, level: f64, out: &mut Vec<f64>) {
        let [a, b, c, d] = self.corners();
        out.extend_from_slice(&[a, b, c, d]);
        if level < 1.0 {
            out.push(a + level * (b - a));
            out.push(d - level * (d - c));
        }
    }
}
