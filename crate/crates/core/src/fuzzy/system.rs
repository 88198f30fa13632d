use serde::{Deserialize, Serialize};

use super::{FuzzyError, MembershipFunction};

/// A named variable over a closed universe, partitioned into labelled terms.
///
/// Term `k` (zero-based) is what the rule tables call `mf{k+1}`. Every term's
/// core lies inside the universe; a support may reach past an edge, which
/// output variables use so that end terms stay symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticVariable {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub terms: Vec<MembershipFunction>,
}

impl LinguisticVariable {
    pub fn new(
        name: impl Into<String>,
        lo: f64,
        hi: f64,
        terms: Vec<MembershipFunction>,
    ) -> Result<Self, FuzzyError> {
        let var = LinguisticVariable { name: name.into(), lo, hi, terms };
        var.validate()?;
        Ok(var)
    }

    pub fn validate(&self) -> Result<(), FuzzyError> {
        let name = &self.name;
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(FuzzyError::Universe { name: name.clone(), lo: self.lo, hi: self.hi });
        }
        if self.terms.is_empty() {
            return Err(FuzzyError::Coverage { name: name.clone(), at: self.lo });
        }
        for (k, mf) in self.terms.iter().enumerate() {
            mf.validate()?;
            let [_, b, c, _] = mf.corners();
            if b < self.lo || c > self.hi {
                return Err(FuzzyError::TermOutsideUniverse { name: name.clone(), term: k + 1 });
            }
        }
        // Degrees are piecewise linear, so a hole in the partition shows up
        // either at a breakpoint or between two adjacent ones.
        let mut pts: Vec<f64> = self.terms.iter().flat_map(|mf| mf.corners()).collect();
        pts.push(self.lo);
        pts.push(self.hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mids: Vec<f64> = pts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        for &x in pts.iter().chain(&mids) {
            if x < self.lo || x > self.hi {
                continue;
            }
            if self.terms.iter().all(|mf| mf.degree(x) <= 0.0) {
                return Err(FuzzyError::Coverage { name: name.clone(), at: x });
            }
        }
        Ok(())
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Degrees of every term at `x` (no clamping).
    pub fn fuzzify(&self, x: f64) -> Vec<f64> {
        self.terms.iter().map(|mf| mf.degree(x)).collect()
    }
}

/// One AND-rule: a zero-based term index per input and the output term it fires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub antecedent: Vec<usize>,
    pub consequent: usize,
}

/// Crisp result of one inference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inference {
    pub value: f64,
    /// The aggregated output set had zero area; `value` is the universe midpoint.
    pub empty_aggregate: bool,
}

/// Mamdani system: min for AND and implication, max aggregation, centroid
/// defuzzification.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzySystem {
    inputs: Vec<LinguisticVariable>,
    output: LinguisticVariable,
    rules: Vec<Rule>,
}

impl FuzzySystem {
    pub fn new(
        inputs: Vec<LinguisticVariable>,
        output: LinguisticVariable,
        rules: Vec<Rule>,
    ) -> Result<Self, FuzzyError> {
        if inputs.is_empty() {
            return Err(FuzzyError::Rules("a system needs at least one input".into()));
        }
        for v in inputs.iter().chain(std::iter::once(&output)) {
            v.validate()?;
        }
        let combos: usize = inputs.iter().map(|v| v.terms.len()).product();
        let mut seen = vec![false; combos];
        for (r, rule) in rules.iter().enumerate() {
            if rule.antecedent.len() != inputs.len() {
                return Err(FuzzyError::Rules(format!(
                    "rule {} has {} antecedents, system has {} inputs",
                    r + 1,
                    rule.antecedent.len(),
                    inputs.len()
                )));
            }
            if rule.consequent >= output.terms.len() {
                return Err(FuzzyError::Rules(format!(
                    "rule {} fires mf{} but output '{}' has {} terms",
                    r + 1,
                    rule.consequent + 1,
                    output.name,
                    output.terms.len()
                )));
            }
            let mut slot = 0;
            for (term, var) in rule.antecedent.iter().zip(&inputs) {
                if *term >= var.terms.len() {
                    return Err(FuzzyError::Rules(format!(
                        "rule {} references mf{} of '{}' which has {} terms",
                        r + 1,
                        term + 1,
                        var.name,
                        var.terms.len()
                    )));
                }
                slot = slot * var.terms.len() + term;
            }
            if std::mem::replace(&mut seen[slot], true) {
                return Err(FuzzyError::Rules(format!("rule {} duplicates an antecedent", r + 1)));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(FuzzyError::Rules(format!(
                "rule base does not cover input combination #{} of {combos}",
                missing + 1
            )));
        }
        Ok(FuzzySystem { inputs, output, rules })
    }

    pub fn inputs(&self) -> &[LinguisticVariable] {
        &self.inputs
    }

    pub fn output(&self) -> &LinguisticVariable {
        &self.output
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Firing level of each output term after min-AND and max-aggregation.
    /// Inputs are clamped to their universes.
    pub fn activations(&self, inputs: &[f64]) -> Result<Vec<f64>, FuzzyError> {
        if inputs.len() != self.inputs.len() {
            return Err(FuzzyError::Arity { expected: self.inputs.len(), got: inputs.len() });
        }
        if let Some(x) = inputs.iter().find(|x| !x.is_finite()) {
            return Err(FuzzyError::NonFiniteInput(*x));
        }
        let degrees: Vec<Vec<f64>> = self
            .inputs
            .iter()
            .zip(inputs)
            .map(|(var, &x)| var.fuzzify(var.clamp(x)))
            .collect();
        let mut act = vec![0.0_f64; self.output.terms.len()];
        for rule in &self.rules {
            let strength = rule
                .antecedent
                .iter()
                .zip(&degrees)
                .map(|(&t, d)| d[t])
                .fold(1.0_f64, f64::min);
            let slot = &mut act[rule.consequent];
            *slot = slot.max(strength);
        }
        Ok(act)
    }

    pub fn infer(&self, inputs: &[f64]) -> Result<Inference, FuzzyError> {
        let act = self.activations(inputs)?;
        Ok(self.defuzzify(&act))
    }

    /// Aggregated output membership `max_j min(act_j, mu_j(y))`.
    pub fn aggregate(&self, activations: &[f64], y: f64) -> f64 {
        self.output
            .terms
            .iter()
            .zip(activations)
            .map(|(mf, &a)| mf.degree(y).min(a))
            .fold(0.0, f64::max)
    }

    /// Exact centroid of the aggregated output set, integrated over the
    /// full supports of the active terms.
    ///
    /// The aggregate is piecewise linear. Between consecutive kinks of the
    /// clipped terms every term is a single line, and the upper envelope only
    /// changes which line wins where two lines cross, so splitting at those
    /// crossings leaves pieces that integrate exactly.
    pub fn defuzzify(&self, activations: &[f64]) -> Inference {
        let (lo, hi) = (self.output.lo, self.output.hi);
        let active: Vec<(&MembershipFunction, f64)> = self
            .output
            .terms
            .iter()
            .zip(activations)
            .filter(|(_, &a)| a > 0.0)
            .map(|(mf, &a)| (mf, a.min(1.0)))
            .collect();

        let mut knots = Vec::with_capacity(6 * active.len());
        for (mf, a) in &active {
            mf.clipped_kinks(*a, &mut knots);
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup();

        let mut area = 0.0;
        let mut moment = 0.0;
        let mut left = Vec::with_capacity(active.len());
        let mut right = Vec::with_capacity(active.len());
        let mut cuts = Vec::new();
        for w in knots.windows(2) {
            let (p, q) = (w[0], w[1]);
            let h = q - p;
            if h <= 0.0 {
                continue;
            }
            // One-sided limits at p and q, recovered from interior samples so
            // vertical edges sitting exactly on a knot are handled.
            left.clear();
            right.clear();
            for (mf, a) in &active {
                let g1 = mf.degree(p + 0.25 * h).min(*a);
                let g3 = mf.degree(p + 0.75 * h).min(*a);
                left.push(1.5 * g1 - 0.5 * g3);
                right.push(1.5 * g3 - 0.5 * g1);
            }
            cuts.clear();
            cuts.push(0.0);
            for j in 0..active.len() {
                for k in j + 1..active.len() {
                    let d0 = left[j] - left[k];
                    let d1 = right[j] - right[k];
                    if (d0 > 0.0 && d1 < 0.0) || (d0 < 0.0 && d1 > 0.0) {
                        cuts.push(d0 / (d0 - d1));
                    }
                }
            }
            cuts.push(1.0);
            cuts.sort_by(f64::total_cmp);
            let envelope = |s: f64| {
                left.iter()
                    .zip(&right)
                    .map(|(l, r)| l + (r - l) * s)
                    .fold(0.0_f64, f64::max)
            };
            for c in cuts.windows(2) {
                let (s0, s1) = (c[0], c[1]);
                if s1 <= s0 {
                    continue;
                }
                let (y0, y1) = (p + s0 * h, p + s1 * h);
                let (a0, a1) = (envelope(s0), envelope(s1));
                let dy = y1 - y0;
                area += 0.5 * (a0 + a1) * dy;
                moment += dy / 6.0 * (y0 * (2.0 * a0 + a1) + y1 * (a0 + 2.0 * a1));
            }
        }

        if area > 0.0 && area.is_finite() {
            Inference { value: (moment / area).clamp(lo, hi), empty_aggregate: false }
        } else {
            Inference { value: self.output.center(), empty_aggregate: true }
        }
    }

    /// Evaluate the system on a row-major grid over the input universes
    /// (last input varies fastest). Each row is `inputs..., output`.
    pub fn control_surface(&self, counts: &[usize]) -> Result<Vec<Vec<f64>>, FuzzyError> {
        grid_rows(&self.inputs, counts, |x| Ok(self.infer(x)?.value))
    }
}

/// Row-major grid evaluation shared by raw systems and scaled controllers.
pub(crate) fn grid_rows<F>(
    vars: &[LinguisticVariable],
    counts: &[usize],
    mut eval: F,
) -> Result<Vec<Vec<f64>>, FuzzyError>
where
    F: FnMut(&[f64]) -> Result<f64, FuzzyError>,
{
    if counts.len() != vars.len() {
        return Err(FuzzyError::Arity { expected: vars.len(), got: counts.len() });
    }
    if let Some(&n) = counts.iter().find(|&&n| n < 2) {
        return Err(FuzzyError::Grid(n));
    }
    let total: usize = counts.iter().product();
    let mut rows = Vec::with_capacity(total);
    let mut idx = vec![0usize; counts.len()];
    for _ in 0..total {
        let mut row: Vec<f64> = idx
            .iter()
            .zip(vars)
            .zip(counts)
            .map(|((&i, v), &n)| {
                if i + 1 == n {
                    v.hi
                } else {
                    v.lo + v.width() * i as f64 / (n - 1) as f64
                }
            })
            .collect();
        let out = eval(&row)?;
        row.push(out);
        rows.push(row);
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(rows)
}
