//! Reference computations shared by the integration tests. None of these
//! call into the code paths they check: the fuzzy oracle only uses public
//! membership degrees and rule lists, the signal oracles are closed forms.

#![allow(dead_code)]

use maglev_core::fuzzy::FuzzySystem;

/// Brute-force centroid: sample the aggregated output set at `n` evenly
/// spaced points across the hull of the output term supports and integrate
/// with the trapezoid rule.
pub fn sampled_centroid(sys: &FuzzySystem, inputs: &[f64], n: usize) -> f64 {
    let degrees: Vec<Vec<f64>> = sys
        .inputs()
        .iter()
        .zip(inputs)
        .map(|(var, &x)| {
            let x = x.max(var.lo).min(var.hi);
            var.terms.iter().map(|mf| mf.degree(x)).collect()
        })
        .collect();
    let out = sys.output();
    let mut strength = vec![0.0_f64; out.terms.len()];
    for rule in sys.rules() {
        let mut s = 1.0_f64;
        for (v, &t) in rule.antecedent.iter().enumerate() {
            s = s.min(degrees[v][t]);
        }
        strength[rule.consequent] = strength[rule.consequent].max(s);
    }
    let lo = out.terms.iter().map(|mf| mf.support().0).fold(out.lo, f64::min);
    let hi = out.terms.iter().map(|mf| mf.support().1).fold(out.hi, f64::max);
    // Terms that did not fire contribute nothing to the max. The rest are
    // evaluated from their corners with the edge slopes precomputed.
    let active: Vec<([f64; 4], f64, f64, f64)> = out
        .terms
        .iter()
        .zip(&strength)
        .filter(|(_, &a)| a > 0.0)
        .map(|(mf, &a)| {
            let [p, q, r, s] = mf.corners();
            let up = if q > p { 1.0 / (q - p) } else { f64::INFINITY };
            let down = if s > r { 1.0 / (s - r) } else { f64::INFINITY };
            ([p, q, r, s], up, down, a)
        })
        .collect();
    let clipped = |y: f64, &([p, q, r, s], up, down, a): &([f64; 4], f64, f64, f64)| {
        let mu = if y < p || y > s {
            0.0
        } else if y < q {
            (y - p) * up
        } else if y > r {
            (s - y) * down
        } else {
            1.0
        };
        mu.min(a)
    };
    let h = (hi - lo) / (n - 1) as f64;
    let (mut area, mut moment) = (0.0, 0.0);
    for k in 0..n {
        let y = lo + h * k as f64;
        let mu = active.iter().map(|t| clipped(y, t)).fold(0.0, f64::max);
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        area += w * mu;
        moment += w * mu * y;
    }
    moment / area
}

/// Main rule table as a formula: `clamp(i + j - 3, 1, 5)` for 1-based row `i`
/// (error rate) and column `j` (error).
pub fn table_formula(i: usize, j: usize) -> usize {
    (i as i64 + j as i64 - 3).clamp(1, 5) as usize
}

/// `z(t) = z* + a exp(-s t) cos(w t)`, a decaying oscillation about `z*`.
#[derive(Debug, Clone, Copy)]
pub struct Decay {
    pub setpoint: f64,
    pub a: f64,
    pub s: f64,
    pub w: f64,
}

impl Decay {
    pub fn offset(&self, t: f64) -> f64 {
        self.a * (-self.s * t).exp() * (self.w * t).cos()
    }

    pub fn series(&self, dt: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n).map(|k| (k as f64 * dt, self.setpoint + self.offset(k as f64 * dt))).collect()
    }

    /// Extrema of the offset sit where `tan(w t) = -s / w`.
    pub fn peak_time(&self, n: usize) -> f64 {
        (n as f64 * std::f64::consts::PI - (self.s / self.w).atan()) / self.w
    }

    pub fn peak_size(&self, n: usize) -> f64 {
        let t = self.peak_time(n);
        self.a * (-self.s * t).exp() * self.w / self.s.hypot(self.w)
    }

    /// First time `|offset| = frac * a`; it lies before the first zero.
    pub fn rise_time(&self, frac: f64) -> f64 {
        let zero = std::f64::consts::FRAC_PI_2 / self.w;
        bisect(|t| self.offset(t).abs() - frac * self.a, 0.0, zero)
    }

    /// First crossing happens at the first zero of the cosine, so the
    /// largest later excursion is the first trough.
    pub fn overshoot(&self) -> f64 {
        self.peak_size(1)
    }

    /// Time after which `|offset| <= band` for good: past the last extremum
    /// that exceeds the band, where the decay meets the band on its way to
    /// the following zero.
    pub fn settling_time(&self, band: f64) -> f64 {
        let last = (1..).take_while(|&n| self.peak_size(n) > band).last().unwrap_or(0);
        let from = if last == 0 { 0.0 } else { self.peak_time(last) };
        let zero = ((last as f64 + 0.5) * std::f64::consts::PI) / self.w;
        bisect(|t| self.offset(t).abs() - band, from, zero)
    }
}

/// Root of a function that is positive at `lo` and negative at `hi`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) > 0.0 && f(hi) < 0.0, "bracket does not straddle a root");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean and population standard deviation, two passes.
pub fn two_pass(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Equilibrium current from `M g = (A N² mu0 / 4)(i / z)²`.
pub fn equilibrium_current(area: f64, turns: f64, mu0: f64, mass: f64, g: f64, z: f64) -> f64 {
    z * (4.0 * mass * g / (area * turns * turns * mu0)).sqrt()
}
