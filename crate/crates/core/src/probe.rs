//! Numerical probing of limits `t -> ±∞` on a geometric grid.
//!
//! Samples `t_j = ±10^j` are accelerated with Aitken's Δ² process. A probe
//! converges when the last three extrapolants agree within the tolerance and
//! diverges when the last two samples exceed the divergence bound with growing
//! magnitude. Anything else is inconclusive.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    PlusInfinity,
    MinusInfinity,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::PlusInfinity => 1.0,
            Direction::MinusInfinity => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::PlusInfinity => "+inf",
            Direction::MinusInfinity => "-inf",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum ProbeVerdict {
    Converged(f64),
    Diverged,
    Inconclusive,
}

impl ProbeVerdict {
    pub fn value(&self) -> Option<f64> {
        match self {
            ProbeVerdict::Converged(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for ProbeVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbeVerdict::Converged(v) => write!(f, "converged({v:.10})"),
            ProbeVerdict::Diverged => f.write_str("diverged"),
            ProbeVerdict::Inconclusive => f.write_str("inconclusive"),
        }
    }
}

/// Grid and thresholds for [`probe_limit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeOptions {
    pub tolerance: f64,
    pub divergence_bound: f64,
    pub first_exponent: i32,
    pub last_exponent: i32,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            divergence_bound: 1e6,
            first_exponent: 1,
            last_exponent: 8,
        }
    }
}

impl ProbeOptions {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// The same grid with every point below `min_abs_t` dropped.
    pub fn starting_above(mut self, min_abs_t: f64) -> Self {
        while 10f64.powi(self.first_exponent) <= min_abs_t && self.first_exponent < self.last_exponent {
            self.first_exponent += 1;
        }
        self
    }

    pub fn grid(&self, direction: Direction) -> Vec<f64> {
        (self.first_exponent..=self.last_exponent)
            .map(|j| direction.sign() * 10f64.powi(j))
            .collect()
    }
}

/// The outcome of a limit probe with its evidence trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitProbe {
    pub direction: Direction,
    pub samples: Vec<(f64, f64)>,
    pub extrapolants: Vec<f64>,
    pub extrapolant: Option<f64>,
    pub verdict: ProbeVerdict,
    pub tolerance: f64,
    pub failures: Vec<(f64, String)>,
}

impl LimitProbe {
    pub fn converged(&self) -> bool {
        matches!(self.verdict, ProbeVerdict::Converged(_))
    }

    pub fn value(&self) -> Option<f64> {
        self.verdict.value()
    }
}

/// Aitken Δ² extrapolants `A_j` of consecutive triples.
///
/// Where the second difference is at rounding level the latest sample is
/// used instead, so a sequence that has already settled is left alone.
pub fn aitken(seq: &[f64]) -> Vec<f64> {
    seq.windows(3)
        .map(|w| {
            let (a, b, c) = (w[0], w[1], w[2]);
            let d1 = b - a;
            let d2 = c - 2.0 * b + a;
            let scale = a.abs().max(b.abs()).max(c.abs());
            if d2.abs() <= 64.0 * f64::EPSILON * scale || d2 == 0.0 {
                c
            } else {
                a - d1 * d1 / d2
            }
        })
        .collect()
}

/// Probes `lim value_fn(t)` in `direction` on the grid of `opts`.
pub fn probe_limit<F>(value_fn: F, direction: Direction, opts: &ProbeOptions) -> LimitProbe
where
    F: Fn(f64) -> Result<f64, String>,
{
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for t in opts.grid(direction) {
        match value_fn(t) {
            Ok(v) if v.is_finite() => samples.push((t, v)),
            Ok(v) => failures.push((t, format!("non-finite value {v}"))),
            Err(e) => failures.push((t, e)),
        }
    }
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let extrapolants = aitken(&values);
    let extrapolant = extrapolants.last().copied();
    let verdict = classify(&values, &extrapolants, &failures, opts);
    LimitProbe {
        direction,
        samples,
        extrapolants,
        extrapolant,
        verdict,
        tolerance: opts.tolerance,
        failures,
    }
}

fn classify(values: &[f64], extrapolants: &[f64], failures: &[(f64, String)], opts: &ProbeOptions) -> ProbeVerdict {
    if !failures.is_empty() {
        return ProbeVerdict::Inconclusive;
    }
    if let [.., a, b] = values {
        if a.abs() > opts.divergence_bound && b.abs() > opts.divergence_bound && b.abs() > a.abs() {
            return ProbeVerdict::Diverged;
        }
    }
    if let [.., x, y, z] = extrapolants {
        let hi = x.max(*y).max(*z);
        let lo = x.min(*y).min(*z);
        if hi - lo <= opts.tolerance {
            return ProbeVerdict::Converged(*z);
        }
    }
    ProbeVerdict::Inconclusive
}
