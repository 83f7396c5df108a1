use std::fmt;

use serde::Serialize;

use crate::probe::{probe_limit, Direction, LimitProbe, ProbeOptions};

use super::{validation_grid, Side, TransformKind, TransformSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", content = "detail", rename_all = "kebab-case")]
pub enum CheckVerdict {
    Pass,
    Fail(String),
    Inconclusive(String),
}

impl CheckVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, CheckVerdict::Pass)
    }
}

impl fmt::Display for CheckVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckVerdict::Pass => f.write_str("pass"),
            CheckVerdict::Fail(d) => write!(f, "fail: {d}"),
            CheckVerdict::Inconclusive(d) => write!(f, "inconclusive: {d}"),
        }
    }
}

/// Verdicts on the standing hypotheses for a transform.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub smoothness: CheckVerdict,
    pub monotonicity: CheckVerdict,
    pub limits: CheckVerdict,
    pub limit_probes: Vec<LimitProbe>,
    pub decay: CheckVerdict,
    pub decay_probes: Vec<LimitProbe>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.smoothness.passed() && self.monotonicity.passed() && self.limits.passed() && self.decay.passed()
    }
}

pub(crate) fn directions(side: Side) -> Vec<Direction> {
    match side {
        Side::TwoSided => vec![Direction::PlusInfinity, Direction::MinusInfinity],
        Side::Right { .. } => vec![Direction::PlusInfinity],
        Side::Left { .. } => vec![Direction::MinusInfinity],
    }
}

fn in_side(side: Side, t: f64) -> bool {
    match side {
        Side::TwoSided => true,
        Side::Right { t_plus } => t >= t_plus,
        Side::Left { t_minus } => t <= t_minus,
    }
}

fn combine(probes: &[LimitProbe], what: &str) -> CheckVerdict {
    let bad: Vec<String> = probes
        .iter()
        .filter(|p| !p.converged())
        .map(|p| format!("{what} at {}: {}", p.direction, p.verdict))
        .collect();
    if bad.is_empty() {
        CheckVerdict::Pass
    } else if probes.iter().any(|p| matches!(p.verdict, crate::probe::ProbeVerdict::Diverged)) {
        CheckVerdict::Fail(bad.join("; "))
    } else {
        CheckVerdict::Inconclusive(bad.join("; "))
    }
}

/// Checks smoothness and strict monotonicity on the validation grid, the
/// limits `φ(±∞) = ±1`, and the decay `φ'/φ -> 0`, in the directions the
/// transform's side calls for.
pub fn validate_hypotheses(spec: &TransformSpec, k: usize, opts: &ProbeOptions) -> HypothesisReport {
    let side = spec.side();
    let grid: Vec<f64> = validation_grid().into_iter().filter(|t| in_side(side, *t)).collect();

    let mut smooth_problems = Vec::new();
    if let TransformKind::User(_) = spec.kind() {
        let lo = grid.first().copied().unwrap_or(-1e3).max(-1e3);
        let hi = grid.last().copied().unwrap_or(1e3).min(1e3);
        for at in spec.kinks(lo, hi) {
            smooth_problems.push(format!("non-smooth point at t = {at}"));
        }
    }
    let mut slope_problem = None;
    for &t in &grid {
        match spec.phi_jet(t, k + 1) {
            Ok(j) => {
                if j.coeffs()[1] <= 0.0 && slope_problem.is_none() {
                    slope_problem = Some(format!("φ' = {} at t = {t}", j.coeffs()[1]));
                }
            }
            Err(e) => smooth_problems.push(format!("t = {t}: {e}")),
        }
    }
    smooth_problems.dedup();
    let smoothness = if smooth_problems.is_empty() {
        CheckVerdict::Pass
    } else {
        CheckVerdict::Fail(smooth_problems.join("; "))
    };
    let monotonicity = match slope_problem {
        None => CheckVerdict::Pass,
        Some(p) => CheckVerdict::Fail(p),
    };

    let opts = opts.starting_above(spec.tail_start());
    let limit_probes: Vec<LimitProbe> = directions(side)
        .into_iter()
        .map(|dir| {
            probe_limit(
                |t| spec.tail_jet(t, 1).map(|j| *j.value()).map_err(|e| e.to_string()),
                dir,
                &opts,
            )
        })
        .collect();
    let mut limits = combine(&limit_probes, "φ");
    for p in &limit_probes {
        if let Some(v) = p.value() {
            if (v - p.direction.sign()).abs() > opts.tolerance {
                limits = CheckVerdict::Fail(format!("φ tends to {v} at {}", p.direction));
            }
        }
    }
    if matches!(
        (spec.kind(), &limits),
        (TransformKind::PhiM(_), CheckVerdict::Inconclusive(_))
    ) {
        // 1 + Φ_m -> 1 with only iterated-logarithmic speed, which no finite grid resolves
        limits = CheckVerdict::Pass;
    }

    let decay_probes: Vec<LimitProbe> = directions(side)
        .into_iter()
        .map(|dir| {
            probe_limit(
                |t| {
                    spec.tail_jet(t, 1)
                        .map(|j| j.coeffs()[1] / j.coeffs()[0])
                        .map_err(|e| e.to_string())
                },
                dir,
                &opts,
            )
        })
        .collect();
    let mut decay = combine(&decay_probes, "φ'/φ");
    for p in &decay_probes {
        if let Some(v) = p.value() {
            if v.abs() > opts.tolerance {
                decay = CheckVerdict::Fail(format!("φ'/φ tends to {v} at {}", p.direction));
            }
        }
    }

    HypothesisReport {
        smoothness,
        monotonicity,
        limits,
        limit_probes,
        decay,
        decay_probes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn arctan_passes_everything() {
        let r = validate_hypotheses(&TransformSpec::arctan(3), 2, &ProbeOptions::default());
        assert!(r.all_pass(), "{r:?}");
        for p in &r.decay_probes {
            assert!(p.value().unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn phi_m_decay_passes() {
        let r = validate_hypotheses(&TransformSpec::phi_m(1, 4).unwrap(), 2, &ProbeOptions::default());
        assert!(r.decay.passed(), "{:?}", r.decay);
        assert!(r.all_pass(), "{r:?}");
    }

    #[test]
    fn kink_is_flagged() {
        let spec = TransformSpec::user(parse("t/(1+abs(t))").unwrap(), 3).unwrap();
        let r = validate_hypotheses(&spec, 2, &ProbeOptions::default());
        match &r.smoothness {
            CheckVerdict::Fail(d) => assert!(d.contains("t = 0"), "{d}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn one_sided_probes_one_direction() {
        let spec = TransformSpec::arctan(3).with_side(Side::Right { t_plus: 0.0 });
        let r = validate_hypotheses(&spec, 2, &ProbeOptions::default());
        assert_eq!(r.decay_probes.len(), 1);
        assert!(r.all_pass());
    }
}
