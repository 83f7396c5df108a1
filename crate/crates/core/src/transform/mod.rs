//! Time transformations `s = φ(t)` onto `(-1, 1)`.

use std::f64::consts::{FRAC_2_PI, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{eval_jet, eval_real, find_kinks, Bindings, Expr, ExprError, Var};
use crate::jet::{Elementary, Jet, JetError};

mod hypotheses;
mod phi_m;

pub use hypotheses::{validate_hypotheses, CheckVerdict, HypothesisReport};
pub use phi_m::{
    build_phi_m, domain_edge, exp_iter, ln_iter, phi_m_ratio_check, raw_phi_m_jet, raw_phi_m_jet_scaled, Blend,
    PhiMPieces, SmoothStep, MAX_M, SPLICE_LEVEL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("Φ_m is only cataloged for 1 <= m <= {MAX_M} (got {0})")]
    InvalidM(usize),
    #[error("order {0} is too small for this transform")]
    Order(usize),
    #[error("t = {t} is outside the transform domain: {reason}")]
    OutsideDomain { t: f64, reason: String },
    #[error("cannot build Φ_{m} blend of order {order}: {reason} (at t = {at})")]
    Construction {
        m: usize,
        order: usize,
        at: f64,
        reason: String,
    },
    #[error("user transform is invalid: {0}")]
    InvalidUser(String),
    #[error("cannot invert φ at s = {s}: bracket [{lo}, {hi}] after {iterations} iterations")]
    Inversion {
        s: f64,
        lo: f64,
        hi: f64,
        iterations: usize,
    },
    #[error("s = {0} is outside the image of φ")]
    OutsideImage(f64),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Which end(s) of the time axis are compactified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "side", rename_all = "kebab-case")]
pub enum Side {
    TwoSided,
    Right { t_plus: f64 },
    Left { t_minus: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransformKind {
    /// `φ(t) = (2/π) atan t`.
    Arctan,
    PhiM(Box<PhiMPieces>),
    User(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpec {
    kind: TransformKind,
    max_order: usize,
    side: Side,
}

/// Validation grid for user transforms: a dense linear core plus geometric tails.
pub fn validation_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..=2000).map(|i| -50.0 + 0.05 * i as f64).collect();
    for j in -2..=8 {
        let v = 10f64.powi(j);
        g.push(v);
        g.push(-v);
    }
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

impl TransformSpec {
    pub fn arctan(max_order: usize) -> Self {
        Self {
            kind: TransformKind::Arctan,
            max_order,
            side: Side::TwoSided,
        }
    }

    /// The spliced `Φ_m` transform of order `max_order`.
    pub fn phi_m(m: usize, max_order: usize) -> Result<Self, TransformError> {
        Ok(Self {
            kind: TransformKind::PhiM(Box::new(build_phi_m(m, max_order)?)),
            max_order,
            side: Side::TwoSided,
        })
    }

    /// A transform `φ(t)` given as an expression in `t`.
    ///
    /// It must evaluate on the validation grid, be nondecreasing there and
    /// have positive slope on the core `|t| <= 50`; smoothness is judged separately by [`validate_hypotheses`].
    pub fn user(expr: Expr, max_order: usize) -> Result<Self, TransformError> {
        if let Some(v) = expr.variables().into_iter().find(|v| *v != Var::Time) {
            return Err(TransformError::InvalidUser(format!("only t may appear, found {v}")));
        }
        let b = Bindings::default();
        let mut prev: Option<(f64, f64)> = None;
        for t in validation_grid() {
            let v = eval_real(&expr, &Bindings::time(t))?;
            if let Some((pt, pv)) = prev {
                if v < pv {
                    return Err(TransformError::InvalidUser(format!(
                        "not increasing between t = {pt} and t = {t}"
                    )));
                }
            }
            // far tails lose the derivative to cancellation, so only the core is checked
            if t.abs() > 50.0 {
                prev = Some((t, v));
                continue;
            }
            if let Ok(j) = eval_jet(&expr, Var::Time, &b, t, 1) {
                if j.coeffs()[1] <= 0.0 {
                    return Err(TransformError::InvalidUser(format!(
                        "derivative {} is not positive at t = {t}",
                        j.coeffs()[1]
                    )));
                }
            }
            prev = Some((t, v));
        }
        Ok(Self {
            kind: TransformKind::User(expr),
            max_order,
            side: Side::TwoSided,
        })
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self
    }

    pub fn kind(&self) -> &TransformKind {
        &self.kind
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn name(&self) -> String {
        match &self.kind {
            TransformKind::Arctan => "arctan".into(),
            TransformKind::PhiM(p) => format!("phi_m(m={})", p.m),
            TransformKind::User(e) => format!("user({e})"),
        }
    }

    pub fn pieces(&self) -> Option<&PhiMPieces> {
        match &self.kind {
            TransformKind::PhiM(p) => Some(p),
            _ => None,
        }
    }

    pub fn user_expr(&self) -> Option<&Expr> {
        match &self.kind {
            TransformKind::User(e) => Some(e),
            _ => None,
        }
    }

    fn check_side(&self, t: f64) -> Result<(), TransformError> {
        let ok = match self.side {
            Side::TwoSided => true,
            Side::Right { t_plus } => t >= t_plus,
            Side::Left { t_minus } => t <= t_minus,
        };
        if ok {
            Ok(())
        } else {
            Err(TransformError::OutsideDomain {
                t,
                reason: format!("outside the one-sided interval of {:?}", self.side),
            })
        }
    }

    /// `φ(t)`.
    pub fn phi(&self, t: f64) -> Result<f64, TransformError> {
        self.check_side(t)?;
        match &self.kind {
            TransformKind::Arctan => Ok(FRAC_2_PI * t.atan()),
            TransformKind::PhiM(p) => p.value(t),
            TransformKind::User(e) => Ok(eval_real(e, &Bindings::time(t))?),
        }
    }

    /// Jet of `φ` at `t` of the given order.
    pub fn phi_jet(&self, t: f64, order: usize) -> Result<Jet, TransformError> {
        self.check_side(t)?;
        self.jet_unchecked(t, order)
    }

    fn jet_unchecked(&self, t: f64, order: usize) -> Result<Jet, TransformError> {
        match &self.kind {
            TransformKind::Arctan => Ok(Jet::variable(t, order)?.lift(Elementary::Atan)?.scale(&FRAC_2_PI)),
            TransformKind::PhiM(p) => p.jet(t, order),
            TransformKind::User(e) => Ok(eval_jet(e, Var::Time, &Bindings::default(), t, order)?),
        }
    }

    /// Jet of the tail branch at `t`, used for limit probing.
    ///
    /// For the spliced `Φ_m` transform this is `±(1 + Φ_m)` wherever `Φ_m` is
    /// defined, so probes see the tail even inside the splice radius.
    pub fn tail_jet(&self, t: f64, order: usize) -> Result<Jet, TransformError> {
        self.check_side(t)?;
        match &self.kind {
            TransformKind::PhiM(p) => {
                let raw = raw_phi_m_jet(p.m, t, order)?;
                Ok(if t > 0.0 {
                    raw.add_scalar(&1.0)
                } else {
                    raw.neg().add_scalar(&-1.0)
                })
            }
            _ => self.jet_unchecked(t, order),
        }
    }

    /// Smallest `|t|` at which [`Self::tail_jet`] is defined.
    pub fn tail_start(&self) -> f64 {
        match &self.kind {
            TransformKind::PhiM(p) => domain_edge(p.m),
            _ => 0.0,
        }
    }

    /// The image interval of `φ` over the transform's time domain.
    pub fn s_interval(&self) -> Result<(f64, f64), TransformError> {
        Ok(match self.side {
            Side::TwoSided => (-1.0, 1.0),
            Side::Right { t_plus } => (self.phi(t_plus)?, 1.0),
            Side::Left { t_minus } => (-1.0, self.phi(t_minus)?),
        })
    }

    /// `h(s) = φ^{-1}(s)`, with `seed` as the Newton starting point.
    ///
    /// The arctan transform uses `tan(πs/2)`; the outer branch of the `Φ_m`
    /// transform is inverted in closed form. Everything else runs Newton
    /// steps safeguarded by a bisection bracket.
    pub fn inverse(&self, s: f64, seed: Option<f64>) -> Result<f64, TransformError> {
        if !(s > -1.0 && s < 1.0) {
            return Err(TransformError::OutsideImage(s));
        }
        let t = match &self.kind {
            TransformKind::Arctan => (0.5 * PI * s).tan(),
            TransformKind::PhiM(p) if s.abs() >= 1.0 - 1.0 / SPLICE_LEVEL => p.outer_inverse(s),
            _ => self.newton_inverse(s, seed.unwrap_or(0.0))?,
        };
        if !t.is_finite() {
            return Err(TransformError::OutsideImage(s));
        }
        self.check_side(t)?;
        Ok(t)
    }

    fn newton_inverse(&self, s: f64, seed: f64) -> Result<f64, TransformError> {
        let f = |t: f64| self.jet_unchecked(t, 1).map(|j| (j.coeffs()[0] - s, j.coeffs()[1]));
        let seed = if seed.is_finite() { seed } else { 0.0 };
        let (mut lo, mut hi) = (seed, seed);
        let (mut flo, _) = f(lo)?;
        let mut fhi = flo;
        let mut step = 1.0f64.max(seed.abs() * 0.1);
        let mut iterations = 0;
        while flo > 0.0 {
            hi = lo;
            fhi = flo;
            lo -= step;
            step *= 2.0;
            flo = f(lo)?.0;
            iterations += 1;
            if iterations > 2000 || !lo.is_finite() {
                return Err(TransformError::Inversion { s, lo, hi, iterations });
            }
        }
        while fhi < 0.0 {
            lo = hi;
            hi += step;
            step *= 2.0;
            fhi = f(hi)?.0;
            iterations += 1;
            if iterations > 2000 || !hi.is_finite() {
                return Err(TransformError::Inversion { s, lo, hi, iterations });
            }
        }
        let mut t = seed.clamp(lo, hi);
        for _ in 0..200 {
            iterations += 1;
            let (ft, dt) = f(t)?;
            if ft == 0.0 {
                return Ok(t);
            }
            if ft < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let newton = t - ft / dt;
            let next = if dt > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) || hi - lo <= f64::EPSILON * t.abs().max(1e-300) {
                return Ok(next);
            }
            t = next;
        }
        Err(TransformError::Inversion { s, lo, hi, iterations })
    }

    /// Locations where an `abs` or `sgn` argument of a user transform vanishes.
    pub fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        match &self.kind {
            TransformKind::User(e) => find_kinks(e, Var::Time, &Bindings::default(), lo, hi, 4001),
            _ => Vec::new(),
        }
    }
}
