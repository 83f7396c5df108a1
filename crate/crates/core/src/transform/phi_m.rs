//! The iterated-logarithm family `Φ_m(t) = -1 / ln^m |t|` and the spliced
//! transform built from it.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::jet::{Elementary, Jet};

use super::TransformError;

/// Largest `m` in the catalog; `exp^4(1)` is not representable.
pub const MAX_M: usize = 3;

/// `ln^m R` at the splice radius, so `φ(±R) = ±(1 - 1/SPLICE_LEVEL)`.
pub const SPLICE_LEVEL: f64 = 1.5;

/// `ln^m t0` at the inner edge of the smooth-step transition zone.
const TRANSITION_LEVEL: f64 = 1.25;

pub fn exp_iter(m: usize, x: f64) -> f64 {
    (0..m).fold(x, |acc, _| acc.exp())
}

pub fn ln_iter(m: usize, x: f64) -> f64 {
    (0..m).fold(x, |acc, _| acc.ln())
}

/// Lower edge of `D(Φ_m) = {|t| > exp^{m-1}(1)}`.
pub fn domain_edge(m: usize) -> f64 {
    exp_iter(m - 1, 1.0)
}

fn check_m(m: usize) -> Result<(), TransformError> {
    if (1..=MAX_M).contains(&m) {
        Ok(())
    } else {
        Err(TransformError::InvalidM(m))
    }
}

fn jerr(e: crate::jet::JetError) -> TransformError {
    TransformError::Jet(e)
}

/// Jet of `Φ_m` in the scaled variable `u = t / scale`, expanded at `t`.
///
/// The value is `-1/ln^m|t|`; higher coefficients come from differentiating
/// `Φ̇ P + Φ = 0` with `P = t Π_{i≤m} ln^i t`, which gives
/// `φ_{k+1} = -(φ_k + Σ_{j<k} (j+1) φ_{j+1} p_{k-j}) / ((k+1) p_0)`.
/// Negative `t` use evenness of `Φ_m`.
pub fn raw_phi_m_jet_scaled(m: usize, t: f64, order: usize, scale: f64) -> Result<Jet, TransformError> {
    check_m(m)?;
    if order == 0 {
        return Err(jerr(crate::jet::JetError::ZeroOrder));
    }
    let a = t.abs();
    if a.is_nan() || a <= domain_edge(m) || !a.is_finite() {
        return Err(TransformError::OutsideDomain {
            t,
            reason: format!("Φ_{m} needs |t| > exp^{}(1) = {}", m - 1, domain_edge(m)),
        });
    }
    let u = Jet::variable(a / scale, order).map_err(jerr)?;
    let mut level = u.lift(Elementary::Ln).map_err(jerr)?.add_scalar(&scale.ln());
    let mut p = u.mul(&level).map_err(jerr)?;
    for _ in 1..m {
        level = level.lift(Elementary::Ln).map_err(jerr)?;
        p = p.mul(&level).map_err(jerr)?;
    }
    let lm = *level.value();
    if lm <= 0.0 {
        return Err(TransformError::OutsideDomain {
            t,
            reason: format!("ln^{m}|t| is not positive"),
        });
    }
    let pc = p.coeffs();
    let mut phi = vec![0.0; order + 1];
    phi[0] = -1.0 / lm;
    for k in 0..order {
        let mut acc = phi[k];
        for j in 0..k {
            acc += (j + 1) as f64 * phi[j + 1] * pc[k - j];
        }
        phi[k + 1] = -acc / ((k + 1) as f64 * pc[0]);
    }
    if t < 0.0 {
        for (k, c) in phi.iter_mut().enumerate() {
            if k % 2 == 1 {
                *c = -*c;
            }
        }
    }
    Jet::from_coeffs(t / scale, phi).map_err(jerr)
}

/// Jet of `Φ_m` in `t`.
pub fn raw_phi_m_jet(m: usize, t: f64, order: usize) -> Result<Jet, TransformError> {
    raw_phi_m_jet_scaled(m, t, order, 1.0)
}

/// `Φ_m^{(n+1)}(t) / (Φ̇_m(t))^n` along `t_grid`.
pub fn phi_m_ratio_check(m: usize, n: usize, t_grid: &[f64]) -> Result<Vec<f64>, TransformError> {
    if n == 0 {
        return Err(TransformError::Order(0));
    }
    t_grid
        .iter()
        .map(|&t| {
            let d = raw_phi_m_jet(m, t, n + 1)?.derivatives();
            Ok(d[n + 1] / d[1].powi(n as i32))
        })
        .collect()
}

/// Outer branch `±(1 + Φ_m)` of the spliced transform in the scaled variable.
fn outer_jet_scaled(m: usize, t: f64, order: usize, scale: f64) -> Result<Jet, TransformError> {
    let raw = raw_phi_m_jet_scaled(m, t, order, scale)?;
    Ok(if t > 0.0 {
        raw.add_scalar(&1.0)
    } else {
        raw.neg().add_scalar(&-1.0)
    })
}

/// The middle piece on `(-R, R)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Blend {
    /// Odd polynomial `Σ_j a_j u^{2j+1}` in `u = t / R`.
    Hermite { coeffs: Vec<f64> },
    /// `φ' = w D + (1 - w) c` with a flat smooth step `w` on `[t0, R]`,
    /// `D` the outer derivative and `c` fixed by continuity at `R`.
    SmoothStep(SmoothStep),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothStep {
    pub t0: f64,
    pub inner_slope: f64,
    #[serde(skip)]
    panels: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<(f64, f64)>,
}

/// The assembled `C^{K+1}` transform: `±(1 + Φ_m)` for `±t ≥ R`, a blend inside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiMPieces {
    pub m: usize,
    pub order: usize,
    pub splice_radius: f64,
    pub blend: Blend,
    /// Largest relative one-sided jet mismatch at `t = R` over orders `0..=K+1`.
    pub splice_mismatch: f64,
    /// Smallest `φ'` found on the validation grid.
    pub min_slope: f64,
}

// Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

const PANELS: usize = 400;

fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

fn smooth_step_jet(x: &Jet) -> Result<Jet, TransformError> {
    let x0 = *x.value();
    let order = x.order();
    let base = *x.base_point();
    if x0 <= 0.0 || x0 >= 1.0 {
        return Jet::constant(base, smooth_step(x0), order).map_err(jerr);
    }
    let one = Jet::constant(base, 1.0, order).map_err(jerr)?;
    let a = one.div(x).map_err(jerr)?.neg().lift(Elementary::Exp).map_err(jerr)?;
    let b = one
        .div(&one.sub(x).map_err(jerr)?)
        .map_err(jerr)?
        .neg()
        .lift(Elementary::Exp)
        .map_err(jerr)?;
    a.div(&a.add(&b).map_err(jerr)?).map_err(jerr)
}

impl SmoothStep {
    fn weight(&self, t: f64, r: f64) -> f64 {
        smooth_step((t - self.t0) / (r - self.t0))
    }

    /// `(∫ w dt, ∫ w D dt)` over `[a, b]` inside the transition zone, by
    /// Gauss-Legendre in `τ = ln t`.
    fn panel_integrals(&self, m: usize, r: f64, a: f64, b: f64) -> (f64, f64) {
        let (la, lb) = (a.ln(), b.ln());
        let half = 0.5 * (lb - la);
        let mid = 0.5 * (lb + la);
        let mut iw = 0.0;
        let mut iwd = 0.0;
        for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let t = (mid + half * x).exp();
            let w = self.weight(t, r);
            let d = outer_slope(m, t);
            iw += wt * w * t;
            iwd += wt * w * d * t;
        }
        (iw * half, iwd * half)
    }

    fn integrals_to(&self, m: usize, r: f64, t: f64) -> (f64, f64) {
        let idx = self.panels.partition_point(|&e| e <= t).saturating_sub(1);
        let (mut iw, mut iwd) = self.cumulative[idx];
        let (pw, pwd) = self.panel_integrals(m, r, self.panels[idx], t);
        iw += pw;
        iwd += pwd;
        (iw, iwd)
    }

    fn value(&self, m: usize, r: f64, t: f64) -> f64 {
        let c = self.inner_slope;
        if t <= self.t0 {
            return c * t;
        }
        let (iw, iwd) = self.integrals_to(m, r, t);
        c * t - c * iw + iwd
    }
}

fn outer_slope(m: usize, t: f64) -> f64 {
    raw_phi_m_jet(m, t, 1).map(|j| j.coeffs()[1]).unwrap_or(0.0)
}

fn build_smooth_step(m: usize, r: f64) -> SmoothStep {
    let t0 = exp_iter(m, TRANSITION_LEVEL);
    let (l0, l1) = (t0.ln(), r.ln());
    let panels: Vec<f64> = (0..=PANELS)
        .map(|i| (l0 + (l1 - l0) * i as f64 / PANELS as f64).exp())
        .collect();
    let mut step = SmoothStep {
        t0,
        inner_slope: 0.0,
        panels,
        cumulative: Vec::with_capacity(PANELS + 1),
    };
    let mut acc = (0.0, 0.0);
    step.cumulative.push(acc);
    for i in 0..PANELS {
        let (a, b) = step.panel_integrals(m, r, step.panels[i], step.panels[i + 1]);
        acc = (acc.0 + a, acc.1 + b);
        step.cumulative.push(acc);
    }
    // φ(R) = c t0 + c (R - t0) - c ∫w + ∫wD, and ∫w = (R - t0)/2 by symmetry of w
    let phi_r = 1.0 - 1.0 / SPLICE_LEVEL;
    let iwd = acc.1;
    step.inner_slope = (phi_r - iwd) / (r - acc.0);
    step
}

fn hermite_coeffs(m: usize, r: f64, order: usize) -> Result<Vec<f64>, TransformError> {
    let n = order + 2;
    let target = outer_jet_scaled(m, r, order + 1, r)?.derivatives();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let p = 2 * j + 1;
            a[(i, j)] = if i > p {
                0.0
            } else {
                (0..i).map(|q| (p - q) as f64).product()
            };
        }
    }
    let b = DVector::from_vec(target);
    a.full_piv_lu()
        .solve(&b)
        .map(|x| x.iter().copied().collect())
        .ok_or(TransformError::Construction {
            m,
            order,
            at: r,
            reason: "Hermite system is singular".into(),
        })
}

fn eval_odd_poly(coeffs: &[f64], u: &Jet) -> Result<Jet, TransformError> {
    let u2 = u.mul(u).map_err(jerr)?;
    let k = coeffs.len();
    let mut acc = Jet::constant(*u.base_point(), coeffs[k - 1], u.order()).map_err(jerr)?;
    for c in coeffs[..k - 1].iter().rev() {
        acc = acc.mul(&u2).map_err(jerr)?.add_scalar(c);
    }
    acc.mul(u).map_err(jerr)
}

fn rescale(jet: &Jet, t: f64, factor: f64) -> Result<Jet, TransformError> {
    let mut scale = 1.0;
    let coeffs = jet
        .coeffs()
        .iter()
        .map(|c| {
            let v = c * scale;
            scale *= factor;
            v
        })
        .collect();
    Jet::from_coeffs(t, coeffs).map_err(jerr)
}

impl PhiMPieces {
    /// Value and derivatives `0..=order` of the assembled transform at `t`.
    pub fn jet(&self, t: f64, order: usize) -> Result<Jet, TransformError> {
        let r = self.splice_radius;
        if t.abs() >= r {
            return outer_jet_scaled(self.m, t, order, 1.0);
        }
        let a = t.abs();
        let positive = match &self.blend {
            Blend::Hermite { coeffs } => {
                let u = Jet::variable(a / r, order).map_err(jerr)?;
                rescale(&eval_odd_poly(coeffs, &u)?, a, 1.0 / r)?
            }
            Blend::SmoothStep(step) => self.smooth_step_jet(step, a, order)?,
        };
        let mut coeffs = positive.coeffs().to_vec();
        if t < 0.0 {
            for (k, c) in coeffs.iter_mut().enumerate() {
                if k % 2 == 0 {
                    *c = -*c;
                }
            }
        }
        Jet::from_coeffs(t, coeffs).map_err(jerr)
    }

    fn smooth_step_jet(&self, step: &SmoothStep, a: f64, order: usize) -> Result<Jet, TransformError> {
        let r = self.splice_radius;
        let c = step.inner_slope;
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = step.value(self.m, r, a);
        if a <= step.t0 {
            coeffs[1] = c;
            return Jet::from_coeffs(a, coeffs).map_err(jerr);
        }
        // jet of φ' of order K - 1, integrated once
        let k = order.max(2) - 1;
        let tj = Jet::variable(a, k).map_err(jerr)?;
        let x = tj.add_scalar(&-step.t0).scale(&(1.0 / (r - step.t0)));
        let w = smooth_step_jet(&x)?;
        let raw = raw_phi_m_jet(self.m, a, k + 1)?;
        let d: Vec<f64> = (0..=k).map(|i| (i + 1) as f64 * raw.coeffs()[i + 1]).collect();
        let d = Jet::from_coeffs(a, d).map_err(jerr)?;
        let one_minus_w = w.neg().add_scalar(&1.0);
        let slope = w.mul(&d).map_err(jerr)?.add(&one_minus_w.scale(&c)).map_err(jerr)?;
        for (i, c) in coeffs.iter_mut().enumerate().skip(1) {
            *c = slope.coeffs()[i - 1] / i as f64;
        }
        Jet::from_coeffs(a, coeffs).map_err(jerr)
    }

    pub fn value(&self, t: f64) -> Result<f64, TransformError> {
        let r = self.splice_radius;
        if t.abs() >= r {
            return Ok(outer_jet_scaled(self.m, t, 1, 1.0)?.coeffs()[0]);
        }
        let v = match &self.blend {
            Blend::Hermite { coeffs } => {
                let u = t.abs() / r;
                let u2 = u * u;
                coeffs.iter().rev().fold(0.0, |acc, c| acc * u2 + c) * u
            }
            Blend::SmoothStep(step) => step.value(self.m, r, t.abs()),
        };
        Ok(if t < 0.0 { -v } else { v })
    }

    /// Inverse of the outer branch, `t = exp^m(1/(1-|s|))` with the sign of `s`.
    pub fn outer_inverse(&self, s: f64) -> f64 {
        s.signum() * exp_iter(self.m, 1.0 / (1.0 - s.abs()))
    }

    pub fn is_hermite(&self) -> bool {
        matches!(self.blend, Blend::Hermite { .. })
    }

    fn splice_mismatch_at(&self, order: usize) -> Result<f64, TransformError> {
        let r = self.splice_radius;
        let outer = outer_jet_scaled(self.m, r, order + 1, r)?;
        let inner = match &self.blend {
            Blend::Hermite { coeffs } => {
                let u = Jet::variable(1.0, order + 1).map_err(jerr)?;
                eval_odd_poly(coeffs, &u)?
            }
            Blend::SmoothStep(step) => {
                // the blend just inside R, in u = t / R coefficients
                let j = self.smooth_step_jet(step, r * (1.0 - 1e-15), order + 1)?;
                rescale(&j, 1.0, r)?
            }
        };
        let scale = outer.coeffs().iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        Ok(outer
            .coeffs()
            .iter()
            .zip(inner.coeffs())
            .map(|(o, i)| (o - i).abs() / o.abs().max(1e-3 * scale))
            .fold(0.0, f64::max))
    }

    /// Smallest `φ'` on a uniform grid of `points` over `[0, R + 10]`, with
    /// the grid point where it occurs. Oddness covers the negative half.
    fn min_slope_on_grid(&self, points: usize) -> Result<(f64, f64), TransformError> {
        let hi = self.splice_radius + 10.0;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..points {
            let t = hi * i as f64 / (points - 1) as f64;
            let d = self.jet(t, 1)?.coeffs()[1];
            if d < best.0 {
                best = (d, t);
            }
        }
        Ok(best)
    }
}

/// Builds the spliced `Φ_m` transform matching `K + 1` derivatives at the
/// splice points.
///
/// The odd Hermite polynomial is tried first; if it is not strictly
/// increasing or misses the splice jets, the smooth-step blend is used.
pub fn build_phi_m(m: usize, order: usize) -> Result<PhiMPieces, TransformError> {
    check_m(m)?;
    if order < 2 {
        return Err(TransformError::Order(order));
    }
    let r = exp_iter(m, SPLICE_LEVEL);
    let mut pieces = PhiMPieces {
        m,
        order,
        splice_radius: r,
        blend: Blend::Hermite {
            coeffs: hermite_coeffs(m, r, order)?,
        },
        splice_mismatch: 0.0,
        min_slope: 0.0,
    };
    let grid = 10_000;
    let hermite_ok = pieces.splice_mismatch_at(order)? <= 1e-8 && pieces.min_slope_on_grid(grid)?.0 > 0.0;
    if !hermite_ok {
        pieces.blend = Blend::SmoothStep(build_smooth_step(m, r));
    }
    pieces.splice_mismatch = pieces.splice_mismatch_at(order)?;
    let (min_slope, at) = pieces.min_slope_on_grid(grid)?;
    pieces.min_slope = min_slope;
    if min_slope <= 0.0 {
        return Err(TransformError::Construction {
            m,
            order,
            at,
            reason: format!("blend is not strictly increasing (slope {min_slope:e})"),
        });
    }
    Ok(pieces)
}
