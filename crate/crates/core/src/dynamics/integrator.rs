//! Dormand–Prince 5(4) with PI step control and cubic Hermite dense output.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::compactify::{CompactifiedField, EvalContext};

use super::{DynamicsError, Field};

const C: [f64; 5] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0];
const A21: f64 = 1.0 / 5.0;
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const A7: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: Option<f64>,
    pub max_steps: usize,
    /// Stop at the first step that lands on an invariant boundary.
    pub stop_at_boundary: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self::with_tol(1e-9)
    }
}

impl IntegrateOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            h0: None,
            max_steps: 1_000_000,
            stop_at_boundary: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "reason", rename_all = "kebab-case")]
pub enum Termination {
    SpanEnd,
    BoundaryEvent,
    StepFailure(String),
}

/// One accepted step with both end derivatives, enough for Hermite output.
#[derive(Debug, Clone)]
pub struct Step {
    pub t0: f64,
    pub y0: Vec<f64>,
    pub f0: Vec<f64>,
    pub t1: f64,
    pub y1: Vec<f64>,
    pub f1: Vec<f64>,
}

impl Step {
    /// Cubic Hermite interpolant at `t ∈ [t0, t1]`.
    pub fn hermite(&self, t: f64) -> Vec<f64> {
        hermite(self.t0, &self.y0, &self.f0, self.t1, &self.y1, &self.f1, t)
    }
}

fn hermite(t0: f64, y0: &[f64], f0: &[f64], t1: f64, y1: &[f64], f1: &[f64], t: f64) -> Vec<f64> {
    let h = t1 - t0;
    let th = ((t - t0) / h).clamp(0.0, 1.0);
    let th2 = th * th;
    let th3 = th2 * th;
    let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
    let h10 = th3 - 2.0 * th2 + th;
    let h01 = -2.0 * th3 + 3.0 * th2;
    let h11 = th3 - th2;
    (0..y0.len())
        .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
        .collect()
}

/// The integrator state for stepping a field by hand.
pub struct Dopri5<'f, F: Field> {
    field: &'f F,
    ctx: EvalContext,
    t: f64,
    y: Vec<f64>,
    f: Vec<f64>,
    h: f64,
    facold: f64,
    opts: IntegrateOptions,
    min_step: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl<'f, F: Field> Dopri5<'f, F> {
    /// Starts at `(t0, y0)`; `scale` is the length of the planned span and
    /// sets the step-size floor `1e-14·scale`.
    pub fn new(field: &'f F, t0: f64, y0: &[f64], scale: f64, opts: IntegrateOptions) -> Result<Self, DynamicsError> {
        if y0.len() != field.dim() {
            return Err(DynamicsError::InvalidInput(format!(
                "initial state has {} components, the field has {}",
                y0.len(),
                field.dim()
            )));
        }
        if !(opts.rtol > 0.0 && opts.atol > 0.0) {
            return Err(DynamicsError::InvalidInput("tolerances must be positive".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(DynamicsError::InvalidInput(format!("span must be positive, got {scale}")));
        }
        let mut ctx = EvalContext::default();
        let mut y = y0.to_vec();
        field.saturate(&mut y);
        let mut f = vec![0.0; y.len()];
        field.rhs(&mut ctx, t0, &y, &mut f).map_err(DynamicsError::InvalidInput)?;
        let mut me = Self {
            field,
            ctx,
            t: t0,
            y,
            f,
            h: 0.0,
            facold: 1e-4,
            opts,
            min_step: 1e-14 * scale,
            accepted: 0,
            rejected: 0,
        };
        me.h = match opts.h0 {
            Some(h) => h,
            None => me.initial_step(scale),
        };
        Ok(me)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    fn sk(&self, a: f64, b: f64) -> f64 {
        self.opts.atol + self.opts.rtol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self, scale: f64) -> f64 {
        let n = self.y.len() as f64;
        let rms = |v: &[f64], w: &[f64]| -> f64 {
            (v.iter()
                .zip(w)
                .map(|(a, b)| (a / (self.opts.atol + self.opts.rtol * b.abs())).powi(2))
                .sum::<f64>()
                / n)
                .sqrt()
        };
        let d0 = rms(&self.y, &self.y);
        let d1 = rms(&self.f, &self.y);
        let mut h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
        h = h.min(scale);
        let y1: Vec<f64> = self.y.iter().zip(&self.f).map(|(y, f)| y + h * f).collect();
        let mut f1 = vec![0.0; y1.len()];
        if self.field.rhs(&mut self.ctx, self.t + h, &y1, &mut f1).is_err() {
            return h * 1e-3;
        }
        let diff: Vec<f64> = f1.iter().zip(&self.f).map(|(a, b)| (a - b) / h).collect();
        let d2 = rms(&diff, &self.y);
        let h1 = if d1.max(d2) <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h).min(h1).min(scale)
    }

    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<(), String> {
        self.field.rhs(&mut self.ctx, t, y, out)
    }

    fn attempt(&mut self, h: f64) -> Result<(Vec<f64>, Vec<f64>, f64), String> {
        let n = self.y.len();
        let (t, y) = (self.t, self.y.clone());
        let k1 = self.f.clone();
        let mut k = vec![vec![0.0; n]; 6];
        let stage = |coef: &[f64], ks: &[&Vec<f64>]| -> Vec<f64> {
            (0..n)
                .map(|i| y[i] + h * coef.iter().zip(ks).map(|(a, kk)| a * kk[i]).sum::<f64>())
                .collect()
        };
        let y2 = stage(&[A21], &[&k1]);
        self.eval(t + C[0] * h, &y2, &mut k[0])?;
        let y3 = stage(&A3, &[&k1, &k[0]]);
        self.eval(t + C[1] * h, &y3, &mut k[1])?;
        let y4 = stage(&A4, &[&k1, &k[0], &k[1]]);
        self.eval(t + C[2] * h, &y4, &mut k[2])?;
        let y5 = stage(&A5, &[&k1, &k[0], &k[1], &k[2]]);
        self.eval(t + C[3] * h, &y5, &mut k[3])?;
        let y6 = stage(&A6, &[&k1, &k[0], &k[1], &k[2], &k[3]]);
        self.eval(t + C[4] * h, &y6, &mut k[4])?;
        let y7 = stage(&A7, &[&k1, &k[0], &k[1], &k[2], &k[3], &k[4]]);
        self.eval(t + h, &y7, &mut k[5])?;
        let all = [&k1, &k[0], &k[1], &k[2], &k[3], &k[4], &k[5]];
        let mut err = 0.0;
        for i in 0..n {
            let e = h * E.iter().zip(&all).map(|(c, kk)| c * kk[i]).sum::<f64>();
            err += (e / self.sk(y[i], y7[i])).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() || y7.iter().any(|v| !v.is_finite()) {
            return Err("non-finite state in trial step".into());
        }
        Ok((y7, k[5].clone(), err))
    }

    /// Takes one accepted step without passing `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<Step, String> {
        loop {
            let remaining = t_end - self.t;
            if remaining <= 0.0 {
                return Err("already at the end of the span".into());
            }
            let mut h = self.h.min(remaining);
            // absorb a sliver that would leave a tiny last step
            if remaining - h < 1e-3 * h {
                h = remaining;
            }
            if h < self.min_step {
                return Err(format!("step size {h:e} underflowed at t = {}", self.t));
            }
            if self.accepted + self.rejected >= self.opts.max_steps {
                return Err(format!("step budget {} exhausted at t = {}", self.opts.max_steps, self.t));
            }
            match self.attempt(h) {
                Err(_) => {
                    self.rejected += 1;
                    self.h = 0.5 * h;
                }
                Ok((mut y_new, mut f_new, err)) => {
                    let fac11 = err.powf(EXPO1);
                    if err <= 1.0 {
                        let fac = (fac11 / self.facold.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                        self.facold = err.max(1e-4);
                        let t_new = if h == remaining { t_end } else { self.t + h };
                        let before = y_new.clone();
                        self.field.saturate(&mut y_new);
                        if y_new != before {
                            self.eval(t_new, &y_new, &mut f_new)?;
                        }
                        let step = Step {
                            t0: self.t,
                            y0: std::mem::replace(&mut self.y, y_new.clone()),
                            f0: std::mem::replace(&mut self.f, f_new.clone()),
                            t1: t_new,
                            y1: y_new,
                            f1: f_new,
                        };
                        self.t = t_new;
                        self.h = h / fac;
                        self.accepted += 1;
                        return Ok(step);
                    }
                    self.rejected += 1;
                    self.h = h / (fac11 / SAFETY).min(1.0 / FAC_MIN);
                }
            }
        }
    }

    /// Whether the current state sits on an invariant boundary.
    pub fn on_boundary(&self) -> bool {
        let mut y = self.y.clone();
        self.field.saturate(&mut y) && y == self.y
    }
}

/// A sampled solution with the derivative at every sample.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub derivs: Vec<Vec<f64>>,
    pub rtol: f64,
    pub atol: f64,
    pub termination: Termination,
    /// First time the state reached an invariant boundary (the `s`-clock saturated).
    pub saturated_at: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has the initial sample")
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has the initial sample")
    }

    /// Dense output at `t` inside the sampled range.
    pub fn sample_at(&self, t: f64) -> Option<Vec<f64>> {
        let (first, last) = (self.times[0], self.final_time());
        if !(t >= first && t <= last) {
            return None;
        }
        let i = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            p if p >= self.times.len() => return Some(self.final_state().to_vec()),
            p => p - 1,
        };
        Some(hermite(
            self.times[i],
            &self.states[i],
            &self.derivs[i],
            self.times[i + 1],
            &self.states[i + 1],
            &self.derivs[i + 1],
            t,
        ))
    }

    /// `n + 1` equally spaced dense samples over the covered range.
    pub fn resample(&self, n: usize) -> Vec<(f64, Vec<f64>)> {
        let (a, b) = (self.times[0], self.final_time());
        (0..=n)
            .map(|i| {
                let t = a + (b - a) * i as f64 / n.max(1) as f64;
                (t, self.sample_at(t).expect("inside range"))
            })
            .collect()
    }

    /// CSV with a header row `t,<labels>`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("t,{}\n", self.labels.join(","));
        for (t, y) in self.times.iter().zip(&self.states) {
            let _ = write!(s, "{t:.17e}");
            for v in y {
                let _ = write!(s, ",{v:.17e}");
            }
            s.push('\n');
        }
        s
    }
}

/// Integrates `field` from `(t0, y0)` over `[t0, t0 + span]`.
///
/// A failing step ends the run with [`Termination::StepFailure`] and the
/// partial trajectory; only invalid input is an error.
pub fn integrate<F: Field>(
    field: &F,
    t0: f64,
    y0: &[f64],
    span: f64,
    opts: IntegrateOptions,
) -> Result<Trajectory, DynamicsError> {
    let mut stepper = Dopri5::new(field, t0, y0, span, opts)?;
    let mut traj = Trajectory {
        labels: field.labels(),
        times: vec![t0],
        states: vec![stepper.y().to_vec()],
        derivs: vec![stepper.f().to_vec()],
        rtol: opts.rtol,
        atol: opts.atol,
        termination: Termination::SpanEnd,
        saturated_at: None,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    if stepper.on_boundary() {
        traj.saturated_at = Some(t0);
    }
    let t_end = t0 + span;
    while stepper.t() < t_end {
        if traj.saturated_at.is_some() && opts.stop_at_boundary {
            traj.termination = Termination::BoundaryEvent;
            break;
        }
        match stepper.step(t_end) {
            Ok(step) => {
                traj.times.push(step.t1);
                traj.states.push(step.y1);
                traj.derivs.push(step.f1);
                if traj.saturated_at.is_none() && stepper.on_boundary() {
                    traj.saturated_at = Some(step.t1);
                }
            }
            Err(reason) => {
                traj.termination = Termination::StepFailure(reason);
                break;
            }
        }
    }
    traj.accepted_steps = stepper.accepted;
    traj.rejected_steps = stepper.rejected;
    Ok(traj)
}

/// Integrates the compactified field from `(x0, s0)` at `t = 0`.
pub fn integrate_compactified(
    field: &CompactifiedField,
    x0: &[f64],
    s0: f64,
    span: f64,
    tol: f64,
) -> Result<Trajectory, DynamicsError> {
    let (lo, hi) = field.domain();
    if !(s0 >= lo && s0 <= hi) {
        return Err(DynamicsError::InvalidInput(format!("s0 = {s0} is outside [{lo}, {hi}]")));
    }
    let mut y0 = x0.to_vec();
    y0.push(s0);
    integrate(field, 0.0, &y0, span, IntegrateOptions::with_tol(tol))
}

/// Integrates every initial state in parallel.
pub fn integrate_batch<F: Field>(
    field: &F,
    initial: &[Vec<f64>],
    span: f64,
    opts: IntegrateOptions,
) -> Vec<Result<Trajectory, DynamicsError>> {
    initial.par_iter().map(|y0| integrate(field, 0.0, y0, span, opts)).collect()
}
