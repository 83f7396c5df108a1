//! Periodic orbits of the frozen limit systems by Newton shooting.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::compactify::{Boundary, CompactifiedField, EvalContext};

use super::integrator::{integrate, Dopri5, IntegrateOptions, Trajectory};
use super::{norm, DynamicsError, Field, FrozenField, Variational};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleOptions {
    pub transient: f64,
    pub tol: f64,
    pub residual: f64,
    pub max_newton: usize,
    pub max_return_time: f64,
    pub dense_points: usize,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            transient: 100.0,
            tol: 1e-12,
            residual: 1e-9,
            max_newton: 50,
            max_return_time: 500.0,
            dense_points: 4096,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicOrbit {
    pub anchor: Vec<f64>,
    pub section_normal: Vec<f64>,
    pub period: f64,
    /// `dense_points` states at equal time steps over one period, the anchor first.
    pub samples: Vec<Vec<f64>>,
    #[serde(skip)]
    pub monodromy: DMatrix<f64>,
    /// Eigenvalues of the monodromy other than the trivial one.
    pub normal_multipliers: Vec<Complex64>,
    /// The eigenvalue matched to the flow direction.
    pub trivial_multiplier: Complex64,
    /// `exp(G'(±1)·T)`, the multiplier along `s` in the compactified frame.
    pub center_multiplier: Option<Complex64>,
    pub residual: f64,
    pub residual_history: Vec<f64>,
}

impl PeriodicOrbit {
    /// The nontrivial multipliers: the normal ones followed by the center one, if known.
    pub fn floquet_multipliers(&self) -> Vec<Complex64> {
        let mut m = self.normal_multipliers.clone();
        m.extend(self.center_multiplier);
        m
    }

    /// All normal multipliers lie strictly inside the unit circle.
    pub fn normally_stable(&self) -> bool {
        self.normal_multipliers.iter().all(|z| z.norm() < 1.0)
    }

    pub fn max_amplitude(&self, component: usize) -> f64 {
        self.samples.iter().map(|y| y[component].abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let n = self.anchor.len();
        let mut s = format!("t,{}\n", (1..=n).map(|i| format!("x{i}")).collect::<Vec<_>>().join(","));
        let dt = self.period / self.samples.len() as f64;
        for (i, y) in self.samples.iter().enumerate() {
            s.push_str(&format!("{:.17e}", i as f64 * dt));
            for v in y {
                s.push_str(&format!(",{v:.17e}"));
            }
            s.push('\n');
        }
        s
    }
}

fn opts_for(o: &CycleOptions) -> IntegrateOptions {
    IntegrateOptions::with_tol(o.tol)
}

fn rhs<F: Field>(field: &F, y: &[f64]) -> Result<Vec<f64>, DynamicsError> {
    let mut out = vec![0.0; y.len()];
    field
        .rhs(&mut EvalContext::default(), 0.0, y, &mut out)
        .map_err(DynamicsError::Integration)?;
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Time of the first return to the section `n·(y − anchor) = 0` crossed
/// in the direction of `n`.
fn return_time<F: Field>(
    field: &F,
    x: &[f64],
    anchor: &[f64],
    normal: &[f64],
    o: &CycleOptions,
) -> Result<f64, DynamicsError> {
    let g = |y: &[f64]| dot(normal, y) - dot(normal, anchor);
    let mut st = Dopri5::new(field, 0.0, x, o.max_return_time, opts_for(o))?;
    let mut left_section = false;
    while st.t() < o.max_return_time {
        let step = st.step(o.max_return_time).map_err(DynamicsError::Integration)?;
        let (g0, g1) = (g(&step.y0), g(&step.y1));
        if g1 < 0.0 {
            left_section = true;
        }
        if left_section && g0 < 0.0 && g1 >= 0.0 {
            let (mut a, mut b) = (step.t0, step.t1);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if g(&step.hermite(m)) < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
                if b - a <= 1e-15 * b.abs() {
                    break;
                }
            }
            return Ok(0.5 * (a + b));
        }
    }
    Err(DynamicsError::NoCycle {
        reason: format!("no return to the section within t = {}", o.max_return_time),
        residuals: Vec::new(),
    })
}

/// `Ψ_T(x)` and its monodromy `DΨ_T(x)`.
fn flow_with_monodromy<F: Field>(
    field: &F,
    x: &[f64],
    period: f64,
    o: &CycleOptions,
) -> Result<(Vec<f64>, DMatrix<f64>), DynamicsError> {
    let n = x.len();
    let mut y0 = x.to_vec();
    for c in 0..n {
        for r in 0..n {
            y0.push(if r == c { 1.0 } else { 0.0 });
        }
    }
    let var = Variational { base: field };
    let tr = integrate(&var, 0.0, &y0, period, opts_for(o))?;
    if tr.termination != super::Termination::SpanEnd {
        return Err(DynamicsError::Integration(format!("{:?}", tr.termination)));
    }
    let y = tr.final_state();
    Ok((y[..n].to_vec(), DMatrix::from_column_slice(n, n, &y[n..])))
}

/// Locates an attracting periodic orbit of an autonomous `field` near `seed`.
///
/// After a transient run the section passes through the end point, normal
/// to the flow unless `section_normal` is given. Newton shooting on
/// `(x, T)` then drives the return residual below `opts.residual`.
pub fn find_periodic_orbit<F: Field>(
    field: &F,
    seed: &[f64],
    section_normal: Option<&[f64]>,
    opts: &CycleOptions,
) -> Result<PeriodicOrbit, DynamicsError> {
    let n = field.dim();
    if seed.len() != n {
        return Err(DynamicsError::InvalidInput(format!("seed has {} components, expected {n}", seed.len())));
    }
    let tr = integrate(field, 0.0, seed, opts.transient, opts_for(opts))?;
    if tr.termination != super::Termination::SpanEnd {
        return Err(DynamicsError::NoCycle {
            reason: format!("transient run ended early: {:?}", tr.termination),
            residuals: Vec::new(),
        });
    }
    let anchor = tr.final_state().to_vec();
    let f_anchor = rhs(field, &anchor)?;
    let speed = norm(&f_anchor);
    if speed <= 1e-10 * (1.0 + norm(&anchor)) {
        return Err(DynamicsError::NoCycle {
            reason: format!("transient settled at a rest point (|f| = {speed:e})"),
            residuals: Vec::new(),
        });
    }
    let normal: Vec<f64> = match section_normal {
        Some(nv) => {
            if nv.len() != n {
                return Err(DynamicsError::InvalidInput("section normal has the wrong dimension".into()));
            }
            let nn = norm(nv);
            let cos = dot(nv, &f_anchor) / (nn * speed);
            if nn.is_nan() || nn <= 0.0 || cos.abs() < 1e-8 {
                return Err(DynamicsError::Section(format!("flow·normal = {cos:e} at the anchor")));
            }
            nv.iter().map(|v| v / nn).collect()
        }
        None => f_anchor.iter().map(|v| v / speed).collect(),
    };

    let mut x = anchor.clone();
    let mut period = return_time(field, &x, &anchor, &normal, opts)?;
    let mut history = Vec::new();
    for _ in 0..=opts.max_newton {
        let (y, m) = flow_with_monodromy(field, &x, period, opts)?;
        let r: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let res = norm(&r);
        history.push(res);
        if res <= opts.residual {
            return assemble(field, x, normal, period, m, res, history, opts);
        }
        if history.len() > opts.max_newton {
            break;
        }
        let fy = rhs(field, &y)?;
        let mut a = DMatrix::zeros(n + 1, n + 1);
        let mut b = DVector::zeros(n + 1);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = m[(i, j)] - if i == j { 1.0 } else { 0.0 };
            }
            a[(i, n)] = fy[i];
            a[(n, i)] = normal[i];
            b[i] = -r[i];
        }
        b[n] = -(dot(&normal, &x) - dot(&normal, &anchor));
        let d = a.lu().solve(&b).ok_or_else(|| DynamicsError::NoCycle {
            reason: "singular shooting system".into(),
            residuals: history.clone(),
        })?;
        for i in 0..n {
            x[i] += d[i];
        }
        period += d[n];
        if period.is_nan() || period <= 0.0 {
            return Err(DynamicsError::NoCycle {
                reason: format!("period estimate became {period}"),
                residuals: history,
            });
        }
    }
    Err(DynamicsError::NoCycle {
        reason: format!("Newton stagnated after {} iterations", opts.max_newton),
        residuals: history,
    })
}

#[allow(clippy::too_many_arguments)]
fn assemble<F: Field>(
    field: &F,
    anchor: Vec<f64>,
    normal: Vec<f64>,
    period: f64,
    monodromy: DMatrix<f64>,
    residual: f64,
    residual_history: Vec<f64>,
    opts: &CycleOptions,
) -> Result<PeriodicOrbit, DynamicsError> {
    let tr: Trajectory = integrate(field, 0.0, &anchor, period, opts_for(opts))?;
    let m = opts.dense_points.max(16);
    let samples: Vec<Vec<f64>> = (0..m)
        .map(|i| tr.sample_at(period * i as f64 / m as f64).expect("inside the period"))
        .collect();
    let mut eig: Vec<Complex64> = monodromy.complex_eigenvalues().iter().copied().collect();
    let trivial_idx = eig
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).norm().total_cmp(&(b.1 - 1.0).norm()))
        .map(|(i, _)| i)
        .expect("nonempty spectrum");
    let trivial_multiplier = eig.remove(trivial_idx);
    Ok(PeriodicOrbit {
        anchor,
        section_normal: normal,
        period,
        samples,
        monodromy,
        normal_multipliers: eig,
        trivial_multiplier,
        center_multiplier: None,
        residual,
        residual_history,
    })
}

/// The periodic orbit of the limit system frozen at the `side` boundary.
///
/// The center multiplier `exp(G'(±1)·T)` is attached when the boundary
/// Jacobian is available.
pub fn find_limit_cycle(
    field: &CompactifiedField,
    side: Boundary,
    seed: &[f64],
    section_normal: Option<&[f64]>,
    opts: &CycleOptions,
) -> Result<PeriodicOrbit, DynamicsError> {
    let mu = field
        .forcing_limit(side)
        .ok_or_else(|| DynamicsError::InvalidInput(format!("the field has no {side:?} boundary")))?
        .to_vec();
    let frozen = FrozenField {
        system: field.system(),
        mu,
    };
    let mut orbit = find_periodic_orbit(&frozen, seed, section_normal, opts)?;
    if let Ok(bj) = field.boundary_jacobian(side, &orbit.anchor) {
        orbit.center_multiplier = Some(Complex64::new((bj.g_prime() * orbit.period).exp(), 0.0));
    }
    Ok(orbit)
}

/// `∮ trace Dv dt` over the orbit by the trapezoid rule on its dense samples.
pub fn trace_integral<F: Field>(field: &F, orbit: &PeriodicOrbit) -> Result<f64, DynamicsError> {
    let mut ctx = EvalContext::default();
    let dt = orbit.period / orbit.samples.len() as f64;
    let mut total = 0.0;
    for y in &orbit.samples {
        total += field.jacobian(&mut ctx, 0.0, y).map_err(DynamicsError::Integration)?.trace();
    }
    Ok(total * dt)
}

/// Distance from the first `N` components of each trajectory sample after
/// `from_t` to the orbit, with quadratic refinement between dense samples.
pub fn distance_to_orbit(traj: &Trajectory, orbit: &PeriodicOrbit, from_t: f64) -> Vec<(f64, f64)> {
    let n = orbit.anchor.len();
    let m = orbit.samples.len();
    traj.times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= from_t)
        .map(|(&t, y)| {
            let q = &y[..n];
            let d2 = |p: &[f64]| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let (i, best) = orbit
                .samples
                .iter()
                .enumerate()
                .map(|(i, p)| (i, d2(p)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("orbit has samples");
            let (pm, p0, pp) = (&orbit.samples[(i + m - 1) % m], &orbit.samples[i], &orbit.samples[(i + 1) % m]);
            // c(τ) = p0 + τ b + τ² c on τ ∈ [-1, 1]
            let bv: Vec<f64> = (0..n).map(|k| 0.5 * (pp[k] - pm[k])).collect();
            let cv: Vec<f64> = (0..n).map(|k| 0.5 * (pp[k] - 2.0 * p0[k] + pm[k])).collect();
            let curve = |tau: f64| -> Vec<f64> { (0..n).map(|k| p0[k] + tau * bv[k] + tau * tau * cv[k]).collect() };
            let mut tau = 0.0f64;
            for _ in 0..8 {
                let c = curve(tau);
                let dc: Vec<f64> = (0..n).map(|k| bv[k] + 2.0 * tau * cv[k]).collect();
                let r: Vec<f64> = (0..n).map(|k| c[k] - q[k]).collect();
                let g = dot(&r, &dc);
                let h = dot(&dc, &dc) + 2.0 * dot(&r, &cv);
                if h <= 0.0 {
                    break;
                }
                tau = (tau - g / h).clamp(-1.0, 1.0);
            }
            let refined = d2(&curve(tau)).min(best);
            (t, refined.sqrt())
        })
        .collect()
}
