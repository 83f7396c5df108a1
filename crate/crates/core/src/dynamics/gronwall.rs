//! The a-priori separation bound `|X₂(t) − X₁(t)| ≤ |X₂(0) − X₁(0)| e^{M₁ t}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::compactify::EvalContext;

use super::integrator::{integrate, IntegrateOptions};
use super::{norm, DynamicsError, Field};

/// An axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, DynamicsError> {
        if lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| a.partial_cmp(b).is_none_or(|o| o.is_gt())) {
            return Err(DynamicsError::InvalidInput("region bounds must pair up with lo <= hi".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    fn grid(&self, per_dim: usize) -> Vec<Vec<f64>> {
        let per_dim = per_dim.max(2);
        let dims = self.lo.len();
        let total = per_dim.pow(dims as u32);
        (0..total)
            .map(|mut idx| {
                (0..dims)
                    .map(|d| {
                        let i = idx % per_dim;
                        idx /= per_dim;
                        self.lo[d] + (self.hi[d] - self.lo[d]) * i as f64 / (per_dim - 1) as f64
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallOptions {
    pub grid_per_dim: usize,
    pub samples: usize,
    pub tol: f64,
    pub slack: f64,
}

impl Default for GronwallOptions {
    fn default() -> Self {
        Self {
            grid_per_dim: 21,
            samples: 200,
            tol: 1e-11,
            slack: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GronwallStatus {
    Pass,
    Fail,
    /// Zero initial separation: the ratio is 0/0 and the bound holds trivially.
    TriviallyPass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallReport {
    pub m1: f64,
    pub ratios: Vec<(f64, f64)>,
    pub max_ratio: f64,
    pub status: GronwallStatus,
    /// First time an orbit left the region; the bound says nothing after it.
    pub inapplicable_after: Option<f64>,
}

/// `M₁`: the largest spectral norm of the field Jacobian on a grid of `region`.
pub fn estimate_m1<F: Field>(field: &F, region: &Region, per_dim: usize) -> Result<f64, DynamicsError> {
    if region.lo.len() != field.dim() {
        return Err(DynamicsError::InvalidInput("region dimension does not match the field".into()));
    }
    let norms: Result<Vec<f64>, String> = region
        .grid(per_dim)
        .par_iter()
        .map(|p| {
            let j = field.jacobian(&mut EvalContext::default(), 0.0, p)?;
            Ok(j.singular_values().max())
        })
        .collect();
    Ok(norms.map_err(DynamicsError::Integration)?.into_iter().fold(0.0, f64::max))
}

/// Compares the separation of two orbits with the Gronwall bound.
pub fn gronwall_check<F: Field>(
    field: &F,
    x1: &[f64],
    x2: &[f64],
    region: &Region,
    span: f64,
    opts: &GronwallOptions,
) -> Result<GronwallReport, DynamicsError> {
    if !region.contains(x1) || !region.contains(x2) {
        return Err(DynamicsError::InvalidInput("initial points must lie in the region".into()));
    }
    let m1 = estimate_m1(field, region, opts.grid_per_dim)?;
    let d0: f64 = norm(&x1.iter().zip(x2).map(|(a, b)| a - b).collect::<Vec<_>>());
    if d0 == 0.0 {
        return Ok(GronwallReport {
            m1,
            ratios: Vec::new(),
            max_ratio: 0.0,
            status: GronwallStatus::TriviallyPass,
            inapplicable_after: None,
        });
    }
    let io = IntegrateOptions::with_tol(opts.tol);
    let a = integrate(field, 0.0, x1, span, io)?;
    let b = integrate(field, 0.0, x2, span, io)?;
    let end = a.final_time().min(b.final_time());
    let mut ratios = Vec::new();
    let mut inapplicable_after = None;
    for i in 0..=opts.samples {
        let t = end * i as f64 / opts.samples.max(1) as f64;
        let (ya, yb) = (a.sample_at(t).expect("in range"), b.sample_at(t).expect("in range"));
        if !region.contains(&ya) || !region.contains(&yb) {
            inapplicable_after = Some(t);
            break;
        }
        let d: f64 = norm(&ya.iter().zip(&yb).map(|(p, q)| p - q).collect::<Vec<_>>());
        ratios.push((t, d / (d0 * (m1 * t).exp())));
    }
    if inapplicable_after.is_none() && end < span {
        inapplicable_after = Some(end);
    }
    let max_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let status = if max_ratio <= 1.0 + opts.slack {
        GronwallStatus::Pass
    } else {
        GronwallStatus::Fail
    };
    Ok(GronwallReport {
        m1,
        ratios,
        max_ratio,
        status,
        inapplicable_after,
    })
}
