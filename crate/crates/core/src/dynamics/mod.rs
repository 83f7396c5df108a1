//! Numerical dynamics: adaptive integration, periodic orbits of the limit
//! systems with their Floquet multipliers, distances to orbits and the
//! Gronwall separation bound.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::compactify::{CompactifiedField, CompactifyError, EvalContext};
use crate::expr::SystemSpec;

mod cycle;
mod gronwall;
mod integrator;

pub use cycle::{
    distance_to_orbit, find_limit_cycle, find_periodic_orbit, trace_integral, CycleOptions, PeriodicOrbit,
};
pub use gronwall::{estimate_m1, gronwall_check, GronwallOptions, GronwallReport, GronwallStatus, Region};
pub use integrator::{
    integrate, integrate_batch, integrate_compactified, Dopri5, IntegrateOptions, Step, Termination, Trajectory,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no periodic orbit found: {reason} (residuals {residuals:?})")]
    NoCycle { reason: String, residuals: Vec<f64> },
    #[error("Poincaré section is not transversal: {0}")]
    Section(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error(transparent)]
    Compactify(#[from] CompactifyError),
}

/// An autonomous or nonautonomous vector field `y' = v(t, y)`.
pub trait Field: Sync {
    fn dim(&self) -> usize;

    fn labels(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("x{i}")).collect()
    }

    fn rhs(&self, ctx: &mut EvalContext, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String>;

    fn jacobian(&self, ctx: &mut EvalContext, t: f64, y: &[f64]) -> Result<DMatrix<f64>, String>;

    /// Snaps `y` onto an invariant boundary it has reached. Returns whether
    /// `y` lies on such a boundary afterwards.
    fn saturate(&self, _y: &mut [f64]) -> bool {
        false
    }
}

impl CompactifiedField {
    fn clamp_s(&self, y: &[f64]) -> f64 {
        let (lo, hi) = self.domain();
        y[y.len() - 1].clamp(lo, hi)
    }
}

impl Field for CompactifiedField {
    fn dim(&self) -> usize {
        CompactifiedField::dim(self)
    }

    fn labels(&self) -> Vec<String> {
        let mut l: Vec<String> = (1..=self.system().state_dim()).map(|i| format!("x{i}")).collect();
        l.push("s".into());
        l
    }

    fn rhs(&self, ctx: &mut EvalContext, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String> {
        let n = y.len() - 1;
        self.eval(ctx, &y[..n], self.clamp_s(y), dy).map_err(|e| e.to_string())
    }

    fn jacobian(&self, ctx: &mut EvalContext, _t: f64, y: &[f64]) -> Result<DMatrix<f64>, String> {
        let n = y.len() - 1;
        CompactifiedField::jacobian(self, ctx, &y[..n], self.clamp_s(y)).map_err(|e| e.to_string())
    }

    fn saturate(&self, y: &mut [f64]) -> bool {
        let n = y.len() - 1;
        match self.boundary_branch(y[n]) {
            Some(b) => {
                y[n] = b.s();
                true
            }
            None => false,
        }
    }
}

/// The limit system `x' = f(x, μ_frozen)`.
#[derive(Debug, Clone)]
pub struct FrozenField<'a> {
    pub system: &'a SystemSpec,
    pub mu: Vec<f64>,
}

impl Field for FrozenField<'_> {
    fn dim(&self) -> usize {
        self.system.state_dim()
    }

    fn rhs(&self, _ctx: &mut EvalContext, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String> {
        self.system.eval_f(y, &self.mu, dy).map_err(|e| e.to_string())
    }

    fn jacobian(&self, _ctx: &mut EvalContext, _t: f64, y: &[f64]) -> Result<DMatrix<f64>, String> {
        self.system.jacobian_x(y, &self.mu).map_err(|e| e.to_string())
    }
}

/// The original system `x' = f(x, μ(t))`.
#[derive(Debug, Clone)]
pub struct NonautonomousField<'a> {
    pub system: &'a SystemSpec,
}

impl Field for NonautonomousField<'_> {
    fn dim(&self) -> usize {
        self.system.state_dim()
    }

    fn rhs(&self, _ctx: &mut EvalContext, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String> {
        let mu = self.system.eval_mu(t).map_err(|e| e.to_string())?;
        self.system.eval_f(y, &mu, dy).map_err(|e| e.to_string())
    }

    fn jacobian(&self, _ctx: &mut EvalContext, t: f64, y: &[f64]) -> Result<DMatrix<f64>, String> {
        let mu = self.system.eval_mu(t).map_err(|e| e.to_string())?;
        self.system.jacobian_x(y, &mu).map_err(|e| e.to_string())
    }
}

/// `y' = A y`.
#[derive(Debug, Clone)]
pub struct LinearField {
    pub a: DMatrix<f64>,
}

impl Field for LinearField {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn rhs(&self, _ctx: &mut EvalContext, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String> {
        for (r, d) in dy.iter_mut().enumerate() {
            *d = (0..y.len()).map(|c| self.a[(r, c)] * y[c]).sum();
        }
        Ok(())
    }

    fn jacobian(&self, _ctx: &mut EvalContext, _t: f64, _y: &[f64]) -> Result<DMatrix<f64>, String> {
        Ok(self.a.clone())
    }
}

/// The base flow augmented with its variational equations `Φ' = Dv Φ`,
/// `Φ` stored column-major after the `n` base components.
pub struct Variational<'a, F: Field> {
    pub base: &'a F,
}

impl<F: Field> Field for Variational<'_, F> {
    fn dim(&self) -> usize {
        let n = self.base.dim();
        n + n * n
    }

    fn rhs(&self, ctx: &mut EvalContext, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), String> {
        let n = self.base.dim();
        self.base.rhs(ctx, t, &y[..n], &mut dy[..n])?;
        let j = self.base.jacobian(ctx, t, &y[..n])?;
        for c in 0..n {
            for r in 0..n {
                dy[n + c * n + r] = (0..n).map(|k| j[(r, k)] * y[n + c * n + k]).sum();
            }
        }
        Ok(())
    }

    fn jacobian(&self, _ctx: &mut EvalContext, _t: f64, _y: &[f64]) -> Result<DMatrix<f64>, String> {
        Err("the augmented variational system has no Jacobian".into())
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
