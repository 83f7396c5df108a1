//! Time compactification of asymptotically autonomous ODEs.
//!
//! A system `x' = f(x, μ(t))` whose forcing settles to `μ^±` is rewritten
//! with `s = φ(t) ∈ (-1, 1)` as the autonomous system
//! `x' = f(x, μ(h(s)))`, `s' = φ'(h(s))`, and the planes `s = ±1` carry
//! the frozen limit systems. This crate decides whether that extension is
//! `C^k`, builds the extended field, and studies its dynamics.

pub mod compactify;
pub mod criteria;
pub mod dynamics;
pub mod expr;
pub mod faa_di_bruno;
pub mod jet;
pub mod probe;
pub mod transform;

pub use compactify::{Boundary, BoundaryJacobian, CompactifiedField, CompactifyError, EvalContext, FieldDescription};
pub use criteria::{
    check_ck, check_simple_criterion, g_derivative_via_cofactors, g_derivative_via_h, g_derivative_via_phi,
    mu_tilde_derivative, CriteriaError, CriteriaMatrix, LimitKind, Overall, SmoothnessVerdict,
};
pub use dynamics::{
    distance_to_orbit, find_limit_cycle, gronwall_check, integrate, integrate_compactified, DynamicsError, Field,
    GronwallReport, IntegrateOptions, PeriodicOrbit, Region, Trajectory,
};
pub use expr::{parse, AsymptoticClass, Expr, ExprError, SystemSpec};
pub use faa_di_bruno::{compose_derivative, count_partitions, enumerate_partitions, s_nl, DerivativeTable, FdbError};
pub use jet::{Elementary, Jet, JetError, Scalar};
pub use probe::{probe_limit, Direction, LimitProbe, ProbeOptions, ProbeVerdict};
pub use transform::{build_phi_m, validate_hypotheses, PhiMPieces, Side, TransformError, TransformSpec};

use thiserror::Error;

/// Any error raised by this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Fdb(#[from] FdbError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
    #[error(transparent)]
    Compactify(#[from] CompactifyError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
