//! The compactified autonomous system `x' = F(x, s)`, `s' = G(s)` on
//! `U × [-1, 1]` (or one closed half of it) with its boundary branches.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::criteria::{check_ck, CriteriaError, LimitKind, Overall, SmoothnessVerdict};
use crate::expr::{ExprError, SystemSpec};
use crate::probe::{probe_limit, Direction, ProbeOptions};
use crate::transform::{Side, TransformError, TransformSpec};

/// Half-width in `s` of the band next to `±1` where the boundary branch is used.
pub const BOUNDARY_BAND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompactifyError {
    #[error("C^{k} extension is not established ({overall}); pass the force flag to build anyway")]
    Refused { k: usize, overall: String },
    #[error("{0}")]
    Incompatible(String),
    #[error("s = {s} is outside the field domain [{lo}, {hi}]")]
    Domain { s: f64, lo: f64, hi: f64 },
    #[error("state has {got} components, expected {want}")]
    Dimension { got: usize, want: usize },
    #[error("cannot determine the forcing limit {0}")]
    MissingLimit(String),
    #[error("boundary Jacobian is incomplete: no converged limit for {0}")]
    IncompleteJacobian(String),
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// One of the two boundary components `s = ±1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Plus,
    Minus,
}

impl Boundary {
    pub fn s(self) -> f64 {
        match self {
            Boundary::Plus => 1.0,
            Boundary::Minus => -1.0,
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Boundary::Plus => Direction::PlusInfinity,
            Boundary::Minus => Direction::MinusInfinity,
        }
    }
}

/// Per-consumer evaluation state: the last inverted `t`, used to seed Newton.
#[derive(Debug, Clone, Default)]
pub struct EvalContext {
    pub seed: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CompactifiedField {
    system: SystemSpec,
    transform: TransformSpec,
    verdict: SmoothnessVerdict,
    k: usize,
    forced: bool,
    boundary_band: f64,
    domain: (f64, f64),
    mu_plus: Option<Vec<f64>>,
    mu_minus: Option<Vec<f64>>,
}

fn overall_text(o: &Overall) -> String {
    match o {
        Overall::CkExtensionHolds => "holds".into(),
        Overall::FailsAt { n, which } => format!("fails at n = {n}, {which}"),
        Overall::InconclusiveAt { n, which } => format!("inconclusive at n = {n}, {which}"),
    }
}

fn forcing_limit(
    spec: &SystemSpec,
    declared: Option<&[f64]>,
    dir: Direction,
    opts: &ProbeOptions,
) -> Result<Vec<f64>, CompactifyError> {
    if let Some(v) = declared {
        return Ok(v.to_vec());
    }
    (0..spec.forcing_dim())
        .map(|i| {
            let p = probe_limit(
                |t| spec.eval_mu(t).map(|v| v[i]).map_err(|e| e.to_string()),
                dir,
                opts,
            );
            p.value()
                .ok_or_else(|| CompactifyError::MissingLimit(format!("mu{}{} ({})", i + 1, dir, p.verdict)))
        })
        .collect()
}

impl CompactifiedField {
    /// The two-sided field on `U × [-1, 1]`.
    pub fn build(
        spec: &SystemSpec,
        transform: &TransformSpec,
        k: usize,
        force: bool,
        opts: &ProbeOptions,
    ) -> Result<Self, CompactifyError> {
        if transform.side() != Side::TwoSided {
            return Err(CompactifyError::Incompatible(
                "a two-sided field needs a two-sided transform".into(),
            ));
        }
        if spec.class() != crate::expr::AsymptoticClass::TwoSided {
            return Err(CompactifyError::Incompatible(format!(
                "a two-sided field needs a two-sided asymptotic class, the system is {:?}",
                spec.class()
            )));
        }
        let mu_plus = Some(forcing_limit(spec, spec.mu_plus(), Direction::PlusInfinity, opts)?);
        let mu_minus = Some(forcing_limit(spec, spec.mu_minus(), Direction::MinusInfinity, opts)?);
        Self::assemble(spec, transform, k, force, opts, (-1.0, 1.0), mu_plus, mu_minus)
    }

    /// The one-sided field on `U × [s_+, 1]` or `U × [-1, s_-]`.
    ///
    /// The transform must carry the matching `t_±`.
    pub fn build_one_sided(
        spec: &SystemSpec,
        transform: &TransformSpec,
        k: usize,
        side: Boundary,
        force: bool,
        opts: &ProbeOptions,
    ) -> Result<Self, CompactifyError> {
        let (domain, mu_plus, mu_minus) = match (side, transform.side()) {
            (Boundary::Plus, Side::Right { .. }) => {
                if !spec.class().has_future() {
                    return Err(CompactifyError::Incompatible("the system has no future limit".into()));
                }
                let lim = forcing_limit(spec, spec.mu_plus(), Direction::PlusInfinity, opts)?;
                (transform.s_interval()?, Some(lim), None)
            }
            (Boundary::Minus, Side::Left { .. }) => {
                if !spec.class().has_past() {
                    return Err(CompactifyError::Incompatible("the system has no past limit".into()));
                }
                let lim = forcing_limit(spec, spec.mu_minus(), Direction::MinusInfinity, opts)?;
                (transform.s_interval()?, None, Some(lim))
            }
            (b, s) => {
                return Err(CompactifyError::Incompatible(format!(
                    "boundary {b:?} needs a transform with the matching one-sided interval, got {s:?}"
                )))
            }
        };
        Self::assemble(spec, transform, k, force, opts, domain, mu_plus, mu_minus)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        spec: &SystemSpec,
        transform: &TransformSpec,
        k: usize,
        force: bool,
        opts: &ProbeOptions,
        domain: (f64, f64),
        mu_plus: Option<Vec<f64>>,
        mu_minus: Option<Vec<f64>>,
    ) -> Result<Self, CompactifyError> {
        let verdict = check_ck(spec, transform, k, opts)?;
        if !verdict.holds() && !force {
            return Err(CompactifyError::Refused {
                k,
                overall: overall_text(&verdict.overall),
            });
        }
        Ok(Self {
            system: spec.clone(),
            transform: transform.clone(),
            forced: !verdict.holds(),
            verdict,
            k,
            boundary_band: BOUNDARY_BAND,
            domain,
            mu_plus,
            mu_minus,
        })
    }

    pub fn system(&self) -> &SystemSpec {
        &self.system
    }

    pub fn transform(&self) -> &TransformSpec {
        &self.transform
    }

    pub fn verdict(&self) -> &SmoothnessVerdict {
        &self.verdict
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// True when the field was built over a verdict that does not hold.
    pub fn forced(&self) -> bool {
        self.forced
    }

    pub fn boundary_band(&self) -> f64 {
        self.boundary_band
    }

    /// The closed `s`-interval of the field.
    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// `N + 1`.
    pub fn dim(&self) -> usize {
        self.system.state_dim() + 1
    }

    pub fn forcing_limit(&self, side: Boundary) -> Option<&[f64]> {
        match side {
            Boundary::Plus => self.mu_plus.as_deref(),
            Boundary::Minus => self.mu_minus.as_deref(),
        }
    }

    /// The boundary a point at `s` is evaluated on, if any.
    pub fn boundary_branch(&self, s: f64) -> Option<Boundary> {
        if self.mu_plus.is_some() && s >= 1.0 - self.boundary_band {
            Some(Boundary::Plus)
        } else if self.mu_minus.is_some() && s <= -1.0 + self.boundary_band {
            Some(Boundary::Minus)
        } else {
            None
        }
    }

    fn check_domain(&self, s: f64) -> Result<(), CompactifyError> {
        let (lo, hi) = self.domain;
        if s.is_nan() || s < lo || s > hi {
            return Err(CompactifyError::Domain { s, lo, hi });
        }
        Ok(())
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), CompactifyError> {
        if x.len() != self.system.state_dim() {
            return Err(CompactifyError::Dimension {
                got: x.len(),
                want: self.system.state_dim(),
            });
        }
        Ok(())
    }

    /// `t = h(s)` or the boundary the point belongs to. Points where `h(s)`
    /// leaves the floating-point range are assigned to the boundary branch.
    fn locate(&self, ctx: &mut EvalContext, s: f64) -> Result<Result<f64, Boundary>, CompactifyError> {
        if let Some(b) = self.boundary_branch(s) {
            return Ok(Err(b));
        }
        match self.transform.inverse(s, ctx.seed) {
            Ok(t) => {
                ctx.seed = Some(t);
                Ok(Ok(t))
            }
            Err(TransformError::OutsideImage(_)) if s.abs() > 0.5 => Ok(Err(if s > 0.0 {
                Boundary::Plus
            } else {
                Boundary::Minus
            })),
            Err(e) => Err(e.into()),
        }
    }

    fn boundary_mu(&self, b: Boundary) -> Result<&[f64], CompactifyError> {
        self.forcing_limit(b)
            .ok_or_else(|| CompactifyError::Domain {
                s: b.s(),
                lo: self.domain.0,
                hi: self.domain.1,
            })
    }

    /// `(F(x, s), G(s))` written into `out` (length `N + 1`).
    pub fn eval(&self, ctx: &mut EvalContext, x: &[f64], s: f64, out: &mut [f64]) -> Result<(), CompactifyError> {
        self.check_dim(x)?;
        self.check_domain(s)?;
        let n = x.len();
        match self.locate(ctx, s)? {
            Err(b) => {
                let mu = self.boundary_mu(b)?;
                self.system.eval_f(x, mu, &mut out[..n])?;
                out[n] = 0.0;
            }
            Ok(t) => {
                let mu = self.system.eval_mu(t)?;
                self.system.eval_f(x, &mu, &mut out[..n])?;
                out[n] = self.transform.phi_jet(t, 1)?.coeffs()[1];
            }
        }
        Ok(())
    }

    /// `G(s)` alone.
    pub fn g(&self, ctx: &mut EvalContext, s: f64) -> Result<f64, CompactifyError> {
        self.check_domain(s)?;
        match self.locate(ctx, s)? {
            Err(_) => Ok(0.0),
            Ok(t) => Ok(self.transform.phi_jet(t, 1)?.coeffs()[1]),
        }
    }

    /// The `(N+1)×(N+1)` Jacobian of `(F, G)` at `(x, s)`.
    ///
    /// Interior points use `∂F/∂s = ∂f/∂μ · μ'(t)/φ'(t)` and
    /// `G'(s) = φ''(t)/φ'(t)`; boundary points use [`Self::boundary_jacobian`].
    pub fn jacobian(&self, ctx: &mut EvalContext, x: &[f64], s: f64) -> Result<DMatrix<f64>, CompactifyError> {
        self.check_dim(x)?;
        self.check_domain(s)?;
        let t = match self.locate(ctx, s)? {
            Err(b) => return Ok(self.boundary_jacobian(b, x)?.block),
            Ok(t) => t,
        };
        let n = x.len();
        let mu_jets = self.system.mu_jets(t, 1)?;
        let mu: Vec<f64> = mu_jets.iter().map(|j| j.coeffs()[0]).collect();
        let phi = self.transform.phi_jet(t, 2)?;
        let (d1, d2) = (phi.coeffs()[1], 2.0 * phi.coeffs()[2]);
        let fx = self.system.jacobian_x(x, &mu)?;
        let fmu = self.system.jacobian_mu(x, &mu)?;
        let mut j = DMatrix::zeros(n + 1, n + 1);
        j.view_mut((0, 0), (n, n)).copy_from(&fx);
        for r in 0..n {
            j[(r, n)] = (0..mu.len()).map(|c| fmu[(r, c)] * mu_jets[c].coeffs()[1] / d1).sum();
        }
        j[(n, n)] = d2 / d1;
        Ok(j)
    }

    /// The Jacobian at a boundary point `(η, ±1)` from the verdict's limits.
    pub fn boundary_jacobian(&self, side: Boundary, eta: &[f64]) -> Result<BoundaryJacobian, CompactifyError> {
        self.check_dim(eta)?;
        let mu = self.boundary_mu(side)?;
        let n = eta.len();
        let order1 = self
            .verdict
            .per_order
            .first()
            .ok_or_else(|| CompactifyError::IncompleteJacobian("order 1".into()))?;
        let (g, mus) = match side {
            Boundary::Plus => (order1.g_plus.as_ref(), &order1.mu_plus),
            Boundary::Minus => (order1.g_minus.as_ref(), &order1.mu_minus),
        };
        let label = |kind| crate::criteria::WhichLimit {
            kind,
            direction: side.direction(),
        };
        let g_prime = g
            .and_then(|p| p.value())
            .ok_or_else(|| CompactifyError::IncompleteJacobian(format!("G' ({})", label(LimitKind::G))))?;
        let dmu = (0..self.system.forcing_dim())
            .map(|i| {
                mus.get(i)
                    .and_then(|p| p.value())
                    .ok_or_else(|| CompactifyError::IncompleteJacobian(format!("dμ̃/ds ({})", label(LimitKind::Mu(i)))))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let fx = self.system.jacobian_x(eta, mu)?;
        let fmu = self.system.jacobian_mu(eta, mu)?;
        let mut block = DMatrix::zeros(n + 1, n + 1);
        block.view_mut((0, 0), (n, n)).copy_from(&fx);
        for r in 0..n {
            block[(r, n)] = (0..dmu.len()).map(|c| fmu[(r, c)] * dmu[c]).sum();
        }
        block[(n, n)] = g_prime;
        Ok(BoundaryJacobian { side, block })
    }

    /// A structured description for reproducibility.
    pub fn describe(&self) -> FieldDescription {
        FieldDescription {
            state_dim: self.system.state_dim(),
            forcing_dim: self.system.forcing_dim(),
            f: self.system.f().iter().map(|e| e.to_string()).collect(),
            mu: self.system.mu().iter().map(|e| e.to_string()).collect(),
            transform: self.transform.name(),
            class: format!("{:?}", self.system.class()),
            s_domain: self.domain,
            boundary_band: self.boundary_band,
            mu_plus: self.mu_plus.clone(),
            mu_minus: self.mu_minus.clone(),
            interior_branch: "x' = f(x, mu(h(s))), s' = phi'(h(s))".into(),
            boundary_branch: "x' = f(x, mu±), s' = 0".into(),
            k: self.k,
            verdict: self.verdict.overall.clone(),
            forced: self.forced,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryJacobian {
    pub side: Boundary,
    pub block: DMatrix<f64>,
}

impl BoundaryJacobian {
    pub fn g_prime(&self) -> f64 {
        let n = self.block.nrows() - 1;
        self.block[(n, n)]
    }

    /// The row `[0, …, 0]` under `∂f/∂x`.
    pub fn bottom_left(&self) -> Vec<f64> {
        let n = self.block.nrows() - 1;
        (0..n).map(|c| self.block[(n, c)]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldDescription {
    pub state_dim: usize,
    pub forcing_dim: usize,
    pub f: Vec<String>,
    pub mu: Vec<String>,
    pub transform: String,
    pub class: String,
    pub s_domain: (f64, f64),
    pub boundary_band: f64,
    pub mu_plus: Option<Vec<f64>>,
    pub mu_minus: Option<Vec<f64>>,
    pub interior_branch: String,
    pub boundary_branch: String,
    pub k: usize,
    pub verdict: Overall,
    pub forced: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn vdp() -> CompactifiedField {
        CompactifiedField::build(
            &SystemSpec::van_der_pol(),
            &TransformSpec::arctan(4),
            2,
            false,
            &ProbeOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn interior_matches_closed_form() {
        let f = vdp();
        let mut ctx = EvalContext::default();
        for &s in &[-0.9, -0.3, 0.0, 0.4, 0.95, 0.999] {
            let mut out = [0.0; 3];
            f.eval(&mut ctx, &[0.5, -0.2], s, &mut out).unwrap();
            let g = (2.0 / PI) * (PI * s / 2.0).cos().powi(2);
            assert_relative_eq!(out[2], g, max_relative = 1e-12);
            let t = (PI * s / 2.0).tan();
            let mu = (2.0 / PI) * t.atan();
            let want = mu * mu * (1.0 - 0.25) * -0.2 - 0.5;
            assert_relative_eq!(out[1], want, max_relative = 1e-12);
        }
    }

    #[test]
    fn boundary_values() {
        let f = vdp();
        let mut ctx = EvalContext::default();
        let mut out = [0.0; 3];
        f.eval(&mut ctx, &[0.5, -0.2], 1.0, &mut out).unwrap();
        assert_eq!(out, [-0.2, 0.75 * -0.2 - 0.5, 0.0]);
        f.eval(&mut ctx, &[1.0, 1.0], 0.0, &mut out).unwrap();
        assert_eq!(out[1], -1.0);
        assert!(matches!(
            f.eval(&mut ctx, &[0.0, 0.0], 1.5, &mut out),
            Err(CompactifyError::Domain { .. })
        ));
    }

    #[test]
    fn g_vanishes_linearly_near_the_boundary() {
        let f = vdp();
        let mut ctx = EvalContext::default();
        for j in 1..12 {
            let d = 10f64.powi(-j);
            for s in [1.0 - d, -1.0 + d] {
                let g = f.g(&mut ctx, s).unwrap();
                assert!(g > 0.0 && g <= 2.0 * d, "G({s}) = {g}");
            }
        }
    }

    #[test]
    fn boundary_jacobian_vdp() {
        let f = vdp();
        let j = f.boundary_jacobian(Boundary::Plus, &[0.0, 0.0]).unwrap();
        assert_eq!(j.bottom_left(), vec![0.0, 0.0]);
        assert!(j.g_prime().abs() <= 1e-4);
        assert_eq!(j.block[(0, 0)], 0.0);
        assert_eq!(j.block[(0, 1)], 1.0);
        assert_eq!(j.block[(1, 0)], -1.0);
        assert_eq!(j.block[(1, 1)], 1.0);
        // ∂F/∂s = ∂f/∂μ · 1 at the origin is zero; away from it 2μ(1 - u²)v
        let j = f.boundary_jacobian(Boundary::Plus, &[0.5, 1.0]).unwrap();
        assert_relative_eq!(j.block[(1, 2)], 2.0 * 0.75, max_relative = 1e-4);
        let j = f.boundary_jacobian(Boundary::Minus, &[0.5, 1.0]).unwrap();
        assert_relative_eq!(j.block[(1, 2)], -2.0 * 0.75, max_relative = 1e-4);
    }

    #[test]
    fn interior_jacobian_tends_to_boundary() {
        let f = vdp();
        let mut ctx = EvalContext::default();
        let near = f.jacobian(&mut ctx, &[0.5, 1.0], 1.0 - 1e-6).unwrap();
        let at = f.boundary_jacobian(Boundary::Plus, &[0.5, 1.0]).unwrap().block;
        assert!((near - at).amax() < 1e-4);
    }

    #[test]
    fn one_sided_right() {
        let spec = SystemSpec::from_sources(&["-x1 + mu1"], &["atan(t)"], None, None, crate::expr::AsymptoticClass::Right)
            .unwrap();
        let tr = TransformSpec::arctan(3).with_side(Side::Right { t_plus: 0.0 });
        let f = CompactifiedField::build_one_sided(&spec, &tr, 2, Boundary::Plus, false, &ProbeOptions::default())
            .unwrap();
        assert_eq!(f.domain(), (0.0, 1.0));
        assert_relative_eq!(f.forcing_limit(Boundary::Plus).unwrap()[0], PI / 2.0, max_relative = 1e-6);
        let mut ctx = EvalContext::default();
        let mut out = [0.0; 2];
        f.eval(&mut ctx, &[0.0], 1.0, &mut out).unwrap();
        assert_relative_eq!(out[0], PI / 2.0, max_relative = 1e-6);
        assert!(matches!(
            f.eval(&mut ctx, &[0.0], -0.1, &mut out),
            Err(CompactifyError::Domain { .. })
        ));
        assert!(CompactifiedField::build(&spec, &TransformSpec::arctan(3), 2, false, &ProbeOptions::default()).is_err());
    }

    #[test]
    fn refusal_and_force() {
        let spec = SystemSpec::from_sources(
            &["-x1 + mu1"],
            &["sin(t)"],
            Some(vec![0.0]),
            Some(vec![0.0]),
            crate::expr::AsymptoticClass::TwoSided,
        )
        .unwrap();
        let tr = TransformSpec::arctan(3);
        let err = CompactifiedField::build(&spec, &tr, 1, false, &ProbeOptions::default()).unwrap_err();
        assert!(matches!(err, CompactifyError::Refused { k: 1, .. }));
        let f = CompactifiedField::build(&spec, &tr, 1, true, &ProbeOptions::default()).unwrap();
        assert!(f.forced());
        assert!(f.describe().forced);
    }

    #[test]
    fn description_serializes() {
        let d = vdp().describe();
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"state_dim\":2"));
        assert!(json.contains("ck-extension-holds"));
    }
}
