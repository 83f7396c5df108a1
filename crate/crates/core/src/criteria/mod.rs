//! The `C^k`-extension test for a compactified system.
//!
//! For each order `n = 1..=k` the boundary limits of `g^(n)(s)` and
//! `μ̃^(n)(s)` are probed along `t -> ±∞` and assembled into a
//! [`SmoothnessVerdict`].

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{ExprError, SystemSpec};
use crate::faa_di_bruno::{inverse_jets, DerivativeTable, FdbError};
use crate::probe::{Direction, LimitProbe, ProbeOptions, ProbeVerdict};
use crate::transform::{domain_edge, raw_phi_m_jet, Side, TransformError, TransformSpec, MAX_M};

mod matrices;
mod report;

pub use crate::probe::probe_limit;
pub use matrices::{
    g_derivative_via_cofactors, g_derivative_via_h, g_derivative_via_phi, inverse_by_determinants, log_det,
    log_det_triangular, m_matrix, m_matrix_bordered, m_matrix_col, mu_tilde_derivative, q_matrix, q_matrix_col,
    q_tilde_col, CriteriaMatrix, LogDet, MatrixVariant,
};
pub use report::render_text;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriteriaError {
    #[error("matrix is singular at this point (boundary singularity: h' or φ' vanishes)")]
    Singular,
    #[error("order n = {0} is not allowed here (n >= 1)")]
    Order(usize),
    #[error("column {i} is out of range 1..={size}")]
    Column { i: usize, size: usize },
    #[error("k + 1 = {need} exceeds the transform's max order {have}")]
    TransformOrder { need: usize, have: usize },
    #[error("the asymptotic class and the transform side share no direction to probe")]
    NoDirections,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("Φ_m is only cataloged for 1 <= m <= {MAX_M} (got {0})")]
    InvalidM(usize),
    #[error(transparent)]
    Fdb(#[from] FdbError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Which boundary limit a probe belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    G,
    /// Forcing component, 0-based.
    Mu(usize),
    /// The `g^(n)` limit through the `h`-route; reported but never gating.
    GViaH,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhichLimit {
    pub kind: LimitKind,
    pub direction: Direction,
}

impl std::fmt::Display for WhichLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let dir = match self.direction {
            Direction::PlusInfinity => "+",
            Direction::MinusInfinity => "-",
        };
        match self.kind {
            LimitKind::G => write!(f, "G{dir}"),
            LimitKind::Mu(i) => write!(f, "mu{}{dir}", i + 1),
            LimitKind::GViaH => write!(f, "G{dir}(h-route)"),
        }
    }
}

/// Probes for one derivative order.
///
/// Directions the asymptotic class does not require are `None`; the `μ`
/// vectors have one entry per forcing component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderProbes {
    pub n: usize,
    pub g_plus: Option<LimitProbe>,
    pub g_minus: Option<LimitProbe>,
    pub mu_plus: Vec<LimitProbe>,
    pub mu_minus: Vec<LimitProbe>,
    pub h_route: Vec<LimitProbe>,
    pub route_disagreement: Option<String>,
}

impl OrderProbes {
    /// The gating probes in report order.
    pub fn gating(&self) -> Vec<(WhichLimit, &LimitProbe)> {
        let mut out = Vec::new();
        let w = |kind, direction| WhichLimit { kind, direction };
        if let Some(p) = &self.g_plus {
            out.push((w(LimitKind::G, Direction::PlusInfinity), p));
        }
        if let Some(p) = &self.g_minus {
            out.push((w(LimitKind::G, Direction::MinusInfinity), p));
        }
        for (i, p) in self.mu_plus.iter().enumerate() {
            out.push((w(LimitKind::Mu(i), Direction::PlusInfinity), p));
        }
        for (i, p) in self.mu_minus.iter().enumerate() {
            out.push((w(LimitKind::Mu(i), Direction::MinusInfinity), p));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Overall {
    CkExtensionHolds,
    FailsAt { n: usize, which: String },
    InconclusiveAt { n: usize, which: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessVerdict {
    pub requested_k: usize,
    pub transform: String,
    pub per_order: Vec<OrderProbes>,
    pub overall: Overall,
    pub notes: Vec<String>,
}

impl SmoothnessVerdict {
    pub fn holds(&self) -> bool {
        self.overall == Overall::CkExtensionHolds
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }

    fn assemble(requested_k: usize, transform: String, per_order: Vec<OrderProbes>, notes: Vec<String>) -> Self {
        let mut overall = Overall::CkExtensionHolds;
        'outer: for o in &per_order {
            for (which, p) in o.gating() {
                match p.verdict {
                    ProbeVerdict::Converged(_) => {}
                    ProbeVerdict::Diverged => {
                        overall = Overall::FailsAt {
                            n: o.n,
                            which: which.to_string(),
                        };
                        break 'outer;
                    }
                    ProbeVerdict::Inconclusive => {
                        overall = Overall::InconclusiveAt {
                            n: o.n,
                            which: which.to_string(),
                        };
                        break 'outer;
                    }
                }
            }
        }
        Self {
            requested_k,
            transform,
            per_order,
            overall,
            notes,
        }
    }
}

fn directions_for(spec: &SystemSpec, side: Side) -> Result<Vec<Direction>, CriteriaError> {
    let c = spec.class();
    let mut d = Vec::new();
    if c.has_future() && !matches!(side, Side::Left { .. }) {
        d.push(Direction::PlusInfinity);
    }
    if c.has_past() && !matches!(side, Side::Right { .. }) {
        d.push(Direction::MinusInfinity);
    }
    if d.is_empty() {
        return Err(CriteriaError::NoDirections);
    }
    Ok(d)
}

fn table(jet: &crate::jet::Jet) -> DerivativeTable {
    DerivativeTable::from_jet(jet)
}

fn split(dirs: &[Direction], probes: Vec<LimitProbe>) -> (Option<LimitProbe>, Option<LimitProbe>) {
    let mut plus = None;
    let mut minus = None;
    for (d, p) in dirs.iter().zip(probes) {
        match d {
            Direction::PlusInfinity => plus = Some(p),
            Direction::MinusInfinity => minus = Some(p),
        }
    }
    (plus, minus)
}

fn split_mu(probes: Vec<(Direction, LimitProbe)>) -> (Vec<LimitProbe>, Vec<LimitProbe>) {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (d, p) in probes {
        match d {
            Direction::PlusInfinity => plus.push(p),
            Direction::MinusInfinity => minus.push(p),
        }
    }
    (plus, minus)
}

fn disagreement(g: &[Option<&LimitProbe>], h: &[LimitProbe], tol: f64) -> Option<String> {
    let mut msgs = Vec::new();
    for (gp, hp) in g.iter().flatten().zip(h) {
        match (gp.value(), hp.value()) {
            (Some(a), Some(b)) if (a - b).abs() > tol.max(1e-6 * a.abs()) => {
                msgs.push(format!("{}: φ-route {a:.10} vs h-route {b:.10}", gp.direction))
            }
            (Some(_), None) => msgs.push(format!("{}: h-route {} while φ-route converged", gp.direction, hp.verdict)),
            (None, Some(_)) => msgs.push(format!("{}: φ-route {} while h-route converged", gp.direction, gp.verdict)),
            _ => {}
        }
    }
    if msgs.is_empty() {
        None
    } else {
        Some(msgs.join("; "))
    }
}

/// Probes the extension conditions for orders `1..=k` with `transform`.
///
/// `g^(n)` is probed through `det Q_{n,n}φ / det Q_n φ` and `μ̃^(n)` through
/// the `Q̃` ratios, in the directions the system's asymptotic class demands
/// and the transform's side covers.
/// The `h`-route value of `g^(n)` is probed as well and any disagreement is
/// reported without affecting the verdict.
pub fn check_ck(
    spec: &SystemSpec,
    transform: &TransformSpec,
    k: usize,
    opts: &ProbeOptions,
) -> Result<SmoothnessVerdict, CriteriaError> {
    if k == 0 {
        return Err(CriteriaError::ZeroK);
    }
    if k + 1 > transform.max_order() {
        return Err(CriteriaError::TransformOrder {
            need: k + 1,
            have: transform.max_order(),
        });
    }
    let dirs = directions_for(spec, transform.side())?;
    let opts = opts.starting_above(transform.tail_start());
    let d = spec.forcing_dim();

    let per_order: Vec<OrderProbes> = (1..=k)
        .into_par_iter()
        .map(|n| {
            let phi_table = |t: f64| -> Result<DerivativeTable, String> {
                transform.tail_jet(t, n + 1).map(|j| table(&j)).map_err(|e| e.to_string())
            };
            let g: Vec<LimitProbe> = dirs
                .par_iter()
                .map(|&dir| {
                    probe_limit(
                        |t| g_derivative_via_phi(&phi_table(t)?, n).map_err(|e| e.to_string()),
                        dir,
                        &opts,
                    )
                })
                .collect();
            let h_route: Vec<LimitProbe> = dirs
                .par_iter()
                .map(|&dir| {
                    probe_limit(
                        |t| {
                            let h = inverse_jets(&phi_table(t)?, n + 1).map_err(|e| e.to_string())?;
                            g_derivative_via_h(&h, n).map_err(|e| e.to_string())
                        },
                        dir,
                        &opts,
                    )
                })
                .collect();
            let jobs: Vec<(Direction, usize)> = dirs.iter().flat_map(|&dir| (0..d).map(move |i| (dir, i))).collect();
            let mu: Vec<(Direction, LimitProbe)> = jobs
                .par_iter()
                .map(|&(dir, i)| {
                    let p = probe_limit(
                        |t| {
                            let mj = spec.mu_jets(t, n).map_err(|e| e.to_string())?;
                            mu_tilde_derivative(&table(&mj[i]), &phi_table(t)?, n).map_err(|e| e.to_string())
                        },
                        dir,
                        &opts,
                    );
                    (dir, p)
                })
                .collect();
            let (g_plus, g_minus) = split(&dirs, g);
            let (mu_plus, mu_minus) = split_mu(mu);
            let route_disagreement = disagreement(&[g_plus.as_ref(), g_minus.as_ref()], &h_route, opts.tolerance);
            OrderProbes {
                n,
                g_plus,
                g_minus,
                mu_plus,
                mu_minus,
                h_route,
                route_disagreement,
            }
        })
        .collect();
    Ok(SmoothnessVerdict::assemble(k, transform.name(), per_order, Vec::new()))
}

/// Probes the `Φ_m` criterion: the limits of `μ̃^(n)` computed with the
/// inverse-derivative ratios of `Φ_m` itself.
///
/// The `g^(n)` limits hold for every spliced `Φ_m` transform and are not
/// probed. When the verdict holds, the spliced transform of order `k + 1`
/// that realizes the extension is returned with it.
pub fn check_simple_criterion(
    spec: &SystemSpec,
    m: usize,
    k: usize,
    opts: &ProbeOptions,
) -> Result<(SmoothnessVerdict, Option<TransformSpec>), CriteriaError> {
    if m == 0 || m > MAX_M {
        return Err(CriteriaError::InvalidM(m));
    }
    if k == 0 {
        return Err(CriteriaError::ZeroK);
    }
    let dirs = directions_for(spec, Side::TwoSided)?;
    let opts = opts.starting_above(domain_edge(m));
    let d = spec.forcing_dim();
    let per_order: Vec<OrderProbes> = (1..=k)
        .into_par_iter()
        .map(|n| {
            let jobs: Vec<(Direction, usize)> = dirs.iter().flat_map(|&dir| (0..d).map(move |i| (dir, i))).collect();
            let mu: Vec<(Direction, LimitProbe)> = jobs
                .par_iter()
                .map(|&(dir, i)| {
                    let p = probe_limit(
                        |t| {
                            let phi = raw_phi_m_jet(m, t, n).map_err(|e| e.to_string())?;
                            let mj = spec.mu_jets(t, n).map_err(|e| e.to_string())?;
                            mu_tilde_derivative(&table(&mj[i]), &table(&phi), n).map_err(|e| e.to_string())
                        },
                        dir,
                        &opts,
                    );
                    (dir, p)
                })
                .collect();
            let (mu_plus, mu_minus) = split_mu(mu);
            OrderProbes {
                n,
                g_plus: None,
                g_minus: None,
                mu_plus,
                mu_minus,
                h_route: Vec::new(),
                route_disagreement: None,
            }
        })
        .collect();
    let notes = vec![format!(
        "G-limits hold for the spliced Φ_{m} transform at every order and are not probed"
    )];
    let verdict = SmoothnessVerdict::assemble(k, format!("phi_m({m}) criterion"), per_order, notes);
    let realized = if verdict.holds() {
        Some(TransformSpec::phi_m(m, (k + 1).max(2))?)
    } else {
        None
    };
    Ok((verdict, realized))
}
