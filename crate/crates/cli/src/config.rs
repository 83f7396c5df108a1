//! The run configuration: a TOML document with nested blocks. Unknown keys
//! are rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use timecomp_core::faa_di_bruno::MAX_PARTITION_ORDER;
use timecomp_core::{parse, AsymptoticClass, Boundary, ProbeOptions, Side, SystemSpec, TransformSpec};

/// The configuration shipped with the binary.
pub const BUNDLED_VDP: &str = include_str!("../../../configs/vdp.cfg");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemBlock,
    #[serde(default)]
    pub transform: TransformBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default)]
    pub simulate: SimulateBlock,
    #[serde(default)]
    pub cycle: Option<CycleBlock>,
    #[serde(default)]
    pub verify: Option<VerifyBlock>,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub state_dim: Option<usize>,
    pub forcing_dim: Option<usize>,
    pub f: Vec<String>,
    #[serde(default)]
    pub mu: Vec<String>,
    pub mu_plus: Option<Vec<f64>>,
    pub mu_minus: Option<Vec<f64>>,
    pub class: AsymptoticClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKindName {
    Arctan,
    PhiM,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformBlock {
    pub kind: TransformKindName,
    pub m: Option<usize>,
    pub expr: Option<String>,
    pub t_plus: Option<f64>,
    pub t_minus: Option<f64>,
    pub max_order: Option<usize>,
}

impl Default for TransformBlock {
    fn default() -> Self {
        Self {
            kind: TransformKindName::Arctan,
            m: None,
            expr: None,
            t_plus: None,
            t_minus: None,
            max_order: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisBlock {
    pub k: usize,
    pub tolerance: f64,
    pub divergence_bound: f64,
    pub first_exponent: i32,
    pub last_exponent: i32,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        let p = ProbeOptions::default();
        Self {
            k: 2,
            tolerance: p.tolerance,
            divergence_bound: p.divergence_bound,
            first_exponent: p.first_exponent,
            last_exponent: p.last_exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateBlock {
    /// Rows `(x_1, …, x_N, s)`.
    pub initial: Vec<Vec<f64>>,
    pub span: f64,
    pub tol: f64,
    pub force: bool,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self {
            initial: Vec::new(),
            span: 20.0,
            tol: 1e-9,
            force: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideName {
    Plus,
    Minus,
}

impl From<SideName> for Boundary {
    fn from(s: SideName) -> Self {
        match s {
            SideName::Plus => Boundary::Plus,
            SideName::Minus => Boundary::Minus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleBlock {
    pub side: SideName,
    pub seed: Vec<f64>,
    pub normal: Option<Vec<f64>>,
    pub transient: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    /// Row `n - 1` holds `[G limit, μ_1 limit, …]` for order `n`.
    #[serde(default)]
    pub expected_limits: Vec<Vec<f64>>,
    #[serde(default = "default_limit_tolerance")]
    pub limit_tolerance: f64,
    #[serde(default = "default_distance_threshold")]
    pub distance_threshold: f64,
}

fn default_limit_tolerance() -> f64 {
    1e-4
}

fn default_distance_threshold() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec!["text".into(), "json".into(), "csv".into()],
        }
    }
}

impl FromStr for RunConfig {
    type Err = anyhow::Error;

    fn from_str(text: &str) -> Result<Self> {
        toml::from_str(text).context("malformed configuration")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn bundled() -> Self {
        Self::from_str(BUNDLED_VDP).expect("bundled configuration is valid")
    }

    pub fn max_order(&self) -> usize {
        self.transform.max_order.unwrap_or((self.analysis.k + 1).max(2))
    }

    pub fn probe_options(&self) -> ProbeOptions {
        ProbeOptions {
            tolerance: self.analysis.tolerance,
            divergence_bound: self.analysis.divergence_bound,
            first_exponent: self.analysis.first_exponent,
            last_exponent: self.analysis.last_exponent,
        }
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        let s = &self.system;
        if let Some(n) = s.state_dim {
            ensure!(n == s.f.len(), "system.state_dim = {n} but {} f expressions are given", s.f.len());
        }
        if let Some(d) = s.forcing_dim {
            ensure!(d == s.mu.len(), "system.forcing_dim = {d} but {} mu expressions are given", s.mu.len());
        }
        let parse_all = |srcs: &[String], what: &str| -> Result<Vec<_>> {
            srcs.iter()
                .enumerate()
                .map(|(i, src)| parse(src).with_context(|| format!("system.{what}[{i}] = {src:?}")))
                .collect()
        };
        let f = parse_all(&s.f, "f")?;
        let mu = parse_all(&s.mu, "mu")?;
        Ok(SystemSpec::new(f, mu, s.mu_plus.clone(), s.mu_minus.clone(), s.class)?)
    }

    pub fn transform_spec(&self) -> Result<TransformSpec> {
        let t = &self.transform;
        let order = self.max_order();
        let spec = match t.kind {
            TransformKindName::Arctan => TransformSpec::arctan(order),
            TransformKindName::PhiM => {
                let m = t.m.context("transform.m is required for kind = \"phi-m\"")?;
                TransformSpec::phi_m(m, order)?
            }
            TransformKindName::User => {
                let src = t.expr.as_deref().context("transform.expr is required for kind = \"user\"")?;
                let e = parse(src).with_context(|| format!("transform.expr = {src:?}"))?;
                TransformSpec::user(e, order)?
            }
        };
        let side = match (t.t_plus, t.t_minus) {
            (None, None) => Side::TwoSided,
            (Some(t_plus), None) => Side::Right { t_plus },
            (None, Some(t_minus)) => Side::Left { t_minus },
            (Some(_), Some(_)) => bail!("give at most one of transform.t_plus and transform.t_minus"),
        };
        Ok(spec.with_side(side))
    }

    /// Checks everything that can be checked without running an analysis.
    pub fn validate(&self) -> Result<()> {
        let k = self.analysis.k;
        ensure!(k >= 1, "analysis.k must be at least 1");
        let order = self.max_order();
        ensure!(
            k < order,
            "analysis.k = {k} needs jets of order {} but transform.max_order = {order}",
            k + 1
        );
        ensure!(
            order <= MAX_PARTITION_ORDER,
            "transform.max_order = {order} exceeds the supported jet order {MAX_PARTITION_ORDER}"
        );
        ensure!(self.analysis.tolerance > 0.0, "analysis.tolerance must be positive");
        ensure!(
            self.analysis.first_exponent + 2 <= self.analysis.last_exponent,
            "the probe grid needs at least three points"
        );
        let sys = self.system_spec()?;
        let tr = self.transform_spec()?;
        let n = sys.state_dim();
        let (lo, hi) = tr.s_interval()?;
        for (i, row) in self.simulate.initial.iter().enumerate() {
            ensure!(
                row.len() == n + 1,
                "simulate.initial[{i}] has {} entries, expected {} (x1..x{n}, s)",
                row.len(),
                n + 1
            );
            let s = row[n];
            ensure!(s >= lo && s <= hi, "simulate.initial[{i}]: s = {s} is outside [{lo}, {hi}]");
        }
        for f in &self.output.formats {
            ensure!(
                ["text", "json", "csv"].contains(&f.as_str()),
                "output.formats: unknown format {f:?} (expected text, json or csv)"
            );
        }
        ensure!(self.simulate.span > 0.0, "simulate.span must be positive");
        ensure!(self.simulate.tol > 0.0, "simulate.tol must be positive");
        if let Some(c) = &self.cycle {
            ensure!(c.seed.len() == n, "cycle.seed has {} entries, expected {n}", c.seed.len());
            if let Some(nv) = &c.normal {
                ensure!(nv.len() == n, "cycle.normal has {} entries, expected {n}", nv.len());
            }
        }
        Ok(())
    }
}
