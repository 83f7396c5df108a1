use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::jet::Jet;

use super::{eval_jet, eval_real, parse, Bindings, Expr, ExprError, Var};

/// Which ends of the time axis the forcing is assumed to settle at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoticClass {
    TwoSided,
    Right,
    Left,
}

impl AsymptoticClass {
    pub fn has_future(self) -> bool {
        matches!(self, AsymptoticClass::TwoSided | AsymptoticClass::Right)
    }

    pub fn has_past(self) -> bool {
        matches!(self, AsymptoticClass::TwoSided | AsymptoticClass::Left)
    }
}

/// The nonautonomous system `x' = f(x, mu(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    state_dim: usize,
    forcing_dim: usize,
    f: Vec<Expr>,
    mu: Vec<Expr>,
    mu_plus: Option<Vec<f64>>,
    mu_minus: Option<Vec<f64>>,
    class: AsymptoticClass,
}

fn check_vars(e: &Expr, allowed: &dyn Fn(Var) -> bool, context: &str) -> Result<(), ExprError> {
    match e.variables().into_iter().find(|v| !allowed(*v)) {
        Some(v) => Err(ExprError::Disallowed {
            name: v.to_string(),
            context: context.to_string(),
        }),
        None => Ok(()),
    }
}

impl SystemSpec {
    /// Validates dimensions, variable usage, and declared limits.
    ///
    /// Declaring no limits at all is accepted; they are then probed from `mu`.
    pub fn new(
        f: Vec<Expr>,
        mu: Vec<Expr>,
        mu_plus: Option<Vec<f64>>,
        mu_minus: Option<Vec<f64>>,
        class: AsymptoticClass,
    ) -> Result<Self, ExprError> {
        let n = f.len();
        let d = mu.len();
        if n == 0 {
            return Err(ExprError::System("the state dimension must be at least 1".into()));
        }
        for (i, e) in f.iter().enumerate() {
            check_vars(
                e,
                &|v| matches!(v, Var::State(j) if j < n) || matches!(v, Var::Forcing(j) if j < d),
                &format!("f{} (state x1..x{n} and forcing mu1..mu{d} only)", i + 1),
            )?;
        }
        for (i, e) in mu.iter().enumerate() {
            check_vars(e, &|v| v == Var::Time, &format!("mu{} (only t may appear)", i + 1))?;
        }
        for (name, lim) in [("mu_plus", &mu_plus), ("mu_minus", &mu_minus)] {
            if let Some(l) = lim {
                if l.len() != d {
                    return Err(ExprError::System(format!(
                        "{name} has {} entries but the forcing dimension is {d}",
                        l.len()
                    )));
                }
                if l.iter().any(|v| !v.is_finite()) {
                    return Err(ExprError::System(format!("{name} must be finite")));
                }
            }
        }
        if mu_plus.is_some() || mu_minus.is_some() {
            let consistent = match class {
                AsymptoticClass::TwoSided => mu_plus.is_some() && mu_minus.is_some(),
                AsymptoticClass::Right => mu_plus.is_some() && mu_minus.is_none(),
                AsymptoticClass::Left => mu_minus.is_some() && mu_plus.is_none(),
            };
            if !consistent {
                return Err(ExprError::System(format!(
                    "declared limits do not match the {class:?} asymptotic class"
                )));
            }
        }
        Ok(Self {
            state_dim: n,
            forcing_dim: d,
            f,
            mu,
            mu_plus,
            mu_minus,
            class,
        })
    }

    /// Parses and validates component sources.
    pub fn from_sources(
        f: &[&str],
        mu: &[&str],
        mu_plus: Option<Vec<f64>>,
        mu_minus: Option<Vec<f64>>,
        class: AsymptoticClass,
    ) -> Result<Self, ExprError> {
        let f = f.iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?;
        let mu = mu.iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?;
        Self::new(f, mu, mu_plus, mu_minus, class)
    }

    /// `u' = v, v' = mu^2 (1 - u^2) v - u` forced by `mu = (2/pi) atan t`.
    pub fn van_der_pol() -> Self {
        Self::from_sources(
            &["x2", "mu1^2*(1-x1^2)*x2 - x1"],
            &["(2/pi)*atan(t)"],
            Some(vec![1.0]),
            Some(vec![-1.0]),
            AsymptoticClass::TwoSided,
        )
        .expect("built-in system is valid")
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn forcing_dim(&self) -> usize {
        self.forcing_dim
    }

    pub fn f(&self) -> &[Expr] {
        &self.f
    }

    pub fn mu(&self) -> &[Expr] {
        &self.mu
    }

    pub fn mu_plus(&self) -> Option<&[f64]> {
        self.mu_plus.as_deref()
    }

    pub fn mu_minus(&self) -> Option<&[f64]> {
        self.mu_minus.as_deref()
    }

    pub fn class(&self) -> AsymptoticClass {
        self.class
    }

    pub fn eval_f(&self, x: &[f64], mu: &[f64], out: &mut [f64]) -> Result<(), ExprError> {
        let b = Bindings::state(x, mu);
        for (o, e) in out.iter_mut().zip(&self.f) {
            *o = eval_real(e, &b)?;
        }
        Ok(())
    }

    pub fn eval_mu(&self, t: f64) -> Result<Vec<f64>, ExprError> {
        let b = Bindings::time(t);
        self.mu.iter().map(|e| eval_real(e, &b)).collect()
    }

    /// Jets of every forcing component in `t`.
    pub fn mu_jets(&self, t: f64, order: usize) -> Result<Vec<Jet>, ExprError> {
        let b = Bindings::default();
        self.mu.iter().map(|e| eval_jet(e, Var::Time, &b, t, order)).collect()
    }

    /// `df/dx` at `(x, mu)`.
    pub fn jacobian_x(&self, x: &[f64], mu: &[f64]) -> Result<DMatrix<f64>, ExprError> {
        let b = Bindings::state(x, mu);
        let mut m = DMatrix::zeros(self.state_dim, self.state_dim);
        for (i, e) in self.f.iter().enumerate() {
            for j in e.variables() {
                if let Var::State(j) = j {
                    m[(i, j)] = eval_jet(e, Var::State(j), &b, x[j], 1)?.coeffs()[1];
                }
            }
        }
        Ok(m)
    }

    /// `df/dmu` at `(x, mu)`.
    pub fn jacobian_mu(&self, x: &[f64], mu: &[f64]) -> Result<DMatrix<f64>, ExprError> {
        let b = Bindings::state(x, mu);
        let mut m = DMatrix::zeros(self.state_dim, self.forcing_dim);
        for (i, e) in self.f.iter().enumerate() {
            for j in e.variables() {
                if let Var::Forcing(j) = j {
                    m[(i, j)] = eval_jet(e, Var::Forcing(j), &b, mu[j], 1)?.coeffs()[1];
                }
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn van_der_pol_shape() {
        let sys = SystemSpec::van_der_pol();
        assert_eq!((sys.state_dim(), sys.forcing_dim()), (2, 1));
        let mut out = [0.0; 2];
        sys.eval_f(&[0.0, 1.0], &[1.0], &mut out).unwrap();
        assert_eq!(out, [1.0, 1.0]);
        let j = sys.jacobian_x(&[0.0, 0.0], &[1.0]).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 1.0]));
    }

    #[test]
    fn validation() {
        let bad_var = SystemSpec::from_sources(&["x3"], &[], None, None, AsymptoticClass::TwoSided);
        assert!(matches!(bad_var, Err(ExprError::Disallowed { .. })));
        let t_in_f = SystemSpec::from_sources(&["t*x1"], &[], None, None, AsymptoticClass::Right);
        assert!(matches!(t_in_f, Err(ExprError::Disallowed { .. })));
        let x_in_mu = SystemSpec::from_sources(&["mu1"], &["x1"], None, None, AsymptoticClass::Right);
        assert!(matches!(x_in_mu, Err(ExprError::Disallowed { .. })));
        let missing = SystemSpec::from_sources(
            &["mu1"],
            &["atan(t)"],
            Some(vec![1.0]),
            None,
            AsymptoticClass::TwoSided,
        );
        assert!(matches!(missing, Err(ExprError::System(_))));
        let wrong_len = SystemSpec::from_sources(
            &["mu1"],
            &["atan(t)"],
            Some(vec![1.0, 2.0]),
            None,
            AsymptoticClass::Right,
        );
        assert!(matches!(wrong_len, Err(ExprError::System(_))));
        let unforced = SystemSpec::from_sources(&["-x1"], &[], None, None, AsymptoticClass::TwoSided);
        assert!(unforced.is_ok());
    }
}
