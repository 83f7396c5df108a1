//! Truncated Taylor jets.
//!
//! A [`Jet`] stores the Taylor-normalized coefficients `c[k] = f^(k)(t0) / k!`
//! of a scalar function at a base point. Arithmetic is generic over
//! [`Scalar`] so that the same code runs on `f64` and on exact rationals;
//! elementary-function lifting is `f64` only.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};
use thiserror::Error;

/// Default maximum jet order used by the criteria engine.
pub const DEFAULT_MAX_ORDER: usize = 12;

/// Numeric field the generic jet and Faa di Bruno routines run over.
pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive {}

impl<T> Scalar for T where
    T: Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive
{
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet order must be at least 1")]
    ZeroOrder,
    #[error("jet orders differ ({0} vs {1})")]
    OrderMismatch(usize, usize),
    #[error("jet base points differ")]
    BaseMismatch,
    #[error("division by a jet with zero value")]
    SingularDivision,
    #[error("derivative index {index} exceeds jet order {order}")]
    Index { index: usize, order: usize },
    #[error("{func} is not defined at {value}")]
    Domain { func: &'static str, value: f64 },
}

/// Elementary functions that can be lifted onto `f64` jets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementary {
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Atan,
    Sqrt,
    Power(f64),
    Reciprocal,
}

impl Elementary {
    pub fn name(&self) -> &'static str {
        match self {
            Elementary::Exp => "exp",
            Elementary::Ln => "ln",
            Elementary::Sin => "sin",
            Elementary::Cos => "cos",
            Elementary::Tan => "tan",
            Elementary::Atan => "atan",
            Elementary::Sqrt => "sqrt",
            Elementary::Power(_) => "power",
            Elementary::Reciprocal => "reciprocal",
        }
    }
}

/// Arithmetic operation tags for [`jet_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Truncated Taylor expansion of order `K` at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T = f64> {
    base: T,
    coeffs: Vec<T>,
}

fn factorial<T: Scalar>(n: usize) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::from_usize(k).expect("factorial fits"))
}

impl<T: Scalar> Jet<T> {
    /// Builds a jet from Taylor-normalized coefficients; `coeffs.len() - 1` is the order.
    pub fn from_coeffs(base: T, coeffs: Vec<T>) -> Result<Self, JetError> {
        if coeffs.len() < 2 {
            return Err(JetError::ZeroOrder);
        }
        Ok(Self { base, coeffs })
    }

    /// Builds a jet from raw derivatives `f, f', f'', ...`.
    pub fn from_derivatives(base: T, derivs: &[T]) -> Result<Self, JetError> {
        let coeffs = derivs
            .iter()
            .enumerate()
            .map(|(k, d)| d.clone() / factorial::<T>(k))
            .collect();
        Self::from_coeffs(base, coeffs)
    }

    pub fn constant(base: T, value: T, order: usize) -> Result<Self, JetError> {
        if order == 0 {
            return Err(JetError::ZeroOrder);
        }
        let mut coeffs = vec![T::zero(); order + 1];
        coeffs[0] = value;
        Ok(Self { base, coeffs })
    }

    /// The identity function `t -> t` expanded at `base`.
    pub fn variable(base: T, order: usize) -> Result<Self, JetError> {
        let mut jet = Self::constant(base.clone(), base, order)?;
        jet.coeffs[1] = T::one();
        Ok(jet)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn base_point(&self) -> &T {
        &self.base
    }

    pub fn value(&self) -> &T {
        &self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Raw derivative `f^(i)(base) = coeffs[i] * i!`.
    pub fn derivative(&self, i: usize) -> Result<T, JetError> {
        if i > self.order() {
            return Err(JetError::Index {
                index: i,
                order: self.order(),
            });
        }
        Ok(self.coeffs[i].clone() * factorial::<T>(i))
    }

    /// All raw derivatives `f, f', ..., f^(K)`.
    pub fn derivatives(&self) -> Vec<T> {
        (0..=self.order())
            .map(|i| self.coeffs[i].clone() * factorial::<T>(i))
            .collect()
    }

    /// Same function re-expressed with fewer coefficients.
    pub fn truncate(&self, order: usize) -> Result<Self, JetError> {
        if order == 0 {
            return Err(JetError::ZeroOrder);
        }
        let keep = (order + 1).min(self.coeffs.len());
        Ok(Self {
            base: self.base.clone(),
            coeffs: self.coeffs[..keep].to_vec(),
        })
    }

    fn check_compatible(&self, other: &Self) -> Result<(), JetError> {
        if self.order() != other.order() {
            return Err(JetError::OrderMismatch(self.order(), other.order()));
        }
        if self.base != other.base {
            return Err(JetError::BaseMismatch);
        }
        Ok(())
    }

    fn with_coeffs(&self, coeffs: Vec<T>) -> Self {
        Self {
            base: self.base.clone(),
            coeffs,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, JetError> {
        self.check_compatible(other)?;
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, JetError> {
        self.check_compatible(other)?;
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        ))
    }

    pub fn mul(&self, other: &Self) -> Result<Self, JetError> {
        self.check_compatible(other)?;
        let n = self.coeffs.len();
        let mut out = vec![T::zero(); n];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for j in 0..=k {
                acc = acc + self.coeffs[j].clone() * other.coeffs[k - j].clone();
            }
            *slot = acc;
        }
        Ok(self.with_coeffs(out))
    }

    pub fn div(&self, other: &Self) -> Result<Self, JetError> {
        self.check_compatible(other)?;
        let b0 = other.coeffs[0].clone();
        if b0.is_zero() {
            return Err(JetError::SingularDivision);
        }
        let n = self.coeffs.len();
        let mut out: Vec<T> = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc = self.coeffs[k].clone();
            for j in 1..=k {
                acc = acc - other.coeffs[j].clone() * out[k - j].clone();
            }
            out.push(acc / b0.clone());
        }
        Ok(self.with_coeffs(out))
    }

    pub fn neg(&self) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|c| -c.clone()).collect())
    }

    pub fn scale(&self, factor: &T) -> Self {
        self.with_coeffs(
            self.coeffs
                .iter()
                .map(|c| c.clone() * factor.clone())
                .collect(),
        )
    }

    pub fn add_scalar(&self, value: &T) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = out.coeffs[0].clone() + value.clone();
        out
    }

    /// Integer power by repeated multiplication; negative exponents divide.
    pub fn powi(&self, exponent: i32) -> Result<Self, JetError> {
        let one = Self::constant(self.base.clone(), T::one(), self.order())?;
        let mut result = one.clone();
        let mut square = self.clone();
        let mut e = exponent.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&square)?;
            }
            e >>= 1;
            if e > 0 {
                square = square.mul(&square)?;
            }
        }
        if exponent < 0 {
            one.div(&result)
        } else {
            Ok(result)
        }
    }

    /// Jet of `outer(inner(t))` where `outer` is expanded at `inner`'s value.
    ///
    /// The base point of `outer` is not checked against `inner.value()`; the
    /// caller is responsible for expanding it there.
    pub fn compose(outer: &Self, inner: &Self) -> Result<Self, JetError> {
        if outer.order() != inner.order() {
            return Err(JetError::OrderMismatch(outer.order(), inner.order()));
        }
        let mut shifted = inner.clone();
        shifted.coeffs[0] = T::zero();
        let k = outer.order();
        let mut acc = Self::constant(inner.base.clone(), outer.coeffs[k].clone(), k)?;
        for c in outer.coeffs[..k].iter().rev() {
            acc = acc.mul(&shifted)?.add_scalar(c);
        }
        Ok(acc)
    }
}

/// Binary jet arithmetic dispatched on an operation tag.
pub fn jet_arith<T: Scalar>(op: ArithOp, a: &Jet<T>, b: &Jet<T>) -> Result<Jet<T>, JetError> {
    match op {
        ArithOp::Add => a.add(b),
        ArithOp::Sub => a.sub(b),
        ArithOp::Mul => a.mul(b),
        ArithOp::Div => a.div(b),
    }
}

/// Raw derivative of a jet; see [`Jet::derivative`].
pub fn derivative<T: Scalar>(jet: &Jet<T>, i: usize) -> Result<T, JetError> {
    jet.derivative(i)
}

impl Jet<f64> {
    /// Lifts an elementary function through the jet (`func ∘ self`).
    pub fn lift(&self, func: Elementary) -> Result<Self, JetError> {
        let a = &self.coeffs;
        let n = a.len();
        let a0 = a[0];
        let domain = |value: f64| JetError::Domain {
            func: func.name(),
            value,
        };
        let mut b = vec![0.0; n];
        match func {
            Elementary::Exp => {
                b[0] = a0.exp();
                for k in 1..n {
                    let s: f64 = (1..=k).map(|j| j as f64 * a[j] * b[k - j]).sum();
                    b[k] = s / k as f64;
                }
            }
            Elementary::Ln => {
                if a0 <= 0.0 || !a0.is_finite() {
                    return Err(domain(a0));
                }
                b[0] = a0.ln();
                for k in 1..n {
                    let s: f64 = (1..k).map(|j| j as f64 * b[j] * a[k - j]).sum();
                    b[k] = (a[k] - s / k as f64) / a0;
                }
            }
            Elementary::Sin | Elementary::Cos => {
                let (s, c) = sin_cos_series(a);
                b = if func == Elementary::Sin { s } else { c };
            }
            Elementary::Tan => {
                if a0.cos().abs() < 1e-15 {
                    return Err(domain(a0));
                }
                // tan' = (1 + tan^2) a'
                let mut w = vec![0.0; n];
                b[0] = a0.tan();
                w[0] = 1.0 + b[0] * b[0];
                for k in 1..n {
                    let s: f64 = (1..=k).map(|j| j as f64 * a[j] * w[k - j]).sum();
                    b[k] = s / k as f64;
                    w[k] = (0..=k).map(|i| b[i] * b[k - i]).sum();
                }
            }
            Elementary::Atan => {
                // (1 + a^2) b' = a'
                let mut w = vec![0.0; n];
                for m in 0..n {
                    w[m] = (0..=m).map(|i| a[i] * a[m - i]).sum();
                }
                w[0] += 1.0;
                b[0] = a0.atan();
                for k in 1..n {
                    let s: f64 = (1..k).map(|j| w[j] * (k - j) as f64 * b[k - j]).sum();
                    b[k] = (k as f64 * a[k] - s) / (k as f64 * w[0]);
                }
            }
            Elementary::Sqrt | Elementary::Power(_) => {
                if a0 <= 0.0 {
                    return Err(domain(a0));
                }
                let r = match func {
                    Elementary::Power(r) => r,
                    _ => 0.5,
                };
                b[0] = if func == Elementary::Sqrt {
                    a0.sqrt()
                } else {
                    a0.powf(r)
                };
                for k in 1..n {
                    let s: f64 = (1..=k)
                        .map(|j| (r * j as f64 - (k - j) as f64) * a[j] * b[k - j])
                        .sum();
                    b[k] = s / (k as f64 * a0);
                }
            }
            Elementary::Reciprocal => {
                if a0 == 0.0 {
                    return Err(domain(a0));
                }
                b[0] = 1.0 / a0;
                for k in 1..n {
                    let s: f64 = (1..=k).map(|j| a[j] * b[k - j]).sum();
                    b[k] = -s / a0;
                }
            }
        }
        Ok(self.with_coeffs(b))
    }
}

fn sin_cos_series(a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut s = vec![0.0; n];
    let mut c = vec![0.0; n];
    s[0] = a[0].sin();
    c[0] = a[0].cos();
    for k in 1..n {
        let mut ss = 0.0;
        let mut cc = 0.0;
        for j in 1..=k {
            ss += j as f64 * a[j] * c[k - j];
            cc += j as f64 * a[j] * s[k - j];
        }
        s[k] = ss / k as f64;
        c[k] = -cc / k as f64;
    }
    (s, c)
}

/// Lifts `func` over `input`; see [`Jet::lift`].
pub fn jet_lift_elementary(func: Elementary, input: &Jet<f64>) -> Result<Jet<f64>, JetError> {
    input.lift(func)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn atan_at_one() {
        let t = Jet::variable(1.0, 2).unwrap();
        let j = t.lift(Elementary::Atan).unwrap();
        assert_relative_eq!(*j.value(), PI / 4.0, epsilon = 1e-15);
        assert_relative_eq!(j.derivative(1).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(j.derivative(2).unwrap(), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn exp_of_zero_constant() {
        let z = Jet::constant(0.0, 0.0, 4).unwrap();
        let e = z.lift(Elementary::Exp).unwrap();
        assert_eq!(e.coeffs(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        let t = Jet::variable(0.0, 4).unwrap();
        let e = t.lift(Elementary::Exp).unwrap();
        for (k, c) in e.coeffs().iter().enumerate() {
            assert_relative_eq!(*c, 1.0 / factorial::<f64>(k), epsilon = 1e-15);
        }
    }

    #[test]
    fn cos_squared_at_zero() {
        let s = Jet::variable(0.0, 1).unwrap();
        let c = s.lift(Elementary::Cos).unwrap();
        let c2 = c.mul(&c).unwrap();
        assert_eq!(*c2.value(), 1.0);
        assert_eq!(c2.derivative(1).unwrap(), 0.0);
    }

    #[test]
    fn arithmetic_examples() {
        let t = Jet::variable(2.0, 2).unwrap();
        assert_eq!(t.mul(&t).unwrap().coeffs(), &[4.0, 4.0, 1.0]);
        let t1 = Jet::variable(2.0, 1).unwrap();
        let one = Jet::constant(2.0, 1.0, 1).unwrap();
        let inv = one.div(&t1).unwrap();
        assert_eq!(*inv.value(), 0.5);
        assert_eq!(inv.derivative(1).unwrap(), -0.25);
        let a = Jet::from_coeffs(2.0, vec![1.5, -2.0, 3.0]).unwrap();
        let zero = a.add(&a.neg()).unwrap();
        assert!(zero.coeffs().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn cube_third_derivative() {
        let t = Jet::variable(1.0, 3).unwrap();
        let cube = t.powi(3).unwrap();
        assert_eq!(cube.derivative(3).unwrap(), 6.0);
    }

    #[test]
    fn arctan_transform_derivatives() {
        let scale = 2.0 / PI;
        let phi = |t: f64| {
            Jet::variable(t, 2)
                .unwrap()
                .lift(Elementary::Atan)
                .unwrap()
                .scale(&scale)
        };
        assert_relative_eq!(phi(0.0).derivative(1).unwrap(), 2.0 / PI, epsilon = 1e-15);
        assert_relative_eq!(phi(1.0).derivative(2).unwrap(), -1.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn atan_first_derivative_grid() {
        for t in [-10.0, -1.0, 0.0, 1.0, 10.0] {
            let j = Jet::variable(t, 3).unwrap().lift(Elementary::Atan).unwrap();
            assert_relative_eq!(
                j.derivative(1).unwrap(),
                1.0 / (1.0 + t * t),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn errors() {
        let a = Jet::variable(1.0, 2).unwrap();
        let b = Jet::variable(2.0, 2).unwrap();
        let c = Jet::variable(1.0, 3).unwrap();
        assert_eq!(a.add(&b), Err(JetError::BaseMismatch));
        assert_eq!(a.mul(&c), Err(JetError::OrderMismatch(2, 3)));
        let zero = Jet::constant(1.0, 0.0, 2).unwrap();
        assert_eq!(a.div(&zero), Err(JetError::SingularDivision));
        assert!(matches!(
            zero.lift(Elementary::Ln),
            Err(JetError::Domain { func: "ln", .. })
        ));
        let pole = Jet::constant(0.0, PI / 2.0, 2).unwrap();
        assert!(matches!(
            pole.lift(Elementary::Tan),
            Err(JetError::Domain { func: "tan", .. })
        ));
        assert_eq!(Jet::constant(0.0, 1.0, 0), Err(JetError::ZeroOrder));
        assert!(matches!(a.derivative(3), Err(JetError::Index { .. })));
    }

    #[test]
    fn tan_and_power_match_closed_forms() {
        let x = 0.3;
        let t = Jet::variable(x, 3).unwrap();
        let tan = t.lift(Elementary::Tan).unwrap();
        let sec2 = 1.0 / (x.cos() * x.cos());
        assert_relative_eq!(tan.derivative(1).unwrap(), sec2, max_relative = 1e-13);
        assert_relative_eq!(
            tan.derivative(2).unwrap(),
            2.0 * sec2 * x.tan(),
            max_relative = 1e-13
        );
        let p = Jet::variable(2.0, 3).unwrap().lift(Elementary::Power(1.5)).unwrap();
        assert_relative_eq!(p.derivative(3).unwrap(), 1.5 * 0.5 * -0.5 * 2f64.powf(-1.5), max_relative = 1e-13);
        let r = Jet::variable(2.0, 2).unwrap().lift(Elementary::Reciprocal).unwrap();
        assert_relative_eq!(r.derivative(2).unwrap(), 2.0 / 8.0, max_relative = 1e-15);
    }
}
