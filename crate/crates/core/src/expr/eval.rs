use crate::jet::{Elementary, Jet, JetError};

use super::{BinOp, Expr, ExprError, Func, Var};

/// Values for the free variables of an expression.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings<'a> {
    pub x: &'a [f64],
    pub mu: &'a [f64],
    pub t: Option<f64>,
    pub s: Option<f64>,
}

impl<'a> Bindings<'a> {
    pub fn state(x: &'a [f64], mu: &'a [f64]) -> Self {
        Self {
            x,
            mu,
            ..Default::default()
        }
    }

    pub fn time(t: f64) -> Self {
        Self {
            t: Some(t),
            ..Default::default()
        }
    }

    pub fn get(&self, v: Var) -> Result<f64, ExprError> {
        let found = match v {
            Var::State(i) => self.x.get(i).copied(),
            Var::Forcing(i) => self.mu.get(i).copied(),
            Var::Time => self.t,
            Var::S => self.s,
        };
        found.ok_or_else(|| ExprError::Unbound(v.to_string()))
    }
}

fn finite(v: f64, what: &'static str) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::NonFinite(what))
    }
}

/// Same multiplication order as [`Jet::powi`] so the two agree bit for bit.
fn powi_real(x: f64, exponent: i32) -> f64 {
    let mut result = 1.0;
    let mut square = x;
    let mut e = exponent.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            result *= square;
        }
        e >>= 1;
        if e > 0 {
            square *= square;
        }
    }
    if exponent < 0 {
        1.0 / result
    } else {
        result
    }
}

fn integer_exponent(p: f64) -> Option<i32> {
    if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        Some(p as i32)
    } else {
        None
    }
}

fn apply_real(func: Func, a: f64) -> Result<f64, ExprError> {
    let domain = |value| ExprError::Domain {
        func: func.name(),
        value,
    };
    let v = match func {
        Func::Exp => a.exp(),
        Func::Ln => {
            if a <= 0.0 {
                return Err(domain(a));
            }
            a.ln()
        }
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Tan => {
            if a.cos().abs() < 1e-15 {
                return Err(domain(a));
            }
            a.tan()
        }
        Func::Atan => a.atan(),
        Func::Sqrt => {
            if a < 0.0 {
                return Err(domain(a));
            }
            a.sqrt()
        }
        Func::Abs => a.abs(),
        Func::Sgn => {
            if a > 0.0 {
                1.0
            } else if a < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    };
    finite(v, func.name())
}

fn eval_with(e: &Expr, env: &dyn Fn(Var) -> Result<f64, ExprError>) -> Result<f64, ExprError> {
    match e {
        Expr::Const(v) => Ok(*v),
        Expr::Var(v) => env(*v),
        Expr::Neg(a) => Ok(-eval_with(a, env)?),
        Expr::Unary(f, a) => apply_real(*f, eval_with(a, env)?),
        Expr::Binary(op, a, b) => {
            let x = eval_with(a, env)?;
            let y = eval_with(b, env)?;
            match op {
                BinOp::Add => finite(x + y, "addition"),
                BinOp::Sub => finite(x - y, "subtraction"),
                BinOp::Mul => finite(x * y, "multiplication"),
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(ExprError::DivisionByZero);
                    }
                    finite(x / y, "division")
                }
                BinOp::Pow => {
                    if let Some(n) = integer_exponent(y) {
                        if x == 0.0 && n < 0 {
                            return Err(ExprError::DivisionByZero);
                        }
                        finite(powi_real(x, n), "power")
                    } else if x > 0.0 {
                        finite(x.powf(y), "power")
                    } else {
                        Err(ExprError::Domain {
                            func: "power",
                            value: x,
                        })
                    }
                }
            }
        }
    }
}

/// Evaluates `e` over plain reals; non-finite intermediate values are errors.
pub fn eval_real(e: &Expr, bindings: &Bindings) -> Result<f64, ExprError> {
    eval_with(e, &|v| bindings.get(v))
}

fn jet_err(err: JetError) -> ExprError {
    match err {
        JetError::Domain { func, value } => ExprError::Domain { func, value },
        JetError::SingularDivision => ExprError::DivisionByZero,
        other => ExprError::Jet(other),
    }
}

fn is_constant(j: &Jet) -> bool {
    j.coeffs()[1..].iter().all(|c| *c == 0.0)
}

fn with_value(j: &Jet, value: f64) -> Result<Jet, ExprError> {
    let mut c = j.coeffs().to_vec();
    c[0] = value;
    Jet::from_coeffs(*j.base_point(), c).map_err(jet_err)
}

struct JetCtx<'a> {
    active: Var,
    bindings: &'a Bindings<'a>,
    base: f64,
    order: usize,
}

impl JetCtx<'_> {
    fn eval(&self, e: &Expr) -> Result<Jet, ExprError> {
        let j = match e {
            Expr::Const(v) => Jet::constant(self.base, *v, self.order).map_err(jet_err)?,
            Expr::Var(v) if *v == self.active => Jet::variable(self.base, self.order).map_err(jet_err)?,
            Expr::Var(v) => Jet::constant(self.base, self.bindings.get(*v)?, self.order).map_err(jet_err)?,
            Expr::Neg(a) => self.eval(a)?.neg(),
            Expr::Unary(f, a) => self.unary(*f, &self.eval(a)?)?,
            Expr::Binary(op, a, b) => {
                let x = self.eval(a)?;
                let y = self.eval(b)?;
                match op {
                    BinOp::Add => x.add(&y).map_err(jet_err)?,
                    BinOp::Sub => x.sub(&y).map_err(jet_err)?,
                    BinOp::Mul => x.mul(&y).map_err(jet_err)?,
                    BinOp::Div => x.div(&y).map_err(jet_err)?,
                    BinOp::Pow => self.power(&x, &y)?,
                }
            }
        };
        if j.coeffs().iter().all(|c| c.is_finite()) {
            Ok(j)
        } else {
            Err(ExprError::NonFinite("jet evaluation"))
        }
    }

    fn unary(&self, f: Func, a: &Jet) -> Result<Jet, ExprError> {
        let elementary = match f {
            Func::Exp => Elementary::Exp,
            Func::Ln => Elementary::Ln,
            Func::Sin => Elementary::Sin,
            Func::Cos => Elementary::Cos,
            Func::Tan => Elementary::Tan,
            Func::Atan => Elementary::Atan,
            Func::Sqrt => Elementary::Sqrt,
            Func::Abs | Func::Sgn => {
                let a0 = *a.value();
                if a0 == 0.0 && !is_constant(a) {
                    return Err(ExprError::NonSmooth {
                        func: f.name(),
                        var: self.active.to_string(),
                        at: self.base,
                    });
                }
                return if f == Func::Abs {
                    Ok(if a0 < 0.0 { a.neg() } else { a.clone() })
                } else {
                    Jet::constant(self.base, apply_real(f, a0)?, self.order).map_err(jet_err)
                };
            }
        };
        if f == Func::Sqrt && *a.value() == 0.0 && is_constant(a) {
            return Jet::constant(self.base, 0.0, self.order).map_err(jet_err);
        }
        a.lift(elementary).map_err(jet_err)
    }

    fn power(&self, x: &Jet, y: &Jet) -> Result<Jet, ExprError> {
        let x0 = *x.value();
        let y0 = *y.value();
        if is_constant(y) {
            if let Some(n) = integer_exponent(y0) {
                if x0 == 0.0 && n < 0 {
                    return Err(ExprError::DivisionByZero);
                }
                return x.powi(n).map_err(jet_err);
            }
            if x0 <= 0.0 {
                if x0 == 0.0 && is_constant(x) && y0 > 0.0 {
                    return Jet::constant(self.base, 0.0, self.order).map_err(jet_err);
                }
                return Err(ExprError::Domain {
                    func: "power",
                    value: x0,
                });
            }
            return x.lift(Elementary::Power(y0)).map_err(jet_err);
        }
        if x0 <= 0.0 {
            return Err(ExprError::Domain {
                func: "power",
                value: x0,
            });
        }
        let j = y
            .mul(&x.lift(Elementary::Ln).map_err(jet_err)?)
            .map_err(jet_err)?
            .lift(Elementary::Exp)
            .map_err(jet_err)?;
        with_value(&j, x0.powf(y0))
    }
}

/// Jet of `e` as a function of `active` at `base`; other variables come from
/// `bindings` and are held fixed.
pub fn eval_jet(e: &Expr, active: Var, bindings: &Bindings, base: f64, order: usize) -> Result<Jet, ExprError> {
    if order == 0 {
        return Err(ExprError::Jet(JetError::ZeroOrder));
    }
    JetCtx {
        active,
        bindings,
        base,
        order,
    }
    .eval(e)
}

/// Locations in `[lo, hi]` where the argument of an `abs` or `sgn` vanishes
/// as `var` varies, located by scanning `samples` points and bisecting.
pub fn find_kinks(e: &Expr, var: Var, bindings: &Bindings, lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    let mut args = Vec::new();
    collect_kink_args(e, &mut args);
    let at = |arg: &Expr, v: f64| {
        eval_with(arg, &|w| if w == var { Ok(v) } else { bindings.get(w) }).ok()
    };
    let samples = samples.max(2);
    let mut out: Vec<f64> = Vec::new();
    for arg in args {
        if !arg.depends_on(var) {
            continue;
        }
        let grid: Vec<f64> = (0..samples)
            .map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64)
            .collect();
        let vals: Vec<Option<f64>> = grid.iter().map(|&v| at(arg, v)).collect();
        for i in 0..samples {
            if vals[i] == Some(0.0) {
                out.push(grid[i]);
                continue;
            }
            if i + 1 == samples {
                break;
            }
            let (Some(fa), Some(fb)) = (vals[i], vals[i + 1]) else {
                continue;
            };
            if fa * fb < 0.0 {
                let (mut a, mut b, mut fa) = (grid[i], grid[i + 1], fa);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    match at(arg, m) {
                        Some(0.0) => {
                            a = m;
                            b = m;
                            break;
                        }
                        Some(fm) if fm * fa < 0.0 => b = m,
                        Some(fm) => {
                            a = m;
                            fa = fm;
                        }
                        None => break,
                    }
                }
                out.push(0.5 * (a + b));
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    out
}

fn collect_kink_args<'e>(e: &'e Expr, out: &mut Vec<&'e Expr>) {
    match e {
        Expr::Const(_) | Expr::Var(_) => {}
        Expr::Neg(a) => collect_kink_args(a, out),
        Expr::Unary(f, a) => {
            if f.is_non_smooth() {
                out.push(a);
            }
            collect_kink_args(a, out);
        }
        Expr::Binary(_, a, b) => {
            collect_kink_args(a, out);
            collect_kink_args(b, out);
        }
    }
}
