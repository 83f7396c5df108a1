//! The vector-field expression language.
//!
//! Expressions are flat formulas over the state `x1..xN`, the forcing
//! `mu1..mud`, time `t` and the compactified time `s`. See
//! `docs/expression-grammar.md` for the grammar.

use std::fmt;

use thiserror::Error;

use crate::jet::JetError;

mod eval;
mod parser;
mod system;

pub use eval::{eval_jet, eval_real, find_kinks, Bindings};
pub use parser::parse;
pub use system::{AsymptoticClass, SystemSpec};

/// A 1-based line and column in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("{pos}: unexpected character {ch:?}")]
    Lex { pos: Position, ch: char },
    #[error("{pos}: found {found}, expected one of: {}", expected.join(", "))]
    Syntax {
        pos: Position,
        found: String,
        expected: Vec<&'static str>,
    },
    #[error("{pos}: unknown identifier `{name}`")]
    UnknownIdentifier { pos: Position, name: String },
    #[error("{pos}: numeric literal `{text}` is not a finite number")]
    BadNumber { pos: Position, text: String },
    #[error("variable `{0}` is not bound")]
    Unbound(String),
    #[error("variable `{name}` is not allowed in {context}")]
    Disallowed { name: String, context: String },
    #[error("{func} is not defined at {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("{0} produced a non-finite value")]
    NonFinite(&'static str),
    #[error("{func} is not differentiable where its argument vanishes (at {var} = {at})")]
    NonSmooth {
        func: &'static str,
        var: String,
        at: f64,
    },
    #[error("invalid system: {0}")]
    System(String),
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// A variable reference. Indices are zero-based (`x1` is `State(0)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    State(usize),
    Forcing(usize),
    Time,
    S,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::State(i) => write!(f, "x{}", i + 1),
            Var::Forcing(i) => write!(f, "mu{}", i + 1),
            Var::Time => f.write_str("t"),
            Var::S => f.write_str("s"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Atan,
    Sqrt,
    Abs,
    Sgn,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Exp,
        Func::Ln,
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Atan,
        Func::Sqrt,
        Func::Abs,
        Func::Sgn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Atan => "atan",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sgn => "sgn",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Whether the function has a kink or jump where its argument is zero.
    pub fn is_non_smooth(self) -> bool {
        matches!(self, Func::Abs | Func::Sgn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Unary(Func, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn var(v: Var) -> Self {
        Expr::Var(v)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: Expr) -> Self {
        Expr::Neg(Box::new(e))
    }

    pub fn unary(f: Func, e: Expr) -> Self {
        Expr::Unary(f, Box::new(e))
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    /// Every variable referenced, in first-occurrence order.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
        });
        out
    }

    pub fn depends_on(&self, var: Var) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                found |= *v == var;
            }
        });
        found
    }

    /// Whether `abs` or `sgn` occurs anywhere in the tree.
    pub fn has_non_smooth(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if let Expr::Unary(f, _) = e {
                found |= f.is_non_smooth();
            }
        });
        found
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    fn visit<F: FnMut(&Expr)>(&self, f: &mut F) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Unary(_, a) => a.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }
}

/// Fully parenthesized rendering that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Unary(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}
