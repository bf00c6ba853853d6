//! Symbolic arithmetic over chart coordinates.
//!
//! Metric components are written as expressions in the coordinate names of a
//! chart. This module parses them into an immutable [`Expr`] tree, evaluates
//! them in double precision and differentiates them exactly, so that the
//! analytic backend can supply metric derivatives up to third order.

mod diff;
mod parse;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use parse::{parse, ParseError};

/// Unary operators and elementary functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Exp,
    Ln,
    Sqrt,
}

impl UnaryOp {
    /// Function name as accepted by the parser (`None` for negation).
    pub fn name(self) -> Option<&'static str> {
        Some(match self {
            UnaryOp::Neg => return None,
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Sinh => "sinh",
            UnaryOp::Cosh => "cosh",
            UnaryOp::Exp => "exp",
            UnaryOp::Ln => "ln",
            UnaryOp::Sqrt => "sqrt",
        })
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tan" => UnaryOp::Tan,
            "sinh" => UnaryOp::Sinh,
            "cosh" => UnaryOp::Cosh,
            "exp" => UnaryOp::Exp,
            "ln" => UnaryOp::Ln,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> Option<f64> {
        let v = match self {
            UnaryOp::Neg => -x,
            UnaryOp::Sin => x.sin(),
            UnaryOp::Cos => x.cos(),
            UnaryOp::Tan => x.tan(),
            UnaryOp::Sinh => x.sinh(),
            UnaryOp::Cosh => x.cosh(),
            UnaryOp::Exp => x.exp(),
            UnaryOp::Ln if x <= 0.0 => return None,
            UnaryOp::Ln => x.ln(),
            UnaryOp::Sqrt if x < 0.0 => return None,
            UnaryOp::Sqrt => x.sqrt(),
        };
        v.is_finite().then_some(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }

    fn apply(self, a: f64, b: f64) -> Option<f64> {
        let v = match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div if b == 0.0 => return None,
            BinaryOp::Div => a / b,
            BinaryOp::Pow => return pow(a, b),
        };
        v.is_finite().then_some(v)
    }
}

fn pow(base: f64, exponent: f64) -> Option<f64> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return None;
    }
    if base == 0.0 && exponent < 0.0 {
        return None;
    }
    let v = if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    };
    v.is_finite().then_some(v)
}

/// Expression tree. Subtrees are reference counted so that derivative trees
/// share structure with their parents; cloning is cheap.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Coordinate by position in the chart's coordinate list.
    Var(usize),
    Unary(UnaryOp, Arc<Expr>),
    Binary(BinaryOp, Arc<Expr>, Arc<Expr>),
}

/// Evaluation failure, naming the subterm whose value left the real domain.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("domain error in `{subterm}`: {reason}")]
    Domain { subterm: String, reason: &'static str },
    #[error("variable index {index} out of range for a point of dimension {dim}")]
    Dimension { index: usize, dim: usize },
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const(value)
    }

    pub fn var(index: usize) -> Self {
        Expr::Var(index)
    }

    /// Build a unary node without simplification.
    pub fn raw_unary(op: UnaryOp, arg: Expr) -> Self {
        Expr::Unary(op, Arc::new(arg))
    }

    /// Build a binary node without simplification.
    pub fn raw_binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Arc::new(lhs), Arc::new(rhs))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_const(&self, value: f64) -> bool {
        self.as_const() == Some(value)
    }

    // Simplifying constructors. Only local rules are applied: identities with
    // 0 and 1, double negation, and folding of constant subtrees whose value
    // is finite and in-domain.

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x + y),
            (Some(0.0), _) => b,
            (_, Some(0.0)) => a,
            _ => match b {
                Expr::Unary(UnaryOp::Neg, inner) => Expr::Binary(BinaryOp::Sub, Arc::new(a), inner),
                b => Expr::raw_binary(BinaryOp::Add, a, b),
            },
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x - y),
            (_, Some(0.0)) => a,
            (Some(0.0), _) => Expr::neg(b),
            _ => Expr::raw_binary(BinaryOp::Sub, a, b),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::Const(x * y),
            (Some(0.0), _) => Expr::Const(0.0),
            (_, Some(0.0)) => Expr::Const(0.0),
            (Some(1.0), _) => b,
            (_, Some(1.0)) => a,
            (Some(-1.0), _) => Expr::neg(b),
            (_, Some(-1.0)) => Expr::neg(a),
            _ => Expr::raw_binary(BinaryOp::Mul, a, b),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
            (Some(0.0), _) => Expr::Const(0.0),
            (_, Some(1.0)) => a,
            _ => Expr::raw_binary(BinaryOp::Div, a, b),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (_, Some(0.0)) => Expr::Const(1.0),
            (_, Some(1.0)) => a,
            (Some(x), Some(y)) => match pow(x, y) {
                Some(v) => Expr::Const(v),
                None => Expr::raw_binary(BinaryOp::Pow, a, b),
            },
            _ => Expr::raw_binary(BinaryOp::Pow, a, b),
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(x) => Expr::Const(-x),
            Expr::Unary(UnaryOp::Neg, inner) => Arc::unwrap_or_clone(inner),
            a => Expr::raw_unary(UnaryOp::Neg, a),
        }
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        if op == UnaryOp::Neg {
            return Expr::neg(a);
        }
        if let Some(v) = a.as_const().and_then(|x| op.apply(x)) {
            return Expr::Const(v);
        }
        Expr::raw_unary(op, a)
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Unary(_, a) => a.max_var(),
            Expr::Binary(_, a, b) => a.max_var().max(b.max_var()),
        }
    }

    /// Number of nodes in the tree (shared subtrees counted per use).
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, a) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Evaluate at `point`. Values outside the real domain of ln, sqrt,
    /// division and fractional powers are reported, as are overflows.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(i) => point.get(*i).copied().ok_or(EvalError::Dimension {
                index: *i,
                dim: point.len(),
            }),
            Expr::Unary(op, a) => {
                let x = a.eval(point)?;
                op.apply(x).ok_or_else(|| {
                    self.domain_error(match op {
                        UnaryOp::Ln => "logarithm of a non-positive value",
                        UnaryOp::Sqrt => "square root of a negative value",
                        _ => "non-finite result",
                    })
                })
            }
            Expr::Binary(op, a, b) => {
                let x = a.eval(point)?;
                let y = b.eval(point)?;
                op.apply(x, y).ok_or_else(|| {
                    self.domain_error(match op {
                        BinaryOp::Div if y == 0.0 => "division by zero",
                        BinaryOp::Pow if x < 0.0 && y.fract() != 0.0 => "fractional power of a negative value",
                        BinaryOp::Pow if x == 0.0 && y < 0.0 => "negative power of zero",
                        _ => "non-finite result",
                    })
                })
            }
        }
    }

    fn domain_error(&self, reason: &'static str) -> EvalError {
        EvalError::Domain {
            subterm: self.to_string(),
            reason,
        }
    }

    /// Render with the given coordinate names. `Display` uses `x1, x2, ...`.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> Printer<'a> {
        Printer {
            expr: self,
            names: Some(names),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 3,
            Expr::Const(_) | Expr::Var(_) => 5,
            Expr::Unary(UnaryOp::Neg, _) => 3,
            Expr::Unary(..) => 5,
            Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
            Expr::Binary(BinaryOp::Pow, ..) => 4,
        }
    }
}

/// Display adapter produced by [`Expr::display_with`].
pub struct Printer<'a> {
    expr: &'a Expr,
    names: Option<&'a [String]>,
}

impl Printer<'_> {
    fn child(&self, e: &Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = Printer {
            expr: e,
            names: self.names,
        };
        if e.precedence() < min_prec {
            write!(f, "({p})")
        } else {
            write!(f, "{p}")
        }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            // `{:?}` is the shortest representation that reparses to the same bits.
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => match self.names.and_then(|n| n.get(*i)) {
                Some(name) => f.write_str(name),
                None => write!(f, "x{}", i + 1),
            },
            Expr::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                self.child(a, 4, f)
            }
            Expr::Unary(op, a) => {
                let p = Printer {
                    expr: a,
                    names: self.names,
                };
                write!(f, "{}({p})", op.name().unwrap_or_default())
            }
            Expr::Binary(op, a, b) => {
                // Right operands of non-associative levels are bracketed so
                // that reparsing reproduces the same tree.
                let (lp, rp) = match op {
                    BinaryOp::Add | BinaryOp::Sub => (1, 2),
                    BinaryOp::Mul | BinaryOp::Div => (2, 3),
                    BinaryOp::Pow => (5, 3),
                };
                self.child(a, lp, f)?;
                write!(f, " {} ", op.symbol())?;
                self.child(b, rp, f)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Printer {
            expr: self,
            names: None,
        }
        .fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords2() -> Vec<String> {
        vec!["x1".into(), "x2".into()]
    }

    #[test]
    fn evaluates_simple_polynomial() {
        let e = parse("x1^2 + sin(x2)", &coords2()).unwrap();
        assert_eq!(e.eval(&[3.0, 0.0]).unwrap(), 9.0);
    }

    #[test]
    fn exp_of_zero_is_one() {
        let e = parse("exp(0)", &coords2()).unwrap();
        assert_eq!(e.eval(&[0.7, -2.0]).unwrap(), 1.0);
    }

    #[test]
    fn ln_of_negative_is_domain_error() {
        let e = parse("1 + ln(x1)", &coords2()).unwrap();
        match e.eval(&[-1.0, 0.0]) {
            Err(EvalError::Domain { subterm, .. }) => assert_eq!(subterm, "ln(x1)"),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn division_by_zero_and_sqrt_are_reported() {
        let e = parse("x2 / x1", &coords2()).unwrap();
        assert!(matches!(e.eval(&[0.0, 1.0]), Err(EvalError::Domain { .. })));
        let e = parse("sqrt(x1 - 1)", &coords2()).unwrap();
        assert!(matches!(e.eval(&[0.5, 1.0]), Err(EvalError::Domain { .. })));
        assert_eq!(e.eval(&[5.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn negative_base_integer_power_is_fine() {
        let e = parse("x1^3", &coords2()).unwrap();
        assert_eq!(e.eval(&[-2.0, 0.0]).unwrap(), -8.0);
        let e = parse("x1^0.5", &coords2()).unwrap();
        assert!(e.eval(&[-2.0, 0.0]).is_err());
    }

    #[test]
    fn simplifying_constructors() {
        let x = Expr::var(0);
        assert_eq!(Expr::mul(Expr::constant(0.0), x.clone()), Expr::Const(0.0));
        assert_eq!(Expr::mul(Expr::constant(1.0), x.clone()), x);
        assert_eq!(Expr::add(x.clone(), Expr::constant(0.0)), x);
        assert_eq!(Expr::add(Expr::constant(2.0), Expr::constant(3.0)), Expr::Const(5.0));
        assert_eq!(Expr::neg(Expr::neg(x.clone())), x);
        assert_eq!(Expr::pow(x.clone(), Expr::constant(1.0)), x);
        // ln(-1) must stay unevaluated so the error surfaces at evaluation.
        assert!(matches!(
            Expr::unary(UnaryOp::Ln, Expr::constant(-1.0)),
            Expr::Unary(..)
        ));
    }

    #[test]
    fn printing_uses_coordinate_names() {
        let names = vec!["r".to_string(), "theta".to_string()];
        let e = parse("r^2 * sin(theta)^2", &names).unwrap();
        assert_eq!(e.display_with(&names).to_string(), "r ^ 2.0 * sin(theta) ^ 2.0");
        assert_eq!(e.to_string(), "x1 ^ 2.0 * sin(x2) ^ 2.0");
    }

    #[test]
    fn printing_brackets_where_needed() {
        let c = coords2();
        for src in [
            "x1 - (x2 - 1)",
            "(-x1)^2",
            "-(x1 * x2)",
            "x1 / (x2 * 3)",
            "2^-x1",
            "(x1^x2)^2",
        ] {
            let e = parse(src, &c).unwrap();
            let back = parse(&e.display_with(&c).to_string(), &c).unwrap();
            assert_eq!(e, back, "round trip of {src}");
        }
    }
}
