//! Exact partial differentiation of expression trees.

use super::{BinaryOp, Expr, UnaryOp};

impl Expr {
    /// Partial derivative with respect to coordinate `var`. The result is in
    /// the same grammar and is simplified with local rules only.
    pub fn differentiate(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Unary(op, a) => {
                let u = (**a).clone();
                let du = a.differentiate(var);
                if du.is_const(0.0) {
                    return Expr::Const(0.0);
                }
                let outer = match op {
                    UnaryOp::Neg => return Expr::neg(du),
                    UnaryOp::Sin => Expr::unary(UnaryOp::Cos, u),
                    UnaryOp::Cos => Expr::neg(Expr::unary(UnaryOp::Sin, u)),
                    UnaryOp::Tan => {
                        let c = Expr::unary(UnaryOp::Cos, u);
                        return Expr::div(du, Expr::pow(c, Expr::Const(2.0)));
                    }
                    UnaryOp::Sinh => Expr::unary(UnaryOp::Cosh, u),
                    UnaryOp::Cosh => Expr::unary(UnaryOp::Sinh, u),
                    UnaryOp::Exp => self.clone(),
                    UnaryOp::Ln => return Expr::div(du, u),
                    UnaryOp::Sqrt => {
                        return Expr::div(du, Expr::mul(Expr::Const(2.0), self.clone()));
                    }
                };
                Expr::mul(outer, du)
            }
            Expr::Binary(op, a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                let (u, v) = ((**a).clone(), (**b).clone());
                match op {
                    BinaryOp::Add => Expr::add(da, db),
                    BinaryOp::Sub => Expr::sub(da, db),
                    BinaryOp::Mul => Expr::add(Expr::mul(da, v), Expr::mul(u, db)),
                    BinaryOp::Div => {
                        if db.is_const(0.0) {
                            return Expr::div(da, v);
                        }
                        let num = Expr::sub(Expr::mul(da, v.clone()), Expr::mul(u, db));
                        Expr::div(num, Expr::pow(v, Expr::Const(2.0)))
                    }
                    BinaryOp::Pow => self.differentiate_pow(u, v, da, db),
                }
            }
        }
    }

    fn differentiate_pow(&self, u: Expr, v: Expr, du: Expr, dv: Expr) -> Expr {
        match v.as_const() {
            // Power rule keeps negative bases valid for integer exponents.
            Some(k) if k.fract() == 0.0 => {
                let lowered = Expr::pow(u, Expr::Const(k - 1.0));
                Expr::mul(Expr::mul(Expr::Const(k), lowered), du)
            }
            // u^v = exp(v ln u): d(u^v) = u^v (v' ln u + v u'/u). With a
            // constant exponent the logarithm term vanishes structurally.
            _ => {
                let log_term = if dv.is_const(0.0) {
                    Expr::Const(0.0)
                } else {
                    Expr::mul(dv, Expr::unary(UnaryOp::Ln, u.clone()))
                };
                let ratio_term = Expr::mul(v, Expr::div(du, u));
                Expr::mul(self.clone(), Expr::add(log_term, ratio_term))
            }
        }
    }

    /// Mixed partial derivative along each index of `vars` in turn.
    pub fn differentiate_many(&self, vars: &[usize]) -> Expr {
        vars.iter().fold(self.clone(), |e, &v| e.differentiate(v))
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    use super::*;

    fn c2() -> Vec<String> {
        vec!["x1".into(), "x2".into()]
    }

    fn central(e: &Expr, at: &[f64], var: usize, h: f64) -> f64 {
        let mut p = at.to_vec();
        p[var] = at[var] + h;
        let fp = e.eval(&p).unwrap();
        p[var] = at[var] - h;
        let fm = e.eval(&p).unwrap();
        (fp - fm) / (2.0 * h)
    }

    #[test]
    fn power_rule() {
        let e = parse("x1^2", &c2()).unwrap();
        let d = e.differentiate(0);
        assert_eq!(d, Expr::raw_binary(BinaryOp::Mul, Expr::Const(2.0), Expr::Var(0)));
        assert_eq!(e.differentiate(1), Expr::Const(0.0));
    }

    #[test]
    fn reciprocal_derivative_matches_central_difference() {
        let e = parse("1/(1+x1^2)", &c2()).unwrap();
        let at = [1.0, 0.0];
        let fd = central(&e, &at, 0, 1e-6);
        assert!((fd + 0.5).abs() < 1e-9, "oracle {fd}");
        let exact = e.differentiate(0).eval(&at).unwrap();
        assert!((exact - fd).abs() < 1e-9);
        assert!((exact + 0.5).abs() < 1e-15);
    }

    #[test]
    fn elementary_functions() {
        let c = c2();
        let at = [0.4, 1.3];
        for src in [
            "sin(x1*x2)",
            "cos(x1)^3",
            "tan(x1 + x2/4)",
            "sinh(x1) * cosh(x2)",
            "exp(-x1^2) / x2",
            "ln(1 + x1^2 + x2)",
            "sqrt(x2 - x1)",
            "x2^x1",
            "x2^0.7",
            "(x1 - x2)^-2",
        ] {
            let e = parse(src, &c).unwrap();
            for var in 0..2 {
                let exact = e.differentiate(var).eval(&at).unwrap();
                let fd = central(&e, &at, var, 1e-6);
                assert!(
                    (exact - fd).abs() <= 1e-6 * (1.0 + fd.abs()),
                    "{src} d/dx{var}: {exact} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn integer_power_of_negative_base_differentiates() {
        let e = parse("(x1 - 2)^3", &c2()).unwrap();
        let d = e.differentiate(0).eval(&[0.0, 0.0]).unwrap();
        assert_eq!(d, 12.0);
    }

    #[test]
    fn constant_fractional_exponent_has_no_log() {
        let e = parse("x1^0.5", &c2()).unwrap();
        let d = e.differentiate(0);
        fn has_ln(e: &Expr) -> bool {
            match e {
                Expr::Unary(UnaryOp::Ln, _) => true,
                Expr::Unary(_, a) => has_ln(a),
                Expr::Binary(_, a, b) => has_ln(a) || has_ln(b),
                _ => false,
            }
        }
        assert!(!has_ln(&d));
        assert!((d.eval(&[4.0, 0.0]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn third_order_mixed() {
        let e = parse("x1^3 * x2^2 + sin(x1) * x2", &c2()).unwrap();
        let d = e.differentiate_many(&[0, 0, 1]);
        let at = [0.3f64, -0.8];
        let want = 12.0 * at[0] * at[1] - at[0].sin();
        assert!((d.eval(&at).unwrap() - want).abs() < 1e-14);
        let other_order = e.differentiate_many(&[1, 0, 0]);
        assert!((other_order.eval(&at).unwrap() - want).abs() < 1e-14);
    }
}
