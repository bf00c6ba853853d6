use geomap::expr::{parse, BinaryOp, Expr, UnaryOp};
use proptest::prelude::*;

const N: usize = 3;

fn names() -> Vec<String> {
    (1..=N).map(|i| format!("x{i}")).collect()
}

/// Random expressions over three coordinates. Logarithms, square roots and
/// quotients are guarded with `1 + e²` so most samples are in domain.
fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-2.0f64..2.0).prop_map(|c| Expr::constant((c * 100.0).round() / 100.0)),
        (0..N).prop_map(Expr::var),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let guarded = |e: Expr| {
            Expr::raw_binary(
                BinaryOp::Add,
                Expr::constant(1.0),
                Expr::raw_binary(BinaryOp::Pow, e, Expr::constant(2.0)),
            )
        };
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::raw_binary(BinaryOp::Add, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::raw_binary(BinaryOp::Sub, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::raw_binary(BinaryOp::Mul, a, b)),
            (inner.clone(), inner.clone()).prop_map(move |(a, b)| Expr::raw_binary(BinaryOp::Div, a, guarded(b))),
            (inner.clone(), 1u8..4).prop_map(|(a, k)| Expr::raw_binary(BinaryOp::Pow, a, Expr::constant(k as f64))),
            inner.clone().prop_map(|a| Expr::raw_unary(UnaryOp::Neg, a)),
            inner.clone().prop_map(|a| Expr::raw_unary(UnaryOp::Sin, a)),
            inner.clone().prop_map(|a| Expr::raw_unary(UnaryOp::Cos, a)),
            inner
                .clone()
                .prop_map(|a| Expr::raw_unary(UnaryOp::Tan, Expr::raw_unary(UnaryOp::Sin, a))),
            inner
                .clone()
                .prop_map(|a| Expr::raw_unary(UnaryOp::Sinh, Expr::raw_unary(UnaryOp::Cos, a))),
            inner
                .clone()
                .prop_map(|a| Expr::raw_unary(UnaryOp::Cosh, Expr::raw_unary(UnaryOp::Sin, a))),
            inner
                .clone()
                .prop_map(|a| Expr::raw_unary(UnaryOp::Exp, Expr::raw_unary(UnaryOp::Cos, a))),
            inner
                .clone()
                .prop_map(move |a| Expr::raw_unary(UnaryOp::Ln, guarded(a))),
            inner.prop_map(move |a| Expr::raw_unary(UnaryOp::Sqrt, guarded(a))),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, N)
}

fn finite(e: &Expr, p: &[f64]) -> Option<f64> {
    e.eval(p).ok().filter(|v| v.is_finite() && v.abs() < 1e6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn derivative_matches_central_difference(e in expr(), p in point(), var in 0..N) {
        let h = 1e-6;
        let (mut pp, mut pm) = (p.clone(), p.clone());
        pp[var] += h;
        pm[var] -= h;
        let (Some(f), Some(fp), Some(fm)) = (finite(&e, &p), finite(&e, &pp), finite(&e, &pm)) else {
            return Err(TestCaseError::reject("out of domain"));
        };
        let d = e.differentiate(var).eval(&p).unwrap();
        let fd = (fp - fm) / (2.0 * h);
        prop_assert!((d - fd).abs() <= 1e-5 * d.abs().max(f.abs()).max(1.0), "{e}: {d} vs {fd}");
    }

    #[test]
    fn differentiation_is_linear(e1 in expr(), e2 in expr(), a in -3.0f64..3.0, p in point(), var in 0..N) {
        let combo = Expr::add(Expr::mul(Expr::constant(a), e1.clone()), e2.clone());
        let (Some(_), Some(_)) = (finite(&e1, &p), finite(&e2, &p)) else {
            return Err(TestCaseError::reject("out of domain"));
        };
        let lhs = combo.differentiate(var).eval(&p).unwrap();
        let rhs = a * e1.differentiate(var).eval(&p).unwrap() + e2.differentiate(var).eval(&p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn print_parse_round_trip(e in expr(), p in point()) {
        let names = names();
        let text = e.display_with(&names).to_string();
        let back = parse(&text, &names).unwrap();
        match (e.eval(&p), back.eval(&p)) {
            (Ok(x), Ok(y)) if x.is_finite() => prop_assert!((x - y).abs() <= 1e-15 * x.abs().max(1.0), "{text}: {x} vs {y}"),
            (Ok(x), Ok(y)) => prop_assert!(x.is_nan() && y.is_nan() || x == y),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{text}: {x:?} vs {y:?}"),
        }
    }
}

#[test]
fn third_order_derivatives() {
    let names = names();
    let e = parse("x1^2 * sin(x2) / (1 + x3^2)", &names).unwrap();
    let d = e.differentiate_many(&[0, 1, 1]);
    let p = [0.3, -0.7, 0.4];
    // ∂1 ∂2 ∂2 = −2 x1 sin(x2) / (1 + x3²)
    let want = -2.0 * 0.3 * (-0.7f64).sin() / 1.16;
    assert!((d.eval(&p).unwrap() - want).abs() < 1e-14);
}
