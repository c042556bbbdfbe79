use affine_abstraction::funcspec::{Expr, Func, FunctionSpec};
use proptest::prelude::*;

const VARS: [&str; 3] = ["x", "y", "z"];

/// Expressions that are finite and smooth on [-1, 1]^3.
fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-3.0f64..3.0).prop_map(|c| Expr::Const((c * 8.0).round() / 8.0)),
        (0usize..3).prop_map(Expr::Var),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), 0i32..4).prop_map(|(a, k)| Expr::Pow(Box::new(a), k)),
            inner
                .clone()
                .prop_map(|a| Expr::Call(Func::Sin, Box::new(a))),
            inner
                .clone()
                .prop_map(|a| Expr::Call(Func::Cos, Box::new(a))),
            // exp(sin(.)) keeps values bounded whatever the argument.
            inner.prop_map(|a| Expr::Call(Func::Exp, Box::new(Expr::Call(Func::Sin, Box::new(a))))),
        ]
    })
}

fn spec_of(e: Expr) -> FunctionSpec {
    FunctionSpec::new(VARS.iter().map(|s| s.to_string()).collect(), 1, vec![e]).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn print_then_parse_is_identity(e in arb_expr(), p in prop::collection::vec(-1.0f64..1.0, 3)) {
        let spec = spec_of(e);
        // The parser folds `-c` into a constant, so the printed form settles
        // after one parse.
        let again = FunctionSpec::parse(&spec.to_string(), &VARS, 1).unwrap();
        let text = again.to_string();
        prop_assert_eq!(FunctionSpec::parse(&text, &VARS, 1).unwrap().to_string(), text);
        let (a, b) = (spec.evaluate(&p).unwrap()[0], again.evaluate(&p).unwrap()[0]);
        prop_assert!(a == b || (a.is_nan() && b.is_nan()), "{} vs {}", a, b);
    }

    #[test]
    fn derivative_matches_central_difference(e in arb_expr(), p in prop::collection::vec(-0.9f64..0.9, 3), axis in 0usize..3) {
        let spec = spec_of(e);
        let d = spec.differentiate(axis);
        let h = 1e-5;
        let mut plus = p.clone();
        let mut minus = p.clone();
        plus[axis] += h;
        minus[axis] -= h;
        let fd = (spec.evaluate(&plus).unwrap()[0] - spec.evaluate(&minus).unwrap()[0]) / (2.0 * h);
        let exact = d.evaluate(&p).unwrap()[0];
        prop_assume!(exact.is_finite() && exact.abs() < 1e6);
        prop_assert!(close(exact, fd, 1e-4), "d/d{}: exact {} fd {} for {}", VARS[axis], exact, fd, spec);
    }
}

#[test]
fn division_and_logs_differentiate() {
    let spec =
        FunctionSpec::parse("log(x) / (1 + y^2) + sqrt(x) * tan(y)", &["x", "y"], 1).unwrap();
    let p = [1.3, 0.4];
    for axis in 0..2 {
        let h = 1e-6;
        let mut a = p;
        let mut b = p;
        a[axis] += h;
        b[axis] -= h;
        let fd = (spec.evaluate(&a).unwrap()[0] - spec.evaluate(&b).unwrap()[0]) / (2.0 * h);
        let exact = spec.differentiate(axis).evaluate(&p).unwrap()[0];
        assert!(close(exact, fd, 1e-6), "{exact} vs {fd}");
    }
}
