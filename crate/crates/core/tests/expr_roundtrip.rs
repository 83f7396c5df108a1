use proptest::prelude::*;
use timecomp_core::expr::{eval_jet, eval_real, BinOp, Bindings, Func, Var};
use timecomp_core::{parse, Expr};

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.0f64..1e3).prop_map(Expr::Const),
        prop_oneof![Just(1e-7), Just(2.5e20), Just(0.0), Just(3.0)].prop_map(Expr::Const),
        (0usize..3).prop_map(|i| Expr::Var(Var::State(i))),
        (0usize..2).prop_map(|i| Expr::Var(Var::Forcing(i))),
        Just(Expr::Var(Var::Time)),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 2, |inner| {
        let ops = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow)
        ];
        prop_oneof![
            inner.clone().prop_map(Expr::neg),
            (prop::sample::select(Func::ALL.to_vec()), inner.clone()).prop_map(|(f, e)| Expr::unary(f, e)),
            (ops, inner.clone(), inner).prop_map(|(op, a, b)| Expr::binary(op, a, b)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn display_parses_back_to_the_same_tree(e in expr()) {
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &e, "{}", text);
    }
}

/// Smooth expressions in `t` only, kept away from singular arguments.
fn smooth_in_t() -> impl Strategy<Value = Expr> {
    let t = Expr::Var(Var::Time);
    prop_oneof![Just(t), (0.1f64..2.0).prop_map(Expr::Const)].prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::unary(Func::Sin, e)),
            inner.clone().prop_map(|e| Expr::unary(Func::Atan, e)),
            inner.clone().prop_map(|e| Expr::unary(Func::Exp, Expr::binary(BinOp::Mul, Expr::Const(0.1), e))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinOp::Add, a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::binary(BinOp::Mul, a, b)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn jet_derivatives_match_central_differences(e in smooth_in_t(), t in -1.5f64..1.5) {
        let jet = eval_jet(&e, Var::Time, &Bindings::default(), t, 2).unwrap();
        let f = |x: f64| eval_real(&e, &Bindings::time(x)).unwrap();
        prop_assert!((jet.value() - f(t)).abs() <= 1e-12 * (1.0 + f(t).abs()));
        let h = 1e-4;
        let d1 = (f(t + h) - f(t - h)) / (2.0 * h);
        let d1_jet = jet.derivative(1).unwrap();
        prop_assert!((d1_jet - d1).abs() <= 1e-5 * (1.0 + d1.abs()), "{} vs {}", d1_jet, d1);
    }
}
