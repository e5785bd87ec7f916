use calabi_core::dsl::{parse_immersion, print_expr, print_immersion, BinOp, Expr, Func};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        prop::sample::select(vec!["x", "y", "z"]).prop_map(Expr::var),
        (0.0f64..1e3).prop_map(Expr::num),
        (-5i32..5).prop_map(|k| Expr::num(k as f64 * 0.25)),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]))
                .prop_map(|(a, b, op)| Expr::binary(op, a, b)),
            (inner.clone(), 0u8..4).prop_map(|(a, e)| Expr::pow(a, e as f64 * 0.5 + 1.0)),
            inner.clone().prop_map(Expr::neg),
            (inner, prop::sample::select(Func::ALL.to_vec())).prop_map(|(a, f)| Expr::call(f, a)),
        ]
    })
}

proptest! {
    #[test]
    fn print_parse_is_identity(a in expr(), b in expr()) {
        let src = format!("immersion p {{ vars: x, y, z; components: ({}, {}); }}", print_expr(&a), print_expr(&b));
        let def = parse_immersion(&src).unwrap();
        prop_assert_eq!(&def.components()[0], &a);
        prop_assert_eq!(&def.components()[1], &b);
        let again = parse_immersion(&print_immersion(&def)).unwrap();
        prop_assert_eq!(again, def);
    }
}

#[test]
fn product_files_keep_provenance() {
    let def = calabi_core::calabi::calabi_pair(
        &parse_immersion("immersion h2 { vars: s; components: (0.7071067811865476*exp(s), 0.7071067811865476*exp(-s)); }").unwrap(),
        &parse_immersion("immersion g2 { vars: s; components: (0.7071067811865476*exp(s), 0.7071067811865476*exp(-s)); }").unwrap(),
    )
    .unwrap();
    let back = parse_immersion(&print_immersion(&def)).unwrap();
    assert_eq!(back, def);
    assert!(back.provenance().is_some());
}
