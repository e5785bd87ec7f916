use super::{BinOp, Expr, ImmersionDef, ProductKind};

/// Shortest representation that parses back to the same `f64`.
pub fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        "0".to_string()
    } else if !(1e-6..1e21).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn write_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Var(name) => out.push_str(name),
        Expr::Const(c) => out.push_str(&format_number(*c)),
        Expr::Neg(a) => {
            out.push_str("(-");
            write_expr(a, out);
            out.push(')');
        }
        Expr::Binary(op, a, b) => {
            out.push('(');
            write_binary_body(*op, a, b, out);
            out.push(')');
        }
        Expr::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            match &**a {
                Expr::Binary(op, l, r) => write_binary_body(*op, l, r, out),
                other => write_expr(other, out),
            }
            out.push(')');
        }
    }
}

fn write_binary_body(op: BinOp, a: &Expr, b: &Expr, out: &mut String) {
    write_expr(a, out);
    out.push(op.symbol());
    write_expr(b, out);
}

/// Canonical, fully parenthesized form of an expression.
pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(e, &mut out);
    out
}

/// Canonical text of one immersion, including its product directive.
pub fn print_immersion(def: &ImmersionDef) -> String {
    let mut out = String::new();
    if let Some(p) = def.provenance() {
        let kind = match p.kind {
            ProductKind::Point => "point",
            ProductKind::Pair => "pair",
        };
        out.push_str(&format!(
            "#@product(kind={kind}, n2={}, n3={}, axis={}, factors={})\n",
            p.n2,
            p.n3,
            p.axis,
            p.factors.join(";")
        ));
    }
    let comps: Vec<String> = def.components().iter().map(print_expr).collect();
    out.push_str(&format!(
        "immersion {} {{ vars: {}; components: ({}); }}",
        def.name(),
        def.vars().join(", "),
        comps.join(", ")
    ));
    out
}

pub fn print_file(defs: &[ImmersionDef]) -> String {
    let mut out: Vec<String> = defs.iter().map(print_immersion).collect();
    out.push(String::new());
    out.join("\n")
}
