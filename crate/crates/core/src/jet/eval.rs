use super::{Elementary, Jet, JetError, JetSpace, MAX_ORDER};
use crate::dsl::{BinOp, Expr, Func, ImmersionDef};

fn elementary(f: Func) -> Elementary {
    match f {
        Func::Exp => Elementary::Exp,
        Func::Log => Elementary::Log,
        Func::Sqrt => Elementary::Sqrt,
        Func::Sin => Elementary::Sin,
        Func::Cos => Elementary::Cos,
        Func::Sinh => Elementary::Sinh,
        Func::Cosh => Elementary::Cosh,
    }
}

fn constant_value(e: &Expr) -> Option<f64> {
    e.eval_with(&|_| None)
}

fn walk(e: &Expr, vars: &[String], seeds: &[Jet]) -> Result<Jet, JetError> {
    let proto = &seeds[0];
    Ok(match e {
        Expr::Var(name) => {
            let i = vars.iter().position(|v| v == name).ok_or_else(|| JetError::UnknownVariable(name.clone()))?;
            seeds[i].clone()
        }
        Expr::Const(c) => Jet::constant(proto.space(), proto.order(), *c),
        Expr::Neg(a) => walk(a, vars, seeds)?.scale(-1.0),
        Expr::Call(f, a) => walk(a, vars, seeds)?.apply(elementary(*f))?,
        Expr::Binary(BinOp::Pow, a, b) => {
            let base = walk(a, vars, seeds)?;
            match constant_value(b) {
                Some(p) => base.apply(Elementary::PowConst(p))?,
                None => {
                    // general a^b = exp(b log a)
                    let ex = walk(b, vars, seeds)?;
                    (&ex * &base.apply(Elementary::Log)?).apply(Elementary::Exp)?
                }
            }
        }
        Expr::Binary(op, a, b) => {
            let x = walk(a, vars, seeds)?;
            let y = walk(b, vars, seeds)?;
            match op {
                BinOp::Add => &x + &y,
                BinOp::Sub => &x - &y,
                BinOp::Mul => &x * &y,
                BinOp::Div => x.div_jet(&y)?,
                BinOp::Pow => unreachable!(),
            }
        }
    })
}

/// Jet of a single expression over `vars` at `point`.
pub fn eval_jets_expr(expr: &Expr, vars: &[String], point: &[f64], order: usize) -> Result<Jet, JetError> {
    if order > MAX_ORDER {
        return Err(JetError::OrderTooHigh(order));
    }
    if point.len() != vars.len() {
        return Err(JetError::PointDimension { expected: vars.len(), got: point.len() });
    }
    let space = JetSpace::get(vars.len())?;
    let seeds: Vec<Jet> = point.iter().enumerate().map(|(i, &x)| Jet::variable(space, order, i, x)).collect();
    walk(expr, vars, &seeds)
}

/// One jet per component of `def`, expanded at `point`.
pub fn eval_jets(def: &ImmersionDef, point: &[f64], order: usize) -> Result<Vec<Jet>, JetError> {
    if order > MAX_ORDER {
        return Err(JetError::OrderTooHigh(order));
    }
    if point.len() != def.dim() {
        return Err(JetError::PointDimension { expected: def.dim(), got: point.len() });
    }
    let space = JetSpace::get(def.dim())?;
    let seeds: Vec<Jet> = point.iter().enumerate().map(|(i, &x)| Jet::variable(space, order, i, x)).collect();
    def.components().iter().map(|c| walk(c, def.vars(), &seeds)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_immersion;

    #[test]
    fn paraboloid_second_order() {
        let def = parse_immersion("immersion p { vars: u1, u2; components: (u1, u2, (u1^2+u2^2)/2); }").unwrap();
        let j = eval_jets(&def, &[0.0, 0.0], 4).unwrap();
        assert_eq!(j[2].coeff(&[2, 0]), 0.5);
        assert_eq!(j[2].derivative(&[2, 0]), 1.0);
        assert_eq!(j[2].coeff(&[1, 1]), 0.0);
        for a in [[3u8, 0], [2, 1], [1, 2], [0, 3]] {
            assert_eq!(j[2].coeff(&a), 0.0);
        }
    }

    #[test]
    fn hyperbola_derivatives_equal_a() {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let def = parse_immersion(
            "immersion h2 { vars: s; components: (0.7071067811865476*exp(s), 0.7071067811865476*exp(-s)); }",
        )
        .unwrap();
        let j = eval_jets(&def, &[0.0], 4).unwrap();
        for k in 0..=4u8 {
            assert!((j[0].derivative(&[k]) - a).abs() < 1e-15);
            assert!((j[1].derivative(&[k]) - a * (-1f64).powi(k as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn wrong_point_dimension() {
        let def = parse_immersion("immersion p { vars: u; components: (u, u^2); }").unwrap();
        assert!(matches!(eval_jets(&def, &[0.0, 1.0], 2), Err(JetError::PointDimension { .. })));
        assert!(matches!(eval_jets(&def, &[0.0], 5), Err(JetError::OrderTooHigh(5))));
    }
}
