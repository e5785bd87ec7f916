#![allow(dead_code)]

use calabi_core::blaschke::BlaschkeFrame;
use calabi_core::calabi::{calabi_pair, calabi_point};
use calabi_core::decompose::{detect, DecompositionVerdict, DetectOptions};
use calabi_core::dsl::{parse_immersion, Expr, Func, ImmersionDef};
use calabi_core::grid::Grid;
use calabi_core::numerics::{solve_sym_eig_generalized, SymMatrix};

pub fn hyperbola() -> ImmersionDef {
    parse_immersion("immersion h2 { vars: s; components: (0.7071067811865476*exp(s), 0.7071067811865476*exp(-s)); }")
        .unwrap()
}

pub fn quadric() -> ImmersionDef {
    parse_immersion("immersion quadric { vars: u1, u2; components: (u1, u2, sqrt(1 + u1^2 + u2^2)); }").unwrap()
}

pub fn paraboloid() -> ImmersionDef {
    parse_immersion("immersion parab { vars: u1, u2; components: (u1, u2, (u1^2 + u2^2)/2); }").unwrap()
}

pub fn point_h() -> ImmersionDef {
    calabi_point(&hyperbola()).unwrap()
}

pub fn pair_hh() -> ImmersionDef {
    calabi_pair(&hyperbola(), &hyperbola()).unwrap()
}

pub fn pair_h_point() -> ImmersionDef {
    calabi_pair(&hyperbola(), &point_h()).unwrap()
}

/// `3^dim` points for dimension ≤ 3, `2^dim` above.
pub fn small_grid(dim: usize) -> Vec<Vec<f64>> {
    let k = if dim <= 3 { 3 } else { 2 };
    Grid::cube(dim, -0.3, 0.3, k).points()
}

pub fn detect_default(def: &ImmersionDef) -> DecompositionVerdict {
    detect(def, &small_grid(def.dim()), &DetectOptions::default())
}

/// Random matrix with determinant 1.
pub fn unimodular(rng: &mut impl rand::Rng, m: usize) -> Vec<Vec<f64>> {
    loop {
        let mut a: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 } + rng.gen_range(-0.6..0.6)).collect())
            .collect();
        let d = calabi_core::numerics::det(&a);
        if d.abs() < 0.2 {
            continue;
        }
        if d < 0.0 {
            a[0].iter_mut().for_each(|x| *x = -*x);
        }
        let s = d.abs().powf(-1.0 / m as f64);
        a.iter_mut().flatten().for_each(|x| *x *= s);
        return a;
    }
}

/// Eigenvalues of `K_t` with respect to `h`.
pub fn k_spectrum(f: &BlaschkeFrame, t: &[f64]) -> Vec<f64> {
    let n = f.dim();
    let kt = f.k_operator(t);
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (0..n).map(|l| f.h.get(i, l) * kt[l][j]).sum()).collect()).collect();
    solve_sym_eig_generalized(&SymMatrix::symmetrized(&rows), &f.h).unwrap().values
}

pub const VARS: [&str; 3] = ["x", "y", "z"];

pub fn random_expr(rng: &mut impl rand::Rng, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.7) {
            Expr::var(VARS[rng.gen_range(0..3)])
        } else {
            Expr::num(rng.gen_range(-2.0..2.0))
        };
    }
    let a = random_expr(rng, depth - 1);
    match rng.gen_range(0..9) {
        0 => Expr::add(a, random_expr(rng, depth - 1)),
        1 => Expr::sub(a, random_expr(rng, depth - 1)),
        2 | 3 => Expr::mul(a, random_expr(rng, depth - 1)),
        4 => Expr::div(a, Expr::add(Expr::num(2.0), Expr::pow(random_expr(rng, depth - 1), 2.0))),
        5 => Expr::call(Func::Log, Expr::add(Expr::num(1.5), Expr::pow(a, 2.0))),
        6 => Expr::call(Func::Sqrt, Expr::add(Expr::num(1.0), Expr::pow(a, 2.0))),
        7 => Expr::pow(Expr::add(Expr::num(1.0), Expr::pow(a, 2.0)), 1.5),
        _ => {
            let f = [Func::Exp, Func::Sin, Func::Cos, Func::Sinh, Func::Cosh][rng.gen_range(0..5)];
            Expr::call(f, Expr::mul(Expr::num(0.5), a))
        }
    }
}

pub fn eval_expr(e: &Expr, p: &[f64]) -> f64 {
    e.eval_with(&|name| VARS.iter().position(|v| *v == name).map(|i| p[i])).unwrap()
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-5 * a.abs().max(b.abs()).max(1.0)
}
