mod common;

use calabi_core::blaschke::full_frame;
use calabi_core::calabi::product_ode_identity;
use calabi_core::checks::{
    apolarity_residual, gauss_codazzi_residual, parallel_cubic_residual, sphere_residual, unimodular_criterion,
    Tolerances,
};
use calabi_core::decompose::{
    classify_spectrum, extract_pair_factors, extract_point_factor, find_axes, theorem3_gate, DecompositionVerdict,
    DetectOptions, FactorData, Orientation, Pattern, VerdictKind,
};
use calabi_core::dsl::{Expr, ImmersionDef};
use calabi_core::grid::Grid;
use calabi_core::jet::eval_jets_expr;
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QUADRIC_K: f64 = 1e-7;
const XI_CONST: f64 = 1e-9;
const HYPERBOLA: f64 = 1e-8;
const SPHERE_H: f64 = 1e-7;
const APOLARITY: f64 = 1e-8;
const UNIMODULAR: f64 = 1e-8;
const GAUSS_CODAZZI: f64 = 1e-6;
const LAMBDA: f64 = 1e-6;
const RELATION: f64 = 1e-8;
const CROSS: f64 = 1e-7;
const EXTRACTION: f64 = 1e-6;
const DRIFT: f64 = 1e-8;
const PARALLEL: f64 = 1e-6;
const DERIVED: f64 = 1e-6;
const ODE: f64 = 1e-9;
const FD_REL: f64 = 1e-5;
const INVARIANCE: f64 = 1e-8;

/// Criteria whose statement cannot hold; see README.
const UNATTAINABLE: &[usize] = &[6];

struct Outcome {
    pass: bool,
    detail: String,
    /// For unattainable criteria: every measurable part other than the failing clause holds.
    remainder_ok: bool,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail, remainder_ok: pass }
}

fn report_max(v: &DecompositionVerdict, name: &str) -> f64 {
    v.report(name).map_or(f64::NAN, |r| r.max_residual)
}

fn within(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol
}

fn c1() -> Outcome {
    let def = quadric();
    let k = Grid::cube(2, -0.4, 0.4, 3).points().iter().map(|p| full_frame(&def, p).unwrap().k_max()).fold(0.0, f64::max);
    outcome(k <= QUADRIC_K, format!("max |K| = {k:.2e}"))
}

fn c2() -> Outcome {
    let points = Grid::cube(2, -0.4, 0.4, 3).points();
    let frames: Vec<_> = points.iter().map(|p| full_frame(&paraboloid(), p).unwrap()).collect();
    let xi_drift = frames
        .iter()
        .flat_map(|f| f.xi.iter().zip(&frames[0].xi).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let h_par = frames.iter().map(|f| f.mean_curvature.abs()).fold(0.0, f64::max);
    let (mut xi_gap, mut h_gap) = (0.0f64, 0.0f64);
    for s in [-0.6, -0.2, 0.0, 0.3, 0.7] {
        let f = full_frame(&hyperbola(), &[s]).unwrap();
        h_gap = h_gap.max((f.mean_curvature + 1.0).abs());
        xi_gap = f.xi.iter().zip(&f.position).map(|(a, b)| (a - b).abs()).fold(xi_gap, f64::max);
    }
    outcome(
        xi_drift <= XI_CONST && h_par <= XI_CONST && xi_gap <= HYPERBOLA && h_gap <= HYPERBOLA,
        format!("paraboloid ξ drift {xi_drift:.1e}, |H| {h_par:.1e}; hyperbola |ξ−φ| {xi_gap:.1e}, |H+1| {h_gap:.1e}"),
    )
}

fn sphere_suite(def: &ImmersionDef, points: &[Vec<f64>]) -> (bool, String) {
    let frames: Vec<_> = points.iter().map(|p| full_frame(def, p).unwrap()).collect();
    let s = sphere_residual(&frames, SPHERE_H);
    let h = frames.iter().map(|f| (f.mean_curvature + 1.0).abs()).fold(0.0, f64::max);
    let a = apolarity_residual(&frames, APOLARITY);
    let u = unimodular_criterion(def, points, UNIMODULAR).unwrap();
    let (g, c) = gauss_codazzi_residual(&frames, GAUSS_CODAZZI, GAUSS_CODAZZI).unwrap();
    let ok = s.pass && h <= SPHERE_H && a.pass && u.pass && g.pass && c.pass;
    let text = format!(
        "{} ({} pts): |H+1| {h:.1e}, apolarity {:.1e}, unimodular {:.1e}, gauss {:.1e}, codazzi {:.1e}",
        def.name(),
        points.len(),
        a.max_residual,
        u.max_residual,
        g.max_residual,
        c.max_residual
    );
    (ok, text)
}

fn c3() -> Outcome {
    let (a, ta) = sphere_suite(&point_h(), &Grid::cube(2, -0.3, 0.3, 3).points());
    let (b, tb) = sphere_suite(&pair_hh(), &Grid::cube(3, -0.3, 0.3, 3).points());
    outcome(a && b, format!("{ta}; {tb}"))
}

fn c4(v: &DecompositionVerdict) -> Outcome {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let thm1 = v
        .analysis
        .as_ref()
        .map_or(f64::NAN, |a| a.points.iter().map(|p| p.structure.relation_residuals["thm1"]).fold(0.0, f64::max));
    let ok = v.kind == VerdictKind::PointProduct
        && v.lambda.len() == 2
        && within(v.lambda[0], -r, LAMBDA)
        && within(v.lambda[1], r, LAMBDA)
        && thm1 <= RELATION;
    outcome(ok, format!("{} λ = {:?}, |1+λ1λ2−λ2²| = {thm1:.1e}", v.kind, v.lambda))
}

fn c5(hh: &DecompositionVerdict, hp: &DecompositionVerdict) -> Outcome {
    let (l2, l3) = (1.5f64.sqrt(), -(2.0f64 / 3.0).sqrt());
    let cross = report_max(hh, "cross");
    let a = hh.kind == VerdictKind::PairProduct
        && within(hh.lambda[0], 0.0, LAMBDA)
        && within(hh.lambda[1], 1.0, LAMBDA)
        && within(hh.lambda[2], -1.0, LAMBDA)
        && cross <= CROSS;
    let b = hp.kind == VerdictKind::PairProduct && within(hp.lambda[1], l2, LAMBDA) && within(hp.lambda[2], l3, LAMBDA);
    outcome(
        a && b,
        format!("{} λ = {:?}, cross {cross:.1e}; {} λ = {:?}", hh.kind, hh.lambda, hp.kind, hp.lambda),
    )
}

fn factor_max(fd: &FactorData, name: &str) -> f64 {
    fd.report(name).map_or(f64::NAN, |r| r.max_residual)
}

fn c6(pairs: &[(&DecompositionVerdict, f64)]) -> Outcome {
    let tol = Tolerances::default();
    let (mut stated, mut rest) = (true, true);
    let mut parts = Vec::new();
    for (v, ratio) in pairs {
        let fd = match extract_pair_factors(v, &tol) {
            Ok(fd) => fd,
            Err(e) => return outcome(false, e.to_string()),
        };
        let dims = fd.subspace2.len() == fd.n2 + 1 && fd.subspace3.len() == fd.n3 + 1 && fd.report("subspaces").unwrap().pass;
        let ann = factor_max(&fd, "annihilation");
        let h2 = factor_max(&fd, "factor_h2");
        let h3_unit = factor_max(&fd, "factor_h3");
        let h3_closure = factor_max(&fd, "factor_h3_closure");
        let gauge = fd.residuals["gauge_product"];
        let measured = dims && ann <= EXTRACTION && within(fd.metric_ratio, *ratio, EXTRACTION) && h2 <= EXTRACTION;
        stated &= measured && h3_unit <= EXTRACTION && within(gauge, 1.0, 1e-12);
        rest &= measured && h3_closure <= EXTRACTION;
        parts.push(format!(
            "dims ({},{}) ann {ann:.1e} ratio {:.6} |H2+1| {h2:.1e}; d1^a d2^b = {gauge:.3} gives H3 = {:.4}; κ = {:.4} gives |H3+1| {h3_closure:.1e}",
            fd.subspace2.len(),
            fd.subspace3.len(),
            fd.metric_ratio,
            fd.residuals["unit_gauge_h3"],
            fd.closure.as_ref().unwrap().kappa,
        ));
    }
    Outcome { pass: stated, detail: parts.join("; "), remainder_ok: rest }
}

fn c7(v: &DecompositionVerdict) -> Outcome {
    let fd = match extract_point_factor(v, &Tolerances::default()) {
        Ok(fd) => fd,
        Err(e) => return outcome(false, e.to_string()),
    };
    let drift = factor_max(&fd, "phi3_constancy");
    let ok = drift <= DRIFT && fd.subspace2.len() == 2 && within(fd.metric_ratio, 1.5, EXTRACTION);
    outcome(ok, format!("φ3 drift {drift:.1e}, dim φ2 subspace {}, ratio {:.8}", fd.subspace2.len(), fd.metric_ratio))
}

fn c8() -> Outcome {
    let mut worst = 0.0f64;
    for def in [point_h(), pair_hh(), pair_h_point()] {
        let frames: Vec<_> = small_grid(def.dim()).iter().map(|p| full_frame(&def, p).unwrap()).collect();
        worst = worst.max(parallel_cubic_residual(&frames, PARALLEL).max_residual);
    }
    let gate = theorem3_gate(&pair_hh(), &Grid::cube(3, -0.3, 0.3, 3).points(), &DetectOptions::default());
    let derived = gate.reports.iter().find(|r| r.name == "derived_lambda2").map_or(f64::NAN, |r| r.max_residual);
    outcome(
        worst <= PARALLEL && gate.applies && derived <= DERIVED,
        format!("max |∇̂K| {worst:.1e}; gate applies = {}, derived relation {derived:.1e}", gate.applies),
    )
}

fn c9() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (def, want) in [(pair_hh(), 0.0), (pair_h_point(), 1.0 / 6f64.sqrt())] {
        let p = def.provenance().unwrap();
        let coeff = (p.n3 as f64 - p.n2 as f64) / (((p.n2 + 1) * (p.n3 + 1)) as f64).sqrt();
        let r = product_ode_identity(&def, &small_grid(def.dim()), ODE).unwrap();
        ok &= r.pass && within(coeff, want, 1e-15);
        parts.push(format!("{} a = {coeff:.6} residual {:.1e}", def.name(), r.max_residual));
    }
    outcome(ok, parts.join("; "))
}

fn c10(quadric_verdict: &DecompositionVerdict) -> Outcome {
    let base = pair_hh();
    let u1 = Expr::var(base.vars()[0].clone());
    let bump = Expr::add(Expr::num(1.0), Expr::mul(Expr::num(0.01), Expr::pow(u1, 2.0)));
    let bent = base.multiplied_by(&bump).unwrap();
    let points = Grid::cube(3, -0.3, 0.3, 3).points();
    let frames: Vec<_> = points.iter().map(|p| full_frame(&bent, p).unwrap()).collect();
    let s = sphere_residual(&frames, SPHERE_H);
    let v = detect(&bent, &points);
    let quadric_note = quadric_verdict.note.as_deref() == Some("K ≈ 0 (quadric)");
    let ok = !s.pass && v.kind == VerdictKind::None && quadric_verdict.kind == VerdictKind::None && quadric_note;
    outcome(
        ok,
        format!(
            "perturbed sphere residual {:.1e}, verdict {} ({}); quadric {} ({})",
            s.max_residual,
            v.kind,
            v.note.unwrap_or_default(),
            quadric_verdict.kind,
            quadric_verdict.note.clone().unwrap_or_default()
        ),
    )
}

fn c11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let vars: Vec<String> = VARS.iter().map(|s| s.to_string()).collect();
    let (mut cases, mut bad, mut worst) = (0, 0, 0.0f64);
    while cases < 50 {
        let e = random_expr(&mut rng, 4);
        let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let v = eval_expr(&e, &p);
        if !v.is_finite() || v.abs() > 1e6 {
            continue;
        }
        cases += 1;
        let jet = eval_jets_expr(&e, &vars, &p, 1).unwrap();
        for i in 0..3 {
            let mut alpha = [0u8; 3];
            alpha[i] = 1;
            let (mut a, mut b) = (p.clone(), p.clone());
            a[i] += 1e-5;
            b[i] -= 1e-5;
            let fd = (eval_expr(&e, &a) - eval_expr(&e, &b)) / 2e-5;
            let d = jet.derivative(&alpha);
            worst = worst.max((d - fd).abs() / d.abs().max(fd.abs()).max(1.0));
            if !close(d, fd) {
                bad += 1;
            }
        }
    }
    let base = pair_hh();
    let u = [0.1, -0.2, 0.15];
    let f0 = full_frame(&base, &u).unwrap();
    let axis = find_axes(&f0, 64, 42)
        .axes
        .into_iter()
        .find(|a| classify_spectrum(&f0, a, Orientation::Auto).pattern == Pattern::Theorem2)
        .unwrap();
    let spec0 = k_spectrum(&f0, &axis.t);
    let mut gap = 0.0f64;
    for _ in 0..10 {
        let img = base.linear_image(&unimodular(&mut rng, 4)).unwrap();
        let f = full_frame(&img, &u).unwrap();
        gap = gap.max((f.mean_curvature - f0.mean_curvature).abs());
        gap = k_spectrum(&f, &axis.t).iter().zip(&spec0).map(|(x, y)| (x - y).abs()).fold(gap, f64::max);
    }
    outcome(
        bad == 0 && worst <= FD_REL && gap <= INVARIANCE,
        format!("{cases} jet cases, worst relative gap {worst:.1e}; 10 unimodular maps, max (H, spectrum) gap {gap:.1e}"),
    )
}

fn detect(def: &ImmersionDef, points: &[Vec<f64>]) -> DecompositionVerdict {
    calabi_core::decompose::detect(def, points, &DetectOptions::default())
}

fn main() {
    let start = std::time::Instant::now();
    let point = detect(&point_h(), &Grid::cube(2, -0.3, 0.3, 3).points());
    let hh = detect(&pair_hh(), &Grid::cube(3, -0.3, 0.3, 3).points());
    let hp = detect(&pair_h_point(), &Grid::cube(4, -0.3, 0.3, 2).points());
    let quad = detect(&quadric(), &Grid::cube(2, -0.3, 0.3, 3).points());
    let results = [
        c1(),
        c2(),
        c3(),
        c4(&point),
        c5(&hh, &hp),
        c6(&[(&hh, 2.0), (&hp, 2.5)]),
        c7(&point),
        c8(),
        c9(),
        c10(&quad),
        c11(),
    ];
    let mut regressions = Vec::new();
    for (i, r) in results.iter().enumerate() {
        let id = i + 1;
        println!("criterion {id:>2}: {}  {}", if r.pass { "PASS" } else { "FAIL" }, r.detail);
        let expected_red = UNATTAINABLE.contains(&id);
        if expected_red && (r.pass || !r.remainder_ok) || !expected_red && !r.pass {
            regressions.push(id);
        }
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{passed}/{} criteria pass in {:.1} s", results.len(), start.elapsed().as_secs_f64());
    if !regressions.is_empty() {
        eprintln!("unexpected outcome for criteria {regressions:?}");
        std::process::exit(1);
    }
}
