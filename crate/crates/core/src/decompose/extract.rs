use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::blaschke::{centroaffine_defect, full_frame, BlaschkeFrame};
use crate::calabi::gate_samples;
use crate::checks::{CheckReport, Tolerances};
use crate::dsl::{DslError, Expr, ImmersionDef, Provenance};
use crate::numerics::{self, norm, subspace_rank, DEFAULT_RANK_TOL};

use super::detect::{directional, DecompositionVerdict, PointAnalysis, VerdictKind};
use super::spectrum::SpectralStructure;
use super::DecomposeError;

/// `d1^{n2+1} d2^{n3+1}` forced by `H = −1` on both the product and its factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Closure {
    pub kappa: f64,
    /// Second gauge constant with `d1^{n2+1} d2^{n3+1} = κ`.
    pub d2: f64,
}

/// Factors recovered on the sample grid.
#[derive(Debug, Clone, Serialize)]
pub struct FactorData {
    pub kind: VerdictKind,
    pub n2: usize,
    pub n3: usize,
    pub d1: f64,
    /// From `d1^{n2+1} d2^{n3+1} = 1` (`d1^n d2 = 1` for a point).
    pub d2: f64,
    pub closure: Option<Closure>,
    pub metric_ratio: f64,
    pub expected_ratio: f64,
    pub phi2_samples: Vec<Vec<f64>>,
    pub phi3_samples: Vec<Vec<f64>>,
    pub subspace2: Vec<Vec<f64>>,
    pub subspace3: Vec<Vec<f64>>,
    pub factor_defs: Option<Vec<ImmersionDef>>,
    pub residuals: BTreeMap<String, f64>,
    pub reports: Vec<CheckReport>,
    pub pass: bool,
}

impl FactorData {
    pub fn report(&self, name: &str) -> Option<&CheckReport> {
        self.reports.iter().find(|r| r.name == name)
    }
}

pub fn closure_constant(n2: usize, n3: usize) -> f64 {
    let (a, b) = ((n2 + 1) as f64, (n3 + 1) as f64);
    (0.5 * (b * a.ln() + a * b.ln() - (a + b) * (a + b).ln())).exp()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn lin(terms: &[(f64, &[f64])]) -> Vec<f64> {
    let m = terms[0].1.len();
    (0..m).map(|i| terms.iter().map(|(c, v)| c * v[i]).sum()).collect()
}

fn scaled(c: f64, v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| c * x).collect()
}

struct Local<'a> {
    frame: &'a BlaschkeFrame,
    s: &'a SpectralStructure,
    grad: Option<&'a Vec<Vec<f64>>>,
    l2: f64,
    l3: f64,
    /// `−λ3 φ + T` and `λ2 φ − T`.
    raw2: Vec<f64>,
    raw3: Vec<f64>,
}

impl<'a> Local<'a> {
    fn new(p: &'a PointAnalysis, l3: f64) -> Local<'a> {
        let f = &p.frame;
        let s = &p.structure;
        let t = f.ambient(&s.axis.t);
        let l2 = s.lambda2;
        Local {
            frame: f,
            s,
            grad: p.axis_gradient.as_ref(),
            l2,
            l3,
            raw2: add(&scaled(-l3, &f.position), &t),
            raw3: lin(&[(l2, &f.position), (-1.0, &t)]),
        }
    }

    fn h_t(&self, x: &[f64]) -> f64 {
        self.frame.h_inner(&self.s.axis.t, x)
    }

    /// `D_X T` in the ambient space.
    fn d_axis(&self, x: &[f64]) -> Vec<f64> {
        let f = self.frame;
        let Some(g) = self.grad else { return vec![f64::NAN; f.position.len()] };
        let v = add(&directional(g, x), &f.k_apply(x, &self.s.axis.t));
        add(&f.ambient(&v), &scaled(self.h_t(x), &f.xi))
    }

    /// `dφ2(X)` for `f = 1` at this point, with `X(f) = −λ2 f h(T, X)`.
    fn d2(&self, x: &[f64]) -> Vec<f64> {
        let xa = self.frame.ambient(x);
        lin(&[(-self.l2 * self.h_t(x), &self.raw2), (-self.l3, &xa), (1.0, &self.d_axis(x))])
    }

    /// `dφ3(X)` for `g = 1` at this point, with `X(g) = −λ3 g h(T, X)`.
    fn d3(&self, x: &[f64]) -> Vec<f64> {
        let xa = self.frame.ambient(x);
        lin(&[(-self.l3 * self.h_t(x), &self.raw3), (self.l2, &xa), (-1.0, &self.d_axis(x))])
    }

    /// `∇̂`-Hessian of the position vector.
    fn hess(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let f = self.frame;
        let n = f.dim();
        let m = f.position.len();
        let mut out = vec![0.0; m];
        for i in 0..n {
            for j in 0..n {
                let c = x[i] * y[j];
                if c == 0.0 {
                    continue;
                }
                for a in 0..m {
                    let mut v = f.second[i][j][a];
                    for k in 0..n {
                        v -= f.gamma_levi[k][i][j] * f.tangent_basis[k][a];
                    }
                    out[a] += c * v;
                }
            }
        }
        out
    }
}

/// Unimodular coordinates adapted to `R^{n+1} = S2 ⊕ S3`.
struct SplitCoordinates {
    columns: Vec<Vec<f64>>,
    r2: usize,
}

impl SplitCoordinates {
    fn new(b2: &[Vec<f64>], b3: &[Vec<f64>]) -> Option<SplitCoordinates> {
        let mut columns: Vec<Vec<f64>> = b2.iter().chain(b3).cloned().collect();
        let m = columns.first()?.len();
        if columns.len() != m {
            return None;
        }
        let d = numerics::det(&transpose(&columns));
        if !(d.abs() > 1e-12) {
            return None;
        }
        let last = columns.len() - 1;
        columns[last].iter_mut().for_each(|x| *x /= d);
        Some(SplitCoordinates { columns, r2: b2.len() })
    }

    fn coords(&self, v: &[f64]) -> Vec<f64> {
        numerics::solve(&transpose(&self.columns), v).unwrap_or_else(|_| vec![f64::NAN; v.len()])
    }

    /// `|det|` of the vectors in the first (`second = false`) or second block coordinates.
    fn block_volume(&self, vectors: &[Vec<f64>], second: bool) -> f64 {
        let rows: Vec<Vec<f64>> = vectors
            .iter()
            .map(|v| {
                let y = self.coords(v);
                if second { y[self.r2..].to_vec() } else { y[..self.r2].to_vec() }
            })
            .collect();
        if rows.iter().any(|r| r.len() != vectors.len()) {
            return f64::NAN;
        }
        numerics::det(&rows).abs()
    }
}

fn transpose(cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = cols.first().map_or(0, |c| c.len());
    (0..m).map(|r| cols.iter().map(|c| c[r]).collect()).collect()
}

/// Factor definitions from product provenance: the `E(λ2)` and `E(λ3)` blocks on the `t = 0` leaf.
fn provenance_factors(
    def: &ImmersionDef,
    prov: &Provenance,
    swapped: bool,
    scales: (f64, Option<f64>),
) -> Result<Vec<ImmersionDef>, DslError> {
    let (b1, b2) = prov.block_sizes();
    let others: Vec<String> = def.vars().iter().filter(|v| **v != prov.axis).cloned().collect();
    let (v1, v2) = others.split_at(prov.n2.min(others.len()));
    let map: HashMap<String, Expr> = [(prov.axis.clone(), Expr::num(0.0))].into();
    let block = |rows: std::ops::Range<usize>, vars: &[String], scale: f64, name: String| {
        let comps = rows.map(|r| Expr::mul(Expr::num(scale), def.components()[r].substitute(&map))).collect();
        ImmersionDef::new(name, vars.to_vec(), comps)
    };
    let name = |i: usize, fallback: &str| prov.factors.get(i).cloned().unwrap_or_else(|| fallback.to_string());
    let first = (0..b1, v1, name(0, "factor2"));
    let second = (b1..b1 + b2, v2, name(1, "factor3"));
    let (e2, e3) = if swapped { (second, first) } else { (first, second) };
    let mut out = vec![block(e2.0, e2.1, scales.0, e2.2)?];
    if let Some(s3) = scales.1 {
        out.push(block(e3.0, e3.1, s3, e3.2)?);
    }
    Ok(out)
}

fn factor_def_residual(def: &ImmersionDef) -> f64 {
    gate_samples(def.dim())
        .iter()
        .map(|u| match full_frame(def, u) {
            Ok(f) => {
                let n = f.dim();
                let mut r = (f.mean_curvature + 1.0).abs().max(centroaffine_defect(&f));
                for i in 0..n {
                    for j in 0..n {
                        let target = if i == j { f.mean_curvature } else { 0.0 };
                        r = r.max((f.s[i][j] - target).abs());
                    }
                }
                r
            }
            Err(_) => f64::NAN,
        })
        .fold(0.0, |m: f64, r| if r.is_nan() || m.is_nan() { f64::NAN } else { m.max(r) })
}

fn max_norm(vs: impl IntoIterator<Item = Vec<f64>>) -> f64 {
    vs.into_iter().map(|v| norm(&v)).fold(0.0, |m: f64, r| if r.is_nan() { f64::NAN } else { m.max(r) })
}

fn extract(verdict: &DecompositionVerdict, tol: &Tolerances, want: VerdictKind) -> Result<FactorData, DecomposeError> {
    if verdict.kind != want || !verdict.orientation_ok {
        return Err(DecomposeError::WrongVerdict(verdict.kind.to_string()));
    }
    let analysis = verdict.analysis.as_ref().ok_or(DecomposeError::NoAnalysis)?;
    let point = want == VerdictKind::PointProduct;
    let s0 = &analysis.points[0].structure;
    let (n2, n3) = (s0.n2, if point { 0 } else { s0.n3 });
    let (a, b) = ((n2 + 1) as f64, (n3 + 1) as f64);
    let locals: Vec<Local> = analysis
        .points
        .iter()
        .map(|p| Local::new(p, if point { -1.0 / p.structure.lambda2 } else { p.structure.lambda3 }))
        .collect();
    let (l2, l3) = (locals[0].l2, locals[0].l3);
    let def = &analysis.def;
    let prov = def.provenance().filter(|p| def.var_index(&p.axis).is_some());
    let sigma = prov.map(|p| {
        let i = def.var_index(&p.axis).unwrap();
        let mut e = vec![0.0; def.dim()];
        e[i] = 1.0;
        if locals[0].h_t(&e) < 0.0 { -1.0 } else { 1.0 }
    });
    let ext = tol.get("extraction");

    let r2_scale = ((l2 - l3) * l2).sqrt();
    let r3_scale = ((l3 - l2) * l3).sqrt();
    let e2 = |p: &Local| -> Vec<Vec<f64>> { p.s.first_block().iter().map(|v| scaled(1.0 / r2_scale, v)).collect() };
    let e3 = |p: &Local| -> Vec<Vec<f64>> { p.s.second_block().iter().map(|v| scaled(1.0 / r3_scale, v)).collect() };

    let mut cloud2 = Vec::new();
    let mut cloud3 = Vec::new();
    for p in &locals {
        cloud2.push(p.raw2.clone());
        cloud3.push(p.raw3.clone());
        cloud2.extend(p.s.first_block().iter().map(|v| p.d2(v)));
        cloud3.extend(p.s.second_block().iter().map(|w| p.d3(w)));
    }
    let sub2 = subspace_rank(&cloud2, DEFAULT_RANK_TOL);
    let sub3 = subspace_rank(&cloud3, DEFAULT_RANK_TOL);
    let joint = subspace_rank(&[sub2.basis.clone(), sub3.basis.clone()].concat(), DEFAULT_RANK_TOL);
    let split_defect = ((sub2.rank as f64) - a).abs().max(((sub3.rank as f64) - b).abs()).max((sub2.rank + sub3.rank - joint.rank) as f64);
    let coords = SplitCoordinates::new(&sub2.basis, &sub3.basis);

    let volume2: Vec<f64> = locals
        .iter()
        .map(|p| {
            let mut vs: Vec<Vec<f64>> = e2(p).iter().map(|v| p.d2(v)).collect();
            vs.push(p.raw2.clone());
            coords.as_ref().map_or(f64::NAN, |c| c.block_volume(&vs, false))
        })
        .collect();
    let volume3: Vec<f64> = locals
        .iter()
        .map(|p| {
            let mut vs: Vec<Vec<f64>> = e3(p).iter().map(|w| p.d3(w)).collect();
            vs.push(p.raw3.clone());
            coords.as_ref().map_or(f64::NAN, |c| c.block_volume(&vs, true))
        })
        .collect();
    let f_star: Vec<f64> = volume2.iter().map(|v| v.powf(-1.0 / a)).collect();

    let t_prov: Option<Vec<f64>> = prov.zip(sigma).map(|(p, sg)| {
        let i = def.var_index(&p.axis).unwrap();
        locals.iter().map(|l| sg * l.frame.u[i]).collect()
    });
    let t0 = t_prov.as_ref().map_or(0.0, |t| t[0]);
    let t_vol: Vec<f64> = f_star.iter().map(|f| t0 - (f / f_star[0]).ln() / l2).collect();
    let t = t_prov.clone().unwrap_or_else(|| t_vol.clone());
    let d1 = f_star[0] * (l2 * t0).exp();
    let d2 = (-(a / b) * d1.ln()).exp();
    let kappa = closure_constant(n2, n3);
    let d2c = ((kappa.ln() - a * d1.ln()) / b).exp();
    let f_at = |i: usize| d1 * (-l2 * t[i]).exp();
    let g_at = |i: usize, d: f64| d * (-l3 * t[i]).exp();
    let g_used = if point { d2 } else { d2c };

    let pts = || locals.iter().map(|p| p.frame.u.as_slice());
    let mut reports = Vec::new();
    let annihilation: Vec<f64> = locals
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (f, g) = (f_at(i), g_at(i, g_used));
            let tt = &p.s.axis.t;
            let mut vs = vec![scaled(f, &p.d2(tt)), scaled(g, &p.d3(tt))];
            vs.extend(p.s.second_block().iter().map(|w| scaled(f, &p.d2(w))));
            vs.extend(p.s.first_block().iter().map(|v| scaled(g, &p.d3(v))));
            max_norm(vs)
        })
        .collect();
    reports.push(CheckReport::from_residuals("annihilation", ext, pts().zip(annihilation)));

    if point {
        let rate: Vec<f64> = locals
            .iter()
            .map(|p| {
                p.s.first_block()
                    .iter()
                    .map(|v| (norm(&p.d2(v)) / norm(&p.frame.ambient(v)) - (l2 - l3)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        reports.push(CheckReport::from_residuals("immersion_rate", tol.get("rate"), pts().zip(rate)));
    } else {
        let imm: Vec<f64> = locals
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (f, g) = (f_at(i), g_at(i, g_used));
                let mut vs: Vec<Vec<f64>> =
                    p.s.first_block().iter().map(|v| lin(&[(f, &p.d2(v)), (-f * (l2 - l3), &p.frame.ambient(v))])).collect();
                vs.extend(p.s.second_block().iter().map(|w| lin(&[(g, &p.d3(w)), (-g * (l2 - l3), &p.frame.ambient(w))])));
                max_norm(vs)
            })
            .collect();
        reports.push(CheckReport::from_residuals("immersion", ext, pts().zip(imm)));
    }
    reports.push(CheckReport::single("subspaces", 0.0, &locals[0].frame.u, split_defect));

    let expected_ratio = (l2 - l3) * l2;
    let expected_ratio3 = (l3 - l2) * l3;
    let mut ratio0 = f64::NAN;
    let mut metric = Vec::new();
    for (i, p) in locals.iter().enumerate() {
        let (f, g) = (f_at(i), g_at(i, g_used));
        let v = p.s.first_block();
        let w = p.s.second_block();
        let mut basis: Vec<Vec<f64>> = vec![scaled(f, &p.raw2)];
        basis.extend(v.iter().map(|x| scaled(f, &p.d2(x))));
        basis.push(scaled(g, &p.raw3));
        basis.extend(w.iter().map(|x| scaled(g, &p.d3(x))));
        let m = transpose(&basis);
        let i3 = 1 + v.len();
        let mut r = 0.0f64;
        let mut diag = Vec::new();
        for (ai, va) in v.iter().enumerate() {
            for (bi, vb) in v.iter().enumerate() {
                let target = scaled(f * (l2 - l3), &p.hess(va, vb));
                let c = numerics::solve(&m, &target).map(|c| c[0]).unwrap_or(f64::NAN);
                let expect = if ai == bi { expected_ratio } else { 0.0 };
                if ai == bi {
                    diag.push(c);
                }
                r = if c.is_nan() { f64::NAN } else { r.max((c - expect).abs()) };
            }
        }
        for (ai, wa) in w.iter().enumerate() {
            for (bi, wb) in w.iter().enumerate() {
                let target = scaled(g * (l2 - l3), &p.hess(wa, wb));
                let c = numerics::solve(&m, &target).map(|c| c[i3]).unwrap_or(f64::NAN);
                let expect = if ai == bi { expected_ratio3 } else { 0.0 };
                r = if c.is_nan() { f64::NAN } else { r.max((c - expect).abs()) };
            }
        }
        if i == 0 && !diag.is_empty() {
            ratio0 = diag.iter().sum::<f64>() / diag.len() as f64;
        }
        metric.push(r);
    }
    reports.push(CheckReport::from_residuals("metric_ratio", ext, pts().zip(metric)));

    let h_of = |vol: f64, scale: f64, k: f64, nk: usize| -(scale.powf(k) * vol).powf(-2.0 / (nk as f64 + 2.0));
    let h2: Vec<f64> = (0..locals.len()).map(|i| (h_of(volume2[i], f_at(i), a, n2) + 1.0).abs()).collect();
    reports.push(CheckReport::from_residuals("factor_h2", ext, pts().zip(h2)));
    let mut residuals = BTreeMap::new();
    let mut closure = None;
    if point {
        let phi3: Vec<Vec<f64>> = (0..locals.len()).map(|i| scaled(g_at(i, d2), &locals[i].raw3)).collect();
        let drift = phi3.iter().map(|p| norm(&add(p, &scaled(-1.0, &phi3[0]))));
        reports.push(CheckReport::from_residuals("phi3_constancy", tol.get("drift"), pts().zip(drift)));
    } else {
        let h3_unit: Vec<f64> = (0..locals.len()).map(|i| (h_of(volume3[i], g_at(i, d2), b, n3) + 1.0).abs()).collect();
        let h3_closure: Vec<f64> = (0..locals.len()).map(|i| (h_of(volume3[i], g_at(i, d2c), b, n3) + 1.0).abs()).collect();
        reports.push(CheckReport::from_residuals("factor_h3", ext, pts().zip(h3_unit)));
        reports.push(CheckReport::from_residuals("factor_h3_closure", ext, pts().zip(h3_closure)));
        residuals.insert("unit_gauge_h3".to_string(), h_of(volume3[0], g_at(0, d2), b, n3));
        closure = Some(Closure { kappa, d2: d2c });
    }
    if let Some(tp) = &t_prov {
        let gap = tp.iter().zip(&t_vol).map(|(x, y)| (x - y).abs());
        reports.push(CheckReport::from_residuals("axis_parameter", ext, pts().zip(gap)));
    }

    let factor_defs = match prov.zip(sigma) {
        Some((p, sg)) => {
            let s3 = if point { None } else { Some(d2c * (l2 - l3)) };
            let defs = provenance_factors(def, p, sg < 0.0, (d1 * (l2 - l3), s3)).ok();
            if let Some(defs) = &defs {
                let r = defs.iter().map(factor_def_residual).fold(0.0, |m: f64, r| if r.is_nan() { f64::NAN } else { m.max(r) });
                reports.push(CheckReport::single("factor_def", ext, &locals[0].frame.u, r));
            }
            defs
        }
        None => None,
    };

    for r in &reports {
        residuals.insert(r.name.clone(), r.max_residual);
    }
    residuals.insert("gauge_product".to_string(), d1.powf(a) * d2.powf(b));
    let phi2_samples = (0..locals.len()).map(|i| scaled(f_at(i), &locals[i].raw2)).collect();
    let phi3_samples = (0..locals.len()).map(|i| scaled(g_at(i, g_used), &locals[i].raw3)).collect();
    let pass = reports.iter().all(|r| r.pass);
    Ok(FactorData {
        kind: want,
        n2,
        n3,
        d1,
        d2,
        closure,
        metric_ratio: ratio0,
        expected_ratio,
        phi2_samples,
        phi3_samples,
        subspace2: sub2.basis,
        subspace3: sub3.basis,
        factor_defs,
        residuals,
        reports,
        pass,
    })
}

/// Recovers `φ2 = f(−λ3 φ + T)` and `φ3 = g(λ2 φ − T)` from a pair verdict.
pub fn extract_pair_factors(verdict: &DecompositionVerdict, tol: &Tolerances) -> Result<FactorData, DecomposeError> {
    extract(verdict, tol, VerdictKind::PairProduct)
}

/// Recovers `φ2 = f(√n φ + T)` and the constant `φ3 = g(λ2 φ − T)` from a point verdict.
pub fn extract_point_factor(verdict: &DecompositionVerdict, tol: &Tolerances) -> Result<FactorData, DecomposeError> {
    extract(verdict, tol, VerdictKind::PointProduct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calabi::{calabi_pair, calabi_point};
    use crate::decompose::{detect, DetectOptions};
    use crate::dsl::parse_immersion;
    use crate::grid::Grid;

    fn hyperbola() -> ImmersionDef {
        parse_immersion(
            "immersion h2 { vars: s; components: (0.7071067811865476*exp(s), 0.7071067811865476*exp(-s)); }",
        )
        .unwrap()
    }

    #[test]
    fn closure_constant_values() {
        assert!((closure_constant(1, 1) - 0.25).abs() < 1e-15);
        assert!((closure_constant(1, 0).powi(2) - 2.0 / 27.0).abs() < 1e-15);
    }

    #[test]
    fn point_factor() {
        let p = calabi_point(&hyperbola()).unwrap();
        let opts = DetectOptions::default();
        let v = detect(&p, &Grid::cube(2, -0.3, 0.3, 3).points(), &opts);
        let fd = extract_point_factor(&v, &opts.tolerances).unwrap();
        assert!(fd.pass, "{:#?}", fd.reports);
        assert!((fd.metric_ratio - 1.5).abs() < 1e-8);
        assert_eq!((fd.subspace2.len(), fd.subspace3.len()), (2, 1));
    }

    #[test]
    fn pair_factors() {
        let p = calabi_pair(&hyperbola(), &hyperbola()).unwrap();
        let opts = DetectOptions::default();
        let v = detect(&p, &Grid::cube(3, -0.3, 0.3, 2).points(), &opts);
        let fd = extract_pair_factors(&v, &opts.tolerances).unwrap();
        for r in &fd.reports {
            println!("{} {:e} {}", r.name, r.max_residual, r.pass);
        }
        println!("{:?}", fd.residuals);
        assert!((fd.metric_ratio - 2.0).abs() < 1e-8);
        assert_eq!((fd.subspace2.len(), fd.subspace3.len()), (2, 2));
        assert!(fd.report("factor_h3_closure").unwrap().pass);
        assert!(fd.report("factor_def").unwrap().pass);
    }

    #[test]
    fn wrong_kind_is_refused() {
        let p = calabi_point(&hyperbola()).unwrap();
        let opts = DetectOptions::default();
        let v = detect(&p, &Grid::cube(2, -0.3, 0.3, 2).points(), &opts);
        assert!(matches!(extract_pair_factors(&v, &opts.tolerances), Err(DecomposeError::WrongVerdict(_))));
    }
}
