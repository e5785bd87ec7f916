use serde::Serialize;

use crate::blaschke::{centroaffine_defect, full_frame, BlaschkeError, BlaschkeFrame};
use crate::checks::{apolarity_residual, sphere_residual, CheckReport, Tolerances};
use crate::dsl::ImmersionDef;
use crate::exec::Execution;
use crate::numerics;

use super::axes::{find_axes_with, CandidateAxis, DEFAULT_RESTARTS};
use super::normalize::normalize_homothety;
use super::spectrum::{classify_spectrum, Orientation, Pattern, SpectralStructure};
use super::theorem3::{theorem3_from, Theorem3Gate};

const CONTINUITY_COS: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct DetectOptions {
    pub restarts: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub execution: Execution,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions {
            restarts: DEFAULT_RESTARTS,
            seed: 42,
            tolerances: Tolerances::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VerdictKind {
    PointProduct,
    PairProduct,
    None,
}

impl std::fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            VerdictKind::PointProduct => "PointProduct",
            VerdictKind::PairProduct => "PairProduct",
            VerdictKind::None => "None",
        };
        f.write_str(s)
    }
}

/// Per-point data kept for extraction.
#[derive(Debug, Clone)]
pub struct PointAnalysis {
    pub frame: BlaschkeFrame,
    pub structure: SpectralStructure,
    /// `gradient[m][k] = (∇̂_m T)^k`; absent when the axis equation is degenerate.
    pub axis_gradient: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    /// The input scaled to `H = −1`.
    pub def: ImmersionDef,
    pub points: Vec<PointAnalysis>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionVerdict {
    pub kind: VerdictKind,
    pub n2: usize,
    pub n3: usize,
    /// `[λ1, λ2]` or `[λ1, λ2, λ3]`.
    pub lambda: Vec<f64>,
    pub spectrum: Option<SpectralStructure>,
    pub constancy_residual: f64,
    pub orientation_ok: bool,
    pub evidence: Vec<CheckReport>,
    pub note: Option<String>,
    /// Homothety factor that brought the input to `H = −1`.
    pub scale: Option<f64>,
    pub theorem3: Option<Theorem3Gate>,
    #[serde(skip)]
    pub analysis: Option<Analysis>,
}

impl DecompositionVerdict {
    fn none(note: impl Into<String>, evidence: Vec<CheckReport>) -> DecompositionVerdict {
        DecompositionVerdict {
            kind: VerdictKind::None,
            n2: 0,
            n3: 0,
            lambda: Vec::new(),
            spectrum: None,
            constancy_residual: f64::NAN,
            orientation_ok: false,
            evidence,
            note: Some(note.into()),
            scale: None,
            theorem3: None,
            analysis: None,
        }
    }

    pub fn report(&self, name: &str) -> Option<&CheckReport> {
        self.evidence.iter().find(|r| r.name == name)
    }
}

fn frames_at(def: &ImmersionDef, points: &[Vec<f64>], exec: Execution) -> Result<Vec<BlaschkeFrame>, BlaschkeError> {
    exec.map(points, |_, u| full_frame(def, u)).into_iter().collect()
}

/// `∇̂T` from the implicit function theorem applied to `K(x, x) = μx`, `h(x, x) = 1`.
pub fn axis_gradient(frame: &BlaschkeFrame, axis: &CandidateAxis) -> Option<Vec<Vec<f64>>> {
    let n = frame.dim();
    let (x, mu) = (&axis.t, axis.lambda1);
    let kx = frame.k_operator(x);
    let hx = frame.h.mul_vec(x);
    let mut jac = vec![vec![0.0; n + 1]; n + 1];
    for r in 0..n {
        for c in 0..n {
            jac[r][c] = 2.0 * kx[r][c] - if r == c { mu } else { 0.0 };
        }
        jac[r][n] = -x[r];
        jac[n][r] = 2.0 * hx[r];
    }
    let mut out = Vec::with_capacity(n);
    for m in 0..n {
        let mut rhs = vec![0.0; n + 1];
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += frame.dk[m][k][i][j] * x[i] * x[j];
                }
            }
            rhs[k] = -s;
        }
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += frame.dh[m][i][j] * x[i] * x[j];
            }
        }
        rhs[n] = -s;
        let d = numerics::solve(&jac, &rhs).ok()?;
        out.push((0..n).map(|k| d[k] + (0..n).map(|j| frame.gamma_levi[k][m][j] * x[j]).sum::<f64>()).collect());
    }
    Some(out)
}

pub(crate) fn directional(gradient: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|k| (0..n).map(|m| v[m] * gradient[m][k]).sum()).collect()
}

/// h-cosine at `frame` between coordinate vectors.
fn h_cos(frame: &BlaschkeFrame, x: &[f64], y: &[f64]) -> f64 {
    frame.h_inner(x, y) / (frame.h_norm(x) * frame.h_norm(y))
}

fn provenance_axis(def: &ImmersionDef) -> Option<usize> {
    def.provenance().and_then(|p| def.var_index(&p.axis))
}

fn aligned_with(frame: &BlaschkeFrame, t: &[f64], axis: Option<usize>) -> bool {
    axis.is_some_and(|i| {
        let mut e = vec![0.0; t.len()];
        e[i] = 1.0;
        frame.h_inner(t, &e).abs() / frame.h_norm(&e) >= 1.0 - 1e-6
    })
}

struct Limits {
    spectrum: f64,
    cross: f64,
    axis: f64,
}

fn is_valid(s: &SpectralStructure, lim: &Limits) -> bool {
    s.pattern != Pattern::Unmatched
        && s.max_relation() <= lim.spectrum
        && s.axis.axis_residual <= lim.axis
        && (s.pattern != Pattern::Theorem2 || s.cross_residual <= lim.cross)
}

/// Picks the structure at the first grid point.
fn choose_first(frame: &BlaschkeFrame, axes: &[CandidateAxis], lim: &Limits, prov: Option<usize>) -> Option<SpectralStructure> {
    let mut scored: Vec<(bool, bool, bool, f64, usize, SpectralStructure)> = axes
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let s = classify_spectrum(frame, a, Orientation::Auto);
            let rel = s.max_relation();
            (is_valid(&s, lim), aligned_with(frame, &s.axis.t, prov), s.pattern == Pattern::Theorem2, rel, i, s)
        })
        .collect();
    scored.sort_by(|x, y| {
        y.0.cmp(&x.0)
            .then(y.1.cmp(&x.1))
            .then(y.2.cmp(&x.2))
            .then(x.3.total_cmp(&y.3))
            .then(x.4.cmp(&y.4))
    });
    scored.into_iter().next().map(|t| t.5)
}

/// Decides whether `def` is a Calabi product on the sample `points`.
pub fn detect(def: &ImmersionDef, points: &[Vec<f64>], opts: &DetectOptions) -> DecompositionVerdict {
    let tol = &opts.tolerances;
    if points.is_empty() {
        return DecompositionVerdict::none("no sample points", Vec::new());
    }
    let raw = match frames_at(def, points, opts.execution) {
        Ok(f) => f,
        Err(e) => return DecompositionVerdict::none(format!("Blaschke structure unavailable: {e}"), Vec::new()),
    };
    let sphere = sphere_residual(&raw, tol.get("sphere"));
    if !sphere.pass {
        return DecompositionVerdict::none("not an affine sphere", vec![sphere]);
    }
    if !(raw[0].mean_curvature < 0.0) {
        return DecompositionVerdict::none("not hyperbolic (H ≥ 0)", vec![sphere]);
    }
    let normalized = match normalize_homothety(def, &points[0]) {
        Ok(n) => n,
        Err(e) => return DecompositionVerdict::none(format!("homothety normalization failed: {e}"), vec![sphere]),
    };
    let frames = match frames_at(&normalized.def, points, opts.execution) {
        Ok(f) => f,
        Err(e) => return DecompositionVerdict::none(format!("Blaschke structure unavailable: {e}"), vec![sphere]),
    };
    let mut evidence = vec![sphere_residual(&frames, tol.get("sphere"))];
    let orientation = CheckReport::from_residuals(
        "orientation",
        tol.get("orientation"),
        frames.iter().map(|f| (f.u.as_slice(), centroaffine_defect(f))),
    );
    let orientation_ok = orientation.pass;
    evidence.push(orientation);
    evidence.push(apolarity_residual(&frames, tol.get("apolarity")));
    let mut verdict = DecompositionVerdict::none("", Vec::new());
    verdict.orientation_ok = orientation_ok;
    verdict.scale = Some(normalized.scale);
    let finish = |mut v: DecompositionVerdict, note: &str, evidence: Vec<CheckReport>| {
        v.note = Some(note.to_string());
        v.evidence = evidence;
        v
    };
    if !orientation_ok {
        return finish(verdict, "orientation mismatch (ξ ≠ φ)", evidence);
    }
    let quadric = CheckReport::from_residuals("quadric", tol.get("quadric"), frames.iter().map(|f| (f.u.as_slice(), f.k_max())));
    if quadric.pass {
        evidence.push(quadric);
        verdict.theorem3 = Some(theorem3_from(&frames, None, tol.get("parallel_cubic"), tol.get("spectrum")));
        return finish(verdict, "K ≈ 0 (quadric)", evidence);
    }
    if def.dim() < 2 {
        return finish(verdict, "dimension 1 admits no splitting", evidence);
    }

    let lim = Limits { spectrum: tol.get("spectrum"), cross: tol.get("cross"), axis: tol.get("axis") };
    let prov = provenance_axis(def);
    let mut warm0 = Vec::new();
    if let Some(i) = prov {
        let mut e = vec![0.0; def.dim()];
        e[i] = 1.0;
        warm0.push(e);
    }
    let first = find_axes_with(&frames[0], opts.restarts, opts.seed, 0, &warm0);
    let Some(s0) = choose_first(&frames[0], &first.axes, &lim, prov) else {
        return finish(verdict, "no axis K(T,T) = λ1 T found", evidence);
    };
    let warm = vec![s0.axis.t.clone()];
    let searches = opts.execution.map(&frames[1..], |i, f| find_axes_with(f, opts.restarts, opts.seed, i as u64 + 1, &warm));

    let mut structures = vec![s0];
    let mut min_cos = 1.0f64;
    let mut continuity = vec![(frames[0].u.as_slice(), 0.0)];
    let mut prev = structures[0].axis.t.clone();
    for (f, search) in frames[1..].iter().zip(&searches) {
        let best = search
            .axes
            .iter()
            .map(|a| (h_cos(f, &a.t, &prev), a))
            .max_by(|x, y| x.0.abs().total_cmp(&y.0.abs()));
        let Some((c, a)) = best else {
            min_cos = 0.0;
            continuity.push((f.u.as_slice(), 1.0));
            structures.push(classify_spectrum(f, &structures[0].axis, Orientation::Keep));
            continue;
        };
        let a = if c < 0.0 { a.flipped() } else { a.clone() };
        min_cos = min_cos.min(c.abs());
        continuity.push((f.u.as_slice(), 1.0 - c.abs()));
        prev = a.t.clone();
        structures.push(classify_spectrum(f, &a, Orientation::Keep));
    }

    let s0 = structures[0].clone();
    let pts = || frames.iter().map(|f| f.u.as_slice());
    evidence.push(CheckReport::from_residuals("axis", lim.axis, pts().zip(&structures).map(|(u, s)| (u, s.axis.axis_residual))));
    evidence.push(CheckReport::from_residuals("relations", lim.spectrum, pts().zip(&structures).map(|(u, s)| (u, s.max_relation()))));
    if s0.pattern == Pattern::Theorem2 {
        evidence.push(CheckReport::from_residuals("cross", lim.cross, pts().zip(&structures).map(|(u, s)| (u, s.cross_residual))));
    }
    let drift = |s: &SpectralStructure| -> f64 {
        if s.pattern != s0.pattern || s.n2 != s0.n2 || s.n3 != s0.n3 {
            return f64::INFINITY;
        }
        let mut d = (s.lambda1() - s0.lambda1()).abs().max((s.lambda2 - s0.lambda2).abs());
        if s0.pattern == Pattern::Theorem2 {
            d = d.max((s.lambda3 - s0.lambda3).abs());
        }
        d
    };
    let constancy = CheckReport::from_residuals("constancy", tol.get("constancy"), pts().zip(&structures).map(|(u, s)| (u, drift(s))));
    let constancy_residual = constancy.max_residual;
    evidence.push(constancy);
    evidence.push(CheckReport::from_residuals("continuity", 1.0 - CONTINUITY_COS, continuity));

    let gradients: Vec<Option<Vec<Vec<f64>>>> =
        frames.iter().zip(&structures).map(|(f, s)| axis_gradient(f, &s.axis)).collect();
    let lemma_tol = tol.get("lemma");
    match s0.pattern {
        Pattern::Theorem1 => evidence.push(CheckReport::from_residuals(
            "lemma_tt",
            lemma_tol,
            frames.iter().zip(&structures).zip(&gradients).map(|((f, s), g)| {
                let r = g.as_ref().map_or(f64::NAN, |g| f.h_norm(&directional(g, &s.axis.t)));
                (f.u.as_slice(), r)
            }),
        )),
        Pattern::Theorem2 => evidence.push(CheckReport::from_residuals(
            "lemma_tg",
            lemma_tol,
            frames.iter().zip(&structures).zip(&gradients).map(|((f, s), g)| {
                let r = g.as_ref().map_or(f64::NAN, |g| {
                    let mut r = 0.0f64;
                    for v in s.first_block() {
                        for w in s.second_block() {
                            r = r.max(f.h_inner(&directional(g, v), w).abs()).max(f.h_inner(&directional(g, w), v).abs());
                        }
                    }
                    r
                });
                (f.u.as_slice(), r)
            }),
        )),
        Pattern::Unmatched => {}
    }

    let gate = theorem3_from(&frames, Some(&structures), tol.get("parallel_cubic"), lim.spectrum);
    let passed = |name: &str| evidence.iter().find(|r| r.name == name).is_some_and(|r| r.pass);
    let base = passed("axis") && passed("relations") && passed("constancy") && passed("continuity");
    let kind = match s0.pattern {
        Pattern::Theorem2 if base && (passed("cross") || gate.applies) => VerdictKind::PairProduct,
        Pattern::Theorem1 if base => VerdictKind::PointProduct,
        _ => VerdictKind::None,
    };
    let note = match kind {
        VerdictKind::None if s0.pattern == Pattern::Unmatched => Some("spectrum of K_T matches neither theorem"),
        VerdictKind::None if !passed("relations") || !passed("axis") => Some("spectral relations fail"),
        VerdictKind::None if !passed("constancy") => Some("eigenvalues vary across the grid"),
        VerdictKind::None if !passed("continuity") => Some("axis field is discontinuous"),
        VerdictKind::None => Some("K(V, W) ≠ 0"),
        _ => None,
    };
    let lambda = match s0.pattern {
        Pattern::Theorem1 => vec![s0.lambda1(), s0.lambda2],
        Pattern::Theorem2 => vec![s0.lambda1(), s0.lambda2, s0.lambda3],
        Pattern::Unmatched => vec![s0.lambda1()],
    };
    DecompositionVerdict {
        kind,
        n2: s0.n2,
        n3: s0.n3,
        lambda,
        spectrum: Some(s0),
        constancy_residual,
        orientation_ok,
        evidence,
        note: note.map(String::from),
        scale: Some(normalized.scale),
        theorem3: Some(gate),
        analysis: Some(Analysis {
            def: normalized.def,
            points: frames
                .into_iter()
                .zip(structures)
                .zip(gradients)
                .map(|((frame, structure), axis_gradient)| PointAnalysis { frame, structure, axis_gradient })
                .collect(),
        }),
    }
}

/// The parallel-cubic gate on `def`, running detection for the axis.
pub fn theorem3_gate(def: &ImmersionDef, points: &[Vec<f64>], opts: &DetectOptions) -> Theorem3Gate {
    detect(def, points, opts).theorem3.unwrap_or(Theorem3Gate { applies: false, reports: Vec::new(), margin: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calabi::{calabi_pair, calabi_point};
    use crate::dsl::parse_immersion;
    use crate::grid::Grid;

    fn hyperbola() -> ImmersionDef {
        parse_immersion(
            "immersion h2 { vars: s; components: (0.7071067811865476*exp(s), 0.7071067811865476*exp(-s)); }",
        )
        .unwrap()
    }

    #[test]
    fn point_product_is_detected() {
        let p = calabi_point(&hyperbola()).unwrap();
        let v = detect(&p, &Grid::cube(2, -0.3, 0.3, 3).points(), &DetectOptions::default());
        assert_eq!(v.kind, VerdictKind::PointProduct, "{:?} {:?}", v.note, v.evidence);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v.lambda[0] + r).abs() < 1e-8 && (v.lambda[1] - r).abs() < 1e-8);
        assert!(v.report("lemma_tt").unwrap().pass, "{:?}", v.report("lemma_tt"));
    }

    #[test]
    fn pair_product_is_detected() {
        let p = calabi_pair(&hyperbola(), &hyperbola()).unwrap();
        let v = detect(&p, &Grid::cube(3, -0.3, 0.3, 2).points(), &DetectOptions::default());
        assert_eq!(v.kind, VerdictKind::PairProduct, "{:?} {:?}", v.note, v.evidence);
        assert!(v.lambda[0].abs() < 1e-8 && (v.lambda[1] - 1.0).abs() < 1e-8 && (v.lambda[2] + 1.0).abs() < 1e-8);
        assert!(v.report("lemma_tg").unwrap().pass);
        assert!(v.theorem3.as_ref().unwrap().applies);
    }

    #[test]
    fn quadric_is_rejected() {
        let q = parse_immersion("immersion q { vars: u1, u2; components: (u1, u2, sqrt(1 + u1^2 + u2^2)); }").unwrap();
        let v = detect(&q, &Grid::cube(2, -0.3, 0.3, 3).points(), &DetectOptions::default());
        assert_eq!(v.kind, VerdictKind::None);
        assert_eq!(v.note.as_deref(), Some("K ≈ 0 (quadric)"));
        assert!(!v.theorem3.unwrap().applies);
    }

    #[test]
    fn paraboloid_is_not_hyperbolic() {
        let q = parse_immersion("immersion q { vars: u1, u2; components: (u1, u2, (u1^2 + u2^2)/2); }").unwrap();
        let v = detect(&q, &Grid::cube(2, -0.3, 0.3, 2).points(), &DetectOptions::default());
        assert_eq!(v.note.as_deref(), Some("not hyperbolic (H ≥ 0)"));
    }
}
