use std::path::Path;

use anyhow::{bail, Result};
use calabi_core::blaschke::{full_frame, BlaschkeFrame};
use calabi_core::calabi::{calabi_pair, calabi_point, gate_samples, product_ode_identity};
use calabi_core::checks::{
    apolarity_residual, cubic_symmetry_residual, gauss_codazzi_residual, normal_defect_residual,
    parallel_cubic_residual, reconstruction_residual, sphere_residual, unimodular_criterion, CheckReport, Tolerances,
};
use calabi_core::decompose::{
    classify_spectrum, detect, extract_pair_factors, extract_point_factor, find_axes, normalize_homothety,
    DetectOptions, FactorData, Orientation, Pattern, SpectralStructure, VerdictKind,
};
use calabi_core::dsl::{print_file, print_immersion, ImmersionDef};
use calabi_core::exec::Execution;
use serde_json::{json, Value};

use crate::output::{cloud_csv, write_atomic, Envelope};
use crate::Usage;

pub struct Settings {
    pub seed: u64,
    pub restarts: usize,
    pub tolerances: Tolerances,
}

impl Settings {
    fn detect_options(&self) -> DetectOptions {
        DetectOptions { restarts: self.restarts, seed: self.seed, tolerances: self.tolerances.clone(), ..Default::default() }
    }
}

fn frames(def: &ImmersionDef, points: &[Vec<f64>]) -> Result<Vec<BlaschkeFrame>> {
    let frames = Execution::default().map(points, |_, u| full_frame(def, u));
    Ok(frames.into_iter().collect::<Result<Vec<_>, _>>()?)
}

fn parse_point(text: &str, dim: usize) -> Result<Vec<f64>> {
    let p = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Usage(format!("bad coordinate '{s}' in --at"))))
        .collect::<Result<Vec<_>, _>>()?;
    if p.len() != dim {
        bail!(Usage(format!("--at has {} coordinates, immersion has {dim} variables", p.len())));
    }
    Ok(p)
}

pub fn analyze(env: &mut Envelope, def: &ImmersionDef, at: &str, s: &Settings) -> Result<()> {
    let u = parse_point(at, def.dim())?;
    let f = full_frame(def, &u)?;
    let one = std::slice::from_ref(&f);
    let tol = &s.tolerances;
    env.push_reports(&[
        reconstruction_residual(one, tol.get("reconstruction")),
        normal_defect_residual(one, tol.get("normal_defect")),
        cubic_symmetry_residual(one, tol.get("cubic_symmetry")),
        apolarity_residual(one, tol.get("apolarity")),
    ]);
    let search = find_axes(&f, s.restarts, s.seed);
    let limit = tol.get("spectrum");
    let best = search
        .axes
        .iter()
        .map(|a| classify_spectrum(&f, a, Orientation::Auto))
        .min_by(|a, b| rank(a, limit).partial_cmp(&rank(b, limit)).unwrap_or(std::cmp::Ordering::Equal));
    let axis = best.map(|b| {
        json!({
            "T": b.axis.t,
            "lambda1": b.axis.lambda1,
            "pattern": b.pattern,
            "spectrum": b.clusters.iter().map(|c| json!({"eigenvalue": c.eigenvalue, "multiplicity": c.multiplicity})).collect::<Vec<_>>(),
            "relation_residuals": b.relation_residuals,
            "cross_residual": b.cross_residual,
        })
    });
    env.frame = Some(json!({
        "u": f.u,
        "position": f.position,
        "h": f.h.rows(),
        "xi": f.xi,
        "mean_curvature": f.mean_curvature,
        "k_max": f.k_max(),
        "k_norm": cubic_norm(&f),
        "axes_found": search.axes.len(),
        "degenerate": search.degenerate,
        "best_axis": axis,
    }));
    Ok(())
}

/// Valid structures first, then two clusters before one, then the smaller relation residual.
fn rank(s: &SpectralStructure, limit: f64) -> (bool, bool, f64) {
    let r = s.max_relation();
    let valid = s.pattern != Pattern::Unmatched && r <= limit && s.cross_residual <= limit;
    (!valid, s.pattern != Pattern::Theorem2, if r.is_nan() { f64::INFINITY } else { r })
}

/// `√(C_ijk C^ijk)` with indices raised by `h`.
fn cubic_norm(f: &BlaschkeFrame) -> f64 {
    let n = f.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            s += f.c[i][j][k] * f.c[a][b][c] * f.h_inv[i][a] * f.h_inv[j][b] * f.h_inv[k][c];
                        }
                    }
                }
            }
        }
    }
    s.max(0.0).sqrt()
}

pub fn check(env: &mut Envelope, def: &ImmersionDef, points: &[Vec<f64>], s: &Settings) -> Result<()> {
    let tol = &s.tolerances;
    let raw = frames(def, points)?;
    let sphere = sphere_residual(&raw, tol.get("sphere"));
    let h0 = raw[0].mean_curvature;
    let unit = if sphere.pass && h0 < 0.0 { normalize_homothety(def, &points[0]).ok().map(|n| n.def) } else { None };
    let mut reports = vec![sphere, apolarity_residual(&raw, tol.get("apolarity"))];
    let missing = |name: &str| CheckReport::single(name, tol.get(name), &points[0], f64::NAN);
    match &unit {
        Some(unit) => {
            let fr = frames(unit, points)?;
            let (g, c) = gauss_codazzi_residual(&fr, tol.get("gauss"), tol.get("codazzi"))?;
            reports.extend([g, c, unimodular_criterion(unit, points, tol.get("unimodular"))?]);
            reports.push(parallel_cubic_residual(&fr, tol.get("parallel_cubic")));
        }
        None => {
            reports.extend([missing("gauss"), missing("codazzi"), missing("unimodular")]);
            reports.push(parallel_cubic_residual(&raw, tol.get("parallel_cubic")));
        }
    }
    if def.provenance().is_some() {
        reports.push(product_ode_identity(def, points, tol.get("ode"))?);
    }
    env.push_reports(&reports);
    Ok(())
}

pub fn construct(env: &mut Envelope, pair: bool, factors: &[ImmersionDef], out: &Path, s: &Settings) -> Result<()> {
    let product = match (pair, factors) {
        (false, [a]) => calabi_point(a),
        (true, [a, b]) => calabi_pair(a, b),
        _ => bail!(Usage(format!("{} takes {} factor(s)", if pair { "pair" } else { "point" }, if pair { 2 } else { 1 }))),
    };
    let product = match product {
        Ok(p) => p,
        Err(e) => {
            env.push_reports(&[CheckReport::single("factor_gate", 0.0, &[], f64::INFINITY)]);
            eprintln!("calabi: {e}");
            return Ok(());
        }
    };
    let samples = gate_samples(product.dim());
    let fr = frames(&product, &samples)?;
    env.push_reports(&[
        sphere_residual(&fr, s.tolerances.get("sphere")),
        apolarity_residual(&fr, s.tolerances.get("apolarity")),
    ]);
    let mut text = print_immersion(&product);
    text.push('\n');
    write_atomic(out, text.as_bytes())?;
    env.outputs.push(out.display().to_string());
    Ok(())
}

pub fn detect_cmd(env: &mut Envelope, def: &ImmersionDef, points: &[Vec<f64>], s: &Settings) -> Result<()> {
    let v = detect(def, points, &s.detect_options());
    env.push_reports(&v.evidence);
    if v.kind == VerdictKind::None {
        env.push_reports(&[CheckReport::single("product", 0.0, &points[0], f64::INFINITY)]);
    }
    env.verdict = Some(serde_json::to_value(&v)?);
    Ok(())
}

fn factors_json(fd: &FactorData) -> Result<Value> {
    let mut v = serde_json::to_value(fd)?;
    if let Value::Object(m) = &mut v {
        m.remove("phi2_samples");
        m.remove("phi3_samples");
        let defs = fd.factor_defs.as_ref().map(|d| d.iter().map(print_immersion).collect::<Vec<_>>());
        m.insert("factor_defs".into(), json!(defs));
    }
    Ok(v)
}

pub fn extract(env: &mut Envelope, def: &ImmersionDef, points: &[Vec<f64>], dir: &Path, s: &Settings) -> Result<()> {
    let v = detect(def, points, &s.detect_options());
    env.verdict = Some(serde_json::to_value(&v)?);
    let fd = match v.kind {
        VerdictKind::PairProduct => extract_pair_factors(&v, &s.tolerances)?,
        VerdictKind::PointProduct => extract_point_factor(&v, &s.tolerances)?,
        VerdictKind::None => {
            env.push_reports(&v.evidence);
            env.push_reports(&[CheckReport::single("product", 0.0, &points[0], f64::INFINITY)]);
            return Ok(());
        }
    };
    env.push_reports(&fd.reports);
    env.factors = Some(factors_json(&fd)?);
    let mut files: Vec<(String, Vec<u8>)> =
        vec![("phi2.csv".into(), cloud_csv(&fd.phi2_samples)?), ("phi3.csv".into(), cloud_csv(&fd.phi3_samples)?)];
    if let Some(defs) = &fd.factor_defs {
        files.push(("factors.immersion".into(), print_file(defs).into_bytes()));
    }
    for (name, bytes) in files {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        env.outputs.push(path.display().to_string());
    }
    let path = dir.join("factors.json");
    env.outputs.push(path.display().to_string());
    write_atomic(&path, env.to_json()?.as_bytes())?;
    Ok(())
}
