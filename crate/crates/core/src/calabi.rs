//! Calabi products of hyperbolic affine spheres.

use serde::Serialize;

use crate::blaschke::{centroaffine_defect, full_frame};
use crate::checks::CheckReport;
use crate::dsl::{build_scaled_embedding, Block, BlockWeight, DslError, ImmersionDef, ProductKind, Provenance};
use crate::jet::eval_jets;

pub const AXIS_VAR: &str = "t";
const GATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalabiError {
    #[error("factor {factor} is not a normalized hyperbolic affine sphere: {reason}")]
    Gate { factor: String, reason: String },
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("definition {0} carries no product provenance")]
    NoProvenance(String),
    #[error("gauge constants violate the volume condition: product = {0}")]
    Gauge(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPrediction {
    pub kind: ProductKind,
    pub n2: usize,
    pub n3: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    /// In the point case this is `−1/λ2`, the rate of the (zero-dimensional) point block.
    pub lambda3: f64,
}

pub fn predicted_spectrum(kind: ProductKind, n2: usize, n3: usize) -> SpectrumPrediction {
    let n3 = if kind == ProductKind::Point { 0 } else { n3 };
    let (_, lambda2, lambda3) = product_constants(n2, n3);
    SpectrumPrediction { kind, n2, n3, lambda1: lambda2 + lambda3, lambda2, lambda3 }
}

/// `(coefficient, rate_first, rate_second)` of the product with block sizes `n2`, `n3`.
///
/// The shared coefficient solves `c^{2(a+b)} = a^a b^b / (a+b)^{a+b}` with `a = n2+1`, `b = n3+1`,
/// the unimodular condition for `H = −1`.
pub fn product_constants(n2: usize, n3: usize) -> (f64, f64, f64) {
    let (a, b) = ((n2 + 1) as f64, (n3 + 1) as f64);
    let log_c = (a * a.ln() + b * b.ln()) / (2.0 * (a + b)) - 0.5 * (a + b).ln();
    (log_c.exp(), (b / a).sqrt(), -(a / b).sqrt())
}

/// `√((n2+1)(n3+1))/(n2+n3+2)`, the coefficient of the closed-form display. Its products have `H ≠ −1`
/// unless rescaled.
pub fn display_coefficient(n2: usize, n3: usize) -> f64 {
    (((n2 + 1) * (n3 + 1)) as f64).sqrt() / (n2 + n3 + 2) as f64
}

/// Sample points used by the factor gate: the origin and two diagonal points.
pub fn gate_samples(dim: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; dim], vec![0.2; dim], vec![-0.2; dim]]
}

/// Checks that `def` is an affine sphere with `H = −1` and `ξ = φ` at `samples`.
pub fn verify_factor(def: &ImmersionDef, samples: &[Vec<f64>]) -> Result<(), CalabiError> {
    let fail = |reason: String| CalabiError::Gate { factor: def.name().to_string(), reason };
    for u in samples {
        let f = full_frame(def, u).map_err(|e| fail(e.to_string()))?;
        if (f.mean_curvature + 1.0).abs() > GATE_TOL {
            return Err(fail(format!("H = {} at {u:?}", f.mean_curvature)));
        }
        let n = f.dim();
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { f.mean_curvature } else { 0.0 };
                if (f.s[i][j] - target).abs() > GATE_TOL {
                    return Err(fail(format!("shape operator is not scalar at {u:?}")));
                }
            }
        }
        if centroaffine_defect(&f) > GATE_TOL {
            return Err(fail(format!("affine normal differs from the position vector at {u:?}")));
        }
    }
    Ok(())
}

fn check_gauge(d1: f64, d2: f64, n2: usize, n3: usize) -> Result<(), CalabiError> {
    let p = d1.powi(n2 as i32 + 1) * d2.powi(n3 as i32 + 1);
    if (p - 1.0).abs() > 1e-12 {
        return Err(CalabiError::Gauge(p));
    }
    Ok(())
}

/// `c · (e^{t/√n} ψ1(p), e^{−√n t})` with `c^{2(n+1)} = n^n/(n+1)^{n+1}`.
pub fn calabi_point(psi1: &ImmersionDef) -> Result<ImmersionDef, CalabiError> {
    calabi_point_gauged(psi1, 1.0, 1.0)
}

/// Point product with the blocks scaled by `d1`, `d2`, where `d1^n d2 = 1`.
pub fn calabi_point_gauged(psi1: &ImmersionDef, d1: f64, d2: f64) -> Result<ImmersionDef, CalabiError> {
    verify_factor(psi1, &gate_samples(psi1.dim()))?;
    let n2 = psi1.dim();
    check_gauge(d1, d2, n2, 0)?;
    let (c, r1, r2) = product_constants(n2, 0);
    let def = build_scaled_embedding(
        &format!("point_{}", psi1.name()),
        &[Block::Factor(psi1), Block::Point],
        &[BlockWeight { coefficient: c * d1, rate: r1 }, BlockWeight { coefficient: c * d2, rate: r2 }],
        AXIS_VAR,
        None,
    )?;
    Ok(def.with_provenance(Provenance {
        kind: ProductKind::Point,
        n2,
        n3: 0,
        axis: AXIS_VAR.to_string(),
        factors: vec![psi1.name().to_string()],
    })?)
}

/// `c · (e^{λ2 t} ψ1(p), e^{λ3 t} ψ2(q))` with the standard constants.
pub fn calabi_pair(psi1: &ImmersionDef, psi2: &ImmersionDef) -> Result<ImmersionDef, CalabiError> {
    calabi_pair_gauged(psi1, psi2, 1.0, 1.0)
}

/// Pair product with the blocks scaled by `d1`, `d2`, where `d1^{n2+1} d2^{n3+1} = 1`.
pub fn calabi_pair_gauged(
    psi1: &ImmersionDef,
    psi2: &ImmersionDef,
    d1: f64,
    d2: f64,
) -> Result<ImmersionDef, CalabiError> {
    verify_factor(psi1, &gate_samples(psi1.dim()))?;
    verify_factor(psi2, &gate_samples(psi2.dim()))?;
    let (n2, n3) = (psi1.dim(), psi2.dim());
    check_gauge(d1, d2, n2, n3)?;
    let (c, r1, r2) = product_constants(n2, n3);
    let def = build_scaled_embedding(
        &format!("pair_{}_{}", psi1.name(), psi2.name()),
        &[Block::Factor(psi1), Block::Factor(psi2)],
        &[BlockWeight { coefficient: c * d1, rate: r1 }, BlockWeight { coefficient: c * d2, rate: r2 }],
        AXIS_VAR,
        None,
    )?;
    Ok(def.with_provenance(Provenance {
        kind: ProductKind::Pair,
        n2,
        n3,
        axis: AXIS_VAR.to_string(),
        factors: vec![psi1.name().to_string(), psi2.name().to_string()],
    })?)
}

/// `‖ψ_tt − a ψ_t − ψ‖_∞` with `a = (n3 − n2)/√((n2+1)(n3+1))` along the product axis.
pub fn product_ode_identity(def: &ImmersionDef, points: &[Vec<f64>], tol: f64) -> Result<CheckReport, CalabiError> {
    let p = def.provenance().ok_or_else(|| CalabiError::NoProvenance(def.name().to_string()))?;
    let axis = def.var_index(&p.axis).ok_or_else(|| CalabiError::NoProvenance(def.name().to_string()))?;
    let n3 = if p.kind == ProductKind::Point { 0 } else { p.n3 };
    let a = (n3 as f64 - p.n2 as f64) / (((p.n2 + 1) * (n3 + 1)) as f64).sqrt();
    let mut residuals = Vec::with_capacity(points.len());
    for u in points {
        let jets = eval_jets(def, u, 2).map_err(|e| CalabiError::Gate { factor: def.name().into(), reason: e.to_string() })?;
        let mut alpha = vec![0u8; def.dim()];
        alpha[axis] = 2;
        let mut r = 0.0f64;
        for j in &jets {
            let psi_t = j.coeffs()[1 + axis];
            let psi_tt = j.derivative(&alpha);
            r = r.max((psi_tt - a * psi_t - j.value()).abs());
        }
        residuals.push((u.as_slice(), r));
    }
    Ok(CheckReport::from_residuals("ode", tol, residuals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_immersion, print_immersion};

    fn hyperbola() -> ImmersionDef {
        parse_immersion(
            "immersion h2 { vars: s; components: (0.7071067811865476*exp(s), 0.7071067811865476*exp(-s)); }",
        )
        .unwrap()
    }

    #[test]
    fn predicted_values() {
        let p = predicted_spectrum(ProductKind::Pair, 1, 1);
        assert_eq!((p.lambda1, p.lambda2, p.lambda3), (0.0, 1.0, -1.0));
        let p = predicted_spectrum(ProductKind::Pair, 1, 2);
        assert!((p.lambda2 - 1.224_744_871_391_589).abs() < 1e-12);
        assert!((p.lambda3 + 0.816_496_580_927_726).abs() < 1e-12);
        assert!((p.lambda1 - 0.408_248_290_463_863).abs() < 1e-12);
        assert!((p.lambda2 * p.lambda3 + 1.0).abs() < 1e-12);
        assert!((p.lambda1 + p.lambda2 + 2.0 * p.lambda3).abs() < 1e-12);
        let p = predicted_spectrum(ProductKind::Point, 1, 0);
        assert!((p.lambda1 + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((p.lambda2 - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((1.0 + p.lambda1 * p.lambda2 - p.lambda2 * p.lambda2).abs() < 1e-12);
    }

    #[test]
    fn pair_constants_and_volume_condition() {
        let (c, r1, r2) = product_constants(1, 1);
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15 && (r1, r2) == (1.0, -1.0));
        let (c, r1, r2) = product_constants(1, 2);
        assert!((c.powi(10) - 2f64.powi(2) * 3f64.powi(3) / 5f64.powi(5)).abs() < 1e-14);
        assert!((r1 - 1.224_744_871_391_589).abs() < 1e-12 && (r2 + 0.816_496_580_927_726).abs() < 1e-12);
        let (c, _, _) = product_constants(1, 0);
        assert!((c.powi(6) - 4.0 / 27.0).abs() < 1e-14);
        assert_eq!(display_coefficient(1, 1), 0.5);
    }

    #[test]
    fn point_product_shape() {
        let p = calabi_point(&hyperbola()).unwrap();
        assert_eq!(p.vars(), &["t", "s"].map(String::from));
        assert_eq!(p.ambient_dim(), 3);
        let text = print_immersion(&p);
        assert!(text.starts_with("#@product(kind=point, n2=1, n3=0, axis=t, factors=h2)\n"), "{text}");
        assert_eq!(parse_immersion(&text).unwrap(), p);
        let (c, _, _) = product_constants(1, 0);
        let v = p.eval(&[0.0, 0.0]);
        assert!((v[2] - c).abs() < 1e-15);
    }

    #[test]
    fn products_have_unit_curvature() {
        let p = calabi_point(&hyperbola()).unwrap();
        let q = calabi_pair(&hyperbola(), &p).unwrap();
        for (def, u) in [(&p, vec![0.1, -0.2]), (&q, vec![0.1, 0.2, -0.1, 0.3])] {
            let f = full_frame(def, &u).unwrap();
            assert!((f.mean_curvature + 1.0).abs() < 1e-10, "{}", f.mean_curvature);
        }
    }

    #[test]
    fn display_coefficient_misses_unit_curvature() {
        let def = build_scaled_embedding(
            "c",
            &[Block::Factor(&hyperbola()), Block::Factor(&hyperbola())],
            &[BlockWeight { coefficient: 0.5, rate: 1.0 }, BlockWeight { coefficient: 0.5, rate: -1.0 }],
            AXIS_VAR,
            None,
        )
        .unwrap();
        let f = full_frame(&def, &[0.0, 0.0, 0.0]).unwrap();
        assert!((f.mean_curvature + 2f64.powf(0.8)).abs() < 1e-10, "{}", f.mean_curvature);
    }

    #[test]
    fn gate_rejects_unnormalized_factor() {
        let bad = parse_immersion("immersion h { vars: s; components: (exp(s), exp(-s)); }").unwrap();
        assert!(matches!(calabi_point(&bad), Err(CalabiError::Gate { .. })));
    }

    #[test]
    fn ode_identity_needs_provenance() {
        assert!(matches!(product_ode_identity(&hyperbola(), &[vec![0.0]], 1e-9), Err(CalabiError::NoProvenance(_))));
        let p = calabi_pair(&hyperbola(), &hyperbola()).unwrap();
        let r = product_ode_identity(&p, &[vec![0.1, 0.2, -0.3]], 1e-10).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn gauge_condition_is_enforced() {
        assert!(matches!(calabi_pair_gauged(&hyperbola(), &hyperbola(), 2.0, 1.0), Err(CalabiError::Gauge(_))));
        assert!(calabi_pair_gauged(&hyperbola(), &hyperbola(), 2.0, 0.5).is_ok());
    }
}
