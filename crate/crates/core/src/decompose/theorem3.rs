use serde::Serialize;

use crate::blaschke::BlaschkeFrame;
use crate::checks::{parallel_cubic_residual, CheckReport};

use super::spectrum::{Pattern, SpectralStructure};

pub const MARGIN: f64 = 1e-3;

/// Outcome of the parallel-cubic route to the product structure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem3Gate {
    pub applies: bool,
    pub reports: Vec<CheckReport>,
    /// `min(|λ2 − λ3|, |2λ2 − λ1|, |λ1 − 2λ3|)`, absent without a two-cluster axis.
    pub margin: Option<f64>,
}

/// `(λ1 − 2λ)(−1 − λ1λ + λ²)` for `λ ∈ {λ2, λ3}`.
pub fn derived_relation(lambda1: f64, lambda: f64) -> f64 {
    (lambda1 - 2.0 * lambda) * (-1.0 - lambda1 * lambda + lambda * lambda)
}

/// Max over `i, j, k, m` of `|R̂(e_i,e_j)K(e_k,e_m) − K(R̂(e_i,e_j)e_k,e_m) − K(e_k,R̂(e_i,e_j)e_m)|`.
pub fn curvature_derivation_residual(f: &BlaschkeFrame) -> f64 {
    let n = f.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let a = |l: usize, k: usize| f.rhat[i][j][k][l];
            for k in 0..n {
                for m in 0..n {
                    for l in 0..n {
                        let mut r = 0.0;
                        for p in 0..n {
                            r += a(l, p) * f.k[p][k][m] - a(p, k) * f.k[l][p][m] - a(p, m) * f.k[l][k][p];
                        }
                        worst = worst.max(r.abs());
                    }
                }
            }
        }
    }
    worst
}

/// Checks `∇̂K = 0`, its curvature consequence, and the spectral relations it forces.
///
/// `structures` pairs with `frames`; pass `None` when no axis was found.
pub fn theorem3_from(
    frames: &[BlaschkeFrame],
    structures: Option<&[SpectralStructure]>,
    parallel_tol: f64,
    tol: f64,
) -> Theorem3Gate {
    let parallel = parallel_cubic_residual(frames, parallel_tol);
    let derivation = CheckReport::from_residuals(
        "curvature_derivation",
        tol,
        frames.iter().map(|f| (f.u.as_slice(), curvature_derivation_residual(f))),
    );
    let mut reports = vec![parallel, derivation];
    let two_cluster = structures.filter(|s| !s.is_empty() && s.iter().all(|x| x.pattern == Pattern::Theorem2));
    let Some(structures) = two_cluster else {
        return Theorem3Gate { applies: false, reports, margin: None };
    };
    let pts = || frames.iter().map(|f| f.u.as_slice());
    reports.push(CheckReport::from_residuals(
        "derived_lambda2",
        tol,
        pts().zip(structures).map(|(u, s)| (u, derived_relation(s.lambda1(), s.lambda2).abs())),
    ));
    reports.push(CheckReport::from_residuals(
        "derived_lambda3",
        tol,
        pts().zip(structures).map(|(u, s)| (u, derived_relation(s.lambda1(), s.lambda3).abs())),
    ));
    reports.push(CheckReport::from_residuals("cross", tol, pts().zip(structures).map(|(u, s)| (u, s.cross_residual))));
    let margin = structures
        .iter()
        .map(|s| {
            let (l1, l2, l3) = (s.lambda1(), s.lambda2, s.lambda3);
            (l2 - l3).abs().min((2.0 * l2 - l1).abs()).min((l1 - 2.0 * l3).abs())
        })
        .fold(f64::INFINITY, f64::min);
    let applies = reports.iter().all(|r| r.pass) && margin >= MARGIN;
    Theorem3Gate { applies, reports, margin: Some(margin) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_relation_values() {
        assert_eq!(derived_relation(0.0, 1.0), 0.0);
        assert_eq!(derived_relation(0.0, -1.0), 0.0);
        let (l2, l3) = (1.5f64.sqrt(), -(2.0f64 / 3.0).sqrt());
        assert!(derived_relation(l2 + l3, l2).abs() < 1e-15);
        assert!(derived_relation(l2 + l3, l3).abs() < 1e-15);
        assert!(derived_relation(0.5, 1.0).abs() > 0.1);
    }
}
