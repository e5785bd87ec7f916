//! Named residuals for the structure equations of equiaffine geometry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::blaschke::BlaschkeFrame;
use crate::dsl::ImmersionDef;
use crate::jet::{eval_jets, JetError};
use crate::numerics::{self, cholesky};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub samples: usize,
    pub worst_point: Vec<f64>,
}

impl CheckReport {
    /// Max-reduce `(point, residual)` pairs. A NaN residual is reported as the worst and fails.
    pub fn from_residuals<'a>(
        name: &str,
        tolerance: f64,
        residuals: impl IntoIterator<Item = (&'a [f64], f64)>,
    ) -> CheckReport {
        let mut worst = f64::NEG_INFINITY;
        let mut worst_point = Vec::new();
        let mut samples = 0;
        for (p, r) in residuals {
            samples += 1;
            if r.is_nan() || (!worst.is_nan() && r > worst) {
                worst = r;
                worst_point = p.to_vec();
            }
        }
        if samples == 0 {
            worst = 0.0;
        }
        CheckReport {
            name: name.to_string(),
            max_residual: worst,
            tolerance,
            pass: worst <= tolerance,
            samples,
            worst_point,
        }
    }

    pub fn single(name: &str, tolerance: f64, point: &[f64], residual: f64) -> CheckReport {
        CheckReport::from_residuals(name, tolerance, [(point, residual)])
    }
}

/// Per-check tolerances with overrides by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Default for Tolerances {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        for (k, v) in [
            ("sphere", 1e-6),
            ("apolarity", 1e-8),
            ("gauss", 1e-6),
            ("codazzi", 1e-6),
            ("unimodular", 1e-8),
            ("parallel_cubic", 1e-6),
            ("reconstruction", 1e-9),
            ("normal_defect", 1e-8),
            ("cubic_symmetry", 1e-9),
            ("ode", 1e-9),
            ("orientation", 1e-8),
            ("quadric", 1e-7),
            ("spectrum", 1e-6),
            ("cross", 1e-6),
            ("constancy", 1e-6),
            ("extraction", 1e-6),
            ("lemma", 1e-6),
            ("axis", 1e-8),
            ("rate", 1e-8),
            ("drift", 1e-8),
        ] {
            m.insert(k.to_string(), v);
        }
        Tolerances(m)
    }
}

impl Tolerances {
    pub fn get(&self, name: &str) -> f64 {
        self.0.get(name).copied().unwrap_or(1e-6)
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CheckError {
    #[error("requires H = -1 (found H = {h} at {point:?})")]
    RequiresUnitCurvature { h: f64, point: Vec<f64> },
    #[error("position vector is tangent to the surface at {0:?}")]
    NotTransversal(Vec<f64>),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("not a hypersurface")]
    NotHypersurface,
    #[error("no sample points")]
    Empty,
}

pub fn sphere_residual(frames: &[BlaschkeFrame], tol: f64) -> CheckReport {
    let h0 = frames.first().map_or(0.0, |f| f.mean_curvature);
    CheckReport::from_residuals(
        "sphere",
        tol,
        frames.iter().map(|f| {
            let n = f.dim();
            let mut r = (f.mean_curvature - h0).abs();
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { f.mean_curvature } else { 0.0 };
                    r = r.max((f.s[i][j] - target).abs());
                }
            }
            (f.u.as_slice(), r)
        }),
    )
}

/// Columns of `L⁻ᵀ` where `h = L Lᵀ`: an h-orthonormal coordinate basis.
pub fn h_orthonormal_basis(frame: &BlaschkeFrame) -> Vec<Vec<f64>> {
    let n = frame.dim();
    let l = cholesky(&frame.h).expect("affine metric is positive definite");
    // solve Lᵀ e_b = unit_b
    (0..n)
        .map(|b| {
            let mut e = vec![0.0; n];
            for i in (0..n).rev() {
                let mut s = if i == b { 1.0 } else { 0.0 };
                for k in i + 1..n {
                    s -= l[k][i] * e[k];
                }
                e[i] = s / l[i][i];
            }
            e
        })
        .collect()
}

pub fn apolarity_residual(frames: &[BlaschkeFrame], tol: f64) -> CheckReport {
    CheckReport::from_residuals(
        "apolarity",
        tol,
        frames.iter().map(|f| {
            let r = h_orthonormal_basis(f)
                .iter()
                .map(|e| {
                    let op = f.k_operator(e);
                    (0..f.dim()).map(|i| op[i][i]).sum::<f64>().abs()
                })
                .fold(0.0, f64::max);
            (f.u.as_slice(), r)
        }),
    )
}

pub fn require_unit_curvature(frames: &[BlaschkeFrame]) -> Result<(), CheckError> {
    for f in frames {
        if (f.mean_curvature + 1.0).abs() > 1e-6 {
            return Err(CheckError::RequiresUnitCurvature { h: f.mean_curvature, point: f.u.clone() });
        }
    }
    Ok(())
}

fn gauss_at(f: &BlaschkeFrame) -> f64 {
    let n = f.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = f.rhat[i][j][k][l];
                    if l == i {
                        v += f.h.get(j, k);
                    }
                    if l == j {
                        v -= f.h.get(i, k);
                    }
                    for m in 0..n {
                        v += f.k[l][i][m] * f.k[m][j][k] - f.k[l][j][m] * f.k[m][i][k];
                    }
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    worst
}

fn codazzi_at(f: &BlaschkeFrame) -> f64 {
    let n = f.dim();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    worst = worst.max((f.nabla_k[i][j][k][l] - f.nabla_k[j][i][k][l]).abs());
                }
            }
        }
    }
    worst
}

/// Gauss and Codazzi equations in the `H = −1` gauge.
pub fn gauss_codazzi_residual(
    frames: &[BlaschkeFrame],
    gauss_tol: f64,
    codazzi_tol: f64,
) -> Result<(CheckReport, CheckReport), CheckError> {
    require_unit_curvature(frames)?;
    let gauss = CheckReport::from_residuals("gauss", gauss_tol, frames.iter().map(|f| (f.u.as_slice(), gauss_at(f))));
    let codazzi =
        CheckReport::from_residuals("codazzi", codazzi_tol, frames.iter().map(|f| (f.u.as_slice(), codazzi_at(f))));
    Ok((gauss, codazzi))
}

pub fn parallel_cubic_residual(frames: &[BlaschkeFrame], tol: f64) -> CheckReport {
    CheckReport::from_residuals(
        "parallel_cubic",
        tol,
        frames.iter().map(|f| {
            let r = f.nabla_k.iter().flatten().flatten().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            (f.u.as_slice(), r)
        }),
    )
}

pub fn reconstruction_residual(frames: &[BlaschkeFrame], tol: f64) -> CheckReport {
    CheckReport::from_residuals("reconstruction", tol, frames.iter().map(|f| (f.u.as_slice(), f.reconstruction_residual)))
}

pub fn normal_defect_residual(frames: &[BlaschkeFrame], tol: f64) -> CheckReport {
    CheckReport::from_residuals("normal_defect", tol, frames.iter().map(|f| (f.u.as_slice(), f.normal_defect)))
}

/// Total symmetry of the cubic form.
pub fn cubic_symmetry_residual(frames: &[BlaschkeFrame], tol: f64) -> CheckReport {
    CheckReport::from_residuals(
        "cubic_symmetry",
        tol,
        frames.iter().map(|f| {
            let n = f.dim();
            let mut r = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        r = r.max((f.c[i][j][k] - f.c[i][k][j]).abs()).max((f.c[i][j][k] - f.c[j][i][k]).abs());
                    }
                }
            }
            (f.u.as_slice(), r)
        }),
    )
}

/// `|det(∂1ψ, …, ∂nψ, ψ)² − det g̃_ψ|` with `ψ` as its own transversal.
pub fn unimodular_criterion(def: &ImmersionDef, points: &[Vec<f64>], tol: f64) -> Result<CheckReport, CheckError> {
    let n = def.dim();
    if def.ambient_dim() != n + 1 {
        return Err(CheckError::NotHypersurface);
    }
    if points.is_empty() {
        return Err(CheckError::Empty);
    }
    let mut residuals = Vec::with_capacity(points.len());
    for p in points {
        let jets = eval_jets(def, p, 2)?;
        let psi: Vec<f64> = jets.iter().map(|j| j.value()).collect();
        let d1: Vec<Vec<f64>> = (0..n).map(|i| jets.iter().map(|j| j.coeffs()[1 + i]).collect()).collect();
        let a: Vec<Vec<f64>> = (0..=n)
            .map(|r| {
                let mut row: Vec<f64> = (0..n).map(|k| d1[k][r]).collect();
                row.push(psi[r]);
                row
            })
            .collect();
        let d = numerics::det(&a);
        let scale: f64 = d1.iter().map(|v| numerics::norm(v)).product::<f64>() * numerics::norm(&psi);
        if d.abs() <= 1e-12 * scale {
            return Err(CheckError::NotTransversal(p.clone()));
        }
        let mut g = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                let second: Vec<f64> = jets.iter().map(|j| j.partial(i).partial(k).value()).collect();
                let x = numerics::solve(&a, &second).map_err(|_| CheckError::NotTransversal(p.clone()))?;
                g[i][k] = x[n];
            }
        }
        residuals.push((p.as_slice(), (d * d - numerics::det(&g)).abs()));
    }
    Ok(CheckReport::from_residuals("unimodular", tol, residuals))
}
