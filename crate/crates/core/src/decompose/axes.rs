use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::blaschke::BlaschkeFrame;
use crate::checks::h_orthonormal_basis;
use crate::numerics::{self, dot, fix_sign, norm};

pub const DEFAULT_RESTARTS: usize = 64;
const ACCEPT: f64 = 1e-8;
const MAX_ITER: usize = 100;
const QUADRIC_K: f64 = 1e-7;

/// Solution of `K(T, T) = λ1 T` with `h(T, T) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateAxis {
    /// Coordinate components of `T`.
    #[serde(rename = "T")]
    pub t: Vec<f64>,
    pub lambda1: f64,
    pub axis_residual: f64,
}

impl CandidateAxis {
    pub fn flipped(&self) -> CandidateAxis {
        CandidateAxis { t: self.t.iter().map(|x| -x).collect(), lambda1: -self.lambda1, axis_residual: self.axis_residual }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisSearch {
    pub axes: Vec<CandidateAxis>,
    /// `K ≈ 0`: every direction solves the axis equation.
    pub degenerate: bool,
}

/// Cubic form in an h-orthonormal frame, `kt[c][a][b] = h(K(e_a, e_b), e_c)`.
pub(crate) struct OrthoFrame {
    pub basis: Vec<Vec<f64>>,
    pub kt: Vec<Vec<Vec<f64>>>,
}

impl OrthoFrame {
    pub fn new(frame: &BlaschkeFrame) -> OrthoFrame {
        let basis = h_orthonormal_basis(frame);
        let n = basis.len();
        let mut kt = vec![vec![vec![0.0; n]; n]; n];
        for a in 0..n {
            for b in 0..n {
                let kab = frame.k_apply(&basis[a], &basis[b]);
                for c in 0..n {
                    kt[c][a][b] = frame.h_inner(&kab, &basis[c]);
                }
            }
        }
        OrthoFrame { basis, kt }
    }

    fn k_yy(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        (0..n).map(|c| (0..n).map(|a| (0..n).map(|b| self.kt[c][a][b] * y[a] * y[b]).sum::<f64>()).sum()).collect()
    }

    fn k_y(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let n = y.len();
        (0..n).map(|c| (0..n).map(|b| (0..n).map(|a| self.kt[c][a][b] * y[a]).sum()).collect()).collect()
    }

    pub fn to_coordinates(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        (0..n).map(|i| (0..n).map(|a| y[a] * self.basis[a][i]).sum()).collect()
    }

    fn residual(&self, y: &[f64], mu: f64) -> f64 {
        let k = self.k_yy(y);
        norm(&k.iter().zip(y).map(|(a, b)| a - mu * b).collect::<Vec<_>>())
    }

    fn max_abs(&self) -> f64 {
        self.kt.iter().flatten().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn equations(of: &OrthoFrame, y: &[f64], mu: f64) -> Vec<f64> {
    let mut f: Vec<f64> = of.k_yy(y).iter().zip(y).map(|(k, v)| k - mu * v).collect();
    f.push(0.5 * (dot(y, y) - 1.0));
    f
}

fn newton(of: &OrthoFrame, start: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = start.len();
    let s = norm(start);
    if !(s > 0.0) {
        return None;
    }
    let mut y: Vec<f64> = start.iter().map(|x| x / s).collect();
    let mut mu = dot(&y, &of.k_yy(&y));
    let mut fval = equations(of, &y, mu);
    for _ in 0..MAX_ITER {
        let fnorm = norm(&fval);
        if fnorm <= 1e-14 {
            break;
        }
        let ky = of.k_y(&y);
        let mut jac = vec![vec![0.0; n + 1]; n + 1];
        for r in 0..n {
            for c in 0..n {
                jac[r][c] = 2.0 * ky[r][c] - if r == c { mu } else { 0.0 };
            }
            jac[r][n] = -y[r];
            jac[n][r] = y[r];
        }
        let rhs: Vec<f64> = fval.iter().map(|x| -x).collect();
        let step = numerics::solve(&jac, &rhs).ok()?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let ny: Vec<f64> = (0..n).map(|i| y[i] + alpha * step[i]).collect();
            let nmu = mu + alpha * step[n];
            let nf = equations(of, &ny, nmu);
            if norm(&nf) < fnorm * (1.0 - 1e-4 * alpha) {
                y = ny;
                mu = nmu;
                fval = nf;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let s = norm(&y);
    let y: Vec<f64> = y.iter().map(|x| x / s).collect();
    let mu = dot(&y, &of.k_yy(&y));
    Some((y, mu))
}

fn seed_for(seed: u64, point: u64) -> u64 {
    seed ^ point.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Searches for all axes at one frame.
///
/// `warm` directions (coordinates) are tried before the `restarts` random starts.
pub fn find_axes_with(
    frame: &BlaschkeFrame,
    restarts: usize,
    seed: u64,
    point_index: u64,
    warm: &[Vec<f64>],
) -> AxisSearch {
    let of = OrthoFrame::new(frame);
    let n = frame.dim();
    let l = numerics::cholesky(&frame.h).expect("affine metric is positive definite");
    let to_ortho = |x: &[f64]| -> Vec<f64> { (0..n).map(|a| (a..n).map(|i| l[i][a] * x[i]).sum()).collect() };
    let mut starts: Vec<Vec<f64>> = warm.iter().map(|x| to_ortho(x)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(seed, point_index));
    for _ in 0..restarts {
        starts.push((0..n).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    let scale = of.max_abs();
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut axes: Vec<CandidateAxis> = Vec::new();
    for s in &starts {
        let Some((mut y, mut mu)) = newton(&of, s) else { continue };
        let r = of.residual(&y, mu);
        if !(r <= ACCEPT) {
            continue;
        }
        if found.iter().any(|z| dot(z, &y).abs() >= 1.0 - 1e-8) {
            continue;
        }
        let mut t = of.to_coordinates(&y);
        let before = t.clone();
        fix_sign(&mut t);
        if dot(&before, &t) < 0.0 {
            y.iter_mut().for_each(|v| *v = -*v);
            mu = -mu;
        }
        found.push(y);
        axes.push(CandidateAxis { t, lambda1: mu, axis_residual: r });
    }
    let trivial = axes
        .iter()
        .filter(|a| a.lambda1.abs() <= QUADRIC_K && frame.k_operator(&a.t).iter().flatten().all(|x| x.abs() <= QUADRIC_K))
        .count();
    let degenerate = scale <= QUADRIC_K || trivial >= 3 * n;
    AxisSearch { axes, degenerate }
}

pub fn find_axes(frame: &BlaschkeFrame, restarts: usize, seed: u64) -> AxisSearch {
    find_axes_with(frame, restarts, seed, 0, &[])
}

/// `‖K(T, T) − λ T‖_h` for a coordinate vector.
pub fn axis_residual(frame: &BlaschkeFrame, t: &[f64], lambda: f64) -> f64 {
    let k = frame.k_apply(t, t);
    let d: Vec<f64> = k.iter().zip(t).map(|(a, b)| a - lambda * b).collect();
    frame.h_norm(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blaschke::full_frame;
    use crate::dsl::parse_immersion;

    #[test]
    fn quadric_is_degenerate() {
        let def = parse_immersion("immersion q { vars: u1, u2; components: (u1, u2, sqrt(1 + u1^2 + u2^2)); }")
            .unwrap();
        let f = full_frame(&def, &[0.1, 0.2]).unwrap();
        let s = find_axes(&f, 32, 7);
        assert!(s.degenerate);
    }

    #[test]
    fn search_is_deterministic() {
        let def = parse_immersion(
            "immersion g { vars: u1, u2; components: (u1, u2, u1^2/2 + u2^4/4 + u2^2/2 + u1^3/3); }",
        )
        .unwrap();
        let f = full_frame(&def, &[0.3, 0.3]).unwrap();
        let a = find_axes(&f, 32, 42);
        let b = find_axes(&f, 32, 42);
        assert_eq!(a, b);
        assert!(!a.axes.is_empty());
        for ax in &a.axes {
            assert!((f.h_norm(&ax.t) - 1.0).abs() < 1e-10);
            assert!(axis_residual(&f, &ax.t, ax.lambda1) <= 1e-8);
        }
    }
}
