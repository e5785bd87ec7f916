//! Small dense linear algebra and scalar root finding.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is singular")]
    Singular,
    #[error("bracket [{lo}, {hi}] does not straddle a sign change")]
    BadBracket { lo: f64, hi: f64 },
    #[error("dimension mismatch")]
    Dimension,
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Accepts rows with asymmetry ≤ 1e-12 (relative to the largest entry) and symmetrizes.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<SymMatrix, NumericsError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(NumericsError::Dimension);
        }
        let scale = rows.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
        let mut entries = vec![0.0; n * n];
        let mut asym = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((rows[i][j] - rows[j][i]).abs());
                entries[i * n + j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        if asym > 1e-12 * scale {
            return Err(NumericsError::NotSymmetric(asym));
        }
        Ok(SymMatrix { dim: n, entries })
    }

    /// Symmetrizes without checking.
    pub fn symmetrized(rows: &[Vec<f64>]) -> SymMatrix {
        let n = rows.len();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        SymMatrix { dim: n, entries }
    }

    pub fn identity(n: usize) -> SymMatrix {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        SymMatrix { dim: n, entries }
    }

    pub fn diagonal(d: &[f64]) -> SymMatrix {
        let mut m = SymMatrix::identity(d.len());
        for (i, x) in d.iter().enumerate() {
            m.entries[i * d.len() + i] = *x;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.entries.chunks(self.dim).map(|r| dot(r, v)).collect()
    }

    /// Bilinear form `uᵀ A v`.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(u, &self.mul_vec(v))
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Lower-triangular `L` with `A = L Lᵀ`.
pub fn cholesky(a: &SymMatrix) -> Result<Vec<Vec<f64>>, NumericsError> {
    let n = a.dim;
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(NumericsError::NotPositiveDefinite);
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(l)
}

/// LU with partial pivoting; returns `(lu, perm, sign)`.
fn lu(a: &[Vec<f64>]) -> Option<(Vec<Vec<f64>>, Vec<usize>, f64)> {
    let n = a.len();
    let mut m = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c] == 0.0 {
            return None;
        }
        if p != c {
            m.swap(p, c);
            perm.swap(p, c);
            sign = -sign;
        }
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            m[r][c] = f;
            for k in c + 1..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    Some((m, perm, sign))
}

pub fn det(a: &[Vec<f64>]) -> f64 {
    match lu(a) {
        Some((m, _, sign)) => (0..a.len()).map(|i| m[i][i]).product::<f64>() * sign,
        None => 0.0,
    }
}

pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let n = a.len();
    if b.len() != n {
        return Err(NumericsError::Dimension);
    }
    let (m, perm, _) = lu(a).ok_or(NumericsError::Singular)?;
    let mut y: Vec<f64> = perm.iter().map(|&p| b[p]).collect();
    for i in 0..n {
        for k in 0..i {
            y[i] -= m[i][k] * y[k];
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= m[i][k] * y[k];
        }
        y[i] /= m[i][i];
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(NumericsError::Singular);
    }
    Ok(y)
}

/// Eigen-decomposition; `vectors[i]` pairs with `values[i]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi on a symmetric matrix. Values ascending.
pub fn solve_sym_eig(a: &SymMatrix) -> EigenResult {
    let n = a.dim;
    let mut m = a.rows();
    let mut v = SymMatrix::identity(n).rows();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n).map(|i| (m[i][i], v.iter().map(|r| r[i]).collect())).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (values, vectors) = pairs.into_iter().map(|(l, mut x)| {
        fix_sign(&mut x);
        (l, x)
    }).unzip();
    EigenResult { values, vectors }
}

/// Flip `v` so its first entry of non-negligible size is positive.
pub fn fix_sign(v: &mut [f64]) {
    let scale = max_abs(v);
    if let Some(x) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *x < 0.0 {
            v.iter_mut().for_each(|y| *y = -*y);
        }
    }
}

fn lower_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i][k] * y[k];
        }
        y[i] /= l[i][i];
    }
    y
}

fn upper_t_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = b.to_vec();
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k][i] * y[k];
        }
        y[i] /= l[i][i];
    }
    y
}

/// `A v = λ M v` with `M` positive definite; vectors are M-orthonormal.
pub fn solve_sym_eig_generalized(a: &SymMatrix, m: &SymMatrix) -> Result<EigenResult, NumericsError> {
    if a.dim != m.dim {
        return Err(NumericsError::Dimension);
    }
    let n = a.dim;
    let l = cholesky(m)?;
    // C = L⁻¹ A L⁻ᵀ
    let mut x = vec![vec![0.0; n]; n];
    for j in 0..n {
        let col: Vec<f64> = (0..n).map(|i| a.get(i, j)).collect();
        let y = lower_solve(&l, &col);
        for i in 0..n {
            x[i][j] = y[i];
        }
    }
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        c[i].copy_from_slice(&lower_solve(&l, &x[i])[..n]);
    }
    let eig = solve_sym_eig(&SymMatrix::symmetrized(&c));
    let vectors = eig
        .vectors
        .iter()
        .map(|w| {
            let mut v = upper_t_solve(&l, w);
            fix_sign(&mut v);
            v
        })
        .collect();
    Ok(EigenResult { values: eig.values, vectors })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubspaceRank {
    pub rank: usize,
    pub basis: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
}

pub const DEFAULT_RANK_TOL: f64 = 1e-7;

/// Numerical rank and orthonormal basis of the span of `vectors`.
pub fn subspace_rank(vectors: &[Vec<f64>], tol: f64) -> SubspaceRank {
    let d = vectors.first().map_or(0, |v| v.len());
    if d == 0 {
        return SubspaceRank { rank: 0, basis: Vec::new(), singular_values: Vec::new() };
    }
    // one-sided Jacobi on the d × k matrix whose columns are the inputs
    let k = vectors.len();
    let mut u: Vec<Vec<f64>> = (0..d).map(|i| vectors.iter().map(|v| v[i]).collect()).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for row in u.iter() {
                    alpha += row[p] * row[p];
                    beta += row[q] * row[q];
                    gamma += row[p] * row[q];
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in u.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c * x - s * y;
                    row[q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut cols: Vec<(f64, Vec<f64>)> = (0..k)
        .map(|j| {
            let col: Vec<f64> = u.iter().map(|r| r[j]).collect();
            (norm(&col), col)
        })
        .collect();
    cols.sort_by(|x, y| y.0.total_cmp(&x.0));
    let top = cols.first().map_or(0.0, |c| c.0);
    let singular_values: Vec<f64> = cols.iter().map(|c| c.0).collect();
    let mut basis = Vec::new();
    if top > 0.0 {
        for (s, col) in &cols {
            if *s > tol * top && basis.len() < d {
                let mut b: Vec<f64> = col.iter().map(|x| x / s).collect();
                fix_sign(&mut b);
                basis.push(b);
            }
        }
    }
    SubspaceRank { rank: basis.len(), basis, singular_values }
}

/// Bisection on a sign-changing bracket until `|f| ≤ tol` or the bracket collapses.
pub fn find_root_bisection(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64, NumericsError> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa * fb < 0.0) {
        return Err(NumericsError::BadBracket { lo, hi });
    }
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm.abs() <= tol || mid == a || mid == b {
            return Ok(mid);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
