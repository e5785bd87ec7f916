//! Pointwise equiaffine structure of a parametrized hypersurface.

use serde::Serialize;

use crate::dsl::ImmersionDef;
use crate::jet::linalg::{self, JetMatrix};
use crate::jet::{eval_jets, Elementary, Jet, JetError};
use crate::numerics::{self, dot, norm, SymMatrix};

pub type Tensor3 = Vec<Vec<Vec<f64>>>;
pub type Tensor4 = Vec<Vec<Vec<Vec<f64>>>>;

pub fn zeros3(n: usize) -> Tensor3 {
    vec![vec![vec![0.0; n]; n]; n]
}

pub fn zeros4(n: usize) -> Tensor4 {
    vec![zeros3(n); n]
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BlaschkeError {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("not a hypersurface: {dim} variables but {components} components")]
    NotHypersurface { dim: usize, components: usize },
    #[error("degenerate tangent map at {u:?}")]
    DegenerateTangent { u: Vec<f64> },
    #[error("degenerate hypersurface at {u:?}: |det g| = {det:e}")]
    Degenerate { u: Vec<f64>, det: f64 },
    #[error("indefinite affine metric at {u:?}")]
    IndefiniteMetric { u: Vec<f64> },
}

/// Second fundamental data relative to the Euclidean unit normal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TentativeDecomposition {
    pub gtilde: SymMatrix,
    /// `gamma_tilde[k][i][j]`
    pub gamma_tilde: Tensor3,
    pub dvol: f64,
    /// Unit normal, oriented so `gtilde` is positive definite.
    pub zeta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricAndNormal {
    pub h: SymMatrix,
    pub xi: Vec<f64>,
}

/// All equiaffine data at one parameter point.
///
/// Index conventions: `gamma[k][i][j] = Γ^k_ij`, `k[k][i][j] = K^k_ij`,
/// `c[i][j][k] = C_ijk`, `s[k][i] = S^k_i`, `rhat[i][j][k][l]` is the
/// `l`-component of `R̂(∂i, ∂j)∂k`, `nabla_k[i][j][k][l]` the `l`-component
/// of `(∇̂_{∂i} K)(∂j, ∂k)`, and `d*[m]` prefixes hold `∂m` of a field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlaschkeFrame {
    pub u: Vec<f64>,
    pub position: Vec<f64>,
    pub tangent_basis: Vec<Vec<f64>>,
    pub second: Vec<Vec<Vec<f64>>>,
    pub h: SymMatrix,
    pub h_inv: Vec<Vec<f64>>,
    pub dh: Tensor3,
    pub xi: Vec<f64>,
    pub dxi: Vec<Vec<f64>>,
    pub gamma_induced: Tensor3,
    pub gamma_levi: Tensor3,
    pub dgamma_levi: Tensor4,
    pub k: Tensor3,
    pub dk: Tensor4,
    pub c: Tensor3,
    pub s: Vec<Vec<f64>>,
    pub mean_curvature: f64,
    pub rhat: Tensor4,
    pub nabla_k: Tensor4,
    /// max |h' − h| / max |h| where `h'` is the ξ-coefficient of ∂²φ.
    pub reconstruction_residual: f64,
    /// Largest ξ-component of ∂ξ (should vanish).
    pub normal_defect: f64,
}

impl BlaschkeFrame {
    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn h_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.h.form(x, y)
    }

    pub fn h_norm(&self, x: &[f64]) -> f64 {
        self.h_inner(x, x).max(0.0).sqrt()
    }

    /// Coordinates of `K(x, y)`.
    pub fn k_apply(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|l| {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += self.k[l][i][j] * x[i] * y[j];
                    }
                }
                acc
            })
            .collect()
    }

    /// Matrix of `K_x` acting on coordinate vectors: `out[l][j] = K^l_ij x^i`.
    pub fn k_operator(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|l| (0..n).map(|j| (0..n).map(|i| self.k[l][i][j] * x[i]).sum()).collect()).collect()
    }

    /// Ambient image `Σ x^k ∂kφ` of a coordinate tangent vector.
    pub fn ambient(&self, x: &[f64]) -> Vec<f64> {
        let m = self.position.len();
        (0..m).map(|a| x.iter().zip(&self.tangent_basis).map(|(c, t)| c * t[a]).sum()).collect()
    }

    pub fn k_max(&self) -> f64 {
        self.k.iter().flatten().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

struct Jets {
    u: Vec<f64>,
    d1: Vec<Vec<Jet>>,
    d2: Vec<Vec<Vec<Jet>>>,
    n: usize,
}

fn jets_at(def: &ImmersionDef, u: &[f64], order: usize) -> Result<Jets, BlaschkeError> {
    let n = def.dim();
    if def.ambient_dim() != n + 1 {
        return Err(BlaschkeError::NotHypersurface { dim: n, components: def.ambient_dim() });
    }
    let phi = eval_jets(def, u, order)?;
    let d1: Vec<Vec<Jet>> = (0..n).map(|i| phi.iter().map(|c| c.partial(i)).collect()).collect();
    let d2 = (0..n)
        .map(|i| (0..n).map(|j| d1[i].iter().map(|c| c.partial(j)).collect()).collect())
        .collect();
    Ok(Jets { u: u.to_vec(), d1, d2, n })
}

/// Cofactor vector `N` with `det(∂1φ, …, ∂nφ, X) = N·X`.
fn cofactor_normal(d1: &[Vec<Jet>], n: usize) -> Result<Vec<Jet>, BlaschkeError> {
    let m = n + 1;
    let mut out = Vec::with_capacity(m);
    for a in 0..m {
        let minor: JetMatrix = (0..m).filter(|&r| r != a).map(|r| (0..n).map(|k| d1[k][r].clone()).collect()).collect();
        let d = linalg::det(&minor)?;
        out.push(if (a + n).is_multiple_of(2) { d } else { d.scale(-1.0) });
    }
    Ok(out)
}

fn values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Jet::value).collect()
}

fn jet_dot(a: &[Jet], b: &[Jet]) -> Jet {
    let mut acc = &a[0] * &b[0];
    for (x, y) in a.iter().zip(b).skip(1) {
        acc = &acc + &(x * y);
    }
    acc
}

/// `∂i∂jφ · N` and the orientation sign making it positive definite.
fn oriented_second_form(j: &Jets) -> Result<(Vec<Jet>, Vec<Vec<Jet>>, f64), BlaschkeError> {
    let n = j.n;
    let normal = cofactor_normal(&j.d1, n)?;
    let nval = norm(&values(&normal));
    let tangent_scale: f64 = j.d1.iter().map(|t| norm(&values(t))).product();
    if !(nval > 1e-12 * tangent_scale.max(1e-300)) {
        return Err(BlaschkeError::DegenerateTangent { u: j.u.clone() });
    }
    let g: Vec<Vec<Jet>> = (0..n).map(|a| (0..n).map(|b| jet_dot(&normal, &j.d2[a][b])).collect()).collect();
    let gv: Vec<Vec<f64>> = g.iter().map(|r| values(r)).collect();
    let det_tilde = numerics::det(&gv) / nval.powi(n as i32);
    if det_tilde.abs() < 1e-12 {
        return Err(BlaschkeError::Degenerate { u: j.u.clone(), det: det_tilde.abs() });
    }
    let eig = numerics::solve_sym_eig(&SymMatrix::symmetrized(&gv));
    let sign = if eig.values.iter().all(|&l| l > 0.0) {
        1.0
    } else if eig.values.iter().all(|&l| l < 0.0) {
        -1.0
    } else {
        return Err(BlaschkeError::IndefiniteMetric { u: j.u.clone() });
    };
    Ok((normal, g, sign))
}

pub fn tentative_decomposition(def: &ImmersionDef, u: &[f64]) -> Result<TentativeDecomposition, BlaschkeError> {
    let j = jets_at(def, u, 2)?;
    let n = j.n;
    let (normal, g, sign) = oriented_second_form(&j)?;
    let nv = values(&normal);
    let dvol = norm(&nv);
    let zeta: Vec<f64> = nv.iter().map(|x| sign * x / dvol).collect();
    let gt: Vec<Vec<f64>> = g.iter().map(|r| r.iter().map(|x| sign * x.value() / dvol).collect()).collect();
    let mut a: Vec<Vec<f64>> = vec![vec![0.0; n + 1]; n + 1];
    for r in 0..=n {
        for k in 0..n {
            a[r][k] = j.d1[k][r].value();
        }
        a[r][n] = zeta[r];
    }
    let mut gamma_tilde = zeros3(n);
    for p in 0..n {
        for q in 0..n {
            let rhs = values(&j.d2[p][q]);
            let x = numerics::solve(&a, &rhs).map_err(|_| BlaschkeError::DegenerateTangent { u: u.to_vec() })?;
            for k in 0..n {
                gamma_tilde[k][p][q] = x[k];
            }
        }
    }
    Ok(TentativeDecomposition { gtilde: SymMatrix::symmetrized(&gt), gamma_tilde, dvol, zeta })
}

struct Core {
    h: Vec<Vec<Jet>>,
    h_inv: Vec<Vec<Jet>>,
    gamma_levi: Vec<Vec<Vec<Jet>>>,
    xi: Vec<Jet>,
}

fn metric_core(j: &Jets) -> Result<Core, BlaschkeError> {
    let n = j.n;
    let (_, g, sign) = oriented_second_form(j)?;
    let g: JetMatrix = g.iter().map(|r| r.iter().map(|x| x.scale(sign)).collect()).collect();
    let detg = linalg::det(&g)?;
    let factor = detg.apply(Elementary::PowConst(-1.0 / (n as f64 + 2.0)))?;
    let h: JetMatrix = g.iter().map(|r| r.iter().map(|x| x * &factor).collect()).collect();
    let h_inv = linalg::inverse(&h)?;
    // dh[m][a][b] = ∂m h_ab
    let dh: Vec<Vec<Vec<Jet>>> =
        (0..n).map(|m| (0..n).map(|a| (0..n).map(|b| h[a][b].partial(m)).collect()).collect()).collect();
    let mut gamma_levi = Vec::with_capacity(n);
    for k in 0..n {
        let mut rows = Vec::with_capacity(n);
        for a in 0..n {
            let mut row = Vec::with_capacity(n);
            for b in 0..n {
                let mut acc: Option<Jet> = None;
                for l in 0..n {
                    let bracket = &(&dh[a][b][l] + &dh[b][a][l]) - &dh[l][a][b];
                    let t = &h_inv[k][l] * &bracket;
                    acc = Some(match acc {
                        None => t,
                        Some(s) => &s + &t,
                    });
                }
                row.push(acc.expect("n ≥ 1").scale(0.5));
            }
            rows.push(row);
        }
        gamma_levi.push(rows);
    }
    let m = n + 1;
    let mut xi = Vec::with_capacity(m);
    for c in 0..m {
        let mut acc: Option<Jet> = None;
        for a in 0..n {
            for b in 0..n {
                let mut hess = j.d2[a][b][c].clone();
                for k in 0..n {
                    hess = &hess - &(&gamma_levi[k][a][b] * &j.d1[k][c]);
                }
                let t = &h_inv[a][b] * &hess;
                acc = Some(match acc {
                    None => t,
                    Some(s) => &s + &t,
                });
            }
        }
        xi.push(acc.expect("n ≥ 1").scale(1.0 / n as f64));
    }
    Ok(Core { h, h_inv, gamma_levi, xi })
}

fn sym_values(m: &[Vec<Jet>]) -> SymMatrix {
    SymMatrix::symmetrized(&m.iter().map(|r| values(r)).collect::<Vec<_>>())
}

pub fn blaschke_metric_and_normal(def: &ImmersionDef, u: &[f64]) -> Result<MetricAndNormal, BlaschkeError> {
    let j = jets_at(def, u, 3)?;
    let core = metric_core(&j)?;
    Ok(MetricAndNormal { h: sym_values(&core.h), xi: values(&core.xi) })
}

fn first_order(j: &Jet, m: usize) -> f64 {
    j.coeffs()[1 + m]
}

pub fn full_frame(def: &ImmersionDef, u: &[f64]) -> Result<BlaschkeFrame, BlaschkeError> {
    let j = jets_at(def, u, 4)?;
    let n = j.n;
    let m = n + 1;
    let core = metric_core(&j)?;

    // [∂1φ … ∂nφ ξ] as an order-1 jet matrix
    let a1: JetMatrix = (0..m)
        .map(|r| {
            let mut row: Vec<Jet> = (0..n).map(|k| j.d1[k][r].truncate(1)).collect();
            row.push(core.xi[r].truncate(1));
            row
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let rhs: Vec<Vec<Jet>> = pairs.iter().map(|&(a, b)| j.d2[a][b].iter().map(|x| x.truncate(1)).collect()).collect();
    let sol = linalg::solve(&a1, &rhs)?;

    let hv = sym_values(&core.h);
    let hscale = hv.max_abs().max(f64::MIN_POSITIVE);
    let mut gamma_induced = zeros3(n);
    let mut gamma_levi = zeros3(n);
    let mut k = zeros3(n);
    let mut dk = zeros4(n);
    let mut reconstruction = 0.0f64;
    for (&(a, b), x) in pairs.iter().zip(&sol) {
        reconstruction = reconstruction.max((x[n].value() - hv.get(a, b)).abs() / hscale);
        for l in 0..n {
            let diff = &x[l] - &core.gamma_levi[l][a][b];
            for (p, q) in [(a, b), (b, a)] {
                gamma_induced[l][p][q] = x[l].value();
                gamma_levi[l][p][q] = core.gamma_levi[l][p][q].value();
                k[l][p][q] = diff.value();
                for mm in 0..n {
                    dk[mm][l][p][q] = first_order(&diff, mm);
                }
            }
        }
    }
    let mut dgamma_levi = zeros4(n);
    let mut dh = zeros3(n);
    for mm in 0..n {
        for l in 0..n {
            for p in 0..n {
                for q in 0..n {
                    dgamma_levi[mm][l][p][q] = first_order(&core.gamma_levi[l][p][q], mm);
                }
                dh[mm][l][p] = first_order(&core.h[l][p], mm);
            }
        }
    }

    // shape operator from −∂iξ = S^k_i ∂kφ + defect·ξ
    let a0: Vec<Vec<f64>> = a1.iter().map(|r| values(r)).collect();
    let dxi: Vec<Vec<f64>> = (0..n).map(|i| core.xi.iter().map(|x| first_order(x, i)).collect()).collect();
    let mut s = vec![vec![0.0; n]; n];
    let mut normal_defect = 0.0f64;
    for i in 0..n {
        let rhs: Vec<f64> = dxi[i].iter().map(|x| -x).collect();
        let y = numerics::solve(&a0, &rhs).map_err(|_| BlaschkeError::DegenerateTangent { u: u.to_vec() })?;
        for kk in 0..n {
            s[kk][i] = y[kk];
        }
        normal_defect = normal_defect.max(y[n].abs());
    }
    let mean_curvature = (0..n).map(|i| s[i][i]).sum::<f64>() / n as f64;

    let mut c = zeros3(n);
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                c[p][q][r] = (0..n).map(|l| hv.get(r, l) * k[l][p][q]).sum();
            }
        }
    }

    let g = &gamma_levi;
    let mut rhat = zeros4(n);
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for l in 0..n {
                    let mut v = dgamma_levi[p][l][q][r] - dgamma_levi[q][l][p][r];
                    for mm in 0..n {
                        v += g[l][p][mm] * g[mm][q][r] - g[l][q][mm] * g[mm][p][r];
                    }
                    rhat[p][q][r][l] = v;
                }
            }
        }
    }
    let mut nabla_k = zeros4(n);
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for l in 0..n {
                    let mut v = dk[p][l][q][r];
                    for mm in 0..n {
                        v += g[l][p][mm] * k[mm][q][r] - g[mm][p][q] * k[l][mm][r] - g[mm][p][r] * k[l][q][mm];
                    }
                    nabla_k[p][q][r][l] = v;
                }
            }
        }
    }

    Ok(BlaschkeFrame {
        u: u.to_vec(),
        position: def.eval(u),
        tangent_basis: j.d1.iter().map(|t| values(t)).collect(),
        second: j.d2.iter().map(|r| r.iter().map(|v| values(v)).collect()).collect(),
        h: hv,
        h_inv: core.h_inv.iter().map(|r| values(r)).collect(),
        dh,
        xi: values(&core.xi),
        dxi,
        gamma_induced,
        gamma_levi,
        dgamma_levi,
        k,
        dk,
        c,
        s,
        mean_curvature,
        rhat,
        nabla_k,
        reconstruction_residual: reconstruction,
        normal_defect,
    })
}

/// Euclidean distance between `xi` and the position vector.
pub fn centroaffine_defect(frame: &BlaschkeFrame) -> f64 {
    let d: Vec<f64> = frame.xi.iter().zip(&frame.position).map(|(a, b)| a - b).collect();
    norm(&d) / norm(&frame.position).max(1.0)
}

/// Angle-free measure of how far `xi` is from being parallel to `position`.
pub fn radial_deviation(frame: &BlaschkeFrame) -> f64 {
    let (x, p) = (&frame.xi, &frame.position);
    let c = dot(x, p) / (norm(x) * norm(p));
    (1.0 - c.abs().min(1.0)).max(0.0).sqrt() * std::f64::consts::SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_immersion;

    fn hyperbola(a: &str) -> ImmersionDef {
        parse_immersion(&format!("immersion h {{ vars: s; components: ({a}*exp(s), {a}*exp(-s)); }}")).unwrap()
    }

    #[test]
    fn paraboloid_at_origin() {
        let def = parse_immersion("immersion p { vars: u1, u2; components: (u1, u2, (u1^2+u2^2)/2); }").unwrap();
        let t = tentative_decomposition(&def, &[0.0, 0.0]).unwrap();
        assert!((t.dvol - 1.0).abs() < 1e-15);
        assert_eq!(t.gtilde, SymMatrix::identity(2));
        assert!(t.gamma_tilde.iter().flatten().flatten().all(|x| x.abs() < 1e-15));
        let f = full_frame(&def, &[0.3, -0.7]).unwrap();
        assert!((f.xi[2] - 1.0).abs() < 1e-10 && f.xi[0].abs() < 1e-10 && f.xi[1].abs() < 1e-10);
        assert!(f.s.iter().flatten().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn normalized_hyperbola_is_centroaffine() {
        let def = hyperbola("0.7071067811865476");
        for s in [-1.0, 0.0, 1.0] {
            let f = full_frame(&def, &[s]).unwrap();
            assert!(centroaffine_defect(&f) < 1e-9, "{s}");
            assert!((f.mean_curvature + 1.0).abs() < 1e-9);
            assert!((f.h.get(0, 0) - 1.0).abs() < 1e-12);
            assert!(f.k[0][0][0].abs() < 1e-12);
        }
    }

    #[test]
    fn unit_hyperbola_curvature() {
        let f = full_frame(&hyperbola("1"), &[0.2]).unwrap();
        assert!((f.mean_curvature + 2f64.powf(-2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn plane_is_degenerate() {
        let def = parse_immersion("immersion pl { vars: u1, u2; components: (u1 + 2*u2, u2, 3*u1 - u2); }").unwrap();
        let err = full_frame(&def, &[0.1, 0.2]).unwrap_err();
        assert!(err.to_string().contains("degenerate"), "{err}");
    }

    #[test]
    fn saddle_is_indefinite() {
        let def = parse_immersion("immersion p { vars: u1, u2; components: (u1, u2, u1*u2); }").unwrap();
        assert!(matches!(full_frame(&def, &[0.0, 0.0]), Err(BlaschkeError::IndefiniteMetric { .. })));
    }

    #[test]
    fn not_a_hypersurface() {
        let def = parse_immersion("immersion p { vars: u1; components: (u1, u1^2, u1^3); }").unwrap();
        assert!(matches!(full_frame(&def, &[0.0]), Err(BlaschkeError::NotHypersurface { .. })));
    }
}
