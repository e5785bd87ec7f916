use std::collections::BTreeMap;

use serde::Serialize;

use crate::blaschke::BlaschkeFrame;
use crate::numerics::{solve_sym_eig, SymMatrix};

use super::axes::{axis_residual, CandidateAxis};

pub const MERGE_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Pattern {
    /// One cluster on the complement of `T`.
    Theorem1,
    /// Two clusters of opposite sign.
    Theorem2,
    Unmatched,
}

/// How the sign of `T` is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `λ2 > 0` for one cluster, `λ1 ≥ 0` for two (unless `λ1 ≈ 0`).
    Auto,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub eigenvalue: f64,
    pub multiplicity: usize,
    /// Coordinate vectors, h-orthonormal.
    pub basis: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralStructure {
    pub axis: CandidateAxis,
    pub pattern: Pattern,
    pub clusters: Vec<Cluster>,
    pub n2: usize,
    pub n3: usize,
    pub lambda2: f64,
    pub lambda3: f64,
    pub cross_residual: f64,
    pub relation_residuals: BTreeMap<String, f64>,
}

impl SpectralStructure {
    pub fn lambda1(&self) -> f64 {
        self.axis.lambda1
    }

    pub fn max_relation(&self) -> f64 {
        self.relation_residuals.values().fold(0.0, |m, &x| if x.is_nan() { f64::NAN } else { m.max(x) })
    }

    /// Basis of `E(λ2)`.
    pub fn first_block(&self) -> &[Vec<f64>] {
        self.block_with(self.lambda2)
    }

    /// Basis of `E(λ3)`; empty in the point case.
    pub fn second_block(&self) -> &[Vec<f64>] {
        if self.pattern == Pattern::Theorem2 {
            self.block_with(self.lambda3)
        } else {
            &[]
        }
    }

    fn block_with(&self, value: f64) -> &[Vec<f64>] {
        self.clusters
            .iter()
            .find(|c| c.eigenvalue == value)
            .map_or(&[][..], |c| c.basis.as_slice())
    }
}

/// h-orthonormal basis of the h-orthogonal complement of the unit vector `t`.
pub fn complement_basis(frame: &BlaschkeFrame, t: &[f64]) -> Vec<Vec<f64>> {
    let n = frame.dim();
    let mut out: Vec<Vec<f64>> = vec![t.to_vec()];
    let mut candidates: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    while out.len() < n {
        let mut best: Option<(f64, Vec<f64>, usize)> = None;
        for (idx, c) in candidates.iter().enumerate() {
            let mut v = c.clone();
            for _ in 0..2 {
                for b in &out {
                    let p = frame.h_inner(&v, b);
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
                }
            }
            let r = frame.h_norm(&v) / frame.h_norm(c);
            if best.as_ref().is_none_or(|(s, _, _)| r > *s) {
                best = Some((r, v, idx));
            }
        }
        let (_, v, idx) = best.expect("enough candidates");
        candidates.remove(idx);
        let s = frame.h_norm(&v);
        out.push(v.iter().map(|x| x / s).collect());
    }
    out.remove(0);
    out
}

fn cluster(values: &[f64], vectors: &[Vec<f64>]) -> Vec<Cluster> {
    let mut out: Vec<(Vec<f64>, Vec<Vec<f64>>)> = Vec::new();
    for (v, e) in values.iter().zip(vectors) {
        match out.last_mut() {
            Some((vals, basis)) if (v - vals.last().unwrap()).abs() <= MERGE_GAP => {
                vals.push(*v);
                basis.push(e.clone());
            }
            _ => out.push((vec![*v], vec![e.clone()])),
        }
    }
    out.into_iter()
        .map(|(vals, basis)| Cluster {
            eigenvalue: vals.iter().sum::<f64>() / vals.len() as f64,
            multiplicity: vals.len(),
            basis,
        })
        .collect()
}

fn spectrum_on_complement(frame: &BlaschkeFrame, t: &[f64]) -> Vec<Cluster> {
    let basis = complement_basis(frame, t);
    let m = basis.len();
    let mut rows = vec![vec![0.0; m]; m];
    for a in 0..m {
        let kta = frame.k_apply(t, &basis[a]);
        for b in 0..m {
            rows[a][b] = frame.h_inner(&kta, &basis[b]);
        }
    }
    let eig = solve_sym_eig(&SymMatrix::symmetrized(&rows));
    let n = frame.dim();
    let vectors: Vec<Vec<f64>> = (0..m)
        .map(|c| (0..n).map(|i| (0..m).map(|a| eig.vectors[c][a] * basis[a][i]).sum()).collect())
        .collect();
    cluster(&eig.values, &vectors)
}

fn negate_clusters(clusters: &mut [Cluster]) {
    for c in clusters.iter_mut() {
        c.eigenvalue = -c.eigenvalue;
    }
    clusters.reverse();
}

/// Max `‖K(V, W)‖_h` over basis pairs.
pub fn cross_residual(frame: &BlaschkeFrame, first: &[Vec<f64>], second: &[Vec<f64>]) -> f64 {
    let mut r = 0.0f64;
    for v in first {
        for w in second {
            r = r.max(frame.h_norm(&frame.k_apply(v, w)));
        }
    }
    r
}

/// Spectrum of `K_T` on the complement of `axis`, in the `H = −1` gauge.
pub fn classify_spectrum(frame: &BlaschkeFrame, axis: &CandidateAxis, orientation: Orientation) -> SpectralStructure {
    let mut axis = axis.clone();
    axis.axis_residual = axis_residual(frame, &axis.t, axis.lambda1);
    let mut clusters = spectrum_on_complement(frame, &axis.t);
    if orientation == Orientation::Auto {
        let flip = match clusters.as_slice() {
            [c] => c.eigenvalue < 0.0,
            [_, _] => axis.lambda1 < -1e-9,
            _ => false,
        };
        if flip {
            axis = axis.flipped();
            negate_clusters(&mut clusters);
        }
    }
    let l1 = axis.lambda1;
    let mut relations = BTreeMap::new();
    let (pattern, n2, n3, l2, l3, cross) = match clusters.as_slice() {
        [c] => {
            let l2 = c.eigenvalue;
            relations.insert("thm1".to_string(), (1.0 + l1 * l2 - l2 * l2).abs());
            relations.insert("apolar".to_string(), (l1 + c.multiplicity as f64 * l2).abs());
            (Pattern::Theorem1, c.multiplicity, 0, l2, f64::NAN, 0.0)
        }
        [lo, hi] if lo.eigenvalue < 0.0 && hi.eigenvalue > 0.0 => {
            let (l2, l3) = (hi.eigenvalue, lo.eigenvalue);
            let (n2, n3) = (hi.multiplicity, lo.multiplicity);
            relations.insert("thm1".to_string(), (1.0 + l1 * l2 - l2 * l2).abs());
            relations.insert("sum".to_string(), (l1 - l2 - l3).abs());
            relations.insert("prod".to_string(), (l2 * l3 + 1.0).abs());
            relations.insert("apolar".to_string(), (l1 + n2 as f64 * l2 + n3 as f64 * l3).abs());
            let cross = cross_residual(frame, &hi.basis, &lo.basis);
            (Pattern::Theorem2, n2, n3, l2, l3, cross)
        }
        _ => (Pattern::Unmatched, 0, 0, f64::NAN, f64::NAN, f64::NAN),
    };
    SpectralStructure {
        axis,
        pattern,
        clusters,
        n2,
        n3,
        lambda2: l2,
        lambda3: l3,
        cross_residual: cross,
        relation_residuals: relations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blaschke::full_frame;
    use crate::calabi::{calabi_pair, calabi_point};
    use crate::decompose::find_axes;
    use crate::dsl::{parse_immersion, ImmersionDef};

    fn hyperbola() -> ImmersionDef {
        parse_immersion(
            "immersion h2 { vars: s; components: (0.7071067811865476*exp(s), 0.7071067811865476*exp(-s)); }",
        )
        .unwrap()
    }

    #[test]
    fn point_product_spectrum() {
        let p = calabi_point(&hyperbola()).unwrap();
        let f = full_frame(&p, &[0.1, -0.2]).unwrap();
        let found = find_axes(&f, 32, 42);
        let s = found
            .axes
            .iter()
            .map(|a| classify_spectrum(&f, a, Orientation::Auto))
            .find(|s| s.pattern == Pattern::Theorem1 && s.max_relation() < 1e-8)
            .expect("axis with one cluster");
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.lambda1() + r).abs() < 1e-8 && (s.lambda2 - r).abs() < 1e-8, "{s:?}");
        assert_eq!(s.n2, 1);
    }

    #[test]
    fn pair_product_spectrum() {
        let p = calabi_pair(&hyperbola(), &hyperbola()).unwrap();
        let f = full_frame(&p, &[0.1, -0.2, 0.3]).unwrap();
        let found = find_axes(&f, 64, 42);
        let s = found
            .axes
            .iter()
            .map(|a| classify_spectrum(&f, a, Orientation::Auto))
            .find(|s| s.pattern == Pattern::Theorem2 && s.max_relation() < 1e-8 && s.cross_residual < 1e-7)
            .expect("axis with two clusters");
        assert!(s.lambda1().abs() < 1e-8 && (s.lambda2 - 1.0).abs() < 1e-8 && (s.lambda3 + 1.0).abs() < 1e-8);
        assert_eq!((s.n2, s.n3), (1, 1));
        for c in &s.clusters {
            for v in &c.basis {
                assert!(f.h_inner(v, &s.axis.t).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn complement_is_orthonormal() {
        let p = calabi_pair(&hyperbola(), &hyperbola()).unwrap();
        let f = full_frame(&p, &[0.0, 0.1, 0.2]).unwrap();
        let t: Vec<f64> = vec![1.0, 0.5, 0.0];
        let s = f.h_norm(&t);
        let t: Vec<f64> = t.iter().map(|x| x / s).collect();
        let b = complement_basis(&f, &t);
        assert_eq!(b.len(), 2);
        for (i, x) in b.iter().enumerate() {
            assert!(f.h_inner(x, &t).abs() < 1e-12);
            for (j, y) in b.iter().enumerate() {
                assert!((f.h_inner(x, y) - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }
}
