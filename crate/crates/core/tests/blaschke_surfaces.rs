mod common;

use calabi_core::blaschke::full_frame;
use calabi_core::checks::{apolarity_residual, sphere_residual};
use calabi_core::decompose::{classify_spectrum, find_axes, Orientation, Pattern};
use calabi_core::grid::Grid;
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn quadric_has_vanishing_cubic_form() {
    let def = quadric();
    for p in Grid::cube(2, -0.4, 0.4, 3).points() {
        let f = full_frame(&def, &p).unwrap();
        assert!(f.k_max() <= 1e-7, "{}", f.k_max());
    }
}

#[test]
fn paraboloid_is_improper() {
    let def = paraboloid();
    let frames: Vec<_> = Grid::cube(2, -0.4, 0.4, 3).points().iter().map(|p| full_frame(&def, p).unwrap()).collect();
    for f in &frames {
        assert!(f.mean_curvature.abs() <= 1e-9);
        for (a, b) in f.xi.iter().zip(&frames[0].xi) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
    assert!(sphere_residual(&frames, 1e-9).pass);
}

#[test]
fn hyperbola_normal_is_position() {
    let def = hyperbola();
    for s in [-0.5, 0.0, 0.3, 1.0] {
        let f = full_frame(&def, &[s]).unwrap();
        assert!((f.mean_curvature + 1.0).abs() <= 1e-8);
        for (x, p) in f.xi.iter().zip(&f.position) {
            assert!((x - p).abs() <= 1e-8, "{:?} vs {:?}", f.xi, f.position);
        }
    }
}

#[test]
fn unimodular_maps_preserve_curvature_and_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let base = pair_hh();
    let u = [0.1, -0.2, 0.15];
    let f0 = full_frame(&base, &u).unwrap();
    let axis = find_axes(&f0, 64, 42)
        .axes
        .into_iter()
        .find(|a| classify_spectrum(&f0, a, Orientation::Auto).pattern == Pattern::Theorem2)
        .unwrap();
    let spec0 = k_spectrum(&f0, &axis.t);
    for _ in 0..10 {
        let a = unimodular(&mut rng, base.ambient_dim());
        let img = base.linear_image(&a).unwrap();
        let f = full_frame(&img, &u).unwrap();
        assert!((f.mean_curvature - f0.mean_curvature).abs() <= 1e-8);
        assert!(apolarity_residual(std::slice::from_ref(&f), 1e-8).pass);
        let spec = k_spectrum(&f, &axis.t);
        for (x, y) in spec.iter().zip(&spec0) {
            assert!((x - y).abs() <= 1e-8, "{spec:?} vs {spec0:?}");
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!((f.h.get(i, j) - f0.h.get(i, j)).abs() <= 1e-8);
            }
        }
    }
}
