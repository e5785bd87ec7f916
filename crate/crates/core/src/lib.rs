//! Equiaffine (Blaschke) structure of parametrized hypersurfaces, Calabi
//! products of hyperbolic affine spheres, and their detection.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::should_implement_trait, clippy::type_complexity)]

pub mod blaschke;
pub mod calabi;
pub mod checks;
pub mod decompose;
pub mod dsl;
pub mod exec;
pub mod grid;
pub mod jet;
pub mod numerics;
