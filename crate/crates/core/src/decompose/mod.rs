//! Detection of Calabi product structure and factor extraction.

mod axes;
mod detect;
mod extract;
mod normalize;
mod spectrum;
mod theorem3;

pub use axes::{axis_residual, find_axes, find_axes_with, AxisSearch, CandidateAxis, DEFAULT_RESTARTS};
pub use detect::{axis_gradient, detect, theorem3_gate, Analysis, DecompositionVerdict, DetectOptions, PointAnalysis, VerdictKind};
pub use extract::{closure_constant, extract_pair_factors, extract_point_factor, Closure, FactorData};
pub use normalize::{normalize_homothety, Normalized};
pub use spectrum::{classify_spectrum, complement_basis, cross_residual, Cluster, Orientation, Pattern, SpectralStructure, MERGE_GAP};
pub use theorem3::{curvature_derivation_residual, derived_relation, theorem3_from, Theorem3Gate};

use crate::blaschke::BlaschkeError;
use crate::numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecomposeError {
    #[error("surface is not hyperbolic (H ≥ 0): H = {h}")]
    NotHyperbolic { h: f64 },
    #[error("could not bracket the homothety factor")]
    Bracket,
    #[error("mean curvature is not monotone in the homothety factor")]
    NotMonotone,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Blaschke(#[from] BlaschkeError),
    #[error("verdict kind {0} does not allow this extraction")]
    WrongVerdict(String),
    #[error("verdict carries no per-point analysis")]
    NoAnalysis,
}
