//! Deterministic lattice combinatorics: projections, coordinate-distinct
//! subsets, separated matchings between parallel hyperplanes, bundles of
//! almost disjoint paths, detour paths avoiding an axis, exterior
//! boundaries, and lattice-animal counts.
//!
//! Every construction comes with a `verify` routine that checks the
//! guaranteed property exactly on the produced object.

mod animals;
mod assignment;
mod boundary;
mod bundle;
mod detour;
mod pointset;
mod separated;

pub use animals::{count_lattice_animals, MAX_ANIMAL_WORK};
pub use assignment::{max_bipartite_matching, min_cost_assignment};
pub use boundary::{exterior_boundary, is_star_connected, ExteriorBoundary, DEFAULT_KAPPA};
pub use bundle::{default_chi, digital_path, disjoint_path_bundle, near_segment, BundleGeometry, PathBundle};
pub use detour::{axis_avoiding_paths, DetourPaths};
pub use pointset::{
    distinct_coordinate_subset, m_bound, projection_best, DistinctSubset, PointSet, ProjectionMethod, ProjectionResult,
    SubsetMethod,
};
pub use separated::{segment_distance, separated_matching, two_swap_matching, SeparatedMatching};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombinatoricsError {
    #[error("empty point set")]
    Empty,
    #[error("points have inconsistent dimension")]
    Dimension,
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("enumeration too large: d * k = {0} exceeds the cap")]
    TooLarge(usize),
    #[error("construction failed its own check: {0}")]
    Verification(String),
}

/// Outcome of a self-check: the guaranteed bound, what was achieved, and
/// whether the guarantee holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub bound: f64,
    pub achieved: f64,
    pub pass: bool,
}
