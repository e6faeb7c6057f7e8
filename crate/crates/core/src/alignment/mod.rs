//! Learning the linear map between two embedding spaces from anchor pairs.

mod anchors;
mod closed_form;
mod map;
pub mod rcsls;
pub mod refine;

pub use anchors::{build_anchors, AnchorSet};
pub use closed_form::{align_least_squares, align_procrustes, residual, spectral_project, RIDGE};
pub use map::{read_provenance, LinearMap, Method, ORTHOGONALITY_TOL};
pub use rcsls::{align_rcsls, rcsls_loss, RcslsConfig, RcslsObjective, RcslsOutcome, Refresh};
pub use refine::{refine, RefineConfig, RefineOutcome};

use crate::embed::EmbeddingSpace;
use crate::error::Result;

/// Maps every row of `space` through `map`.
pub fn apply_map(map: &LinearMap, space: &EmbeddingSpace) -> Result<EmbeddingSpace> {
    map.apply(space)
}
