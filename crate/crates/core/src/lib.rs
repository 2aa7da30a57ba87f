//! Simulation laboratory for area-conditioned droplets in the planar
//! random cluster model.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cones;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod lattice;
pub mod resample;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod wulff;

pub use dynamics::{Boundary, RcmParams};
pub use error::{Error, Result};
pub use geometry::{Circuit, GeometrySummary};
pub use lattice::{EdgeConfig, EdgeId, Vertex, Window};

/// Artifact version stamped on every output row.
pub const ARTIFACT_VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));
