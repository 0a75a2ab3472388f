//! First-passage percolation on Z^d.
//!
//! The crate is generic over the passage-time scalar (see [`Weight`]); the
//! aliases below fix the common choices.

pub mod deviations;
pub mod error;
pub mod lattice;
pub mod paths;
pub mod regen;
pub mod scalar;
pub mod shells;
pub mod stats;
pub mod weights;

pub use error::*;
pub use lattice::{LatticeEdge, LatticePoint, Length, Region, Window};
pub use scalar::{Fixed, Weight};
pub use weights::{DistributionSpec, EdgeWeights, WeightField};

/// Passage times in double precision.
pub type Time = f64;
/// The default realized field.
pub type Field = WeightField<f64>;
/// A field realized in exact fixed point, for zero-tolerance identities.
pub type ExactField = WeightField<Fixed>;
