//! Parabolic representation pairs of punctured surface groups.
//!
//! The crate covers validation and first/second-order deformation theory of
//! pairs, weighted (semi/poly)stability both directly and through the
//! star-shaped quiver, a moment-map flow for w-good Hermitian metrics, and
//! logarithmic residue calculus for boundary monodromies.

pub mod cli;
pub mod cohomology;
pub mod error;
pub mod instance;
pub mod json;
pub mod linalg;
pub mod metric;
pub mod quiver;
pub mod rep_pair;
pub mod rhd;
pub mod sampling;
pub mod stability;
pub mod subspaces;
pub mod surface;

pub use error::{Error, Result};
