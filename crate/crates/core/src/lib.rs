//! Variation functions of model classes in L²([−1,1]^M), optimal sampling
//! weights, restricted-isometry estimates, weighted least squares and
//! rank-1 hard thresholding, and reach-based local variation bounds.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is on
//! (default); [`exec::Exec::Sequential`] gives the same results bit for bit.

pub mod basis;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod grid;
pub mod measure;
pub mod model;
pub mod quadrature;
pub mod rip;
pub mod solver;
pub mod variation;

pub use basis::{CoeffTensor, TensorBasis};
pub use error::{Error, Result};
pub use exec::Exec;
pub use grid::Grid;
pub use measure::{draw_samples, Domain, SampleBatch, WeightFunction};
pub use model::ModelClass;
pub use variation::{Certificate, VariationFn};
