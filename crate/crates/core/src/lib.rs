//! Geometric-polynomial graph filters with a linear classifier on
//! precomputed features.
//!
//! The pipeline is: build a normalized adjacency ([`sparse`]), propagate node
//! features through the geometric filter ([`filter`]), optionally cache the
//! result ([`cache`]), then fit a softmax layer ([`classifier`]). [`spectral`]
//! inspects the filter's frequency response and [`sweep`] runs grids.

pub mod cache;
pub mod classifier;
pub mod data;
pub mod dense;
pub mod error;
pub mod filter;
pub mod pipeline;
pub mod sparse;
pub mod spectral;
pub mod sweep;
pub mod synthetic;

pub use dense::DenseMatrix;
pub use error::{DataError, Error, Result};
pub use filter::{Aggregation, FilterConfig, Sign};
pub use sparse::SparseMatrix;
