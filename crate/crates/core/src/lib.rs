pub mod applications;
pub mod bundle;
pub mod curve;
pub mod dataset;
pub mod design;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod inference;
pub mod knn;
pub mod nn;
pub mod parallel;
pub mod pca;
pub mod pipeline;
pub mod split;
pub mod synthetic;
pub mod vectorize;

pub use error::{GcsError, Result};
