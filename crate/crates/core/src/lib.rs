//! Smoking-attributable mortality estimation, hierarchical double-logistic
//! modeling and probabilistic projection.

pub mod doublelogistic;
pub mod error;
pub mod evaluate;
pub mod forecast;
pub mod ingest;
pub mod model;
pub mod petolopez;
pub mod sampler;
pub mod synthetic;
pub mod types;

pub use error::{Error, Result};
pub use types::{AsafSeries, Sex};
