//! Dataset pipeline, classifier training and sorting metrics for images of
//! pyrolyzed smartphone components.

pub mod annotations;
pub mod augment;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fsutil;
pub mod geometry;
pub mod labels;
pub mod metrics;
pub mod model;
pub mod plot;

pub use error::{Error, Result};
