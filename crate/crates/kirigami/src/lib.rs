//! Inverse design of parallelogram-void kirigami.
//!
//! A ratio field decodes to a layout of parallelogram voids ([`geometry`]), the layout
//! renders to a binary silhouette ([`sim`]), silhouettes are compared under similarity
//! alignment ([`metrics`]), and the remaining modules build datasets, run classical
//! solvers, hold the flow-matching / group-relative math, and export DXF cut files.

pub mod dataset;
pub mod dxf;
pub mod error;
pub mod genmodel;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod sim;
pub mod solvers;
pub mod targets;

pub use error::{Error, Result};
