//! Invariant volume forms, metrics and curvature on model complex domains.

pub mod curvature;
pub mod domains;
pub mod error;
pub mod forms;
pub mod harness;
pub mod maps;
pub mod metrics;
pub mod optimize;
pub mod quotient;
pub mod report;
pub mod squeezing;
pub mod volumes;

pub use error::{Error, Result};
pub use forms::{ComplexPoint, DensityConvention, JacobianMatrix, VolumeDensity};
