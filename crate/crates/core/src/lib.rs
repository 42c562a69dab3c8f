//! Quantum-kernel anomaly detection.
//!
//! Feature maps encode multivariate samples into circuits, kernels are
//! estimated by statevector or noisy density-matrix simulation, and a
//! ν-one-class SVM separates normal operation from anomalies.

pub mod error;
pub mod featuremap;
pub mod kernel;
pub mod matrix;
pub mod noise;
pub mod ocsvm;
pub mod pipeline;
pub mod preprocess;
pub mod sim;

pub use error::{Error, Result};
pub use matrix::Matrix;
