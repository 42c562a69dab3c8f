//! Gate-level simulation: exact pure-state evolution for ideal kernels and
//! density-matrix evolution with per-gate noise channels for noisy ones.
//!
//! Qubit 0 is the least-significant bit of every basis-state index.

mod density;
mod gate;
mod state;

pub use density::{run_density, zero_outcome_probability, Confusion, DensityMatrix, DENSITY_CAP};
pub use gate::{gate_matrix, Gate, GateKind, GateMatrix};
pub use state::{overlap_probability, run_pure, Circuit, QuantumState, PURE_CAP};
