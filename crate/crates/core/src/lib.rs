//! Convex training of bias-free two-layer ReLU networks under path-norm
//! regularization, with a neural-tangent-kernel baseline and capacity diagnostics.

pub mod arrangement;
pub mod complexity;
pub mod convex_solver;
pub mod data;
pub mod error;
pub mod harness;
pub mod io;
pub mod network;
pub mod ntk;
pub mod stats;

pub use arrangement::{enumerate_patterns, EnumerationMode, PatternSet};
pub use convex_solver::{
    assemble, solve, BlockSolution, ConvexProgram, SolverConfig, SolverDiagnostics, SolverStatus,
};
pub use data::Dataset;
pub use error::{Error, Result};
pub use network::TwoLayerNet;
