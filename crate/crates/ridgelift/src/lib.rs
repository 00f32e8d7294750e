//! Learning multi-ridge functions f(x) = g(Ax + b) from point evaluations.
//!
//! The pipeline samples centers on the unit sphere together with Rademacher
//! direction bundles, assembles finite-difference measurements of the rank-k
//! matrix X = A^T G, recovers X with a low-rank solver, extracts the active
//! subspace A-hat from its SVD, and rebuilds the function through a grid
//! interpolant of g-hat(y) = f(A-hat^T y). The `analysis` module evaluates the
//! closed-form sampling and error bounds that govern the scheme, and
//! `harness` reproduces the simulation studies.

pub mod analysis;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod recovery;
pub mod sampling;
pub mod textmat;

pub use error::{Result, RidgeError};
pub use model::{LinkFunction, NoiseModel, Oracle, RidgeModel};
