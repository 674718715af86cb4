//! Primal-dual interior-point solver for low-rank semidefinite programs.
//!
//! Each Newton step is solved through an augmented system built from a
//! low-rank-plus-well-conditioned split of the Nesterov–Todd scaling, so the
//! Krylov back ends (MINRES, indefinite PCG) see a condition number that
//! stays bounded as the barrier parameter goes to zero.

pub mod cones;
pub mod decomp;
pub mod error;
pub mod format;
pub mod ipm;
pub mod krylov;
pub mod newton;
pub mod operator;
pub mod problems;
pub mod studies;
pub mod symlin;

pub use error::{Error, Result};
