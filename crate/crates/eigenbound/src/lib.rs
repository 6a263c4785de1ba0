//! Guaranteed two-sided bounds on all eigenvalues of preconditioned FEM
//! diffusion and elasticity pencils, verified against a dense generalized
//! eigensolver, plus the accompanying PCG convergence experiments.
//!
//! The bound sequences need only the material data on element patches: per
//! element the extremes of the pointwise pencil eigenvalues are computed
//! exactly (or conservatively sampled, flagged non-certified), patch min/max
//! give one bound pair per DOF, and sorting both series brackets the k-th
//! eigenvalue of Ã⁻¹A between the k-th entries.

// index loops mirror the matrix formulas in the numeric kernels
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod bounds;
pub mod cases;
pub mod error;
pub mod material;
pub mod mesh;
pub mod pcg;
pub mod smalleig;

pub use error::{Error, Result};
