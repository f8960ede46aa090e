//! Noise-tolerant successive linear programming for composite objectives
//! `φ(x) = ω(F(x))` with convex polyhedral `ω` and noisy evaluations of `F`
//! and its Jacobian.

pub mod error;
pub mod lp;
pub mod oracle;
pub mod polyhedral;
pub mod problems;
pub mod solver;

pub use error::{Error, Result};
pub use polyhedral::PolyhedralSpec;
