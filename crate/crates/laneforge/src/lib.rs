//! Numerical toolkit for anchor-decomposition lane detection.
//!
//! The crate covers the math that surrounds a lane-detection backbone
//! without including one: supervision-target generation, the IoU-family
//! line losses with analytic gradients, CPU reference kernels for the
//! attention and deformable-sampling blocks, dynamic label assignment,
//! and the standard benchmark metrics. Everything is deterministic and
//! f64 end to end so results can serve as ground truth for faster
//! implementations.

pub mod assign;
pub mod config;
pub mod dataio;
pub mod geometry;
pub mod kernels;
pub mod losses;
pub mod metrics;
pub mod targets;
