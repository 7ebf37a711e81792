//! Pose-conditioned adversarial patches: optimization over 3D patch poses
//! and attack-success evaluation across pose sweeps.

pub mod attack;
pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod model;
pub mod render;
pub mod seeds;

pub use error::{Error, Result};
