//! Simulator for a gate-tunable quantum dot in a nanowire: electrostatics,
//! effective-mass ground states, and the exciton fine-structure splitting
//! (FSS) as a function of the four gate voltages.

pub mod config;
pub mod constants;
pub mod device;
pub mod error;
pub mod excitonics;
pub mod field;
pub mod poisson;
pub mod schrodinger;
pub mod stencil;
pub mod sweep;

pub use error::{Result, SimError};
