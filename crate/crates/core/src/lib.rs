//! Radio- and flow-level model of a macro cell whose traffic hotspot is
//! offloaded by a moving small cell.

pub mod analytic;
pub mod error;
pub mod flowsim;
pub mod ccdf;
pub mod cli;
pub mod geometry;
pub mod hotspot;
pub mod mobility;
pub mod radio;
pub mod special;

pub use error::{Error, Result};
