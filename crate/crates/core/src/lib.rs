//! Simulation and design toolkit for lensless imaging with ultrafast
//! time-resolved sensors and patterned illumination.

pub mod coherence;
pub mod error;
pub mod harness;
pub mod io;
pub mod patterns;
pub mod placement;
pub mod raster;
pub mod simrecon;
pub mod transport;

pub use error::{Error, Result};
