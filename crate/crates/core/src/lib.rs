//! Mean-field and Gaussian-fluctuation model of a driven cavity coupled to a
//! Kerr magnon mode and a mechanical phonon mode.

pub mod dynamics;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod ode;
pub mod params;
pub mod stability;
pub mod steady;
pub mod sweep;

pub use error::{Error, Result};
pub use params::{derive, DerivedParams, SystemParams};
