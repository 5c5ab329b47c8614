//! Neumann-Poincare spectra, principal-symbol flows and concentration diagnostics
//! on smooth closed surfaces in three dimensions.

pub mod cli_io;
pub mod error;
pub mod geometry;
pub mod helmholtz;
pub mod layer_potentials;
pub mod linalg;
pub mod spectral;
pub mod symbol_dynamics;
pub mod weyl_concentration;

pub use error::{Error, Result};
