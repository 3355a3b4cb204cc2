#![no_std]

extern crate alloc;

pub mod census;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod field;
pub mod gaussian;
pub mod kac_rice;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use spectral::{Amplitude, KernelTable, SpectralMoments};
