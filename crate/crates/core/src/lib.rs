//! Pseudo-spectral simulation of randomly forced resistive magnetic
//! relaxation on the periodic torus `T^d`, `d in {2, 3}`.

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod eigenbasis;
pub mod ensemble;
pub mod error;
pub mod forcing;
pub mod integrator;
pub mod io;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
