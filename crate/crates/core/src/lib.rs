//! Semiclassical wave propagation in phase space via the Smoothed Wigner
//! Transform (SWT).
//!
//! Pipeline: [`signals`] synthesizes an ε-oscillatory wavefunction,
//! [`phasespace`] computes its Wigner transform by FFT and smooths it with the
//! ε-scaled Gaussian, [`dynamics`] transports the smoothed density along the
//! Hamiltonian characteristics with particles, [`observables`] reduces phase
//! space to slow-scale densities, [`reference`] supplies physical-space
//! solutions to compare against, and [`harness`] ties it together with timing,
//! ε-sweeps and the command line.

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod io;
pub mod observables;
pub mod phasespace;
pub mod reference;
pub mod signals;

pub use error::{Error, Result};
