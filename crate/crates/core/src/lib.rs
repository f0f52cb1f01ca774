//! Simulator for the dissipatively kicked quantum harmonic oscillator
//! (kicked fluxonium).
//!
//! The crate has two engines that share one parameter set:
//!
//! * [`classical`]: the exact one-period map of the damped, kicked
//!   oscillator, with ensemble histograms and Lyapunov spectra.
//! * [`lindblad`]: exact stroboscopic evolution of Fock-basis operators under
//!   amplitude damping, free rotation and the `cos(q x̂)` kick.
//!
//! [`observables`] turns evolved states into Husimi grids, spectra, entropies
//! and negativities.

pub mod classical;
pub mod error;
pub mod fock;
pub mod grid;
pub mod linalg;
pub mod lindblad;
pub mod observables;
pub mod operator;
pub mod oracle;
pub mod params;
pub mod snapshot;

pub use error::{Error, Result};
pub use grid::{GridSpec, PhaseGrid};
pub use operator::{DensityMatrix, OperatorMatrix};
pub use params::{RunConfig, SystemParams};

pub use num_complex::Complex64 as C64;
