//! Phase-space quantum statistical mechanics for a single degree of freedom.
//!
//! The crate evaluates the virial averages `<q dH/dq>` and `<p dH/dp>` of a
//! separable Hamiltonian against a thermal Wigner distribution, and checks them
//! against the classical equipartition value `k_B T` and the zero-point value
//! `hbar omega / 2` of the harmonic oscillator.
//!
//! * [`symbols`]: exact polynomial phase-space symbols, Poisson brackets, grids.
//! * [`moyal`]: Moyal star product and Moyal bracket as terminating series.
//! * [`weyl`]: Wigner transform of position kernels and the Fock-basis Weyl
//!   quantization oracle.
//! * [`thermal`]: Mehler kernel, oscillator partition function, closed-form
//!   thermal Wigner state, classical Gibbs density, second-order reduced density.
//! * [`equipartition`]: virial averages by three routes, `beta_mod`, sweeps.
//! * [`cli`]: the `qequip` command-line frontend.
//!
//! Natural units `hbar = k_B = m = omega = 1` are the defaults everywhere; every
//! constant can be overridden.

pub mod cli;
pub mod equipartition;
mod error;
pub mod format;
pub mod moyal;
pub mod symbols;
pub mod thermal;
pub mod weyl;

pub use error::{Error, Result};
