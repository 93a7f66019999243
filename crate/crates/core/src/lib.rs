//! Spectra of the anisotropic quantum Rabi model
//!
//! ```text
//! H = Δ/2 σz + a†a + g1 (a†σ− + aσ+) + g2 (a†σ+ + aσ−)
//! ```
//!
//! with the cavity frequency fixed to one. The crate provides
//!
//! * [`gfunc`]: the G-function built on displaced coherent states; its zeros
//!   are the regular eigenvalues and its lifted poles give the doubly
//!   degenerate exceptional points,
//! * [`grwa`]: the displaced-basis expansion with the adiabatic (zero-order),
//!   generalized rotating-wave (first-order) and general truncated solutions,
//! * [`oracle`]: dense diagonalization in a truncated Fock basis, used as the
//!   reference for everything else,
//! * [`spectrum`]: parameter sweeps, crossing detection and method comparison,
//! * [`cli`]: the command line front end.

pub mod cli;
pub mod error;
pub mod gfunc;
pub mod grwa;
pub mod model;
pub mod oracle;
pub mod roots;
pub mod spectrum;

pub use error::{Error, Result};
pub use model::{DerivedParams, ModelParams, Parity};
