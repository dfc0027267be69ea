//! Dynamics of two-level atoms coupled to a one-dimensional coupled-resonator
//! waveguide with cosine band dispersion `ω(k) = A + B cos(k h0)`.
//!
//! Energies are measured in units of the atom-resonator coupling `g` and times
//! in units of `1/g`. The crate provides
//!
//! * [`model`]: parameters, basis indexing and Hamiltonians for the
//!   single-excitation and truncated-Fock sectors (plus Dicke variants),
//! * [`kernels`]: bath correlation functions, time-dependent rates and their
//!   Markov limits,
//! * [`dynamics`]: Krylov propagation, TCL2/Lindblad integration, Volterra
//!   solvers for the collective amplitudes and bound-state solutions,
//! * [`observables`]: populations, reduced density operators, concurrence and
//!   entanglement entropy,
//! * [`analysis`]: error metrics, relaxation fits and resumable parameter
//!   sweeps.
//!
//! With the default `parallel` feature the data-parallel loops (mode sums,
//! multi-start fits, sweep cells) run on rayon; without it they run
//! sequentially and produce bitwise identical results.

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod kernels;
pub mod model;
pub mod observables;
pub mod par;
pub mod quad;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
