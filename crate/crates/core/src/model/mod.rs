//! Model parameters, basis indexing and Hamiltonian assembly.

mod basis;
mod hamiltonian;
mod params;
mod sparse;

pub use basis::{hilbert_dimension, BasisIndex, BasisState, Sector};
pub use hamiltonian::{
    build_hamiltonian, build_hamiltonian_with, coupling_sites, HamiltonianMatrix, HamiltonianOptions,
};
pub use params::{derive_params, DerivedParams, ModelParams};
pub use sparse::CsrMatrix;
