//! Time evolution and stationary states.

mod bound;
mod krylov;
mod master;
mod spectral;
mod state;
mod volterra;

pub use bound::{bound_states, BoundState, BoundStateResult, Branch, Parity};
pub use krylov::{propagate_dense, propagate_krylov, propagate_krylov_opts, propagate_krylov_with, KrylovOptions};
pub use master::{
    check_completely_positive, evolve_lindblad, evolve_lindblad_opts, evolve_tcl2, evolve_tcl2_opts,
    lowering_operators, MasterOptions,
};
pub(crate) use master::{min_eigenvalue, validate_density};
pub use spectral::{propagate_spectral, star_spectrum, StarSpectrum};
pub use state::{
    atomic_index, atomic_mask, density_from_atomic, uniform_grid, Frames, PureState, StateTrajectory,
    TwoAtomAmplitudes,
};
pub use volterra::{
    solve_amplitude_with, solve_decay_amplitude, solve_decay_amplitude_opts, solve_two_atom_amplitudes,
    solve_two_atom_amplitudes_opts, VolterraOptions,
};

use crate::model::ModelParams;

/// Smallest ring that keeps the fastest wave front (`B` sites per unit time,
/// in both directions) from wrapping around before `t_max`: `B·t_max` plus
/// the largest atom separation, rounded up to an even count.
pub fn minimum_bath_sites(half_width: f64, t_max: f64, max_separation: i64) -> usize {
    let m = (half_width * t_max).ceil() as usize + max_separation.unsigned_abs() as usize;
    (m + m % 2).max(4)
}

/// Warn when the ring is too small for a revival-free run up to `t_max`.
pub fn check_bath_size(p: &ModelParams, t_max: f64) -> bool {
    let sep = match (p.atom_positions.iter().min(), p.atom_positions.iter().max()) {
        (Some(lo), Some(hi)) => hi - lo,
        _ => 0,
    };
    let need = minimum_bath_sites(p.half_width, t_max, sep);
    if p.sites < need {
        log::warn!(
            "M = {} sites is below {need}: wave fronts wrap around the ring before t = {t_max}",
            p.sites
        );
        return false;
    }
    true
}
