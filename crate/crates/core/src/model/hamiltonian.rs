use std::sync::Arc;

use nalgebra::DMatrix;

use super::basis::{BasisIndex, BasisState, Sector};
use super::params::ModelParams;
use super::sparse::CsrMatrix;
use crate::{Error, Result, C64};

/// Switches for [`build_hamiltonian_with`].
#[derive(Clone, Copy, Debug, Default)]
pub struct HamiltonianOptions {
    /// Accept `n_max < n_exc` in truncated sectors. The cutoff then drops
    /// physical states, so it is an approximation rather than a basis choice.
    pub allow_occupation_truncation: bool,
}

/// Hermitian Hamiltonian in an explicitly indexed basis.
///
/// Stored in CSR form for every sector: even the single-excitation block is
/// tridiagonal plus `N` couplings, and the bath sizes needed for long runs
/// (thousands of sites) rule out dense storage.
#[derive(Clone, Debug)]
pub struct HamiltonianMatrix {
    params: ModelParams,
    basis: Arc<BasisIndex>,
    matrix: CsrMatrix,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn sector(&self) -> Sector {
        self.basis.sector()
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn basis(&self) -> &BasisIndex {
        &self.basis
    }

    pub fn shared_basis(&self) -> Arc<BasisIndex> {
        Arc::clone(&self.basis)
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.matrix.mul_vec(x)
    }
}

/// Site index each atom couples to. In Dicke sectors every atom sits on the
/// site of the first atom, so the photon phases are identical for all atoms.
pub fn coupling_sites(p: &ModelParams, dicke: bool) -> Vec<u32> {
    p.atom_positions
        .iter()
        .map(|&r| {
            let r = if dicke { p.atom_positions[0] } else { r };
            p.site_index(r) as u32
        })
        .collect()
}

pub fn build_hamiltonian(p: &ModelParams, basis: &BasisIndex) -> Result<HamiltonianMatrix> {
    build_hamiltonian_with(p, basis, HamiltonianOptions::default())
}

/// Assemble `H = Σ_s A n_s + (B/2) Σ_s (a_s† a_{s+1} + h.c.) + ω_S Σ_j σ_j⁺σ_j
/// + g Σ_j (σ_j⁺ a_{m(j)} + h.c.)` on the basis.
pub fn build_hamiltonian_with(
    p: &ModelParams,
    basis: &BasisIndex,
    opts: HamiltonianOptions,
) -> Result<HamiltonianMatrix> {
    p.validate()?;
    if basis.n_atoms() != p.n_atoms() || basis.n_sites() != p.sites {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} atoms and {} sites, parameters have {} and {}",
            basis.n_atoms(),
            basis.n_sites(),
            p.n_atoms(),
            p.sites
        )));
    }
    if let Some((n_max, n_exc)) = basis.sector().truncation() {
        if n_max < n_exc {
            if !opts.allow_occupation_truncation {
                return Err(Error::param(
                    "n_max",
                    format!("occupation cutoff {n_max} is below the excitation cutoff {n_exc}"),
                ));
            }
            log::warn!("occupation cutoff {n_max} < {n_exc}: states with crowded sites are dropped");
        }
    }

    let m = p.sites as u32;
    let hop = 0.5 * p.half_width;
    let g = p.g_coupling;
    let sites = coupling_sites(p, basis.sector().is_dicke());
    let mut triplets = Vec::new();

    for (i, state) in basis.states().iter().enumerate() {
        let diag = p.omega_s * state.atoms.count_ones() as f64 + p.band_center * state.photon_count() as f64;
        if diag != 0.0 {
            triplets.push((i, i, C64::new(diag, 0.0)));
        }
        for &(s, n) in &state.photons {
            // hop one photon from s to s + 1; the reverse move is the conjugate entry
            let next = if s + 1 < m {
                Some(s + 1)
            } else if p.periodic {
                Some(0)
            } else {
                None
            };
            if let Some(t) = next {
                let n_t = state.occupation(t);
                let target = state.with_photon_delta(s, -1).with_photon_delta(t, 1);
                push_pair(basis, &mut triplets, i, &target, hop * ((n * (n_t + 1)) as f64).sqrt());
            }
        }
        // absorb a photon at m(j) into a ground-state atom j
        for (j, &site) in sites.iter().enumerate() {
            if state.atoms & (1 << j) != 0 {
                continue;
            }
            let n = state.occupation(site);
            if n == 0 || g == 0.0 {
                continue;
            }
            let mut target = state.with_photon_delta(site, -1);
            target.atoms |= 1 << j;
            push_pair(basis, &mut triplets, i, &target, g * (n as f64).sqrt());
        }
    }

    Ok(HamiltonianMatrix {
        params: p.clone(),
        basis: Arc::new(basis.clone()),
        matrix: CsrMatrix::from_triplets(basis.dim(), triplets),
    })
}

fn push_pair(
    basis: &BasisIndex,
    triplets: &mut Vec<(usize, usize, C64)>,
    from: usize,
    target: &BasisState,
    amp: f64,
) {
    if let Some(to) = basis.index_of(target) {
        triplets.push((to, from, C64::new(amp, 0.0)));
        triplets.push((from, to, C64::new(amp, 0.0)));
    }
}
