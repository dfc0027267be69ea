//! Populations, reduced atomic states, concurrence and entropy.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::dynamics::{atomic_index, min_eigenvalue, validate_density, Frames, PureState, StateTrajectory};
use crate::model::BasisIndex;
use crate::{Error, Result, C64};

/// Excited-state populations over a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Populations {
    pub t_grid: Vec<f64>,
    /// `per_atom[j][i]`: atom `j` at time `t_grid[i]`.
    pub per_atom: Vec<Vec<f64>>,
    pub total: Vec<f64>,
}

pub fn atomic_populations(traj: &StateTrajectory) -> Result<Populations> {
    let n = traj.n_atoms;
    let frames: Vec<Vec<f64>> = match &traj.frames {
        Frames::Pure { basis, states } => states.iter().map(|s| frame_populations(s, basis)).collect::<Result<_>>()?,
        Frames::Density(rhos) => rhos
            .iter()
            .map(|rho| {
                if rho.nrows() != 1 << n {
                    return Err(Error::DimensionMismatch(format!("density operator is not {0}x{0}", 1 << n)));
                }
                let mut p = vec![0.0; n];
                for mask in 0..1u32 << n {
                    let w = rho[(atomic_index(n, mask), atomic_index(n, mask))].re;
                    for (j, pj) in p.iter_mut().enumerate() {
                        if mask >> j & 1 == 1 {
                            *pj += w;
                        }
                    }
                }
                Ok(p)
            })
            .collect::<Result<_>>()?,
    };
    let per_atom = (0..n).map(|j| frames.iter().map(|p| p[j]).collect()).collect();
    let total = frames.iter().map(|p| p.iter().sum()).collect();
    Ok(Populations { t_grid: traj.t_grid.clone(), per_atom, total })
}

/// Excited population of every atom in one pure frame.
pub fn frame_populations(state: &PureState, basis: &BasisIndex) -> Result<Vec<f64>> {
    if state.amplitudes.len() != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "frame has {} amplitudes, basis has {}",
            state.amplitudes.len(),
            basis.dim()
        )));
    }
    let mut p = vec![0.0; basis.n_atoms()];
    for (a, st) in state.amplitudes.iter().zip(basis.states()) {
        let w = a.norm_sqr();
        for (j, pj) in p.iter_mut().enumerate() {
            if st.atoms >> j & 1 == 1 {
                *pj += w;
            }
        }
    }
    Ok(p)
}

/// Partial trace over the field: amplitudes sharing a photon configuration
/// form one environment branch, distinct configurations are orthogonal.
pub fn reduce_to_atoms(state: &PureState, basis: &BasisIndex) -> Result<DMatrix<C64>> {
    if state.amplitudes.len() != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} amplitudes, basis has {}",
            state.amplitudes.len(),
            basis.dim()
        )));
    }
    let n = basis.n_atoms();
    let dim = 1usize << n;
    let mut branches: BTreeMap<&[(u32, u32)], Vec<C64>> = BTreeMap::new();
    for (a, st) in state.amplitudes.iter().zip(basis.states()) {
        branches.entry(&st.photons).or_insert_with(|| vec![C64::new(0.0, 0.0); dim])[atomic_index(n, st.atoms)] += a;
    }
    if state.vacuum != C64::new(0.0, 0.0) {
        branches.entry(&[]).or_insert_with(|| vec![C64::new(0.0, 0.0); dim])[atomic_index(n, 0)] += state.vacuum;
    }
    let mut rho = DMatrix::zeros(dim, dim);
    for v in branches.values() {
        for i in 0..dim {
            if v[i] == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..dim {
                rho[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    Ok(rho)
}

/// Check trace, Hermiticity and positivity of an `N`-atom density operator.
pub fn check_density(rho: &DMatrix<C64>, n_atoms: usize) -> Result<()> {
    validate_density(rho, n_atoms)
}

/// `(σ_y ⊗ σ_y) ρ* (σ_y ⊗ σ_y)`.
pub fn spin_flip(rho: &DMatrix<C64>) -> DMatrix<C64> {
    // σ_y ⊗ σ_y is antidiagonal with signs (-1, 1, 1, -1) in either ordering
    let s = [-1.0, 1.0, 1.0, -1.0];
    DMatrix::from_fn(4, 4, |i, j| rho[(3 - i, 3 - j)].conj() * (s[i] * s[j]))
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(rho: &DMatrix<C64>) -> Result<f64> {
    validate_density(rho, 2)?;
    let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let e = herm.clone().symmetric_eigen();
    let flipped = spin_flip(&herm);
    let mut spectrum: Vec<f64> = e.eigenvalues.iter().copied().collect();
    spectrum.sort_by(|a, b| b.total_cmp(a));
    if spectrum[1] <= 1e-14 {
        // pure state: C = |⟨ψ|ψ̃⟩| = √Tr(ρρ̃), straight from the entries
        let overlap: f64 = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| (herm[(i, j)] * flipped[(j, i)]).re).sum();
        return Ok(overlap.max(0.0).sqrt().clamp(0.0, 1.0));
    }
    let squares: Vec<C64> = match (&herm * &flipped).try_schur(f64::EPSILON, 1000) {
        Some(s) => s.eigenvalues().map(|v| v.iter().copied().collect()),
        None => None,
    }
    .unwrap_or_else(|| {
        // the unsymmetric iteration can stall on degenerate spectra; √ρ ρ̃ √ρ
        // has the same eigenvalues and is Hermitian
        let sqrt_vals = DMatrix::from_diagonal(&e.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0)));
        let root = &e.eigenvectors * sqrt_vals * e.eigenvectors.adjoint();
        let m = &root * &flipped * &root;
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        m.symmetric_eigenvalues().iter().map(|&l| C64::new(l, 0.0)).collect()
    });
    let mut lambdas = Vec::with_capacity(4);
    for z in &squares {
        if z.re < -1e-9 {
            return Err(Error::InvalidState(format!("ρρ̃ has eigenvalue {z} with negative real part")));
        }
        lambdas.push(z.re.max(0.0).sqrt());
    }
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0))
}

/// Concurrence of two atoms in independent reservoirs, each decaying with
/// amplitude `q(t)`, starting from an X-shaped `ρ₀` (only diagonal, `ρ₂₃`
/// and `ρ₁₄` coherences). With `u = 1 - |q|²`:
/// `K₁ = |q|² (|ρ₂₃| - √ρ₁₁ √(ρ₄₄ + u(ρ₂₂ + ρ₃₃) + u²ρ₁₁))`,
/// `K₂ = |q|² (|ρ₁₄| - √((ρ₂₂ + uρ₁₁)(ρ₃₃ + uρ₁₁)))`, `C = 2 max(0, K₁, K₂)`.
pub fn concurrence_independent(rho0: &DMatrix<C64>, q: &[C64]) -> Result<Vec<f64>> {
    validate_density(rho0, 2)?;
    let d = |i: usize| rho0[(i, i)].re.max(0.0);
    let (r11, r22, r33, r44) = (d(0), d(1), d(2), d(3));
    let r23 = rho0[(1, 2)].norm();
    let r14 = rho0[(0, 3)].norm();
    Ok(q.iter()
        .map(|q| {
            let s = q.norm_sqr();
            let u = 1.0 - s;
            let k1 = s * (r23 - r11.sqrt() * (r44 + u * (r22 + r33) + u * u * r11).max(0.0).sqrt());
            let k2 = s * (r14 - ((r22 + u * r11) * (r33 + u * r11)).max(0.0).sqrt());
            2.0 * k1.max(k2).max(0.0)
        })
        .collect())
}

/// `-Tr ρ ln ρ` with `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &DMatrix<C64>) -> f64 {
    let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigen()
        .eigenvalues
        .iter()
        .filter(|&&l| l > 1e-300)
        .map(|&l| -l * l.ln())
        .sum::<f64>()
        .max(0.0)
}

/// Atom-field entanglement entropy of a pure frame.
pub fn entanglement_entropy(state: &PureState, basis: &BasisIndex) -> Result<f64> {
    Ok(von_neumann_entropy(&reduce_to_atoms(state, basis)?))
}

/// Entropy series of a pure trajectory (density frames carry no field).
pub fn entropy_series(traj: &StateTrajectory) -> Result<Vec<f64>> {
    match &traj.frames {
        Frames::Pure { basis, states } => states.iter().map(|s| entanglement_entropy(s, basis)).collect(),
        Frames::Density(_) => Err(Error::InvalidState("entropy needs pure atom-field frames".into())),
    }
}

/// Concurrence series of a two-atom trajectory.
pub fn concurrence_series(traj: &StateTrajectory) -> Result<Vec<f64>> {
    if traj.n_atoms != 2 {
        return Err(Error::InvalidState(format!("concurrence needs 2 atoms, got {}", traj.n_atoms)));
    }
    match &traj.frames {
        Frames::Pure { basis, states } => states.iter().map(|s| concurrence(&reduce_to_atoms(s, basis)?)).collect(),
        Frames::Density(rhos) => rhos
            .iter()
            .map(|r| {
                // TCL2 may leave the positive cone; report that rather than a number
                let m = min_eigenvalue(r);
                if m < -1e-9 {
                    return Err(Error::InvalidState(format!("frame has negative eigenvalue {m:e}")));
                }
                concurrence(r)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::density_from_atomic;
    use crate::model::{BasisState, Sector};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn psi2() -> DMatrix<C64> {
        let h = c(0.5f64.sqrt());
        density_from_atomic(2, &[(0b01, h), (0b10, h)])
    }

    #[test]
    fn concurrence_of_reference_states() {
        assert!((concurrence(&psi2()).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(concurrence(&density_from_atomic(2, &[(0b01, c(1.0))])).unwrap(), 0.0);
    }

    #[test]
    fn isotropic_mixture() {
        // p|ψ₂⟩⟨ψ₂| + (1-p) I/4 has C = (3p - 1)/2
        let p = 0.5;
        let rho = psi2() * c(p) + DMatrix::identity(4, 4) * c((1.0 - p) / 4.0);
        assert!((concurrence(&rho).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn unphysical_input_is_rejected() {
        let mut rho = psi2();
        rho[(0, 0)] = c(-0.1);
        rho[(3, 3)] = c(0.1);
        assert!(concurrence(&rho).is_err());
    }

    #[test]
    fn independent_concurrence_follows_decay() {
        let q: Vec<C64> = (0..20).map(|i| C64::from_polar((-0.1 * i as f64).exp(), 0.3 * i as f64)).collect();
        let cs = concurrence_independent(&psi2(), &q).unwrap();
        for (v, q) in cs.iter().zip(&q) {
            assert!((v - q.norm_sqr()).abs() < 1e-12);
        }
        let frozen = concurrence_independent(&psi2(), &[c(1.0); 3]).unwrap();
        assert!(frozen.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn reduction_of_single_excitation_frame() {
        let b = BasisIndex::new(Sector::SingleExcitation, 1, 4).unwrap();
        let h = c(0.5f64.sqrt());
        let mut s = PureState::zeros(b.dim());
        s.amplitudes[b.index_of(&BasisState { atoms: 1, photons: vec![] }).unwrap()] = h;
        s.amplitudes[b.index_of(&BasisState { atoms: 0, photons: vec![(2, 1)] }).unwrap()] = h;
        let rho = reduce_to_atoms(&s, &b).unwrap();
        assert!((rho[(0, 0)].re - 0.5).abs() < 1e-15 && (rho[(1, 1)].re - 0.5).abs() < 1e-15);
        assert_eq!(rho[(0, 1)], c(0.0));
        assert!((entanglement_entropy(&s, &b).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn product_state_is_pure() {
        let b = BasisIndex::new(Sector::truncated(2), 2, 6).unwrap();
        let h = c(0.5f64.sqrt());
        let s = PureState::from_atomic(&b, &[(0b01, h), (0b10, h)]).unwrap();
        let rho = reduce_to_atoms(&s, &b).unwrap();
        assert!((rho - psi2()).norm() < 1e-15);
        assert!(entanglement_entropy(&s, &b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn vacuum_amplitude_enters_ground_state() {
        let b = BasisIndex::new(Sector::SingleExcitation, 2, 6).unwrap();
        let h = c(0.5f64.sqrt());
        let s = PureState::from_atomic(&b, &[(0b00, h), (0b01, h)]).unwrap();
        let rho = reduce_to_atoms(&s, &b).unwrap();
        assert!((rho[(3, 1)].re - 0.5).abs() < 1e-15);
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
    }
}
