//! Exact single-excitation propagation on the periodic ring by full
//! diagonalization in the Bloch basis.
//!
//! For one atom, or for the collective states `(|10⟩ ± |01⟩)/√2` of two,
//! the atomic state couples to the modes `k` with weights `(g²/M) w_k`,
//! `w_k ∈ {1, 1 ± cos kL}`. Every eigenvalue of such a star Hamiltonian is a
//! root of `e - ω_S = (g²/M) Σ_k w_k/(e - ω_k)` (one per gap between
//! coupled mode frequencies plus one on either side) and the atomic weight
//! of its eigenvector is `1/(1 + (g²/M) Σ_k w_k/(e - ω_k)²)`. The atomic
//! amplitude then is `c(t) = Σ_e W_e e^{-iet} c(0)`.

use std::f64::consts::PI;

use crate::model::ModelParams;
use crate::{Error, Result, C64};

/// Couplings `G w` below this are dropped; their eigenvectors carry an
/// atomic weight far below double precision.
const NEGLIGIBLE: f64 = 1e-26;

/// Eigenvalues with nonzero atomic weight of one star Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct StarSpectrum {
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
}

impl StarSpectrum {
    /// `Σ_e W_e e^{-iet}`.
    pub fn amplitude(&self, t: f64) -> C64 {
        self.energies
            .iter()
            .zip(&self.weights)
            .map(|(&e, &w)| C64::from_polar(w, -e * t))
            .sum()
    }
}

/// Spectrum of `ω_S |a⟩⟨a| + Σ_j p_j |j⟩⟨j| + Σ_j √c_j (|a⟩⟨j| + h.c.)`
/// given `(p_j, c_j)` with distinct, increasing `p_j`.
pub fn star_spectrum(omega_s: f64, poles: &[(f64, f64)]) -> Result<StarSpectrum> {
    let active: Vec<(f64, f64)> = poles.iter().copied().filter(|&(_, c)| c > NEGLIGIBLE).collect();
    if active.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::param("poles", "mode frequencies must be distinct and increasing"));
    }
    if active.is_empty() {
        return Ok(StarSpectrum { energies: vec![omega_s], weights: vec![1.0] });
    }
    let k = active.len();
    let mut energies = Vec::with_capacity(k + 1);
    let mut weights = Vec::with_capacity(k + 1);
    // interval i lies between pole i-1 and pole i (unbounded at the ends);
    // offsets from the reference pole keep roots that hug a pole resolvable
    for i in 0..=k {
        let (base, lo, hi) = if i == 0 {
            let base = active[0].0;
            let reach = (base - omega_s).abs() + active.iter().map(|p| p.1).sum::<f64>().sqrt() + 1.0;
            (base, -2.0 * reach, 0.0)
        } else if i == k {
            let base = active[k - 1].0;
            let reach = (omega_s - base).abs() + active.iter().map(|p| p.1).sum::<f64>().sqrt() + 1.0;
            (base, 0.0, 2.0 * reach)
        } else {
            (active[i - 1].0, 0.0, active[i].0 - active[i - 1].0)
        };
        let offsets: Vec<(f64, f64)> = active.iter().map(|&(p, c)| (p - base, c)).collect();
        let x = root_in(&offsets, omega_s - base, lo, hi);
        let slope: f64 = offsets.iter().map(|&(d, c)| c / ((x - d) * (x - d))).sum();
        energies.push(base + x);
        weights.push(1.0 / (1.0 + slope));
    }
    Ok(StarSpectrum { energies, weights })
}

/// Root of the increasing `f(x) = x - s - Σ c/(x - d)` on `(lo, hi)`, where
/// the open ends are poles or far enough out to bracket the root.
fn root_in(offsets: &[(f64, f64)], s: f64, lo: f64, hi: f64) -> f64 {
    let f = |x: f64| -> (f64, f64) {
        let mut val = x - s;
        let mut der = 1.0;
        for &(d, c) in offsets {
            let r = 1.0 / (x - d);
            val -= c * r;
            der += c * r * r;
        }
        (val, der)
    };
    let (mut a, mut b) = (lo, hi);
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (v, d) = f(x);
        if v == 0.0 {
            return x;
        }
        if v < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - v / d;
        let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if next == x || !(b > a) || (b - a) <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        x = next;
    }
    x
}

/// Mode frequencies of the ring folded over `±k`, each with its weight
/// factor `w(k)` summed over the pair.
fn folded_poles(p: &ModelParams, w: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    let m = p.sites;
    let g2m = p.g_coupling * p.g_coupling / m as f64;
    let mut poles: Vec<(f64, f64)> = (0..=m / 2)
        .map(|q| {
            let k = 2.0 * PI * q as f64 / (m as f64 * p.h0);
            let mult = if q == 0 || q == m / 2 { 1.0 } else { 2.0 };
            (p.dispersion(k), g2m * mult * w(k))
        })
        .collect();
    poles.sort_by(|a, b| a.0.total_cmp(&b.0));
    poles
}

/// Atomic amplitudes (lab frame) of one or two atoms on a periodic ring,
/// starting from `Σ_j c_j |e_j⟩ ⊗ |vac⟩`; the vacuum component is stationary
/// and not included.
pub fn propagate_spectral(p: &ModelParams, c_init: &[C64], t_grid: &[f64]) -> Result<Vec<Vec<C64>>> {
    p.validate()?;
    if !p.periodic {
        return Err(Error::param("periodic", "the Bloch-basis propagator needs a periodic ring"));
    }
    if c_init.len() != p.n_atoms() {
        return Err(Error::DimensionMismatch(format!("{} amplitudes for {} atoms", c_init.len(), p.n_atoms())));
    }
    let h0 = p.h0;
    match p.n_atoms() {
        1 => {
            let s = star_spectrum(p.omega_s, &folded_poles(p, |_| 1.0))?;
            Ok(vec![t_grid.iter().map(|&t| s.amplitude(t) * c_init[0]).collect()])
        }
        2 => {
            let l = (p.atom_positions[1] - p.atom_positions[0]) as f64 * h0;
            let r = 0.5f64.sqrt();
            let plus = star_spectrum(p.omega_s, &folded_poles(p, |k| 1.0 + (k * l).cos()))?;
            let minus = star_spectrum(p.omega_s, &folded_poles(p, |k| 1.0 - (k * l).cos()))?;
            let (cp, cm) = ((c_init[0] + c_init[1]) * r, (c_init[0] - c_init[1]) * r);
            let series: Vec<(C64, C64)> =
                t_grid.iter().map(|&t| (plus.amplitude(t) * cp, minus.amplitude(t) * cm)).collect();
            Ok(vec![
                series.iter().map(|(a, b)| (a + b) * r).collect(),
                series.iter().map(|(a, b)| (a - b) * r).collect(),
            ])
        }
        n => Err(Error::param("atom_positions", format!("the Bloch-basis propagator handles 1 or 2 atoms, got {n}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{propagate_krylov_with, uniform_grid, KrylovOptions, PureState};
    use crate::model::{build_hamiltonian, BasisIndex, BasisState, Sector};

    #[test]
    fn weights_are_complete() {
        let p = ModelParams::standard(200, vec![0, 3], 50.5);
        let s = star_spectrum(p.omega_s, &folded_poles(&p, |k| 1.0 + (3.0 * k).cos())).unwrap();
        let total: f64 = s.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "{total}");
        assert_eq!(s.amplitude(0.0).re.to_bits(), total.to_bits());
    }

    #[test]
    fn no_coupling_leaves_bare_level() {
        let s = star_spectrum(49.0, &[(50.0, 0.0), (51.0, 0.0)]).unwrap();
        assert_eq!(s.energies, vec![49.0]);
    }

    #[test]
    fn matches_krylov() {
        for (positions, omega) in [(vec![0], 51.0), (vec![0, 3], 49.0), (vec![-2, 2], 50.3), (vec![0, 0], 51.0)] {
            let p = ModelParams::standard(120, positions.clone(), omega);
            let n = positions.len();
            let grid = uniform_grid(3.0, 0.5);
            let init: Vec<C64> = (0..n).map(|j| if j == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).collect();
            let spec = propagate_spectral(&p, &init, &grid).unwrap();
            let basis = BasisIndex::new(Sector::SingleExcitation, n, 120).unwrap();
            let h = build_hamiltonian(&p, &basis).unwrap();
            let psi = PureState::from_atomic(&basis, &[(1, C64::new(1.0, 0.0))]).unwrap();
            let idx: Vec<usize> =
                (0..n).map(|j| basis.index_of(&BasisState { atoms: 1 << j, photons: vec![] }).unwrap()).collect();
            propagate_krylov_with(&h, &psi, &grid, KrylovOptions::default(), |i, _, s| {
                for j in 0..n {
                    let d = (s.amplitudes[idx[j]] - spec[j][i]).norm();
                    assert!(d < 1e-8, "{positions:?} atom {j} step {i}: {d:e}");
                }
            })
            .unwrap();
        }
    }

    #[test]
    fn rejects_unsupported_setups() {
        let mut p = ModelParams::standard(40, vec![0], 51.0);
        p.periodic = false;
        assert!(propagate_spectral(&p, &[C64::new(1.0, 0.0)], &[0.0]).is_err());
        let p = ModelParams::standard(40, vec![0, 1, 2], 51.0);
        assert!(propagate_spectral(&p, &[C64::new(1.0, 0.0); 3], &[0.0]).is_err());
    }
}
