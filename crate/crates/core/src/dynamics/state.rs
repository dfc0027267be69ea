use std::sync::Arc;

use nalgebra::DMatrix;

use crate::model::{BasisIndex, BasisState, Sector};
use crate::{Error, Result, C64};

/// Pure state of atoms plus field. In single-excitation sectors the vacuum
/// amplitude is carried separately; in truncated sectors it is part of
/// `amplitudes` and `vacuum` stays zero.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    pub vacuum: C64,
    pub amplitudes: Vec<C64>,
}

impl PureState {
    pub fn zeros(dim: usize) -> Self {
        Self { vacuum: C64::new(0.0, 0.0), amplitudes: vec![C64::new(0.0, 0.0); dim] }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.vacuum.norm_sqr() + self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Atomic state `Σ_m c_m |m⟩` times the field vacuum; `coeffs` are given
    /// as `(atom bitmask, amplitude)` with bit `j` set when atom `j` is excited.
    /// Components the sector cannot hold are an error.
    pub fn from_atomic(basis: &BasisIndex, coeffs: &[(u32, C64)]) -> Result<Self> {
        let mut s = Self::zeros(basis.dim());
        for &(mask, c) in coeffs {
            if mask >> basis.n_atoms() != 0 {
                return Err(Error::InvalidState(format!("bitmask {mask:#b} exceeds {} atoms", basis.n_atoms())));
            }
            if mask == 0 && !basis.vacuum_in_basis() {
                s.vacuum += c;
                continue;
            }
            let label = BasisState { atoms: mask, photons: Vec::new() };
            match basis.index_of(&label) {
                Some(i) => s.amplitudes[i] += c,
                None => {
                    return Err(Error::InvalidState(format!(
                        "{} excitations do not fit in the {} sector",
                        mask.count_ones(),
                        basis.sector().label()
                    )))
                }
            }
        }
        Ok(s)
    }
}

/// Basis index of an atomic product state in the `|11⟩, |10⟩, |01⟩, |00⟩`
/// ordering (atom 0 is the most significant, excited before ground).
pub fn atomic_index(n_atoms: usize, mask: u32) -> usize {
    (0..n_atoms).fold(0, |acc, j| {
        let ground = (mask >> j) & 1 == 0;
        acc | ((ground as usize) << (n_atoms - 1 - j))
    })
}

/// Inverse of [`atomic_index`].
pub fn atomic_mask(n_atoms: usize, index: usize) -> u32 {
    (0..n_atoms).fold(0, |acc, j| {
        let ground = (index >> (n_atoms - 1 - j)) & 1 == 1;
        if ground {
            acc
        } else {
            acc | (1 << j)
        }
    })
}

/// `|ψ⟩⟨ψ|` for an atomic state in the computational ordering of
/// [`atomic_index`].
pub fn density_from_atomic(n_atoms: usize, coeffs: &[(u32, C64)]) -> DMatrix<C64> {
    let dim = 1usize << n_atoms;
    let mut v = vec![C64::new(0.0, 0.0); dim];
    for &(mask, c) in coeffs {
        v[atomic_index(n_atoms, mask)] += c;
    }
    DMatrix::from_fn(dim, dim, |i, j| v[i] * v[j].conj())
}

/// Stored frames of a trajectory.
#[derive(Clone, Debug)]
pub enum Frames {
    Pure { basis: Arc<BasisIndex>, states: Vec<PureState> },
    /// Atomic density operators in the [`atomic_index`] ordering.
    Density(Vec<DMatrix<C64>>),
}

/// Time grid plus the state at every grid point.
#[derive(Clone, Debug)]
pub struct StateTrajectory {
    pub t_grid: Vec<f64>,
    pub frames: Frames,
    pub n_atoms: usize,
    /// Most negative eigenvalue met by a density trajectory (positivity
    /// monitor for TCL2, which may transiently violate it).
    pub min_eigenvalue: Option<f64>,
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    pub fn sector(&self) -> Option<Sector> {
        match &self.frames {
            Frames::Pure { basis, .. } => Some(basis.sector()),
            Frames::Density(_) => None,
        }
    }
}

/// `0, dt, 2dt, ..., t_max` with `t_max` rounded to the nearest multiple.
pub fn uniform_grid(t_max: f64, dt: f64) -> Vec<f64> {
    let n = (t_max / dt).round() as usize;
    (0..=n).map(|i| i as f64 * dt).collect()
}

/// Step counts reaching each output time on a fixed-step lattice.
pub(crate) fn lattice_steps(t_grid: &[f64], dt: f64) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(t_grid.len());
    let mut last = 0usize;
    for (i, &t) in t_grid.iter().enumerate() {
        let x = t / dt;
        let n = x.round();
        if !(t >= 0.0) || (x - n).abs() > 1e-6 * x.max(1.0) {
            return Err(Error::param("t_grid", format!("time {t} is not a multiple of the step {dt}")));
        }
        let n = n as usize;
        if i > 0 && n < last {
            return Err(Error::param("t_grid", "times must be non-decreasing"));
        }
        last = n;
        out.push(n);
    }
    Ok(out)
}

/// Collective amplitudes `c± = (c₁ ± c₂)/√2` of the two-atom single-excitation
/// problem.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoAtomAmplitudes {
    pub t_grid: Vec<f64>,
    pub c_plus: Vec<C64>,
    pub c_minus: Vec<C64>,
}

impl TwoAtomAmplitudes {
    pub fn c1(&self) -> Vec<C64> {
        self.c_plus.iter().zip(&self.c_minus).map(|(p, m)| (p + m) / 2f64.sqrt()).collect()
    }

    pub fn c2(&self) -> Vec<C64> {
        self.c_plus.iter().zip(&self.c_minus).map(|(p, m)| (p - m) / 2f64.sqrt()).collect()
    }

    /// `|c₁|² + |c₂|² = |c₊|² + |c₋|²`.
    pub fn total_population(&self) -> Vec<f64> {
        self.c_plus.iter().zip(&self.c_minus).map(|(p, m)| p.norm_sqr() + m.norm_sqr()).collect()
    }
}
