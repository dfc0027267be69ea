//! Memory-kernel equations for single-excitation amplitudes.
//!
//! In the frame rotating at `ω_S`, an amplitude obeys
//! `dq/dt = -∫_0^t K(t - s) q(s) ds` with `K(τ) = g² α(τ) e^{iω_S τ}`.
//! Integrating once gives the second-kind equation
//! `q(t) = q(0) - ∫_0^t K₁(t - s) q(s) ds`, `K₁(τ) = ∫_0^τ K`, which is solved
//! by product integration with piecewise-linear `q` and full history.

use super::state::{lattice_steps, TwoAtomAmplitudes};
use crate::kernels::{CorrelationKernel, RateTable};
use crate::model::ModelParams;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolterraOptions {
    /// Step of the product-integration grid.
    pub h: f64,
    /// Even number of `K₁` samples per step used for the panel moments.
    pub substeps: usize,
}

impl Default for VolterraOptions {
    fn default() -> Self {
        Self { h: 0.005, substeps: 8 }
    }
}

/// Rotating-frame amplitude for the kernel `α = Σ_l w_l α_l`, returned on the
/// output grid.
pub fn solve_amplitude_with(
    p: &ModelParams,
    kernel: &CorrelationKernel,
    weights: &[(i64, f64)],
    q0: C64,
    t_grid: &[f64],
    opts: VolterraOptions,
) -> Result<Vec<C64>> {
    let steps = lattice_steps(t_grid, opts.h)?;
    let n = steps.iter().copied().max().unwrap_or(0);
    let q = solve_on_lattice(p, kernel, weights, q0, n, opts)?;
    Ok(steps.iter().map(|&s| q[s]).collect())
}

fn solve_on_lattice(
    p: &ModelParams,
    kernel: &CorrelationKernel,
    weights: &[(i64, f64)],
    q0: C64,
    n: usize,
    opts: VolterraOptions,
) -> Result<Vec<C64>> {
    if opts.substeps < 2 || opts.substeps % 2 != 0 || !(opts.h > 0.0) {
        return Err(Error::param("substeps", "need h > 0 and an even substep count >= 2"));
    }
    let s = opts.substeps;
    let seps: Vec<i64> = weights.iter().map(|&(l, _)| l).collect();
    let table = RateTable::build_separations(p, kernel, &seps, opts.h / s as f64, n * s)?;
    let g2 = p.g_coupling * p.g_coupling;
    let k1: Vec<C64> = (0..table.len())
        .map(|i| weights.iter().enumerate().map(|(l, &(_, w))| table.value(l, i) * w).sum::<C64>() * g2)
        .collect();
    Ok(product_integration(&k1, s, opts.h, q0, n))
}

/// Solve `q_n = q_0 - Σ (panel moments of K₁) q` on `n` steps given `K₁` at
/// spacing `h / s`.
fn product_integration(k1: &[C64], s: usize, h: f64, q0: C64, n: usize) -> Vec<C64> {
    // A_p = ∫_0^1 (1 - y) K₁((p + y)h) dy, B_p = ∫_0^1 y K₁((p + y)h) dy
    let dy = 1.0 / s as f64;
    let simpson_w: Vec<f64> = (0..=s)
        .map(|k| {
            let w = if k == 0 || k == s {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * dy / 3.0
        })
        .collect();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for p in 0..n {
        let mut sa = C64::new(0.0, 0.0);
        let mut sb = C64::new(0.0, 0.0);
        for (k, &w) in simpson_w.iter().enumerate() {
            let y = k as f64 * dy;
            let v = k1[p * s + k] * w;
            sa += v * (1.0 - y);
            sb += v * y;
        }
        a.push(sa * h);
        b.push(sb * h);
    }
    // coefficient of q_{n-m}: C_m = A_m + B_{m-1}
    let c: Vec<C64> = (0..n).map(|m| if m == 0 { C64::new(0.0, 0.0) } else { a[m] + b[m - 1] }).collect();
    let mut q = Vec::with_capacity(n + 1);
    q.push(q0);
    for step in 1..=n {
        let mut hist = b[step - 1] * q[0];
        for m in 1..step {
            hist += c[m] * q[step - m];
        }
        q.push((q0 - hist) / (C64::new(1.0, 0.0) + a[0]));
    }
    q
}

/// Single-atom decay amplitude `q(t)` (rotating frame, `q(0) = 1`).
pub fn solve_decay_amplitude(p: &ModelParams, kernel: &CorrelationKernel, t_grid: &[f64]) -> Result<Vec<C64>> {
    solve_decay_amplitude_opts(p, kernel, t_grid, VolterraOptions::default())
}

pub fn solve_decay_amplitude_opts(
    p: &ModelParams,
    kernel: &CorrelationKernel,
    t_grid: &[f64],
    opts: VolterraOptions,
) -> Result<Vec<C64>> {
    solve_amplitude_with(p, kernel, &[(0, 1.0)], C64::new(1.0, 0.0), t_grid, opts)
}

/// Collective amplitudes of two atoms `L` sites apart with kernels
/// `α± = α_0 ± α_L`, in the lab frame.
pub fn solve_two_atom_amplitudes(
    p: &ModelParams,
    kernel: &CorrelationKernel,
    c_init: (C64, C64),
    l: i64,
    t_grid: &[f64],
) -> Result<TwoAtomAmplitudes> {
    solve_two_atom_amplitudes_opts(p, kernel, c_init, l, t_grid, VolterraOptions::default())
}

pub fn solve_two_atom_amplitudes_opts(
    p: &ModelParams,
    kernel: &CorrelationKernel,
    c_init: (C64, C64),
    l: i64,
    t_grid: &[f64],
    opts: VolterraOptions,
) -> Result<TwoAtomAmplitudes> {
    let norm = c_init.0.norm_sqr() + c_init.1.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!("|c+|² + |c-|² = {norm}, expected 1")));
    }
    let steps = lattice_steps(t_grid, opts.h)?;
    let n = steps.iter().copied().max().unwrap_or(0);
    let branch = |sign: f64, c0: C64| -> Result<Vec<C64>> {
        if c0 == C64::new(0.0, 0.0) {
            return Ok(vec![c0; n + 1]);
        }
        solve_on_lattice(p, kernel, &[(0, 1.0), (l, sign)], c0, n, opts)
    };
    let plus = branch(1.0, c_init.0)?;
    let minus = branch(-1.0, c_init.1)?;
    let lab = |q: &[C64]| -> Vec<C64> {
        steps
            .iter()
            .zip(t_grid)
            .map(|(&s, &t)| q[s] * C64::from_polar(1.0, -p.omega_s * t))
            .collect()
    };
    Ok(TwoAtomAmplitudes { t_grid: t_grid.to_vec(), c_plus: lab(&plus), c_minus: lab(&minus) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::krylov::propagate_krylov_with;
    use crate::dynamics::state::{uniform_grid, PureState};
    use crate::dynamics::KrylovOptions;
    use crate::model::{build_hamiltonian, BasisIndex, Sector};

    #[test]
    fn constant_kernel_gives_cosine() {
        // K₁(τ) = κ τ  ⇔  q'' = -κ q, q(0) = 1, q'(0) = 0
        let kappa = 4.0;
        let (h, s, n) = (0.005, 8, 400);
        let k1: Vec<C64> = (0..=n * s).map(|i| C64::new(kappa * i as f64 * h / s as f64, 0.0)).collect();
        let q = product_integration(&k1, s, h, C64::new(1.0, 0.0), n);
        for (i, v) in q.iter().enumerate() {
            let t = i as f64 * h;
            assert!((v.re - (2.0 * t).cos()).abs() < 2e-5, "t={t}: {v}");
        }
    }

    #[test]
    fn uncoupled_amplitude_is_constant() {
        let p = ModelParams::standard(400, vec![0], 51.0).with_coupling(0.0);
        let q = solve_decay_amplitude(&p, &CorrelationKernel::ClosedBessel, &uniform_grid(2.0, 0.5)).unwrap();
        assert!(q.iter().all(|&v| v == C64::new(1.0, 0.0)));
    }

    #[test]
    fn colocated_antisymmetric_amplitude_does_not_decay() {
        let p = ModelParams::standard(400, vec![0, 0], 51.0);
        let grid = uniform_grid(5.0, 0.5);
        let c = solve_two_atom_amplitudes(&p, &CorrelationKernel::ClosedBessel, (C64::new(0.0, 0.0), C64::new(1.0, 0.0)), 0, &grid).unwrap();
        for v in &c.c_minus {
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn minus_branch_is_plus_branch_with_negated_cross_kernel() {
        let p = ModelParams::standard(400, vec![0, 3], 50.6);
        let grid = uniform_grid(2.0, 0.25);
        let k = CorrelationKernel::ClosedBessel;
        let two = solve_two_atom_amplitudes(&p, &k, (C64::new(0.0, 0.0), C64::new(1.0, 0.0)), 3, &grid).unwrap();
        let q = solve_amplitude_with(&p, &k, &[(0, 1.0), (3, -1.0)], C64::new(1.0, 0.0), &grid, VolterraOptions::default())
            .unwrap();
        for ((c, q), &t) in two.c_minus.iter().zip(&q).zip(&grid) {
            assert!((c - q * C64::from_polar(1.0, -50.6 * t)).norm() < 1e-10);
        }
    }

    #[test]
    fn decay_matches_single_excitation_ed() {
        let p = ModelParams::standard(80, vec![0], 51.0);
        let grid = uniform_grid(4.0, 0.1);
        let q = solve_decay_amplitude(&p, &CorrelationKernel::DiscreteSum, &grid).unwrap();
        let basis = BasisIndex::new(Sector::SingleExcitation, 1, 80).unwrap();
        let h = build_hamiltonian(&p, &basis).unwrap();
        let psi = PureState::from_atomic(&basis, &[(1, C64::new(1.0, 0.0))]).unwrap();
        let mut ed = Vec::new();
        propagate_krylov_with(&h, &psi, &grid, KrylovOptions::default(), |_, _, s| ed.push(s.amplitudes[0].norm_sqr()))
            .unwrap();
        let err = q.iter().zip(&ed).map(|(a, b)| (a.norm_sqr() - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err:e}");
    }
}
