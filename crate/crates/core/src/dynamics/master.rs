use nalgebra::DMatrix;

use super::state::{atomic_mask, lattice_steps, Frames, StateTrajectory};
use crate::kernels::{CorrelationKernel, RateMatrix, RateTable};
use crate::model::ModelParams;
use crate::{Error, Result, C64};

/// Settings shared by the master-equation integrators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MasterOptions {
    /// Fixed RK4 step.
    pub dt: f64,
    /// Largest tolerated `|Tr ρ - 1|` before aborting.
    pub trace_tolerance: f64,
}

impl Default for MasterOptions {
    fn default() -> Self {
        Self { dt: 0.01, trace_tolerance: 1e-6 }
    }
}

/// Lowering operators `σ_j` in the atomic ordering `|11⟩, |10⟩, |01⟩, |00⟩`.
pub fn lowering_operators(n_atoms: usize) -> Vec<DMatrix<C64>> {
    let dim = 1usize << n_atoms;
    (0..n_atoms)
        .map(|j| {
            let mut s = DMatrix::zeros(dim, dim);
            for col in 0..dim {
                let mask = atomic_mask(n_atoms, col);
                if mask & (1 << j) != 0 {
                    let row = super::state::atomic_index(n_atoms, mask & !(1 << j));
                    s[(row, col)] = C64::new(1.0, 0.0);
                }
            }
            s
        })
        .collect()
}

/// Dissipative part of the generator,
/// `g² Σ_ij Γ_ij (σ_j ρ σ_i⁺ - σ_i⁺σ_j ρ) + h.c.`
///
/// With `Γ = γ + iδ` symmetric this is the Lamb-shift Hamiltonian
/// `g² Σ δ_ij σ_i⁺σ_j` plus the dissipator with matrix `γ`. Both commute with
/// the excitation number, so `H_S = ω_S Σ σ_j⁺σ_j` is removed exactly by
/// integrating in its interaction picture.
struct Generator {
    sigma: Vec<DMatrix<C64>>,
    sigma_dag: Vec<DMatrix<C64>>,
    g2: f64,
}

impl Generator {
    fn new(p: &ModelParams) -> Self {
        let sigma = lowering_operators(p.n_atoms());
        let sigma_dag = sigma.iter().map(|s| s.adjoint()).collect();
        Self { sigma, sigma_dag, g2: p.g_coupling * p.g_coupling }
    }

    fn apply(&self, gamma: &DMatrix<C64>, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let n = self.sigma.len();
        let mut a = DMatrix::<C64>::zeros(rho.nrows(), rho.ncols());
        let mut jump = DMatrix::<C64>::zeros(rho.nrows(), rho.ncols());
        for ii in 0..n {
            for jj in 0..n {
                let c = gamma[(ii, jj)] * self.g2;
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                a += &self.sigma_dag[ii] * &self.sigma[jj] * c;
                jump += &self.sigma[jj] * rho * &self.sigma_dag[ii] * c;
            }
        }
        let half = jump - &a * rho;
        &half + half.adjoint()
    }
}

/// `e^{-iH_S t} ρ e^{iH_S t}`.
fn to_lab_frame(rho: &DMatrix<C64>, n_atoms: usize, omega_s: f64, t: f64) -> DMatrix<C64> {
    let exc: Vec<f64> = (0..rho.nrows()).map(|i| atomic_mask(n_atoms, i).count_ones() as f64).collect();
    DMatrix::from_fn(rho.nrows(), rho.ncols(), |a, b| {
        rho[(a, b)] * C64::from_polar(1.0, -omega_s * (exc[a] - exc[b]) * t)
    })
}

pub(crate) fn validate_density(rho: &DMatrix<C64>, n_atoms: usize) -> Result<()> {
    let dim = 1usize << n_atoms;
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "density operator is {}x{}, expected {dim}x{dim}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > 1e-9 {
        return Err(Error::InvalidState(format!("trace {tr} is not 1")));
    }
    let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > 1e-12 {
        return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
    }
    let min = min_eigenvalue(rho);
    if min < -1e-9 {
        return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

pub(crate) fn min_eigenvalue(rho: &DMatrix<C64>) -> f64 {
    let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    herm.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Shared RK4 driver; `rates(k)` gives `Γ` at half-step node `k` (time `k dt/2`).
fn integrate<F: Fn(usize) -> DMatrix<C64>>(
    p: &ModelParams,
    rho0: &DMatrix<C64>,
    t_grid: &[f64],
    opts: MasterOptions,
    rates: F,
) -> Result<StateTrajectory> {
    let n = p.n_atoms();
    validate_density(rho0, n)?;
    let steps = lattice_steps(t_grid, opts.dt)?;
    let gen = Generator::new(p);
    let dt = C64::new(opts.dt, 0.0);
    let mut rho = rho0.clone();
    let mut frames = Vec::with_capacity(t_grid.len());
    let mut min_eig = f64::INFINITY;
    let mut step = 0usize;
    for &target in &steps {
        while step < target {
            let g0 = rates(2 * step);
            let gh = rates(2 * step + 1);
            let g1 = rates(2 * step + 2);
            let k1 = gen.apply(&g0, &rho);
            let k2 = gen.apply(&gh, &(&rho + &k1 * (dt * 0.5)));
            let k3 = gen.apply(&gh, &(&rho + &k2 * (dt * 0.5)));
            let k4 = gen.apply(&g1, &(&rho + &k3 * dt));
            rho += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * (dt / 6.0);
            // remove rounding-level anti-Hermitian drift
            rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
            step += 1;
            let drift = (rho.trace() - C64::new(1.0, 0.0)).norm();
            if !(drift <= opts.trace_tolerance) {
                return Err(Error::Numerical(format!(
                    "trace drifted by {drift:e} at t = {}",
                    step as f64 * opts.dt
                )));
            }
        }
        min_eig = min_eig.min(min_eigenvalue(&rho));
        frames.push(to_lab_frame(&rho, n, p.omega_s, step as f64 * opts.dt));
    }
    Ok(StateTrajectory {
        t_grid: t_grid.to_vec(),
        frames: Frames::Density(frames),
        n_atoms: n,
        min_eigenvalue: Some(min_eig),
    })
}

/// Second-order time-convolutionless master equation with rates `Γ_ij(t)`
/// accumulated panel by panel on the RK4 half-step lattice.
pub fn evolve_tcl2(
    p: &ModelParams,
    kernel: &CorrelationKernel,
    rho0: &DMatrix<C64>,
    t_grid: &[f64],
) -> Result<StateTrajectory> {
    evolve_tcl2_opts(p, kernel, rho0, t_grid, MasterOptions::default())
}

pub fn evolve_tcl2_opts(
    p: &ModelParams,
    kernel: &CorrelationKernel,
    rho0: &DMatrix<C64>,
    t_grid: &[f64],
    opts: MasterOptions,
) -> Result<StateTrajectory> {
    p.validate()?;
    let steps = lattice_steps(t_grid, opts.dt)?;
    let last = steps.iter().copied().max().unwrap_or(0);
    let table = RateTable::build(p, kernel, 0.5 * opts.dt, 2 * last + 2)?;
    integrate(p, rho0, t_grid, opts, |k| table.matrix(k).gamma)
}

/// Markovian (Lindblad) limit with constant rates.
pub fn evolve_lindblad(
    p: &ModelParams,
    rates: &RateMatrix,
    rho0: &DMatrix<C64>,
    t_grid: &[f64],
) -> Result<StateTrajectory> {
    evolve_lindblad_opts(p, rates, rho0, t_grid, MasterOptions::default())
}

pub fn evolve_lindblad_opts(
    p: &ModelParams,
    rates: &RateMatrix,
    rho0: &DMatrix<C64>,
    t_grid: &[f64],
    opts: MasterOptions,
) -> Result<StateTrajectory> {
    p.validate()?;
    if rates.n_atoms() != p.n_atoms() {
        return Err(Error::DimensionMismatch(format!(
            "rate matrix is {}x{}, model has {} atoms",
            rates.n_atoms(),
            rates.n_atoms(),
            p.n_atoms()
        )));
    }
    check_completely_positive(rates)?;
    let gamma = rates.gamma.clone();
    integrate(p, rho0, t_grid, opts, |_| gamma.clone())
}

/// The dissipator is completely positive iff the `γ` matrix is positive
/// semidefinite.
pub fn check_completely_positive(rates: &RateMatrix) -> Result<()> {
    let g = rates.dissipative();
    let sym = (&g + g.transpose()) * 0.5;
    let min = sym.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(Error::NotCompletelyPositive(min));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::state::{density_from_atomic, uniform_grid};
    use crate::kernels::{markov_rates, MarkovMode};

    fn excited(n: usize) -> DMatrix<C64> {
        density_from_atomic(n, &[((1 << n) - 1, C64::new(1.0, 0.0))])
    }

    fn populations(rho: &DMatrix<C64>, n: usize) -> f64 {
        (0..rho.nrows()).map(|i| atomic_mask(n, i).count_ones() as f64 * rho[(i, i)].re).sum()
    }

    #[test]
    fn lowering_operator_action() {
        let s = lowering_operators(2);
        // σ_0 |11⟩ = |01⟩ (index 2), σ_1 |11⟩ = |10⟩ (index 1)
        assert_eq!(s[0][(2, 0)], C64::new(1.0, 0.0));
        assert_eq!(s[1][(1, 0)], C64::new(1.0, 0.0));
        assert_eq!(s[0][(3, 1)], C64::new(1.0, 0.0));
    }

    #[test]
    fn uncoupled_evolution_is_unitary() {
        let p = ModelParams::standard(400, vec![0, 2], 51.0).with_coupling(0.0);
        let h = C64::new(0.5, 0.0);
        let rho0 = density_from_atomic(2, &[(0b00, h), (0b01, h), (0b10, h), (0b11, h)]);
        let grid = uniform_grid(1.0, 0.1);
        let tr = evolve_tcl2(&p, &CorrelationKernel::ClosedBessel, &rho0, &grid).unwrap();
        let Frames::Density(frames) = &tr.frames else { panic!() };
        let last = frames.last().unwrap();
        // coherence between |00⟩ and |10⟩ rotates at ω_S
        let want = rho0[(1, 3)] * C64::from_polar(1.0, -51.0);
        assert!((last[(1, 3)] - want).norm() < 1e-9);
        assert!((populations(last, 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lindblad_single_atom_is_exponential() {
        let p = ModelParams::standard(400, vec![0], 52.0);
        let rates = markov_rates(&p, MarkovMode::Analytic).unwrap();
        let grid = uniform_grid(5.0, 0.5);
        let tr = evolve_lindblad(&p, &rates, &excited(1), &grid).unwrap();
        let Frames::Density(frames) = &tr.frames else { panic!() };
        let rate = 2.0 * rates.gamma[(0, 0)].re;
        for (rho, &t) in frames.iter().zip(&grid) {
            assert!((rho[(0, 0)].re - (-rate * t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn lindblad_gap_conserves_population() {
        let p = ModelParams::standard(400, vec![0, 1], 49.0);
        let rates = markov_rates(&p, MarkovMode::Analytic).unwrap();
        let rho0 = density_from_atomic(2, &[(0b01, C64::new(1.0, 0.0))]);
        let tr = evolve_lindblad(&p, &rates, &rho0, &uniform_grid(10.0, 1.0)).unwrap();
        let Frames::Density(frames) = &tr.frames else { panic!() };
        for rho in frames {
            assert!((populations(rho, 2) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn non_positive_rates_are_rejected() {
        let p = ModelParams::standard(400, vec![0, 1], 52.0);
        let mut rates = RateMatrix::zeros(2);
        rates.gamma[(0, 1)] = C64::new(1.0, 0.0);
        rates.gamma[(1, 0)] = C64::new(1.0, 0.0);
        let r = evolve_lindblad(&p, &rates, &excited(2), &[0.0]);
        assert!(matches!(r, Err(Error::NotCompletelyPositive(_))));
    }

    #[test]
    fn invalid_density_is_rejected() {
        let p = ModelParams::standard(400, vec![0], 52.0);
        let rates = RateMatrix::zeros(1);
        let bad = DMatrix::from_diagonal_element(2, 2, C64::new(0.7, 0.0));
        assert!(evolve_lindblad(&p, &rates, &bad, &[0.0]).is_err());
    }

    #[test]
    fn tcl2_preserves_trace_and_hermiticity() {
        let p = ModelParams::standard(400, vec![0, 1, 3], 50.5);
        let tr = evolve_tcl2(&p, &CorrelationKernel::ClosedBessel, &excited(3), &uniform_grid(2.0, 0.5)).unwrap();
        let Frames::Density(frames) = &tr.frames else { panic!() };
        for rho in frames {
            assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 2e-9);
            let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(herm < 1e-12);
        }
        assert!(tr.min_eigenvalue.is_some());
    }
}
