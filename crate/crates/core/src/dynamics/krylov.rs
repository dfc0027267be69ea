use nalgebra::{DMatrix, DVector};

use super::state::{Frames, PureState, StateTrajectory};
use crate::model::{CsrMatrix, HamiltonianMatrix};
use crate::{Error, Result, C64};

/// Settings of the Lanczos propagator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOptions {
    /// Nominal time step.
    pub dt: f64,
    /// Local error target of one step.
    pub tol: f64,
    /// Largest subspace per step; steps that need more are split.
    pub max_vectors: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { dt: 0.01, tol: 1e-10, max_vectors: 15 }
    }
}

/// Propagate `psi0` under `H` and store the state at every grid time.
pub fn propagate_krylov(h: &HamiltonianMatrix, psi0: &PureState, t_grid: &[f64]) -> Result<StateTrajectory> {
    propagate_krylov_opts(h, psi0, t_grid, KrylovOptions::default())
}

pub fn propagate_krylov_opts(
    h: &HamiltonianMatrix,
    psi0: &PureState,
    t_grid: &[f64],
    opts: KrylovOptions,
) -> Result<StateTrajectory> {
    let mut states = Vec::with_capacity(t_grid.len());
    propagate_krylov_with(h, psi0, t_grid, opts, |_, _, s| states.push(s.clone()))?;
    Ok(StateTrajectory {
        t_grid: t_grid.to_vec(),
        frames: Frames::Pure { basis: h.shared_basis(), states },
        n_atoms: h.basis().n_atoms(),
        min_eigenvalue: None,
    })
}

/// Propagate and hand each grid-time state to `observer(index, t, state)`
/// instead of storing it.
pub fn propagate_krylov_with<F: FnMut(usize, f64, &PureState)>(
    h: &HamiltonianMatrix,
    psi0: &PureState,
    t_grid: &[f64],
    opts: KrylovOptions,
    mut observer: F,
) -> Result<()> {
    if psi0.amplitudes.len() != h.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} amplitudes, Hamiltonian dimension is {}",
            psi0.amplitudes.len(),
            h.dim()
        )));
    }
    if (psi0.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidState(format!("initial state norm {} is not 1", psi0.norm())));
    }
    if !(opts.dt > 0.0) || opts.max_vectors < 2 {
        return Err(Error::param("dt", "need dt > 0 and at least two Krylov vectors"));
    }
    let dev = h.matrix().hermitian_deviation();
    if dev > 1e-12 {
        return Err(Error::NotHermitian(dev));
    }
    let mut prop = Lanczos::new(h.matrix(), opts);
    let mut state = psi0.clone();
    let mut t = 0.0;
    for (i, &target) in t_grid.iter().enumerate() {
        if target < t - 1e-12 {
            return Err(Error::param("t_grid", "times must be non-decreasing and non-negative"));
        }
        let span = target - t;
        if span > 0.0 {
            let steps = (span / opts.dt - 1e-9).ceil().max(1.0) as usize;
            let tau = span / steps as f64;
            for _ in 0..steps {
                prop.step(&mut state.amplitudes, tau)?;
            }
            t = target;
        }
        observer(i, t, &state);
    }
    Ok(())
}

/// Lanczos approximation of `e^{-iHτ} v`, with reusable workspace.
pub(crate) struct Lanczos<'a> {
    h: &'a CsrMatrix,
    opts: KrylovOptions,
    shift: f64,
    basis: Vec<Vec<C64>>,
    w: Vec<C64>,
}

impl<'a> Lanczos<'a> {
    pub fn new(h: &'a CsrMatrix, opts: KrylovOptions) -> Self {
        let (lo, hi) = h.gershgorin_bounds();
        let shift = if lo.is_finite() && hi.is_finite() { 0.5 * (lo + hi) } else { 0.0 };
        Self { h, opts, shift, basis: Vec::new(), w: vec![C64::new(0.0, 0.0); h.dim()] }
    }

    /// `v ← e^{-iHτ} v`, halving the sub-step until the subspace cap suffices.
    pub fn step(&mut self, v: &mut [C64], tau: f64) -> Result<()> {
        let mut remaining = tau;
        let mut sub = tau;
        while remaining > 0.0 {
            let t = sub.min(remaining);
            if self.try_step(v, t)? {
                remaining -= t;
                if remaining < 1e-15 * tau {
                    break;
                }
            } else {
                sub *= 0.5;
                if sub < 1e-12 * tau {
                    return Err(Error::Numerical("Krylov step did not converge after repeated splitting".into()));
                }
            }
        }
        Ok(())
    }

    fn try_step(&mut self, v: &mut [C64], tau: f64) -> Result<bool> {
        let beta0 = norm(v);
        if beta0 == 0.0 {
            return Ok(true);
        }
        let n = v.len();
        let m_max = self.opts.max_vectors.min(n.max(1));
        while self.basis.len() < m_max + 1 {
            self.basis.push(vec![C64::new(0.0, 0.0); n]);
        }
        for (b, x) in self.basis[0].iter_mut().zip(v.iter()) {
            *b = x / beta0;
        }
        let mut alphas: Vec<f64> = Vec::with_capacity(m_max);
        let mut betas: Vec<f64> = Vec::with_capacity(m_max);
        let mut coeffs = None;
        for j in 0..m_max {
            self.h.mul_vec_into(&self.basis[j], &mut self.w);
            for (wi, bi) in self.w.iter_mut().zip(&self.basis[j]) {
                *wi -= bi * self.shift;
            }
            if j > 0 {
                let b = betas[j - 1];
                for (wi, pi) in self.w.iter_mut().zip(&self.basis[j - 1]) {
                    *wi -= pi * b;
                }
            }
            let a = dot(&self.basis[j], &self.w).re;
            for (wi, bi) in self.w.iter_mut().zip(&self.basis[j]) {
                *wi -= bi * a;
            }
            // full reorthogonalization keeps the small subspace orthonormal
            for k in 0..=j {
                let c = dot(&self.basis[k], &self.w);
                for (wi, bk) in self.w.iter_mut().zip(&self.basis[k]) {
                    *wi -= bk * c;
                }
            }
            alphas.push(a);
            let b = norm(&self.w);
            let y = small_expm(&alphas, &betas, tau);
            if !y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::Numerical("non-finite Krylov coefficients".into()));
            }
            let scale = alphas.iter().map(|x| x.abs()).fold(self.shift.abs(), f64::max).max(1.0);
            let breakdown = b <= 1e-14 * scale;
            let err = b * y[j].norm();
            if breakdown || err < self.opts.tol || j + 1 == n {
                coeffs = Some(y);
                break;
            }
            betas.push(b);
            for (t, wi) in self.basis[j + 1].iter_mut().zip(&self.w) {
                *t = wi / b;
            }
        }
        let Some(y) = coeffs else {
            return Ok(false);
        };
        let phase = C64::from_polar(beta0, -self.shift * tau);
        for (i, out) in v.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (k, yk) in y.iter().enumerate() {
                acc += yk * self.basis[k][i];
            }
            *out = acc * phase;
        }
        Ok(true)
    }
}

/// `e^{-iτT} e_1` for the real symmetric tridiagonal `T`.
fn small_expm(alphas: &[f64], betas: &[f64], tau: f64) -> Vec<C64> {
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t.symmetric_eigen();
    let q = &eig.eigenvectors;
    let mut out = vec![C64::new(0.0, 0.0); m];
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let c = C64::from_polar(q[(0, k)], -lam * tau);
        for (i, o) in out.iter_mut().enumerate() {
            *o += c * q[(i, k)];
        }
    }
    out
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Dense reference: `e^{-iHt} ψ` from the eigendecomposition of `H`.
pub fn propagate_dense(h: &DMatrix<C64>, psi0: &[C64], t_grid: &[f64]) -> Vec<Vec<C64>> {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let c0 = v.adjoint() * DVector::from_column_slice(psi0);
    t_grid
        .iter()
        .map(|&t| {
            let ct = DVector::from_fn(c0.len(), |k, _| c0[k] * C64::from_polar(1.0, -eig.eigenvalues[k] * t));
            (v * ct).iter().copied().collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::state::uniform_grid;
    use crate::model::{build_hamiltonian, BasisIndex, ModelParams, Sector};

    fn setup(p: &ModelParams, sector: Sector) -> HamiltonianMatrix {
        let b = BasisIndex::new(sector, p.n_atoms(), p.sites).unwrap();
        build_hamiltonian(p, &b).unwrap()
    }

    #[test]
    fn decoupled_atom_stays_excited() {
        let p = ModelParams::standard(40, vec![0], 49.0).with_coupling(0.0);
        let h = setup(&p, Sector::SingleExcitation);
        let psi = PureState::from_atomic(h.basis(), &[(1, C64::new(1.0, 0.0))]).unwrap();
        let grid = uniform_grid(5.0, 0.5);
        let tr = propagate_krylov(&h, &psi, &grid).unwrap();
        let Frames::Pure { states, .. } = &tr.frames else { panic!() };
        for s in states {
            assert!((s.amplitudes[0].norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_exponential() {
        let p = ModelParams::standard(24, vec![0, 3], 50.7);
        let h = setup(&p, Sector::truncated(2));
        assert!(h.dim() <= 400);
        let psi = PureState::from_atomic(h.basis(), &[(0b11, C64::new(1.0, 0.0))]).unwrap();
        let grid = uniform_grid(3.0, 0.25);
        let tr = propagate_krylov(&h, &psi, &grid).unwrap();
        let dense = propagate_dense(&h.to_dense(), &psi.amplitudes, &grid);
        let Frames::Pure { states, .. } = &tr.frames else { panic!() };
        for (s, d) in states.iter().zip(&dense) {
            let diff = s.amplitudes.iter().zip(d).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-9, "{diff:e}");
        }
    }

    #[test]
    fn small_subspace_cap_splits_steps() {
        let p = ModelParams::standard(16, vec![0], 51.0);
        let h = setup(&p, Sector::SingleExcitation);
        let psi = PureState::from_atomic(h.basis(), &[(1, C64::new(1.0, 0.0))]).unwrap();
        let opts = KrylovOptions { dt: 0.5, tol: 1e-10, max_vectors: 4 };
        let grid = [0.0, 1.0];
        let tr = propagate_krylov_opts(&h, &psi, &grid, opts).unwrap();
        let dense = propagate_dense(&h.to_dense(), &psi.amplitudes, &grid);
        let Frames::Pure { states, .. } = &tr.frames else { panic!() };
        let diff = states[1].amplitudes.iter().zip(&dense[1]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff:e}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = ModelParams::standard(16, vec![0], 51.0);
        let h = setup(&p, Sector::SingleExcitation);
        let bad = PureState::zeros(h.dim());
        assert!(propagate_krylov(&h, &bad, &[0.0]).is_err());
        let short = PureState { vacuum: C64::new(1.0, 0.0), amplitudes: vec![] };
        assert!(matches!(propagate_krylov(&h, &short, &[0.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn vacuum_component_is_stationary() {
        let p = ModelParams::standard(16, vec![0], 51.0);
        let h = setup(&p, Sector::SingleExcitation);
        let a = C64::new(0.6, 0.0);
        let psi = PureState::from_atomic(h.basis(), &[(0, a), (1, C64::new(0.8, 0.0))]).unwrap();
        let tr = propagate_krylov(&h, &psi, &[0.0, 2.0]).unwrap();
        let Frames::Pure { states, .. } = &tr.frames else { panic!() };
        assert_eq!(states[1].vacuum, a);
        assert!((states[1].norm() - 1.0).abs() < 1e-10);
    }
}
