use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{CorrelationKernel, KernelSampler};
use crate::model::ModelParams;
use crate::quad::{adaptive_gk, simpson_intervals};
use crate::{par, Error, Result, C64};

/// `Γ_ij = γ_ij + i δ_ij` for the atoms of a parameter set, in units where
/// the physical rate is `g² Γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    pub gamma: DMatrix<C64>,
}

impl RateMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { gamma: DMatrix::zeros(n, n) }
    }

    pub fn n_atoms(&self) -> usize {
        self.gamma.nrows()
    }

    /// Dissipative part `γ_ij = Re Γ_ij`.
    pub fn dissipative(&self) -> DMatrix<f64> {
        self.gamma.map(|z| z.re)
    }

    /// Lamb-shift part `δ_ij = Im Γ_ij`.
    pub fn lamb_shift(&self) -> DMatrix<f64> {
        self.gamma.map(|z| z.im)
    }

    fn from_separations(seps: &PairSeparations, values: &[C64]) -> Self {
        let n = seps.index.nrows();
        Self { gamma: DMatrix::from_fn(n, n, |i, j| values[seps.index[(i, j)]]) }
    }
}

/// Distinct `|r_i - r_j|` values and the slot of every atom pair.
#[derive(Clone, Debug)]
pub(crate) struct PairSeparations {
    pub distinct: Vec<i64>,
    pub index: DMatrix<usize>,
}

impl PairSeparations {
    pub fn new(p: &ModelParams) -> Self {
        let r = &p.atom_positions;
        let mut distinct: Vec<i64> = Vec::new();
        for a in r {
            for b in r {
                let d = (a - b).abs();
                if !distinct.contains(&d) {
                    distinct.push(d);
                }
            }
        }
        distinct.sort_unstable();
        let n = r.len();
        let index = DMatrix::from_fn(n, n, |i, j| {
            let d = (r[i] - r[j]).abs();
            distinct.iter().position(|&x| x == d).unwrap()
        });
        Self { distinct, index }
    }
}

/// Largest quadrature step for rate integrals: resolves the fastest phase of
/// the band kernel.
pub fn rate_step_bound(p: &ModelParams) -> f64 {
    let fastest = p.upper_edge().abs().max(p.half_width);
    0.05 / fastest
}

/// Integrand `α_L(τ) e^{iω_S τ}` for every separation of the sampler.
fn integrand(s: &KernelSampler, omega_s: f64, tau: f64) -> Vec<C64> {
    let rot = C64::from_polar(1.0, omega_s * tau);
    s.sample(tau).into_iter().map(|a| a * rot).collect()
}

/// Simpson integral over `[t0, t0 + 2 n_pairs h]` for every separation.
fn simpson_block(s: &KernelSampler, omega_s: f64, t0: f64, h: f64, n_pairs: usize) -> Vec<C64> {
    let nl = s.separations().len();
    let mut acc = vec![C64::new(0.0, 0.0); nl];
    let mut add = |vals: Vec<C64>, w: f64| {
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += v * w;
        }
    };
    add(integrand(s, omega_s, t0), 1.0);
    for i in 1..2 * n_pairs {
        add(integrand(s, omega_s, t0 + i as f64 * h), if i % 2 == 1 { 4.0 } else { 2.0 });
    }
    add(integrand(s, omega_s, t0 + 2.0 * n_pairs as f64 * h), 1.0);
    acc.iter().map(|a| a * (h / 3.0)).collect()
}

fn check_finite(vals: &[C64], what: &str) -> Result<()> {
    if let Some(v) = vals.iter().find(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numerical(format!("non-finite {what}: {v}")));
    }
    Ok(())
}

/// `Γ_ij(t) = ∫_0^t α_{r_i - r_j}(τ) e^{iω_S τ} dτ` by composite Simpson.
pub fn rate_matrix(p: &ModelParams, kernel: &CorrelationKernel, t: f64) -> Result<RateMatrix> {
    rate_matrix_with_step(p, kernel, t, rate_step_bound(p))
}

/// [`rate_matrix`] with an explicit upper bound on the quadrature step.
pub fn rate_matrix_with_step(p: &ModelParams, kernel: &CorrelationKernel, t: f64, max_step: f64) -> Result<RateMatrix> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("rate time must be >= 0, got {t}")));
    }
    let seps = PairSeparations::new(p);
    let sampler = kernel.sampler(p, &seps.distinct)?;
    if t == 0.0 {
        return Ok(RateMatrix::zeros(p.n_atoms()));
    }
    let n = simpson_intervals(t, max_step);
    let h = t / n as f64;
    // fixed chunking keeps the summation order independent of the thread count
    const CHUNK_PAIRS: usize = 1024;
    let pairs = n / 2;
    let n_chunks = pairs.div_ceil(CHUNK_PAIRS);
    let parts = par::map_range(n_chunks, |c| {
        let first = c * CHUNK_PAIRS;
        let count = CHUNK_PAIRS.min(pairs - first);
        simpson_block(&sampler, p.omega_s, 2.0 * first as f64 * h, h, count)
    });
    let mut total = vec![C64::new(0.0, 0.0); seps.distinct.len()];
    for part in parts {
        for (a, v) in total.iter_mut().zip(part) {
            *a += v;
        }
    }
    check_finite(&total, "rate integral")?;
    Ok(RateMatrix::from_separations(&seps, &total))
}

/// `Γ_L(t_n)` on a uniform node grid `t_n = n * node_step`, accumulated one
/// Simpson panel at a time.
#[derive(Clone, Debug)]
pub struct RateTable {
    seps: PairSeparations,
    node_step: f64,
    /// `values[n][l]`
    values: Vec<Vec<C64>>,
}

impl RateTable {
    pub fn build(p: &ModelParams, kernel: &CorrelationKernel, node_step: f64, n_nodes: usize) -> Result<Self> {
        Self::build_for(p, kernel, PairSeparations::new(p), node_step, n_nodes)
    }

    /// Table for explicit separations (independent of the atom positions).
    pub fn build_separations(
        p: &ModelParams,
        kernel: &CorrelationKernel,
        separations: &[i64],
        node_step: f64,
        n_nodes: usize,
    ) -> Result<Self> {
        let seps = PairSeparations { distinct: separations.to_vec(), index: DMatrix::zeros(0, 0) };
        Self::build_for(p, kernel, seps, node_step, n_nodes)
    }

    fn build_for(
        p: &ModelParams,
        kernel: &CorrelationKernel,
        seps: PairSeparations,
        node_step: f64,
        n_nodes: usize,
    ) -> Result<Self> {
        if !(node_step > 0.0) {
            return Err(Error::param("dt", "node step must be positive"));
        }
        let sampler = kernel.sampler(p, &seps.distinct)?;
        let sub = simpson_intervals(node_step, rate_step_bound(p));
        let h = node_step / sub as f64;
        let panels = par::map_range(n_nodes, |n| {
            simpson_block(&sampler, p.omega_s, n as f64 * node_step, h, sub / 2)
        });
        let mut values = Vec::with_capacity(n_nodes + 1);
        let mut acc = vec![C64::new(0.0, 0.0); seps.distinct.len()];
        values.push(acc.clone());
        for panel in panels {
            for (a, v) in acc.iter_mut().zip(panel) {
                *a += v;
            }
            check_finite(&acc, "rate integral")?;
            values.push(acc.clone());
        }
        Ok(Self { seps, node_step, values })
    }

    pub fn node_step(&self) -> f64 {
        self.node_step
    }

    /// Number of nodes (panels + 1).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn separations(&self) -> &[i64] {
        &self.seps.distinct
    }

    /// `Γ` for the `l`-th separation at node `n`.
    pub fn value(&self, l: usize, n: usize) -> C64 {
        self.values[n][l]
    }

    /// Rate matrix of the atoms at node `n`.
    pub fn matrix(&self, n: usize) -> RateMatrix {
        RateMatrix::from_separations(&self.seps, &self.values[n])
    }
}

/// How [`markov_rates`] evaluates the `t → ∞` rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarkovMode {
    /// Band-bottom expansion of the dispersion.
    Analytic,
    /// Damped momentum integral extrapolated to zero damping.
    Numeric,
}

/// Damping ladder for [`MarkovMode::Numeric`].
pub const MARKOV_EPSILONS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Long-time rates `Γ_ij(∞)`.
///
/// Analytic: `(ξ/B)(-1)^r e^{i r h0/ξ}` in the band and
/// `-i(|ξ|/B)(-1)^r e^{-r h0/|ξ|}` in the gap (purely imaginary).
/// Numeric: `(1/2π) ∫ dk e^{-ikr} i/(ω_S - ω(k) + iε)` for each damping in
/// [`MARKOV_EPSILONS`], extrapolated linearly in `ε` from the last two.
pub fn markov_rates(p: &ModelParams, mode: MarkovMode) -> Result<RateMatrix> {
    let seps = PairSeparations::new(p);
    let values = match mode {
        MarkovMode::Analytic => {
            let d = p.derived();
            if d.delta == 0.0 {
                return Err(Error::BandEdge);
            }
            seps.distinct.iter().map(|&r| analytic_markov(p, r)).collect()
        }
        MarkovMode::Numeric => seps
            .distinct
            .iter()
            .map(|&r| {
                let ladder = numeric_markov_ladder(p, r);
                extrapolate(&MARKOV_EPSILONS, &ladder)
            })
            .collect::<Vec<_>>(),
    };
    check_finite(&values, "Markov rate")?;
    Ok(RateMatrix::from_separations(&seps, &values))
}

fn analytic_markov(p: &ModelParams, r: i64) -> C64 {
    let d = p.derived();
    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
    let x = r.abs() as f64 * p.h0 / d.xi_abs;
    let amp = sign * d.xi_abs / p.half_width;
    if d.in_gap {
        C64::new(0.0, -amp * (-x).exp())
    } else {
        amp * C64::from_polar(1.0, x)
    }
}

/// Damped integrals for every `ε` of [`MARKOV_EPSILONS`].
pub(crate) fn numeric_markov_ladder(p: &ModelParams, r: i64) -> [C64; 3] {
    let c = (p.omega_s - p.band_center) / p.half_width;
    let breaks: Vec<f64> = if c.abs() < 1.0 { vec![c.acos()] } else { Vec::new() };
    MARKOV_EPSILONS.map(|eps| {
        // θ = k h0 over [0, π]; the cos(θ r) weight folds ±k
        let f = |theta: f64| {
            let den = C64::new(p.omega_s - p.band_center - p.half_width * theta.cos(), eps);
            C64::new(0.0, (theta * r as f64).cos()) / den
        };
        adaptive_gk(f, 0.0, PI, &breaks, 1e-11) / PI
    })
}

fn extrapolate(eps: &[f64; 3], vals: &[C64; 3]) -> C64 {
    let (e1, e2) = (eps[1], eps[2]);
    (vals[2] * e1 - vals[1] * e2) / (e1 - e2)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Lattice Green function `(1/2π) ∫ dθ cos(θ r)/(z - B cos θ)` of the
    /// infinite chain, `ρ^|r|/S` with `S = √(z² - B²)` on the branch where
    /// `|ρ| = |(z - S)/B| < 1`.
    fn lattice_green(z: C64, b: f64, r: i64) -> C64 {
        let mut s = (z * z - b * b).sqrt();
        if ((z - s) / b).norm() > 1.0 {
            s = -s;
        }
        ((z - s) / b).powi(r.abs() as i32) / s
    }

    fn exact_markov(p: &ModelParams, r: i64) -> C64 {
        let z = C64::new(p.omega_s - p.band_center, 1e-12);
        C64::new(0.0, 1.0) * lattice_green(z, p.half_width, r)
    }

    #[test]
    fn zero_time_rates_vanish() {
        let p = ModelParams::standard(400, vec![0, 3], 51.0);
        for k in [CorrelationKernel::ClosedBessel, CorrelationKernel::DiscreteSum] {
            let r = rate_matrix(&p, &k, 0.0).unwrap();
            assert!(r.gamma.iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn gamma0_example() {
        let p = ModelParams::standard(400, vec![0], 52.0);
        assert!((p.derived().gamma0.unwrap() - 0.4443).abs() < 1e-4);
        let g = markov_rates(&p, MarkovMode::Analytic).unwrap();
        assert!((g.gamma[(0, 0)].re - p.derived().gamma0.unwrap() / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn analytic_band_edge_is_an_error() {
        let p = ModelParams::standard(400, vec![0], 50.0);
        assert!(matches!(markov_rates(&p, MarkovMode::Analytic), Err(Error::BandEdge)));
    }

    #[test]
    fn numeric_markov_matches_lattice_green_function() {
        for &omega in &[50.5, 51.0, 52.0, 49.0, 45.0, 120.0] {
            let p = ModelParams::standard(400, vec![0, 1, 2], omega);
            let got = markov_rates(&p, MarkovMode::Numeric).unwrap();
            for r in 0..3 {
                let want = exact_markov(&p, r as i64);
                let g = got.gamma[(0, r)];
                assert!((g - want).norm() < 1e-6 * want.norm().max(1e-3), "ω={omega} r={r}: {g} vs {want}");
            }
        }
    }

    #[test]
    fn gap_rates_are_imaginary_and_decay() {
        let p = ModelParams::standard(400, vec![0, 1, 2, 3, 4], 49.0);
        let g = markov_rates(&p, MarkovMode::Analytic).unwrap();
        for r in 0..5 {
            assert_eq!(g.gamma[(0, r)].re, 0.0);
            let ratio = g.gamma[(0, r)].norm() / g.gamma[(0, 0)].norm();
            assert!((ratio - (-(r as f64) / 5.0).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn long_time_rate_approaches_markov_value() {
        let p = ModelParams::standard(400, vec![0], 52.0);
        let g = rate_matrix(&p, &CorrelationKernel::ClosedBessel, 200.0).unwrap().gamma[(0, 0)];
        let mk = markov_rates(&p, MarkovMode::Analytic).unwrap().gamma[(0, 0)];
        assert!((g.re - mk.re).abs() < 0.1 * mk.re, "{g} vs {mk}");

        let p = ModelParams::standard(400, vec![0], 49.0);
        let g = rate_matrix(&p, &CorrelationKernel::ClosedBessel, 200.0).unwrap().gamma[(0, 0)];
        assert!(g.re.abs() < 0.05 * g.im.abs(), "{g}");
    }

    #[test]
    fn rates_are_symmetric() {
        let p = ModelParams::standard(400, vec![-3, 0, 4], 50.7);
        let r = rate_matrix(&p, &CorrelationKernel::ClosedBessel, 3.3).unwrap();
        assert_eq!(r.gamma, r.gamma.transpose());
    }

    #[test]
    fn quadrature_step_converged() {
        let p = ModelParams::standard(400, vec![0, 2], 51.0);
        let k = CorrelationKernel::ClosedBessel;
        let coarse = rate_matrix(&p, &k, 10.0).unwrap();
        let fine = rate_matrix_with_step(&p, &k, 10.0, 0.5 * rate_step_bound(&p)).unwrap();
        let diff = (coarse.gamma - fine.gamma).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-8, "{diff:e}");
    }

    #[test]
    fn table_matches_direct_integral() {
        let p = ModelParams::standard(400, vec![0, 3], 51.0);
        let k = CorrelationKernel::ClosedBessel;
        let table = RateTable::build(&p, &k, 0.005, 400).unwrap();
        let direct = rate_matrix(&p, &k, 2.0).unwrap();
        let diff = (table.matrix(400).gamma - direct.gamma).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff:e}");
    }
}
