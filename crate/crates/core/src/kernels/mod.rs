//! Bath correlation functions `α_L(t)` and the rates built from them.
//!
//! All band kernels are normalized so that `α_0(0) = 1`; the reduced
//! equations carry the coupling as an explicit `g²` factor.
//!
//! The closed form is `α_L(t) = (-i)^|L| J_|L|(Bt) e^{-iAt}`. The phase
//! `(-i)^|L|` follows from the Jacobi-Anger expansion of the mode sum and is
//! checked against the discrete sum at `M = 4096` in the tests.

mod rates;

pub use rates::{markov_rates, rate_matrix, rate_step_bound, MarkovMode, RateMatrix, RateTable};

use std::f64::consts::PI;

use crate::model::ModelParams;
use crate::special::bessel_j_upto;
use crate::{par, Error, Result, C64};

/// Parameters of the Lorentzian (delta-correlated in the broad limit) kernel
/// `β e^{-(γ_w + iω0)(t - t_d)}` for `t >= t_d`, zero before.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LorentzianParams {
    pub beta: f64,
    pub gamma_w: f64,
    pub omega0: f64,
    /// Delay accumulated per site of separation, `t_d = |L| * delay_per_site`
    /// (the inverse group velocity).
    pub delay_per_site: f64,
}

/// Functional form used for `α_L(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CorrelationKernel {
    /// Finite sum over the `M` Bloch modes of the ring.
    DiscreteSum,
    /// Infinite-chain limit in terms of Bessel functions.
    ClosedBessel,
    Lorentzian(LorentzianParams),
}

impl CorrelationKernel {
    pub fn label(&self) -> &'static str {
        match self {
            CorrelationKernel::DiscreteSum => "discrete-sum",
            CorrelationKernel::ClosedBessel => "closed-bessel",
            CorrelationKernel::Lorentzian(_) => "lorentzian",
        }
    }

    /// Bind the kernel to a parameter set and a list of separations.
    pub fn sampler(&self, p: &ModelParams, separations: &[i64]) -> Result<KernelSampler> {
        KernelSampler::new(*self, p, separations)
    }

    /// `α_L(t)` on a grid.
    pub fn series(&self, p: &ModelParams, l: i64, t_grid: &[f64]) -> Result<Vec<C64>> {
        let s = self.sampler(p, &[l])?;
        Ok(par::map(t_grid, |&t| s.sample(t)[0]))
    }
}

/// Distinct mode frequencies of the ring, with the weight `cos(k L)/M` of
/// each separation folded in (`±q` modes share a frequency).
#[derive(Clone, Debug)]
struct ModeTable {
    omegas: Vec<f64>,
    /// `weights[l][q]`
    weights: Vec<Vec<f64>>,
}

impl ModeTable {
    fn new(p: &ModelParams, separations: &[i64]) -> Self {
        let m = p.sites;
        let half = m / 2;
        let ks: Vec<f64> = (0..=half).map(|q| 2.0 * PI * q as f64 / (p.h0 * m as f64)).collect();
        let omegas = ks.iter().map(|&k| p.dispersion(k)).collect();
        let weights = separations
            .iter()
            .map(|&l| {
                ks.iter()
                    .enumerate()
                    .map(|(q, &k)| {
                        let mult = if q == 0 || q == half { 1.0 } else { 2.0 };
                        mult * (k * p.h0 * l as f64).cos() / m as f64
                    })
                    .collect()
            })
            .collect();
        Self { omegas, weights }
    }
}

/// Evaluates `α_L(t)` for a fixed set of separations.
#[derive(Clone, Debug)]
pub struct KernelSampler {
    kernel: CorrelationKernel,
    separations: Vec<i64>,
    band_center: f64,
    half_width: f64,
    max_order: usize,
    modes: Option<ModeTable>,
}

impl KernelSampler {
    pub fn new(kernel: CorrelationKernel, p: &ModelParams, separations: &[i64]) -> Result<Self> {
        let modes = match kernel {
            CorrelationKernel::DiscreteSum => {
                let half = (p.sites / 2) as i64;
                if let Some(&l) = separations.iter().find(|l| l.abs() >= half) {
                    return Err(Error::param("L", format!("|L| = {} must be below M/2 = {half}", l.abs())));
                }
                Some(ModeTable::new(p, separations))
            }
            CorrelationKernel::Lorentzian(lp) => {
                if !(lp.gamma_w > 0.0) {
                    return Err(Error::param("gamma_w", "Lorentzian width must be positive"));
                }
                if !(lp.delay_per_site >= 0.0) {
                    return Err(Error::param("t_d", "delay must be non-negative"));
                }
                None
            }
            CorrelationKernel::ClosedBessel => None,
        };
        Ok(Self {
            kernel,
            separations: separations.to_vec(),
            band_center: p.band_center,
            half_width: p.half_width,
            max_order: separations.iter().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0),
            modes,
        })
    }

    pub fn separations(&self) -> &[i64] {
        &self.separations
    }

    /// `α_L(t)` for every bound separation, in order.
    pub fn sample(&self, t: f64) -> Vec<C64> {
        match self.kernel {
            CorrelationKernel::DiscreteSum => {
                let modes = self.modes.as_ref().expect("mode table");
                let phases: Vec<C64> = modes
                    .omegas
                    .iter()
                    .map(|&w| {
                        let (s, c) = (w * t).sin_cos();
                        C64::new(c, -s)
                    })
                    .collect();
                modes
                    .weights
                    .iter()
                    .map(|w| w.iter().zip(&phases).map(|(&a, &z)| z * a).sum())
                    .collect()
            }
            CorrelationKernel::ClosedBessel => {
                let x = self.half_width * t;
                let js = bessel_j_upto(self.max_order, x.abs());
                let carrier = C64::from_polar(1.0, -self.band_center * t);
                self.separations
                    .iter()
                    .map(|&l| {
                        let n = l.unsigned_abs() as usize;
                        let mut j = js[n];
                        if x < 0.0 && n % 2 == 1 {
                            j = -j;
                        }
                        minus_i_pow(n) * j * carrier
                    })
                    .collect()
            }
            CorrelationKernel::Lorentzian(lp) => self
                .separations
                .iter()
                .map(|&l| lorentzian_point(&lp, l.unsigned_abs() as f64 * lp.delay_per_site, t))
                .collect(),
        }
    }
}

fn minus_i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

fn lorentzian_point(lp: &LorentzianParams, t_d: f64, t: f64) -> C64 {
    if t < t_d {
        return C64::new(0.0, 0.0);
    }
    let s = t - t_d;
    lp.beta * C64::new(-lp.gamma_w * s, -lp.omega0 * s).exp()
}

/// `α_L(t) = (1/M) Σ_k e^{-iω(k)t} e^{-ikL h0}` over the ring's quasi-momenta.
pub fn alpha_discrete(p: &ModelParams, l: i64, t_grid: &[f64]) -> Result<Vec<C64>> {
    CorrelationKernel::DiscreteSum.series(p, l, t_grid)
}

/// `α_L(t) = (-i)^|L| J_|L|(Bt) e^{-iAt}`.
pub fn alpha_closed(a: f64, b: f64, l: i64, t_grid: &[f64]) -> Vec<C64> {
    let n = l.unsigned_abs() as usize;
    let phase = minus_i_pow(n);
    t_grid
        .iter()
        .map(|&t| {
            let j = crate::special::bessel_j(n as i64, b * t);
            phase * j * C64::from_polar(1.0, -a * t)
        })
        .collect()
}

/// `β e^{-(γ_w + iω0)(t - t_d)}` for `t >= t_d`, zero before.
pub fn alpha_lorentzian(beta: f64, gamma_w: f64, omega0: f64, t_d: f64, t_grid: &[f64]) -> Result<Vec<C64>> {
    if !(gamma_w > 0.0) {
        return Err(Error::param("gamma_w", "Lorentzian width must be positive"));
    }
    if !(t_d >= 0.0) {
        return Err(Error::param("t_d", "delay must be non-negative"));
    }
    let lp = LorentzianParams { beta, gamma_w, omega0, delay_per_site: 0.0 };
    Ok(t_grid.iter().map(|&t| lorentzian_point(&lp, t_d, t)).collect())
}
