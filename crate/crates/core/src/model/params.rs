use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

/// Physical inputs of the waveguide model, in units of the coupling `g`.
///
/// Serialized keys follow the conventional symbols (`A`, `B`, `M`,
/// `omega_S`, ...), so configuration files read like the model equations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Band center `A`.
    #[serde(rename = "A")]
    pub band_center: f64,
    /// Half band width `B`; the band spans `[A - B, A + B]`.
    #[serde(rename = "B")]
    pub half_width: f64,
    /// Local atom-resonator coupling `g`. Each of the `M` Bloch modes couples
    /// with `g/√M`, so normalized correlation kernels enter every reduced
    /// equation multiplied by `g²`.
    #[serde(default = "one")]
    pub g_coupling: f64,
    /// Number of resonators `M` (even, at least 4).
    #[serde(rename = "M")]
    pub sites: usize,
    /// Lattice spacing.
    #[serde(default = "one")]
    pub h0: f64,
    /// Site index of every atom, in `(-M/2, M/2]`.
    pub atom_positions: Vec<i64>,
    /// Atomic transition frequency.
    #[serde(rename = "omega_S")]
    pub omega_s: f64,
    /// Wrap the hopping term around the chain ends.
    #[serde(default = "yes")]
    pub periodic: bool,
}

impl ModelParams {
    /// Standard band (`A = 100`, `B = 50`, `g = 1`) with the given atoms.
    pub fn standard(sites: usize, atom_positions: Vec<i64>, omega_s: f64) -> Self {
        Self {
            band_center: 100.0,
            half_width: 50.0,
            g_coupling: 1.0,
            sites,
            h0: 1.0,
            atom_positions,
            omega_s,
            periodic: true,
        }
    }

    /// Same as [`ModelParams::standard`] but with the frequency given as the
    /// detuning from the lower band edge.
    pub fn standard_detuned(sites: usize, atom_positions: Vec<i64>, detuning: f64) -> Self {
        Self::standard(sites, atom_positions, 50.0 + detuning)
    }

    pub fn n_atoms(&self) -> usize {
        self.atom_positions.len()
    }

    pub fn lower_edge(&self) -> f64 {
        self.band_center - self.half_width
    }

    pub fn upper_edge(&self) -> f64 {
        self.band_center + self.half_width
    }

    pub fn detuning(&self) -> f64 {
        self.omega_s - self.lower_edge()
    }

    /// Smallest allowed distance between an atom and either chain end.
    pub fn end_margin(&self) -> i64 {
        (self.sites / 4) as i64
    }

    /// Lowest and highest site label, `(-M/2 + 1, M/2)`.
    pub fn site_range(&self) -> (i64, i64) {
        let half = (self.sites / 2) as i64;
        (-half + 1, half)
    }

    /// Contiguous index of the site with label `position`.
    pub fn site_index(&self, position: i64) -> usize {
        let (lo, _) = self.site_range();
        (position - lo) as usize
    }

    /// Dispersion `ω(k) = A + B cos(k h0)`.
    pub fn dispersion(&self, k: f64) -> f64 {
        self.band_center + self.half_width * (k * self.h0).cos()
    }

    /// Quasi-momenta `k = 2πq/(h0 M)` for `q = -M/2 + 1, ..., M/2`.
    pub fn quasi_momenta(&self) -> Vec<f64> {
        let m = self.sites as f64;
        let (lo, hi) = self.site_range();
        (lo..=hi).map(|q| 2.0 * PI * q as f64 / (self.h0 * m)).collect()
    }

    pub fn with_omega_s(&self, omega_s: f64) -> Self {
        Self { omega_s, ..self.clone() }
    }

    pub fn with_positions(&self, atom_positions: Vec<i64>) -> Self {
        Self { atom_positions, ..self.clone() }
    }

    pub fn with_coupling(&self, g_coupling: f64) -> Self {
        Self { g_coupling, ..self.clone() }
    }

    /// Check the parameter invariants. Co-located atoms are allowed (the
    /// `L = 0` configurations are the Dicke limit).
    pub fn validate(&self) -> Result<()> {
        if self.sites < 4 || self.sites % 2 != 0 {
            return Err(Error::param("M", format!("must be an even integer >= 4, got {}", self.sites)));
        }
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::param("B", format!("must be positive, got {}", self.half_width)));
        }
        if !self.band_center.is_finite() {
            return Err(Error::param("A", "must be finite"));
        }
        if !(self.g_coupling >= 0.0) || !self.g_coupling.is_finite() {
            return Err(Error::param("g_coupling", format!("must be >= 0, got {}", self.g_coupling)));
        }
        if !(self.h0 > 0.0) || !self.h0.is_finite() {
            return Err(Error::param("h0", format!("must be positive, got {}", self.h0)));
        }
        if !self.omega_s.is_finite() {
            return Err(Error::param("omega_S", "must be finite"));
        }
        if self.atom_positions.is_empty() {
            return Err(Error::param("atom_positions", "at least one atom is required"));
        }
        if self.atom_positions.len() > 16 {
            return Err(Error::param("atom_positions", "at most 16 atoms are supported"));
        }
        let (lo, hi) = self.site_range();
        let margin = self.end_margin();
        for &r in &self.atom_positions {
            if r < lo || r > hi {
                return Err(Error::param(
                    "atom_positions",
                    format!("position {r} outside the chain ({lo}..={hi})"),
                ));
            }
            if r - lo < margin - 1 || hi - r < margin {
                return Err(Error::param(
                    "atom_positions",
                    format!("position {r} is closer than M/4 = {margin} sites to a chain end"),
                ));
            }
        }
        Ok(())
    }

    pub fn derived(&self) -> DerivedParams {
        derive_params(self)
    }
}

/// Scales that follow from [`ModelParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedParams {
    /// Lower band edge `A - B`.
    pub omega_c: f64,
    /// Upper band edge `A + B`.
    pub omega_c_tilde: f64,
    /// Detuning from the lower band edge.
    pub delta: f64,
    /// `|ξ| = h0 √(B / 2|Δ|)`; infinite at the band edge.
    pub xi_abs: f64,
    /// The atomic frequency lies below the band (`Δ < 0`).
    pub in_gap: bool,
    /// `γ0 = 2πξ/B`, defined for `Δ > 0`.
    pub gamma0: Option<f64>,
    /// Long period of the atom-atom rates, `h0 π √(B/2Δ)`, for `Δ > 0`.
    pub lambda_l: Option<f64>,
    band_center: f64,
    half_width: f64,
    h0: f64,
}

impl DerivedParams {
    /// Group velocity `B h0 sin(k(ω) h0)` of the band mode at frequency `ω`,
    /// `None` outside the open band.
    pub fn group_velocity(&self, omega: f64) -> Option<f64> {
        let c = (omega - self.band_center) / self.half_width;
        if c <= -1.0 || c >= 1.0 {
            return None;
        }
        let k_h0 = c.acos();
        Some(self.half_width * self.h0 * k_h0.sin())
    }

    /// Atoms at the band edge: `ξ` diverges.
    pub fn at_band_edge(&self) -> bool {
        self.xi_abs.is_infinite()
    }
}

pub fn derive_params(p: &ModelParams) -> DerivedParams {
    let omega_c = p.lower_edge();
    let delta = p.omega_s - omega_c;
    let xi_abs = if delta == 0.0 {
        f64::INFINITY
    } else {
        p.h0 * (p.half_width / (2.0 * delta.abs())).sqrt()
    };
    let positive = delta > 0.0;
    DerivedParams {
        omega_c,
        omega_c_tilde: p.upper_edge(),
        delta,
        xi_abs,
        in_gap: delta < 0.0,
        gamma0: positive.then(|| 2.0 * PI * xi_abs / p.half_width),
        lambda_l: positive.then(|| p.h0 * PI * (p.half_width / (2.0 * delta)).sqrt()),
        band_center: p.band_center,
        half_width: p.half_width,
        h0: p.h0,
    }
}
