//! Atom-photon bound states outside the band.

use crate::model::ModelParams;
use crate::{Error, Result, C64};

/// Which side of the band a localized level sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    BelowBand,
    AboveBand,
}

/// Two-atom exchange symmetry of a level (`None` for one atom).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Symmetric,
    Antisymmetric,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundState {
    pub branch: Branch,
    pub parity: Option<Parity>,
    pub energy: f64,
    /// Atomic part `|c|²` of the normalized eigenvector.
    pub atomic_weight: f64,
    /// `|E - ω_S - Σ(E)|` at the returned root.
    pub residual: f64,
    /// Photon amplitudes `b_k`, ordered like [`ModelParams::quasi_momenta`].
    pub photon_amplitudes: Vec<C64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundStateResult {
    pub states: Vec<BoundState>,
}

impl BoundStateResult {
    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.energy).collect()
    }

    pub fn atomic_weights(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.atomic_weight).collect()
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.residual).collect()
    }

    pub fn below_band(&self, parity: Option<Parity>) -> Option<&BoundState> {
        self.states.iter().find(|s| s.branch == Branch::BelowBand && s.parity == parity)
    }
}

/// Solve `E - ω_S = (g²/M) Σ_k w_k/(E - ω_k)` below and above the band, with
/// `w_k = 1` for one atom and `w_k = 1 ± cos(kL)` for the symmetric and
/// antisymmetric two-atom sectors.
pub fn bound_states(p: &ModelParams, n_atoms: usize, l: i64) -> Result<BoundStateResult> {
    let ks = p.quasi_momenta();
    let omegas: Vec<f64> = ks.iter().map(|&k| p.dispersion(k)).collect();
    let m = p.sites as f64;
    let g2 = p.g_coupling * p.g_coupling;
    let sectors: Vec<(Option<Parity>, Vec<f64>)> = match n_atoms {
        1 => vec![(None, vec![1.0; ks.len()])],
        2 => {
            if l < 0 {
                return Err(Error::param("L", "separation must be non-negative"));
            }
            let w = |s: f64| ks.iter().map(|&k| 1.0 + s * (k * p.h0 * l as f64).cos()).collect::<Vec<_>>();
            vec![(Some(Parity::Symmetric), w(1.0)), (Some(Parity::Antisymmetric), w(-1.0))]
        }
        _ => return Err(Error::param("n_atoms", format!("bound states need 1 or 2 atoms, got {n_atoms}"))),
    };

    let mut states = Vec::new();
    for (parity, weights) in sectors {
        let self_energy = |e: f64| -> f64 {
            g2 / m * weights.iter().zip(&omegas).map(|(&w, &om)| w / (e - om)).sum::<f64>()
        };
        let f = |e: f64| e - p.omega_s - self_energy(e);
        // poles with non-vanishing weight bound the two monotone branches
        let active: Vec<f64> = weights.iter().zip(&omegas).filter(|(w, _)| **w > 1e-12).map(|(_, &o)| o).collect();
        if active.is_empty() {
            // no coupling to the field: the bare level
            continue;
        }
        let lowest = active.iter().copied().fold(f64::INFINITY, f64::min);
        let highest = active.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let below = bisect_branch(&f, lowest, -1.0);
        let above = bisect_branch(&f, highest, 1.0);
        for (branch, root) in [(Branch::BelowBand, below), (Branch::AboveBand, above)] {
            let Some(e) = root else { continue };
            if e >= p.lower_edge() && e <= p.upper_edge() {
                continue;
            }
            let norm_sum: f64 =
                weights.iter().zip(&omegas).map(|(&w, &om)| w / ((e - om) * (e - om))).sum::<f64>() * g2 / m;
            let weight = 1.0 / (1.0 + norm_sum);
            let c = weight.sqrt();
            let photon_amplitudes = ks
                .iter()
                .zip(&omegas)
                .map(|(&k, &om)| {
                    let form = photon_form_factor(p, parity, k, l);
                    form * (p.g_coupling / m.sqrt() * c / (e - om))
                })
                .collect();
            states.push(BoundState {
                branch,
                parity,
                energy: e,
                atomic_weight: weight,
                residual: f(e).abs(),
                photon_amplitudes,
            });
        }
    }
    Ok(BoundStateResult { states })
}

/// Overlap of the atomic configuration with plane wave `k`: `e^{-ikr}` for
/// one atom, `(e^{-ikr₁} ± e^{-ikr₂})/√2` for two.
fn photon_form_factor(p: &ModelParams, parity: Option<Parity>, k: f64, l: i64) -> C64 {
    let r1 = p.atom_positions.first().copied().unwrap_or(0) as f64 * p.h0;
    let e1 = C64::from_polar(1.0, -k * r1);
    match parity {
        None => e1,
        Some(par) => {
            let s = if par == Parity::Symmetric { 1.0 } else { -1.0 };
            let e2 = C64::from_polar(1.0, -k * (r1 + l as f64 * p.h0));
            (e1 + e2 * s) / 2f64.sqrt()
        }
    }
}

/// Root of the increasing function `f` on the open half-line beyond `pole`
/// (`dir = -1`: `(-∞, pole)`, `dir = +1`: `(pole, ∞)`).
fn bisect_branch<F: Fn(f64) -> f64>(f: &F, pole: f64, dir: f64) -> Option<f64> {
    // f → +∞ at the pole from below and -∞ from above, so the far end sets the sign
    let mut span = 1.0;
    let mut far = pole + dir * span;
    let want_far_negative = dir < 0.0;
    for _ in 0..200 {
        let v = f(far);
        if !v.is_finite() {
            return None;
        }
        if (v < 0.0) == want_far_negative {
            break;
        }
        span *= 2.0;
        far = pole + dir * span;
    }
    let (mut lo, mut hi) = if dir < 0.0 { (far, pole) } else { (pole, far) };
    if !((f(far) < 0.0) == want_far_negative) {
        return None;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the endpoint at the pole is never a root candidate
    let root = if dir < 0.0 { lo } else { hi };
    let other = if dir < 0.0 { hi } else { lo };
    if other != pole && f(other).abs() < f(root).abs() {
        Some(other)
    } else {
        Some(root)
    }
}
