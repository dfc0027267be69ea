use std::collections::HashMap;

use crate::{Error, Result};

/// Excitation sector of the atoms + resonators Hilbert space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sector {
    /// One excitation shared among atoms and sites; the vacuum is carried as
    /// a separate conserved amplitude and is not part of the basis.
    SingleExcitation,
    /// All states with at most `n_exc` excitations and at most `n_max`
    /// photons per site (the vacuum included).
    TruncatedFock { n_max: u32, n_exc: u32 },
    /// [`Sector::SingleExcitation`] with the Dicke coupling.
    DickeSingle,
    /// [`Sector::TruncatedFock`] with the Dicke coupling.
    DickeTruncated { n_max: u32, n_exc: u32 },
}

impl Sector {
    /// Truncated sector with the default cutoff `n_max = n_exc`.
    pub fn truncated(n_exc: u32) -> Self {
        Sector::TruncatedFock { n_max: n_exc, n_exc }
    }

    pub fn is_dicke(&self) -> bool {
        matches!(self, Sector::DickeSingle | Sector::DickeTruncated { .. })
    }

    pub fn is_single(&self) -> bool {
        matches!(self, Sector::SingleExcitation | Sector::DickeSingle)
    }

    /// `(n_max, n_exc)` for truncated sectors.
    pub fn truncation(&self) -> Option<(u32, u32)> {
        match *self {
            Sector::TruncatedFock { n_max, n_exc } | Sector::DickeTruncated { n_max, n_exc } => {
                Some((n_max, n_exc))
            }
            _ => None,
        }
    }

    /// The same sector with the ordinary (position-dependent) coupling.
    pub fn without_dicke(&self) -> Self {
        match *self {
            Sector::DickeSingle => Sector::SingleExcitation,
            Sector::DickeTruncated { n_max, n_exc } => Sector::TruncatedFock { n_max, n_exc },
            other => other,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Sector::SingleExcitation => "single-excitation",
            Sector::TruncatedFock { .. } => "truncated-fock",
            Sector::DickeSingle => "dicke-single",
            Sector::DickeTruncated { .. } => "dicke-truncated",
        }
    }
}

/// A basis label: atomic excitation bitmask (bit `j` = atom `j` excited) and
/// the occupied sites as `(site index, photon count)` sorted by site.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub atoms: u32,
    pub photons: Vec<(u32, u32)>,
}

impl BasisState {
    pub fn vacuum() -> Self {
        Self { atoms: 0, photons: Vec::new() }
    }

    pub fn photon_count(&self) -> u32 {
        self.photons.iter().map(|&(_, n)| n).sum()
    }

    pub fn excitations(&self) -> u32 {
        self.atoms.count_ones() + self.photon_count()
    }

    pub fn occupation(&self, site: u32) -> u32 {
        self.photons
            .binary_search_by_key(&site, |&(s, _)| s)
            .map(|i| self.photons[i].1)
            .unwrap_or(0)
    }

    /// Copy with the occupation of `site` changed by `delta`.
    pub(crate) fn with_photon_delta(&self, site: u32, delta: i32) -> Self {
        let mut photons = self.photons.clone();
        match photons.binary_search_by_key(&site, |&(s, _)| s) {
            Ok(i) => {
                let n = photons[i].1 as i32 + delta;
                debug_assert!(n >= 0);
                if n == 0 {
                    photons.remove(i);
                } else {
                    photons[i].1 = n as u32;
                }
            }
            Err(i) => {
                debug_assert!(delta > 0);
                photons.insert(i, (site, delta as u32));
            }
        }
        Self { atoms: self.atoms, photons }
    }
}

/// Largest basis [`BasisIndex::new`] will enumerate.
pub const MAX_BASIS_STATES: usize = 1 << 24;

/// Size of a truncated sector in floating point (never overflows): atomic
/// subsets times the coefficients of `(1 + x + .. + x^n_max)^M`.
fn truncated_dimension_estimate(n_atoms: usize, n_sites: usize, n_max: u32, n_exc: u32) -> f64 {
    let deg = n_exc as usize;
    let mul = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; deg + 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate().take(deg + 1 - i) {
                c[i + j] += x * y;
            }
        }
        c
    };
    let site: Vec<f64> = (0..=deg).map(|k| if k as u32 <= n_max { 1.0 } else { 0.0 }).collect();
    let (mut acc, mut base, mut e) = (vec![1.0], site, n_sites);
    acc.resize(deg + 1, 0.0);
    while e > 0 {
        if e & 1 == 1 {
            acc = mul(&acc, &base);
        }
        base = mul(&base, &base);
        e >>= 1;
    }
    let mut total = 0.0;
    let mut choose = 1.0;
    for i in 0..=n_atoms.min(deg) {
        total += choose * acc[..=deg - i].iter().sum::<f64>();
        choose *= (n_atoms - i) as f64 / (i + 1) as f64;
    }
    total
}

/// Bijection between basis labels and contiguous indices.
#[derive(Clone, Debug)]
pub struct BasisIndex {
    sector: Sector,
    n_atoms: usize,
    n_sites: usize,
    states: Vec<BasisState>,
    lookup: HashMap<BasisState, usize>,
}

impl BasisIndex {
    pub fn new(sector: Sector, n_atoms: usize, n_sites: usize) -> Result<Self> {
        if n_atoms == 0 || n_atoms > 16 {
            return Err(Error::param("atom_positions", format!("need 1..=16 atoms, got {n_atoms}")));
        }
        if n_sites == 0 {
            return Err(Error::param("M", "need at least one site"));
        }
        let states = match sector.truncation() {
            None => {
                let mut s: Vec<BasisState> =
                    (0..n_atoms).map(|j| BasisState { atoms: 1 << j, photons: Vec::new() }).collect();
                s.extend((0..n_sites as u32).map(|site| BasisState { atoms: 0, photons: vec![(site, 1)] }));
                s
            }
            Some((n_max, n_exc)) => {
                let dim = truncated_dimension_estimate(n_atoms, n_sites, n_max, n_exc);
                if dim > MAX_BASIS_STATES as f64 {
                    return Err(Error::Numerical(format!(
                        "sector has about {dim:.3e} states, above the limit of {MAX_BASIS_STATES}"
                    )));
                }
                if n_max == 0 && n_exc > 0 {
                    log::warn!("n_max = 0 leaves the resonators empty");
                }
                enumerate_truncated(n_atoms, n_sites, n_max, n_exc)
            }
        };
        let lookup = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(Self { sector, n_atoms, n_sites, states, lookup })
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, index: usize) -> &BasisState {
        &self.states[index]
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn index_of(&self, state: &BasisState) -> Option<usize> {
        self.lookup.get(state).copied()
    }

    /// Whether the vacuum is one of the basis states (truncated sectors) or a
    /// separate amplitude (single-excitation sectors).
    pub fn vacuum_in_basis(&self) -> bool {
        !self.sector.is_single()
    }
}

fn enumerate_truncated(n_atoms: usize, n_sites: usize, n_max: u32, n_exc: u32) -> Vec<BasisState> {
    let mut out = Vec::new();
    for total in 0..=n_exc {
        for mask in 0u32..(1u32 << n_atoms) {
            let a = mask.count_ones();
            if a > total {
                continue;
            }
            let mut configs = Vec::new();
            photon_configs(n_sites as u32, n_max, total - a, 0, &mut Vec::new(), &mut configs);
            out.extend(configs.into_iter().map(|photons| BasisState { atoms: mask, photons }));
        }
    }
    out
}

fn photon_configs(
    n_sites: u32,
    n_max: u32,
    remaining: u32,
    start: u32,
    current: &mut Vec<(u32, u32)>,
    out: &mut Vec<Vec<(u32, u32)>>,
) {
    if remaining == 0 {
        out.push(current.clone());
        return;
    }
    for site in start..n_sites {
        for occ in 1..=remaining.min(n_max) {
            current.push((site, occ));
            photon_configs(n_sites, n_max, remaining - occ, site + 1, current, out);
            current.pop();
        }
    }
}

/// Dimension of the space of `n_atoms` two-level atoms and `n_osc` bosonic
/// modes with at most `n_exc` excitations in total:
/// `Σ_i Σ_{j>=i} C(N_a, i) C(N_o + j - i - 1, j - i)`.
pub fn hilbert_dimension(n_atoms: u64, n_osc: u64, n_exc: u64) -> Result<u128> {
    let mut total: u128 = 0;
    for i in 0..=n_atoms.min(n_exc) {
        let atoms = binomial(n_atoms as u128, i as u128)?;
        for j in i..=n_exc {
            let photons = multiset_count(n_osc as u128, (j - i) as u128)?;
            let term = atoms.checked_mul(photons).ok_or(Error::Overflow("hilbert_dimension"))?;
            total = total.checked_add(term).ok_or(Error::Overflow("hilbert_dimension"))?;
        }
    }
    Ok(total)
}

/// Ways to place `k` bosons in `n` modes, `C(n + k - 1, k)`.
fn multiset_count(n: u128, k: u128) -> Result<u128> {
    if k == 0 {
        return Ok(1);
    }
    if n == 0 {
        return Ok(0);
    }
    binomial(n + k - 1, k)
}

fn binomial(n: u128, k: u128) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step
        let g = gcd(acc, i + 1);
        let (a, d) = (acc / g, (i + 1) / g);
        let num = (n - i) / d;
        acc = a.checked_mul(num).ok_or(Error::Overflow("binomial coefficient"))?;
    }
    Ok(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_estimate_matches_enumeration() {
        for (na, m, nmax, nexc) in [(2, 5, 2, 2), (1, 6, 1, 3), (3, 4, 3, 3), (2, 3, 0, 2)] {
            let exact = enumerate_truncated(na, m, nmax, nexc).len() as f64;
            assert_eq!(truncated_dimension_estimate(na, m, nmax, nexc), exact, "{na} {m} {nmax} {nexc}");
        }
        assert!(BasisIndex::new(Sector::TruncatedFock { n_max: 16, n_exc: 16 }, 2, 1_000_000).is_err());
    }

    /// Brute force: every atom bitmask times every occupation vector with
    /// entries in `0..=n_exc`, filtered by total excitation.
    fn enumerate_dimension(n_atoms: u32, n_osc: u32, n_exc: u32) -> u128 {
        let mut count = 0u128;
        let base = n_exc + 1;
        let occupations = (base as u64).pow(n_osc);
        for mask in 0u32..(1 << n_atoms) {
            for code in 0..occupations {
                let mut c = code;
                let mut photons = 0;
                for _ in 0..n_osc {
                    photons += (c % base as u64) as u32;
                    c /= base as u64;
                }
                if mask.count_ones() + photons <= n_exc {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn dimension_examples() {
        assert_eq!(hilbert_dimension(1, 1, 1).unwrap(), 3);
        assert_eq!(hilbert_dimension(3, 10, 0).unwrap(), 1);
        assert_eq!(hilbert_dimension(2, 2, 2).unwrap(), 13);
        assert_eq!(hilbert_dimension(2, 0, 2).unwrap(), 4);
    }

    #[test]
    fn dimension_matches_enumeration() {
        for na in 0..=3 {
            for no in 0..=6 {
                for ne in 0..=3 {
                    assert_eq!(
                        hilbert_dimension(na as u64, no as u64, ne as u64).unwrap(),
                        enumerate_dimension(na, no, ne),
                        "N_a={na} N_o={no} N_e={ne}"
                    );
                }
            }
        }
    }

    #[test]
    fn dimension_overflow_is_reported() {
        assert!(matches!(hilbert_dimension(2, u64::MAX / 2, 40), Err(Error::Overflow(_))));
    }

    #[test]
    fn truncated_basis_matches_formula() {
        for (na, no, ne) in [(1, 4, 1), (2, 5, 2), (3, 6, 3), (2, 4, 3)] {
            let b = BasisIndex::new(Sector::truncated(ne), na, no).unwrap();
            assert_eq!(b.dim() as u128, hilbert_dimension(na as u64, no as u64, ne as u64).unwrap());
        }
    }

    #[test]
    fn single_excitation_dimension() {
        let b = BasisIndex::new(Sector::SingleExcitation, 3, 40).unwrap();
        assert_eq!(b.dim(), 43);
        assert!(!b.vacuum_in_basis());
    }

    #[test]
    fn labels_round_trip_and_respect_cutoffs() {
        let b = BasisIndex::new(Sector::TruncatedFock { n_max: 1, n_exc: 3 }, 2, 5).unwrap();
        for (i, s) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
            assert!(s.excitations() <= 3);
            assert!(s.photons.iter().all(|&(_, n)| (1..=1).contains(&n)));
        }
    }

    #[test]
    fn photon_delta_edits_occupations() {
        let s = BasisState { atoms: 1, photons: vec![(2, 1), (4, 2)] };
        assert_eq!(s.with_photon_delta(2, -1).photons, vec![(4, 2)]);
        assert_eq!(s.with_photon_delta(3, 1).photons, vec![(2, 1), (3, 1), (4, 2)]);
        assert_eq!(s.with_photon_delta(4, 1).occupation(4), 3);
    }
}
