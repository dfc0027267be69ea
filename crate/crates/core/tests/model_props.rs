use std::f64::consts::PI;

use proptest::prelude::*;
use wgqed::kernels::{alpha_discrete, rate_matrix, CorrelationKernel};
use wgqed::model::{build_hamiltonian, hilbert_dimension, BasisIndex, ModelParams, Sector};

fn params(half: usize, positions: Vec<i64>, omega_s: f64, b: f64, g: f64) -> ModelParams {
    let mut p = ModelParams::standard(2 * half, positions, omega_s);
    p.half_width = b;
    p.g_coupling = g;
    p
}

fn sector() -> impl Strategy<Value = Sector> {
    prop_oneof![
        Just(Sector::SingleExcitation),
        Just(Sector::DickeSingle),
        (1u32..=2).prop_map(Sector::truncated),
        (1u32..=2).prop_map(|n| Sector::DickeTruncated { n_max: n, n_exc: n }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_hermitian_and_conserves_excitations(
        half in 4usize..=8, offsets in prop::collection::vec(-1i64..=1, 1..=3), omega in 40.0..60.0f64,
        b in 1.0..60.0f64, g in 0.0..3.0f64, periodic: bool, sector in sector(),
    ) {
        let mut p = params(half, offsets, omega, b, g);
        p.periodic = periodic;
        let basis = BasisIndex::new(sector, p.n_atoms(), p.sites).unwrap();
        let h = build_hamiltonian(&p, &basis).unwrap();
        prop_assert_eq!(h.matrix().hermitian_deviation(), 0.0);
        for (i, j, _) in h.matrix().entries() {
            prop_assert_eq!(basis.state(i).excitations(), basis.state(j).excitations());
        }
    }

    #[test]
    fn dicke_equals_full_for_colocated_atoms(
        half in 4usize..=8, site in -1i64..=1, n in 1usize..=3, omega in 40.0..60.0f64, g in 0.0..3.0f64,
        truncated: bool,
    ) {
        let p = params(half, vec![site; n], omega, 50.0, g);
        let (full, dicke) = if truncated {
            (Sector::truncated(2), Sector::DickeTruncated { n_max: 2, n_exc: 2 })
        } else {
            (Sector::SingleExcitation, Sector::DickeSingle)
        };
        let hf = build_hamiltonian(&p, &BasisIndex::new(full, n, p.sites).unwrap()).unwrap().to_dense();
        let hd = build_hamiltonian(&p, &BasisIndex::new(dicke, n, p.sites).unwrap()).unwrap().to_dense();
        prop_assert_eq!(hf, hd);
    }

    #[test]
    fn photonic_block_has_the_band_dispersion(half in 2usize..=32, a in 0.0..200.0f64, b in 0.1..100.0f64) {
        let p = ModelParams { band_center: a, ..params(half, vec![0], 50.0, b, 1.0) };
        let basis = BasisIndex::new(Sector::SingleExcitation, 1, p.sites).unwrap();
        let h = build_hamiltonian(&p, &basis).unwrap().to_dense();
        let atom = (0..basis.dim()).find(|&i| basis.state(i).atoms != 0).unwrap();
        let keep: Vec<usize> = (0..basis.dim()).filter(|&i| i != atom).collect();
        let block = h.select_rows(&keep).select_columns(&keep);
        let mut got: Vec<f64> = block.symmetric_eigenvalues().iter().copied().collect();
        let m = p.sites;
        let mut want: Vec<f64> = (0..m).map(|q| a + b * (2.0 * PI * q as f64 / m as f64).cos()).collect();
        got.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        for (x, y) in got.iter().zip(&want) {
            prop_assert!((x - y).abs() < 1e-12 * a.abs().max(b).max(1.0), "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn band_kernel_is_bounded(half in 4usize..=256, l in 0i64..=8, t in 0.0..50.0f64) {
        let p = params(half.max(l as usize + 2), vec![0], 50.0, 50.0, 1.0);
        let alpha = alpha_discrete(&p, l, &[0.0, t]).unwrap();
        prop_assert!(alpha[1].norm() <= 1.0 + 1e-12);
        let at_zero = if l == 0 { 1.0 } else { 0.0 };
        prop_assert!((alpha[0].re - at_zero).abs() < 1e-12 && alpha[0].im.abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rate_matrix_is_symmetric(
        offsets in prop::collection::vec(-6i64..=6, 2..=3), delta in -2.0..2.0f64, t in 0.0..10.0f64,
    ) {
        let p = ModelParams::standard_detuned(128, offsets, delta);
        let r = rate_matrix(&p, &CorrelationKernel::ClosedBessel, t).unwrap();
        let n = p.n_atoms();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((r.gamma[(i, j)] - r.gamma[(j, i)]).norm() <= 1e-12 * r.gamma[(i, j)].norm().max(1e-300));
            }
        }
    }
}

/// Occupation patterns of `atoms` two-level systems and `modes` oscillators
/// with at most `n_exc` quanta, counted by brute force.
fn enumerate(atoms: u32, modes: u32, n_exc: u32) -> u128 {
    let slots = atoms + modes;
    let mut count = 0;
    let mut occ = vec![0u32; slots as usize];
    loop {
        if occ.iter().sum::<u32>() <= n_exc {
            count += 1;
        }
        // odometer over atom levels {0,1} and oscillator levels {0..=n_exc}
        let mut k = 0;
        loop {
            if k == occ.len() {
                return count;
            }
            let cap = if (k as u32) < atoms { 1 } else { n_exc };
            if occ[k] < cap {
                occ[k] += 1;
                break;
            }
            occ[k] = 0;
            k += 1;
        }
    }
}

#[test]
fn hilbert_dimension_matches_brute_force() {
    for atoms in 0..=3 {
        for modes in 0..=6 {
            for n_exc in 0..=3 {
                assert_eq!(
                    hilbert_dimension(atoms as u64, modes as u64, n_exc as u64).unwrap(),
                    enumerate(atoms, modes, n_exc),
                    "N_a = {atoms}, N_o = {modes}, N_e = {n_exc}"
                );
            }
        }
    }
}

#[test]
fn truncated_basis_size_matches_dimension_formula() {
    for atoms in 1..=3usize {
        for half in 2..=3usize {
            for n_exc in 1..=3u32 {
                let basis = BasisIndex::new(Sector::truncated(n_exc), atoms, 2 * half).unwrap();
                let want = hilbert_dimension(atoms as u64, 2 * half as u64, n_exc as u64).unwrap();
                assert_eq!(basis.dim() as u128, want);
            }
        }
    }
}
