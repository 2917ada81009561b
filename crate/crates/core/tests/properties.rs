//! Property tests for the invariants of each module.

use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use udcat::coherent::{dscs, overlap, PhasePoint};
use udcat::fock::{basis_dimension, FockBasis};
use udcat::husimi::{husimi_value, moment_analytic};
use udcat::lmg::{build_hamiltonian, LMGParams};
use udcat::parity::{
    apply_parity_flip, cat_norm, character, dcat, parity_of, project_parity, sector_labels, sector_weight,
    CatSpec, ParityLabel,
};
use udcat::variational::{critical_point, energy_surface, gs_energy_limit};

fn point(levels: usize) -> impl Strategy<Value = PhasePoint> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), levels - 1)
        .prop_map(|v| PhasePoint::new(v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()))
}

fn system() -> impl Strategy<Value = (usize, u32)> {
    (2usize..=4, 1u32..=8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_inverts_unrank((d, n) in system()) {
        let b = FockBasis::new(d, n).unwrap();
        prop_assert_eq!(b.len() as u128, basis_dimension(d, n).unwrap());
        for (k, occ) in b.iter().enumerate() {
            prop_assert_eq!(occ.total(), n);
            prop_assert_eq!(b.rank(occ).unwrap(), k);
        }
    }

    #[test]
    fn characters_form_a_group(len in 1usize..=6, c in any::<u32>(), c2 in any::<u32>(), b in any::<u32>()) {
        let m = (1u32 << len) - 1;
        let (c, c2, b) = (
            ParityLabel::from_mask(len, c & m),
            ParityLabel::from_mask(len, c2 & m),
            ParityLabel::from_mask(len, b & m),
        );
        prop_assert_eq!(
            character(&c, &b).unwrap() * character(&c2, &b).unwrap(),
            character(&c.add(&c2), &b).unwrap()
        );
        prop_assert_eq!(character(&c, &b).unwrap(), character(&b, &c).unwrap());
    }

    #[test]
    fn parity_labels_round_trip(len in 1usize..=8, mask in any::<u32>()) {
        let l = ParityLabel::from_mask(len, mask & ((1u32 << len) - 1));
        prop_assert_eq!(l.to_string().parse::<ParityLabel>().unwrap(), l);
    }

    #[test]
    fn overlap_is_bounded_and_matches_states(z1 in point(3), z2 in point(3), n in 1u32..=12) {
        let o = overlap(&z1, &z2, n).unwrap();
        prop_assert!(o.norm() <= 1.0 + 1e-12);
        let b = Arc::new(FockBasis::new(3, n).unwrap());
        let direct = dscs(&b, &z1).unwrap().inner(&dscs(&b, &z2).unwrap()).unwrap();
        prop_assert!((direct - o).norm() < 1e-10);
    }

    #[test]
    fn projection_is_idempotent_and_sectorial(z in point(3), n in 2u32..=10, mask in 0u32..4) {
        let b = Arc::new(FockBasis::new(3, n).unwrap());
        let c = ParityLabel::from_mask(2, mask);
        let psi = dscs(&b, &z).unwrap();
        if let Ok((p, _)) = project_parity(&psi, &c, 1e-12) {
            prop_assert!((sector_weight(&p, &c).unwrap() - 1.0).abs() < 1e-12);
            let (again, norm) = project_parity(&p, &c, 0.0).unwrap();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            for (x, y) in again.coeffs().iter().zip(p.coeffs()) {
                prop_assert!((x - y).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn cats_have_definite_parity_and_norm((d, n) in (2usize..=4, 2u32..=8), z in point(4), mask in any::<u32>()) {
        let z = PhasePoint::new(z.coords()[..d - 1].to_vec());
        let c = ParityLabel::from_mask(d - 1, mask & ((1u32 << (d - 1)) - 1));
        if c.weight() > n {
            return Ok(());
        }
        let b = Arc::new(FockBasis::new(d, n).unwrap());
        let cat = dcat(&b, &CatSpec::new(z.clone(), c, n)).unwrap();
        prop_assert!((cat.norm() - 1.0).abs() < 1e-12);
        prop_assert!((sector_weight(&cat, &c).unwrap() - 1.0).abs() < 1e-12);
        let norm = cat_norm(&CatSpec::new(z, c, n)).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&norm));
    }

    #[test]
    fn husimi_is_a_probability_and_flip_invariant(z in point(3), w in point(3), n in 2u32..=12, mask in 0u32..4) {
        let b = Arc::new(FockBasis::new(3, n).unwrap());
        let c = ParityLabel::from_mask(2, mask);
        if c.weight() > n {
            return Ok(());
        }
        let cat = dcat(&b, &CatSpec::new(z, c, n)).unwrap();
        let q = husimi_value(&cat, &w).unwrap();
        prop_assert!((-1e-15..=1.0 + 1e-12).contains(&q));
        for flip in ParityLabel::all(2) {
            let qf = husimi_value(&cat, &apply_parity_flip(&flip, &w)).unwrap();
            prop_assert!((q - qf).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_lie_in_unit_interval(z in point(3), n in 1u32..=8) {
        let b = Arc::new(FockBasis::new(3, n).unwrap());
        let m2 = moment_analytic(&dscs(&b, &z).unwrap(), 2).unwrap().value;
        let m3 = moment_analytic(&dscs(&b, &z).unwrap(), 3).unwrap().value;
        prop_assert!(m2 > 0.0 && m2 <= 1.0 && m3 > 0.0 && m3 <= m2);
    }

    #[test]
    fn energy_surface_is_bounded_below_and_parity_invariant(z in point(3), lambda in 0.0f64..5.0) {
        let e = energy_surface(&z, 1.0, lambda).unwrap();
        prop_assert!(e >= gs_energy_limit(1.0, lambda).unwrap() - 1e-12);
        for flip in ParityLabel::all(2) {
            prop_assert_eq!(e, energy_surface(&apply_parity_flip(&flip, &z), 1.0, lambda).unwrap());
        }
    }

    #[test]
    fn critical_point_attains_limit_energy(lambda in 0.0f64..10.0) {
        let cp = critical_point(1.0, lambda).unwrap();
        let e = energy_surface(&cp.point(), 1.0, lambda).unwrap();
        prop_assert!((e - gs_energy_limit(1.0, lambda).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_never_mixes_sectors((d, n) in (2usize..=4, 2u32..=7), lambda in 0.0f64..4.0) {
        let h = build_hamiltonian(&LMGParams::new(d, n, lambda)).unwrap();
        let labels = sector_labels(h.basis());
        for &(r, c, _) in h.matrix().upper() {
            prop_assert_eq!(labels[r], labels[c]);
            prop_assert_eq!(parity_of(&h.basis().states()[r]), labels[r]);
        }
    }
}
