mod common;

use std::f64::consts::FRAC_PI_2;

use common::*;
use focal_core::linalg;
use focal_core::wilking::SPLIT_A_TOL;
use focal_core::{FamilyConfig, LagrangianFamily, TransverseSplit};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

/// Random subfamily of dimension `0..=dim` in coefficient space.
fn random_v(seed: u64, dim: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    let m = r.random_range(0..=dim);
    uniform_matrix(&mut r, dim, m)
}

/// No focal point within 0.05 of `t`, so the difference stencil stays on one
/// smooth branch of `S^`.
fn away_from_focal(fam: &LagrangianFamily, t: f64) -> bool {
    fam.focal_events(t - 0.05, t + 0.05).unwrap().is_empty()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transverse_equation_and_transfer(
        recipe in arb_model(), seed in any::<u64>(), vseed in any::<u64>(), t in 0.05f64..2.5,
    ) {
        let fam = family_from(recipe.build(), seed, 0.0);
        let split = TransverseSplit::new(&fam, random_v(vseed, fam.dim())).unwrap();
        prop_assume!(away_from_focal(&fam, t));
        prop_assume!(split.full_index_at(t).unwrap());
        let (bh, s_hat) = split.transverse_parts(t).unwrap();
        prop_assert_eq!(bh.ncols(), fam.dim() - split.m());
        if s_hat.ncols() > 0 {
            prop_assert!(linalg::asymmetry(&s_hat) <= 1e-7);
        }
        let res = split.transverse_residual(t, 1e-4).unwrap();
        prop_assert!(res <= 1e-5, "residual {res:e}");

        // Any basis of the transferred subfamily carries the same trace.
        let w = split.transfer_subfamily(t).unwrap();
        let c = well_conditioned(&mut rng(vseed ^ 1), w.ncols());
        let check = split.eigenvalue_transfer_check(t, &(w * c)).unwrap();
        prop_assert!(check.difference <= 1e-8, "{check:?}");
    }

    #[test]
    fn decoupled_subfamilies_split(
        base in proptest::collection::vec(0.3f64..2.0, 2..5),
        amp in 0.0f64..0.3, m_frac in 0.0f64..1.0, shape in proptest::collection::vec(-1.0f64..1.0, 4),
    ) {
        // Diagonal curvature with a diagonal seed: every coordinate field
        // stays on its own axis, so A vanishes for coordinate subfamilies.
        let dim = base.len();
        let recipe = ModelRecipe::Diagonal { base: base.clone(), amp: vec![amp; dim], freq: vec![1.0; dim] };
        let j0 = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim, |i, _| if i % 2 == 0 { 1.0 } else { 0.0 }));
        let dj0 = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim, |i, _| if i % 2 == 0 { shape[i % 4] } else { 1.0 }));
        let fam = LagrangianFamily::new(recipe.build(), 0.0, j0, dj0, FamilyConfig::default()).unwrap();
        let m = ((dim as f64) * m_frac) as usize;
        let v = DMatrix::identity(dim, dim).columns(0, m).clone_owned();
        let split = TransverseSplit::new(&fam, v).unwrap();
        let (lo, hi) = (0.1, 1.0);
        let idx = split.full_index_check(lo, hi).unwrap();
        prop_assume!(idx.holds);
        for i in 0..10 {
            let t = lo + (hi - lo) * i as f64 / 9.0;
            if let Ok(a) = split.a_tensor(t) {
                prop_assert!(linalg::spectral_norm(&a) <= 1e-12);
            }
        }
        let rep = split.splitting_detector(lo, hi, 40).unwrap();
        prop_assert!(rep.max_a_norm <= SPLIT_A_TOL);
        prop_assert!(rep.confirmed, "{rep:?}");
    }

    #[test]
    fn mixed_product_subfamilies_do_not_split(
        alpha in 0.2f64..1.35, k1 in 0.5f64..2.0, k2 in 2.5f64..4.0, vseed in any::<u64>(),
    ) {
        // Mixing the two curvature blocks of a product couples the fields.
        let m = ModelRecipe::Product { a: 3, k1, b: 3, k2, alpha }.build();
        let fam = LagrangianFamily::new(m, 0.0, DMatrix::identity(5, 5), DMatrix::zeros(5, 5), FamilyConfig::default()).unwrap();
        let mut r = rng(vseed);
        let mut v = DMatrix::zeros(5, 1);
        v[(0, 0)] = 1.0;
        v[(3, 0)] = r.random_range(0.5..1.5);
        let split = TransverseSplit::new(&fam, v).unwrap();
        let rep = split.splitting_detector(0.1, 0.6, 30).unwrap();
        prop_assert!(!rep.confirmed, "{rep:?}");
    }
}

#[test]
fn hopf_subfamily_splits() {
    let m = focal_core::constant_curvature_model(3, 1.0).unwrap();
    let j0 = DMatrix::from_diagonal(&nalgebra::dvector![0.0, 1.0]);
    let dj0 = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 0.0]);
    let fam = LagrangianFamily::new(m, 0.0, j0, dj0, FamilyConfig::default()).unwrap();
    let split = TransverseSplit::new(&fam, DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
    assert!(split.full_index_check(0.01, FRAC_PI_2 - 0.01).unwrap().holds);
    let s = split.transverse_riccati(std::f64::consts::FRAC_PI_4).unwrap();
    assert!((s[(0, 0)] + 1.0).abs() <= 1e-9);
    let rep = split.splitting_detector(0.05, FRAC_PI_2 - 0.05, 40).unwrap();
    assert!(rep.confirmed && rep.max_a_norm <= 1e-12);
}

#[test]
fn residual_through_a_focal_time_with_full_index() {
    // Great circle in S^3: sin t E2 vanishes at pi and lies in V, while the
    // horizontal field cos t E1 keeps S^ = -tan t smooth there.
    let m = focal_core::constant_curvature_model(3, 1.0).unwrap();
    let fam = focal_core::submanifold_lagrangian(
        m,
        &focal_core::SubmanifoldData::totally_geodesic(1),
        FamilyConfig::default(),
    )
    .unwrap();
    let split = TransverseSplit::new(&fam, DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
    let pi = std::f64::consts::PI;
    assert_eq!(fam.focal_events(pi - 0.1, pi + 0.1).unwrap().len(), 1);
    assert!(split.full_index_at(pi).unwrap());
    assert!(split.transverse_riccati(pi).unwrap()[(0, 0)].abs() <= 1e-8);
    for t in [pi - 0.3, pi - 1e-3, pi + 2e-3, pi + 0.2] {
        assert!(split.transverse_residual(t, 1e-4).unwrap() <= 1e-5, "t = {t}");
    }
    assert!(matches!(split.a_tensor(pi), Err(focal_core::GeomError::VanishingField { .. })));
}
