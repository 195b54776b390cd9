//! Property tests over the core invariants.

use proptest::prelude::*;
use std::sync::Arc;

use carleman_core::calculus::apply_laplacian;
use carleman_core::estimates::fit_exponent;
use carleman_core::grid::{build_grid, integrate, GridSpec};
use carleman_core::logsum::logsumexp;
use carleman_core::potentials::{
    modulus_of_continuity, modulus_of_continuity_naive, mollify, build_mollifier,
    MollifierProfile, select_theta,
};
use carleman_core::{Grid, ScalarField};

fn small_torus() -> Arc<Grid> {
    build_grid(GridSpec::Torus { nx: 16, ny: 16, lx: 1.0, ly: 1.0 }).unwrap()
}

fn field_from(values: Vec<f64>) -> ScalarField {
    ScalarField::new(small_torus(), values).unwrap()
}

proptest! {
    #[test]
    fn logsumexp_is_shift_invariant(
        xs in proptest::collection::vec(-40.0f64..40.0, 1..32),
        shift in -500.0f64..500.0,
    ) {
        let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let d = logsumexp(&shifted) - logsumexp(&xs);
        prop_assert!((d - shift).abs() < 1e-9);
    }

    #[test]
    fn integrate_is_linear(
        u in proptest::collection::vec(-5.0f64..5.0, 256),
        v in proptest::collection::vec(-5.0f64..5.0, 256),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let g = small_torus();
        let fu = field_from(u);
        let fv = field_from(v);
        let combo = fu.scale(a).add(&fv.scale(b)).unwrap();
        let lhs = integrate(&g, &combo).unwrap();
        let rhs = a * integrate(&g, &fu).unwrap() + b * integrate(&g, &fv).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + rhs.abs()));
    }

    #[test]
    fn laplacian_is_symmetric_and_nonpositive(
        u in proptest::collection::vec(-1.0f64..1.0, 256),
        v in proptest::collection::vec(-1.0f64..1.0, 256),
    ) {
        let fu = field_from(u);
        let fv = field_from(v);
        let lu = apply_laplacian(&fu).unwrap();
        let lv = apply_laplacian(&fv).unwrap();
        let a = lu.inner(&fv).unwrap();
        let b = fu.inner(&lv).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        prop_assert!(lu.inner(&fu).unwrap() <= 1e-12);
    }

    #[test]
    fn modulus_filter_equals_naive_scan(
        u in proptest::collection::vec(-2.0f64..2.0, 256),
        theta in 0.0625f64..0.45,
    ) {
        let f = field_from(u);
        let fast = modulus_of_continuity(&f, theta).unwrap();
        let naive = modulus_of_continuity_naive(&f, theta).unwrap();
        prop_assert_eq!(fast, naive);
    }

    #[test]
    fn mollification_contracts_and_preserves_mean_scale(
        u in proptest::collection::vec(-2.0f64..2.0, 1024),
        theta in 0.1f64..0.4,
    ) {
        let g = build_grid(GridSpec::Torus { nx: 32, ny: 32, lx: 1.0, ly: 1.0 }).unwrap();
        let f = ScalarField::new(g, u).unwrap();
        let kernel = build_mollifier(MollifierProfile::Cosine);
        let m = mollify(&f, theta, &kernel).unwrap();
        prop_assert!(m.linf() <= f.linf() * (1.0 + 1e-12));
    }

    #[test]
    fn theta_selection_is_monotone_in_h(
        h1 in 0.01f64..0.9,
        h2 in 0.01f64..0.9,
        kappa in 0.05f64..1.0,
        alpha in proptest::option::of(0.05f64..1.0),
    ) {
        let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
        let t_lo = select_theta(lo, kappa, alpha).unwrap();
        let t_hi = select_theta(hi, kappa, alpha).unwrap();
        prop_assert!(t_lo <= t_hi * (1.0 + 1e-15));
    }

    #[test]
    fn exponent_fit_recovers_exact_laws(
        a in 0.1f64..10.0,
        p in -2.0f64..2.0,
    ) {
        let pairs: Vec<(f64, f64)> =
            [0.2f64, 0.1, 0.05, 0.025].iter().map(|&h| (h, a * h.powf(-p))).collect();
        let (fa, fp, resid) = fit_exponent(&pairs).unwrap();
        prop_assert!((fa - a).abs() <= 1e-8 * a);
        prop_assert!((fp - p).abs() <= 1e-8);
        prop_assert!(resid <= 1e-10);
    }
}
