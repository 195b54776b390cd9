//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Every tolerance, sample count and runtime cap is pinned here. A failing
//! assertion marks the criterion red; nothing is loosened to force green.

use std::time::{Duration, Instant};

use carleman_core::estimates::{
    build_test_family, run_carleman_ratio, run_holder_scaling, run_local_to_global, region_weight,
    ExperimentConfig, ExperimentKind, FamilySpec, RegionSpec, CARLEMAN_GROWTH_FACTOR,
};
use carleman_core::grid::{build_grid, GridSpec};
use carleman_core::operators::check_separation_inequality;
use carleman_core::potentials::{
    build_mollifier, mollify_tagged, sample_potential, select_theta, verify_regularization_bounds,
    MollifierProfile, PotentialSpec,
};
use carleman_core::weights::{
    bracket_closed_form, bracket_fd, build_weight, certificate_search, characteristic_profile,
    hormander_scan, seeded_symbol_points, subelliptic_constant, WeightSpec,
};

fn conclude(criterion: u32, name: &str, started: Instant, limit: Duration, pass: bool, detail: String) {
    let elapsed = started.elapsed();
    let timely = elapsed <= limit;
    let verdict = if pass && timely { "PASS" } else { "FAIL" };
    eprintln!(
        "[acceptance] criterion {criterion} ({name}): {verdict} | {detail} [{elapsed:.2?} of {limit:.0?}]"
    );
    assert!(pass, "criterion {criterion} ({name}): {detail}");
    assert!(timely, "criterion {criterion} ({name}): runtime {elapsed:?} over {limit:?}");
}

#[test]
fn criterion_01_mollifier_kernel() {
    let t0 = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for profile in [MollifierProfile::StandardBump, MollifierProfile::Cosine] {
        let k = build_mollifier(profile);
        let mass_err = (k.mass() - 1.0).abs();
        let (mx, my) = k.derivative_masses(801);
        pass &= mass_err <= 1e-10 && mx.abs() <= 1e-8 && my.abs() <= 1e-8;
        detail.push_str(&format!(
            "{profile:?}: |∫φ-1|={mass_err:.2e}, ∫∂φ=({mx:.1e},{my:.1e}); "
        ));
    }
    conclude(1, "mollifier kernel", t0, Duration::from_secs(1), pass, detail);
}

#[test]
fn criterion_02_regularization_bounds() {
    let t0 = Instant::now();
    let grid = build_grid(GridSpec::Torus { nx: 256, ny: 256, lx: 1.0, ly: 1.0 }).unwrap();
    let kernel = build_mollifier(MollifierProfile::StandardBump);
    let catalog = [
        PotentialSpec::Constant { value: 3.0 },
        PotentialSpec::sine_x(1.0, 1),
        PotentialSpec::Weierstrass { alpha: 0.5, levels: 6 },
        PotentialSpec::Checkerboard { cell: 0.25, jump: 1.0 },
        PotentialSpec::PiecewiseRandom { cell: 0.25, amplitude: 1.0, seed: 7 },
    ];
    let mut pass = true;
    let mut worst = f64::INFINITY;
    for spec in &catalog {
        for theta in [0.05, 0.1, 0.2] {
            let r = verify_regularization_bounds(spec, &grid, theta, &kernel).unwrap();
            pass &= r.pass;
            worst = worst.min(r.bound1_margin.min(r.bound2_margin));
            if !r.pass {
                eprintln!("  bound failure: {spec:?} theta={theta}: {r:?}");
            }
        }
    }
    conclude(
        2,
        "regularization bounds on 256^2",
        t0,
        Duration::from_secs(120),
        pass,
        format!("5 potentials x 3 thetas, worst margin {worst:.3e}"),
    );
}

#[test]
fn criterion_03_bracket_oracle_agreement() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for spec in [WeightSpec::radial_exp(1.0), WeightSpec::radial_inverse()] {
        for pt in seeded_symbol_points(42, 100, (0.5, 2.0)) {
            let cf = bracket_closed_form(&spec, pt).unwrap();
            let fd = bracket_fd(&spec, pt, 1e-4).unwrap();
            worst = worst.max((fd - cf).abs() / (1.0 + cf.abs()));
        }
    }
    conclude(
        3,
        "bracket oracle agreement",
        t0,
        Duration::from_secs(1),
        worst <= 1e-5,
        format!("worst relative disagreement {worst:.2e} over 2x100 seeded points"),
    );
}

#[test]
fn criterion_04_hormander_positivity() {
    let t0 = Instant::now();
    let exp = hormander_scan(&WeightSpec::radial_exp(2.0), (0.5, 2.0), 1000).unwrap();
    let pass_exp = exp.pass && exp.min_char_bracket >= 8.0;
    let profile = characteristic_profile(&WeightSpec::radial_inverse(), (0.5, 2.0), 1000).unwrap();
    let mut worst_rel = 0.0f64;
    for (r, q) in &profile {
        let expect = r.powi(-7);
        worst_rel = worst_rel.max((q - expect).abs() / expect);
    }
    let pass_inv = worst_rel <= 1e-9;
    conclude(
        4,
        "Hormander positivity",
        t0,
        Duration::from_secs(1),
        pass_exp && pass_inv,
        format!(
            "exp min {:.3} >= 8; inverse profile matches r^-7 to {worst_rel:.2e}",
            exp.min_char_bracket
        ),
    );
}

#[test]
fn criterion_05_subelliptic_certificate() {
    let t0 = Instant::now();
    let spec = WeightSpec::radial_exp(1.0);
    let box_ranges = [[0.5, 2.0], [-5.0, 5.0], [0.0, 5.0]];
    let found = certificate_search(&spec, box_ranges, 100_000).unwrap();
    let refined = subelliptic_constant(&spec, found.d, box_ranges, 800_000).unwrap();
    let drift = (refined.constant - found.constant).abs() / found.constant;
    let pass = found.pass && found.d <= 128.0 && found.constant > 0.0 && drift <= 0.05;
    conclude(
        5,
        "subelliptic certificate",
        t0,
        Duration::from_secs(30),
        pass,
        format!(
            "d={} C={:.5} at ~1e5 samples, refinement drift {drift:.4}",
            found.d, found.constant
        ),
    );
}

#[test]
fn criterion_06_separation_inequality() {
    let t0 = Instant::now();
    let grid = build_grid(GridSpec::Torus { nx: 128, ny: 128, lx: 1.0, ly: 1.0 }).unwrap();
    let kernel = build_mollifier(MollifierProfile::Cosine);
    let phi = build_weight(&WeightSpec::radial_exp(1.0), &grid, 1.0).unwrap().scale(0.5);
    let family = build_test_family(
        &grid,
        &FamilySpec::BandLimited { count: 20, max_freq: 3 },
        &RegionSpec::Annulus { r1: 0.2, r2: 0.44 },
        1234,
    )
    .unwrap();
    assert_eq!(family.len(), 20);
    let mut pass = true;
    let mut worst = f64::INFINITY;
    for spec in [
        PotentialSpec::Checkerboard { cell: 0.25, jump: 1.0 },
        PotentialSpec::Weierstrass { alpha: 0.5, levels: 6 },
    ] {
        let v = sample_potential(&spec, &grid).unwrap();
        for h in [0.2, 0.1] {
            let theta = select_theta(h, 0.5, None).unwrap();
            let vt = mollify_tagged(&v, theta, &kernel).unwrap();
            for tf in &family {
                let rep =
                    check_separation_inequality(&grid, h, &vt, 0.5, &phi, &tf.re, None).unwrap();
                pass &= rep.pass;
                worst = worst.min(rep.margin / (1.0 + rep.lhs.abs()));
            }
        }
    }
    conclude(
        6,
        "separation inequality",
        t0,
        Duration::from_secs(180),
        pass,
        format!("20 test functions x 2 potentials x 2 h, worst relative margin {worst:.3e}"),
    );
}

fn carleman_config(nr: usize, nang: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        GridSpec::Polar { nr, nang, r_inner: 0.25, r_outer: 1.0 },
        PotentialSpec::Constant { value: 0.0 },
    );
    cfg.kind = Some(ExperimentKind::CarlemanRatio);
    cfg.weight = Some(WeightSpec::radial_exp(1.0));
    cfg.support = Some(RegionSpec::Annulus { r1: 0.3, r2: 0.92 });
    cfg.family = Some(FamilySpec::Gaussian { count: 20, width: 0.06 });
    cfg.energy = Some(1.0);
    cfg.h_ladder = vec![0.2, 0.1, 0.05];
    cfg
}

#[test]
fn criterion_07_carleman_ratio() {
    let t0 = Instant::now();
    let base = run_carleman_ratio(&carleman_config(48, 96)).unwrap();
    let doubled = run_carleman_ratio(&carleman_config(96, 192)).unwrap();
    let mut pass = base.pass && base.skipped.is_empty() && base.records.len() == 3;
    let mut detail = String::new();
    for r in &base.records {
        pass &= r.ratio.is_finite() && r.ratio > 0.0;
        detail.push_str(&format!("C_emp({})={:.4e}; ", r.h, r.ratio));
    }
    for w in base.records.windows(2) {
        pass &= w[1].ratio / w[0].ratio <= CARLEMAN_GROWTH_FACTOR;
    }
    let mut worst_drift = 0.0f64;
    for (a, b) in base.records.iter().zip(&doubled.records) {
        worst_drift = worst_drift.max((b.ratio - a.ratio).abs() / a.ratio);
    }
    pass &= worst_drift <= 0.15;
    detail.push_str(&format!("grid-doubling drift {worst_drift:.4}"));
    conclude(7, "discrete Carleman ratio", t0, Duration::from_secs(600), pass, detail);
}

#[test]
fn criterion_08_local_to_global_anchor() {
    let t0 = Instant::now();

    // Plane-wave anchor: the ratio equals the discrete area quotient exactly.
    let mut cfg = ExperimentConfig::new(
        GridSpec::Torus { nx: 128, ny: 128, lx: 1.0, ly: 1.0 },
        PotentialSpec::Constant { value: 0.0 },
    );
    cfg.kind = Some(ExperimentKind::LocalToGlobal);
    cfg.u_region = Some(RegionSpec::Ball { cx: 0.5, cy: 0.5, r: 0.25 });
    cfg.family = Some(FamilySpec::PlaneWave { kx: 1, ky: 0 });
    cfg.h_ladder = vec![0.2, 0.1, 0.05];
    let rep = run_local_to_global(&cfg).unwrap();
    let grid = build_grid(cfg.grid.clone()).unwrap();
    let expect = grid.area() / region_weight(&grid, &cfg.u_region.unwrap());
    let mut anchor_pass = rep.records.len() == 3;
    let mut worst = 0.0f64;
    for r in &rep.records {
        worst = worst.max((r.ratio - expect).abs() / expect);
    }
    anchor_pass &= worst <= 1e-8;

    // Checkerboard case: a single fitted C must dominate every log-ratio
    // within 20%. Measured log-ratios stay near-flat while β grows like
    // h^{-4/3}, so the largest-h point exceeds the least-squares C; this
    // half is expected to stay red on honest data (see the report flags).
    let mut cb = ExperimentConfig::new(
        GridSpec::Torus { nx: 64, ny: 64, lx: 1.0, ly: 1.0 },
        PotentialSpec::Checkerboard { cell: 0.25, jump: 1.0 },
    );
    cb.kind = Some(ExperimentKind::LocalToGlobal);
    cb.u_region = Some(RegionSpec::Ball { cx: 0.75, cy: 0.75, r: 0.2 });
    cb.family = Some(FamilySpec::Eigen { target: 0.5, count: 3, tol: 1e-6 });
    cb.h_ladder = vec![0.2, 0.1, 0.05];
    cb.slack = 0.2;
    let cb_rep = run_local_to_global(&cb).unwrap();
    let cb_pass = cb_rep.pass;
    let c = cb_rep.fit.c_beta.unwrap_or(0.0);
    let shape: Vec<String> = cb_rep
        .records
        .iter()
        .map(|r| format!("h={}: log_ratio={:.3} vs C·β(1.2)={:.3}", r.h, r.log_ratio, c * r.beta * 1.2))
        .collect();

    conclude(
        8,
        "local-to-global anchor",
        t0,
        Duration::from_secs(300),
        anchor_pass && cb_pass,
        format!(
            "plane-wave ratio vs discrete area quotient: {worst:.2e} (expect {expect:.6}); checkerboard fit C={c:.4}: {}",
            shape.join("; ")
        ),
    );
}

#[test]
fn criterion_09_holder_ceiling() {
    let t0 = Instant::now();
    let mut cfg = ExperimentConfig::new(
        GridSpec::Torus { nx: 64, ny: 64, lx: 1.0, ly: 1.0 },
        PotentialSpec::Weierstrass { alpha: 0.5, levels: 6 },
    );
    cfg.kind = Some(ExperimentKind::HolderScaling);
    cfg.u_region = Some(RegionSpec::Ball { cx: 0.5, cy: 0.5, r: 0.2 });
    cfg.family = Some(FamilySpec::Eigen { target: 1.2, count: 2, tol: 1e-6 });
    cfg.alphas = vec![0.5, 1.0];
    cfg.h_ladder = vec![0.2, 0.1, 0.05];
    cfg.slack = 0.2;
    let rep = run_holder_scaling(&cfg).unwrap();
    let mut pass = rep.alpha_fits.len() == 2;
    let mut detail = String::new();
    for af in &rep.alpha_fits {
        pass &= af.exponent <= af.ceiling + 0.2;
        detail.push_str(&format!(
            "alpha={}: p={:.4} <= {:.4}+0.2; ",
            af.alpha, af.exponent, af.ceiling
        ));
    }
    conclude(9, "Holder ceiling", t0, Duration::from_secs(600), pass, detail);
}
