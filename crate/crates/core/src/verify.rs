//! Fast self-check suite over the module invariants.
//!
//! Each check is small enough to run on every `verify` invocation; together
//! they cover quadrature exactness, stencil symmetry, kernel normalization,
//! regularization bounds, bracket oracles, certificate positivity, adjoint
//! consistency and the weighted-integral shift invariance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{apply_gradient, apply_laplacian};
use crate::estimates::{
    build_test_family, fit_exponent, weighted_carleman_sides, FamilySpec, RegionSpec,
};
use crate::field::ScalarField;
use crate::grid::{build_grid, integrate, make_cutoff, GridSpec};
use crate::operators::{
    check_separation_inequality, commutator_form, ConjugatedOp, SchrodingerOp,
};
use crate::potentials::{
    build_mollifier, modulus_of_continuity, modulus_of_continuity_naive, mollify, mollify_tagged,
    sample_potential, verify_regularization_bounds, MollifierProfile, PotentialSpec,
};
use crate::weights::{
    bracket_closed_form, bracket_fd, build_weight, hormander_scan, seeded_symbol_points,
    subelliptic_constant, WeightSpec,
};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

/// Run every module's invariant suite; all checks must pass for `verify`
/// to exit 0.
pub fn run_all(seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let torus = build_grid(GridSpec::Torus { nx: 64, ny: 64, lx: 1.0, ly: 1.0 }).unwrap();
    let disk = build_grid(GridSpec::Polar { nr: 32, nang: 64, r_inner: 0.0, r_outer: 1.0 }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Quadrature exactness.
    {
        let one_t = ScalarField::constant(torus.clone(), 1.0);
        let one_d = ScalarField::constant(disk.clone(), 1.0);
        let st = integrate(&torus, &one_t).unwrap();
        let sd = integrate(&disk, &one_d).unwrap();
        let et = (st - 1.0).abs();
        let ed = (sd - std::f64::consts::PI).abs() / std::f64::consts::PI;
        out.push(check(
            "grid.quadrature_exactness",
            et < 1e-12 && ed < 0.02,
            format!("torus err {et:.2e}, disk rel err {ed:.2e}"),
        ));
    }

    // Laplacian symmetry and negativity on the torus.
    {
        let u = ScalarField::from_fn(torus.clone(), |_, _| rng.gen_range(-1.0..1.0));
        let v = ScalarField::from_fn(torus.clone(), |_, _| rng.gen_range(-1.0..1.0));
        let lu = apply_laplacian(&u).unwrap();
        let lv = apply_laplacian(&v).unwrap();
        let a = lu.inner(&v).unwrap();
        let b = u.inner(&lv).unwrap();
        let sym = (a - b).abs() / (1.0 + a.abs());
        let neg = lu.inner(&u).unwrap();
        out.push(check(
            "calculus.laplacian_symmetric_negative",
            sym < 1e-10 && neg <= 1e-12,
            format!("symmetry defect {sym:.2e}, <Δu,u> = {neg:.3e}"),
        ));
    }

    // Cutoff plateaus and slope bound.
    {
        let c = make_cutoff(&torus, 0.1, 0.3, (0.5, 0.5)).unwrap();
        let (gx, gy) = apply_gradient(&c.field).unwrap();
        let mut max_grad = 0.0f64;
        for (a, b) in gx.values().iter().zip(gy.values()) {
            max_grad = max_grad.max((a * a + b * b).sqrt());
        }
        let plateaus_ok = c
            .field
            .values()
            .iter()
            .enumerate()
            .all(|(i, &v)| {
                let d = torus.distance(i, (0.5, 0.5));
                (d > 0.09 || v == 0.0) && (d < 0.31 || v == 1.0)
            });
        out.push(check(
            "grid.cutoff_profile",
            plateaus_ok && max_grad <= 2.0 / 0.2,
            format!("max |∇χ| = {max_grad:.3}, bound {}", 2.0 / 0.2),
        ));
    }

    // Mollifier kernel invariants.
    for (name, profile) in [
        ("potentials.kernel_standard_bump", MollifierProfile::StandardBump),
        ("potentials.kernel_cosine", MollifierProfile::Cosine),
    ] {
        let k = build_mollifier(profile);
        let mass_err = (k.mass() - 1.0).abs();
        let (mx, my) = k.derivative_masses(401);
        let support_ok = k.eval(1.0) == 0.0 && k.eval(1.5) == 0.0;
        out.push(check(
            name,
            mass_err <= 1e-10 && mx.abs() <= 1e-8 && my.abs() <= 1e-8 && support_ok,
            format!("|∫φ-1| = {mass_err:.2e}, ∫∂φ = ({mx:.2e}, {my:.2e})"),
        ));
    }

    // Modulus: fast filter equals the naive scan, and is monotone.
    {
        let small = build_grid(GridSpec::Torus { nx: 24, ny: 24, lx: 1.0, ly: 1.0 }).unwrap();
        let v = ScalarField::from_fn(small.clone(), |_, _| rng.gen_range(-1.0..1.0));
        let mut same = true;
        for theta in [1.0 / 24.0, 0.1, 0.27] {
            same &= modulus_of_continuity(&v, theta).unwrap()
                == modulus_of_continuity_naive(&v, theta).unwrap();
        }
        let cb = sample_potential(&PotentialSpec::Checkerboard { cell: 0.25, jump: 1.0 }, &torus)
            .unwrap();
        let mut mono = true;
        let mut prev = -1.0;
        for theta in [1.0 / 64.0, 0.05, 0.1, 0.2] {
            let w = modulus_of_continuity(&cb, theta).unwrap();
            mono &= w >= prev;
            prev = w;
        }
        out.push(check(
            "potentials.modulus_oracle_agreement",
            same && mono,
            format!("fast==naive: {same}, monotone: {mono}"),
        ));
    }

    // Regularization bounds on a quick sweep.
    {
        let kernel = build_mollifier(MollifierProfile::StandardBump);
        let mut all = true;
        let mut worst = f64::INFINITY;
        for spec in [
            PotentialSpec::Constant { value: 2.0 },
            PotentialSpec::sine_x(1.0, 1),
            PotentialSpec::Checkerboard { cell: 0.25, jump: 1.0 },
        ] {
            for theta in [0.1, 0.2] {
                let r = verify_regularization_bounds(&spec, &torus, theta, &kernel).unwrap();
                all &= r.pass;
                worst = worst.min(r.bound1_margin.min(r.bound2_margin));
            }
        }
        out.push(check(
            "potentials.regularization_bounds",
            all,
            format!("worst margin {worst:.3e}"),
        ));
    }

    // Constant preservation under mollification.
    {
        let kernel = build_mollifier(MollifierProfile::Cosine);
        let c = ScalarField::constant(torus.clone(), 3.25);
        let m = mollify(&c, 0.1, &kernel).unwrap();
        let exact = m.values().iter().all(|&x| x == 3.25);
        out.push(check("potentials.mollify_preserves_constants", exact, format!("bitwise: {exact}")));
    }

    // Bracket oracle agreement.
    {
        let mut worst = 0.0f64;
        for spec in [WeightSpec::radial_exp(1.0), WeightSpec::radial_inverse()] {
            for pt in seeded_symbol_points(seed ^ 0x5eed, 100, (0.5, 2.0)) {
                let cf = bracket_closed_form(&spec, pt).unwrap();
                let fd = bracket_fd(&spec, pt, 1e-4).unwrap();
                worst = worst.max((fd - cf).abs() / (1.0 + cf.abs()));
            }
        }
        out.push(check(
            "weights.bracket_oracle_agreement",
            worst <= 1e-5,
            format!("worst relative disagreement {worst:.2e}"),
        ));
    }

    // Hörmander floors.
    {
        let exp2 = hormander_scan(&WeightSpec::radial_exp(2.0), (0.5, 2.0), 1000).unwrap();
        let inv = hormander_scan(&WeightSpec::radial_inverse(), (0.5, 2.0), 1000).unwrap();
        let inv_exact = (inv.min_char_bracket - 2f64.powi(-7)).abs() < 1e-12;
        out.push(check(
            "weights.hormander_positivity",
            exp2.pass && inv.pass && inv_exact,
            format!("exp min {:.3} (floor 8), inv min {:.6}", exp2.min_char_bracket, inv.min_char_bracket),
        ));
    }

    // Subelliptic certificate on a reduced lattice.
    {
        let rep = subelliptic_constant(
            &WeightSpec::radial_exp(1.0),
            10.0,
            [[0.5, 2.0], [-5.0, 5.0], [0.0, 5.0]],
            20_000,
        )
        .unwrap();
        out.push(check(
            "weights.subelliptic_certificate",
            rep.pass && rep.constant > 0.0,
            format!("C = {:.4} at {:?}", rep.constant, rep.argmin),
        ));
    }

    // Adjoint consistency and the commutator identity.
    {
        let h = 0.1;
        let phi = build_weight(&WeightSpec::radial_exp(1.0), &torus, 1.0).unwrap().scale(0.5);
        let vfield =
            sample_potential(&PotentialSpec::sine_x(0.7, 1), &torus).unwrap();
        let op = SchrodingerOp::new(torus.clone(), h, vfield, 0.4).unwrap();
        let conj = ConjugatedOp::new(op, phi.clone()).unwrap();
        let u = ScalarField::from_fn(torus.clone(), |_, _| rng.gen_range(-1.0..1.0));
        let w = ScalarField::from_fn(torus.clone(), |_, _| rng.gen_range(-1.0..1.0));
        let a = conj.apply(&u).unwrap().inner(&w).unwrap();
        let b = u.inner(&conj.apply_adjoint(&w).unwrap()).unwrap();
        let adj = (a - b).abs() / (1.0 + a.abs());

        let chi_in = make_cutoff(&torus, 0.12, 0.18, (0.5, 0.5)).unwrap().field;
        let chi_out = make_cutoff(&torus, 0.38, 0.44, (0.5, 0.5)).unwrap().field;
        let bump = ScalarField::from_fn(torus.clone(), |x, y| {
            (-((x - 0.5) * (x - 0.5) + (y - 0.26) * (y - 0.26)) / (2.0 * 0.0016)).exp()
        });
        let supp = bump
            .mul(&chi_in.zip_map(&chi_out, |a, b| a * (1.0 - b)).unwrap())
            .unwrap();
        let free = ConjugatedOp::free(torus.clone(), h, phi).unwrap();
        let c1 = commutator_form(&free, &supp).unwrap();
        let pu = free.apply(&supp).unwrap();
        let psu = free.apply_adjoint(&supp).unwrap();
        let c2 = free.apply_adjoint(&pu).unwrap().inner(&supp).unwrap()
            - free.apply(&psu).unwrap().inner(&supp).unwrap();
        let comm = (c1 - c2).abs() / (1.0 + c1.abs());
        out.push(check(
            "operators.adjoint_and_commutator",
            adj < 1e-10 && comm < 1e-10,
            format!("adjoint defect {adj:.2e}, commutator identity defect {comm:.2e}"),
        ));
    }

    // Separation inequality on a mollified rough potential.
    {
        let kernel = build_mollifier(MollifierProfile::Cosine);
        let v = sample_potential(&PotentialSpec::Checkerboard { cell: 0.25, jump: 1.0 }, &torus)
            .unwrap();
        let vt = mollify_tagged(&v, 0.1, &kernel).unwrap();
        let phi = build_weight(&WeightSpec::radial_exp(1.0), &torus, 1.0).unwrap().scale(0.5);
        let fam = build_test_family(
            &torus,
            &FamilySpec::Gaussian { count: 3, width: 0.05 },
            &RegionSpec::Annulus { r1: 0.2, r2: 0.44 },
            seed ^ 0xc0ffee,
        )
        .unwrap();
        let mut all = true;
        let mut worst = f64::INFINITY;
        for tf in &fam {
            let rep =
                check_separation_inequality(&torus, 0.1, &vt, 0.5, &phi, &tf.re, None).unwrap();
            all &= rep.pass;
            worst = worst.min(rep.margin);
        }
        out.push(check(
            "operators.separation_inequality",
            all,
            format!("worst margin {worst:.3e}"),
        ));
    }

    // Weighted-integral shift invariance.
    {
        let grid = build_grid(GridSpec::Polar { nr: 32, nang: 64, r_inner: 0.25, r_outer: 1.0 })
            .unwrap();
        let fam = build_test_family(
            &grid,
            &FamilySpec::Gaussian { count: 2, width: 0.06 },
            &RegionSpec::Annulus { r1: 0.3, r2: 0.92 },
            seed,
        )
        .unwrap();
        let logw = build_weight(&WeightSpec::radial_inverse(), &grid, 0.05).unwrap();
        let op = SchrodingerOp::new(grid.clone(), 0.1, ScalarField::zeros(grid.clone()), 1.0)
            .unwrap();
        let mut worst = 0.0f64;
        for tf in &fam {
            let pu = op.apply(&tf.re).unwrap();
            let (l1, r1) = weighted_carleman_sides(&logw, &tf.re, &pu, 1.0, 0.1).unwrap();
            let shifted = logw.map(|w| w + 211.0);
            let (l2, r2) = weighted_carleman_sides(&shifted, &tf.re, &pu, 1.0, 0.1).unwrap();
            worst = worst.max(((l1 - r1) - (l2 - r2)).abs());
        }
        out.push(check(
            "estimates.shift_invariance",
            worst < 1e-12,
            format!("worst ratio drift {worst:.2e}"),
        ));
    }

    // Exponent fit exactness.
    {
        let pairs: Vec<(f64, f64)> =
            [0.2f64, 0.1, 0.05].iter().map(|&h| (h, 2.0 * h.powf(-1.5))).collect();
        let (a, p, resid) = fit_exponent(&pairs).unwrap();
        out.push(check(
            "estimates.fit_exponent_exact",
            (a - 2.0).abs() < 1e-10 && (p - 1.5).abs() < 1e-10 && resid <= 1e-12,
            format!("A = {a:.12}, p = {p:.12}, residual {resid:.2e}"),
        ));
    }

    out
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        let checks = super::run_all(42);
        for c in &checks {
            assert!(c.pass, "{}: {}", c.name, c.detail);
        }
        assert!(checks.len() >= 12);
    }
}
