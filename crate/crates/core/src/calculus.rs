//! Second-order finite-difference calculus on the two grid kinds.
//!
//! Torus: the classical 5-point periodic Laplacian and centered gradients.
//!
//! Polar: the Laplacian `∂r² + (1/r)∂r + (1/r²)∂θ²` is discretized in
//! conservative (finite-volume) form
//!
//! ```text
//! (Δu)_j = [ r_{j+1/2}(u_{j+1}-u_j) - r_{j-1/2}(u_j-u_{j-1}) ] / (r_j dr²) + angular
//! ```
//!
//! which is symmetric under the `r dr dθ` quadrature and exact on `u = r²`.
//! Radial neighbours outside the annulus are Dirichlet zeros; for a disk the
//! innermost face sits at `r = 0`, so no flux crosses the center and the
//! cell-centered layout needs no special center stencil.

use crate::field::ScalarField;
use crate::grid::GridSpec;
use crate::Result;

/// Discrete Laplacian Δu (not -Δu).
pub fn apply_laplacian(u: &ScalarField) -> Result<ScalarField> {
    let grid = u.grid().clone();
    let v = u.values();
    let mut out = vec![0.0; v.len()];
    match *grid.spec() {
        GridSpec::Torus { nx, ny, lx, ly } => {
            let dx2 = (lx / nx as f64).powi(2);
            let dy2 = (ly / ny as f64).powi(2);
            for j in 0..ny {
                let jp = if j + 1 == ny { 0 } else { j + 1 };
                let jm = if j == 0 { ny - 1 } else { j - 1 };
                for i in 0..nx {
                    let ip = if i + 1 == nx { 0 } else { i + 1 };
                    let im = if i == 0 { nx - 1 } else { i - 1 };
                    let c = v[j * nx + i];
                    out[j * nx + i] = (v[j * nx + ip] - 2.0 * c + v[j * nx + im]) / dx2
                        + (v[jp * nx + i] - 2.0 * c + v[jm * nx + i]) / dy2;
                }
            }
        }
        GridSpec::Polar { nr, nang, r_inner, .. } => {
            let (dr, dth) = grid.spacings();
            let dr2 = dr * dr;
            let dth2 = dth * dth;
            let radii = grid.radii();
            for k in 0..nang {
                let kp = if k + 1 == nang { 0 } else { k + 1 };
                let km = if k == 0 { nang - 1 } else { k - 1 };
                for j in 0..nr {
                    let idx = k * nr + j;
                    let c = v[idx];
                    let up = if j + 1 < nr { v[idx + 1] } else { 0.0 };
                    let um = if j > 0 { v[idx - 1] } else { 0.0 };
                    let face_in = r_inner + j as f64 * dr;
                    let face_out = r_inner + (j + 1) as f64 * dr;
                    let r = radii[j];
                    let radial = (face_out * (up - c) - face_in * (c - um)) / (r * dr2);
                    let angular = (v[kp * nr + j] - 2.0 * c + v[km * nr + j]) / (r * r * dth2);
                    out[idx] = radial + angular;
                }
            }
        }
    }
    ScalarField::new(grid, out)
}

/// Centered-difference gradient in the orthonormal frame: `(∂x, ∂y)` on the
/// torus, `(∂r, r⁻¹∂θ)` on polar grids (Dirichlet zeros beyond the radial
/// edges).
pub fn apply_gradient(u: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    let grid = u.grid().clone();
    let v = u.values();
    let mut g0 = vec![0.0; v.len()];
    let mut g1 = vec![0.0; v.len()];
    match *grid.spec() {
        GridSpec::Torus { nx, ny, lx, ly } => {
            let dx = lx / nx as f64;
            let dy = ly / ny as f64;
            for j in 0..ny {
                let jp = if j + 1 == ny { 0 } else { j + 1 };
                let jm = if j == 0 { ny - 1 } else { j - 1 };
                for i in 0..nx {
                    let ip = if i + 1 == nx { 0 } else { i + 1 };
                    let im = if i == 0 { nx - 1 } else { i - 1 };
                    g0[j * nx + i] = (v[j * nx + ip] - v[j * nx + im]) / (2.0 * dx);
                    g1[j * nx + i] = (v[jp * nx + i] - v[jm * nx + i]) / (2.0 * dy);
                }
            }
        }
        GridSpec::Polar { nr, nang, .. } => {
            let (dr, dth) = grid.spacings();
            let radii = grid.radii();
            for k in 0..nang {
                let kp = if k + 1 == nang { 0 } else { k + 1 };
                let km = if k == 0 { nang - 1 } else { k - 1 };
                for j in 0..nr {
                    let idx = k * nr + j;
                    let up = if j + 1 < nr { v[idx + 1] } else { 0.0 };
                    let um = if j > 0 { v[idx - 1] } else { 0.0 };
                    g0[idx] = (up - um) / (2.0 * dr);
                    g1[idx] = (v[kp * nr + j] - v[km * nr + j]) / (2.0 * dth * radii[j]);
                }
            }
        }
    }
    Ok((ScalarField::new(grid.clone(), g0)?, ScalarField::new(grid, g1)?))
}

/// ∫ |∇u|² with the grid quadrature.
pub fn gradient_energy(u: &ScalarField) -> Result<f64> {
    let (gx, gy) = apply_gradient(u)?;
    Ok(gx.norm_sq() + gy.norm_sq())
}

/// Discrete eigenvalue of -Δ on the torus for the integer mode `(kx, ky)`:
/// `λ = (2-2cos(2π kx dx))/dx² + (2-2cos(2π ky dy))/dy²`.
pub fn torus_mode_eigenvalue(spec: &GridSpec, kx: i32, ky: i32) -> Option<f64> {
    match *spec {
        GridSpec::Torus { nx, ny, lx, ly } => {
            let dx = lx / nx as f64;
            let dy = ly / ny as f64;
            let sx = (2.0 - 2.0 * (std::f64::consts::TAU * kx as f64 * dx / lx).cos()) / (dx * dx);
            let sy = (2.0 - 2.0 * (std::f64::consts::TAU * ky as f64 * dy / ly).cos()) / (dy * dy);
            Some(sx + sy)
        }
        GridSpec::Polar { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use crate::ScalarField;
    use std::f64::consts::TAU;

    fn unit_torus(n: usize) -> std::sync::Arc<crate::Grid> {
        build_grid(GridSpec::Torus { nx: n, ny: n, lx: 1.0, ly: 1.0 }).unwrap()
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        for g in [
            unit_torus(8),
            build_grid(GridSpec::Polar { nr: 16, nang: 16, r_inner: 0.25, r_outer: 1.0 })
                .unwrap(),
        ] {
            let u = ScalarField::constant(g.clone(), 5.0);
            let lap = apply_laplacian(&u).unwrap();
            // Polar boundary rows see Dirichlet ghosts, so only interior rows
            // are exactly zero there; the torus is zero everywhere.
            if g.is_torus() {
                assert!(lap.linf() < 1e-11);
            }
        }
    }

    #[test]
    fn torus_cosine_is_discrete_eigenfunction() {
        let n = 8;
        let g = unit_torus(n);
        let u = ScalarField::from_fn(g.clone(), |x, _| (TAU * x).cos());
        let lap = apply_laplacian(&u).unwrap();
        // λ = (2 - 2cos(2π/8)) / 0.125² = 37.49033200812191
        let lambda = (2.0 - 2.0 * (TAU * 0.125).cos()) / (0.125 * 0.125);
        assert!((lambda - 37.49033200812191).abs() < 1e-11);
        for (l, v) in lap.values().iter().zip(u.values()) {
            assert!((l + lambda * v).abs() < 1e-10 * lambda);
        }
    }

    #[test]
    fn polar_r_squared_is_exact_in_the_interior() {
        let g = build_grid(GridSpec::Polar { nr: 32, nang: 48, r_inner: 0.25, r_outer: 1.0 })
            .unwrap();
        let u = ScalarField::from_fn(g.clone(), |x, y| x * x + y * y);
        let lap = apply_laplacian(&u).unwrap();
        let (nr, nang) = g.counts();
        for k in 0..nang {
            for j in 1..nr - 1 {
                let v = lap.values()[k * nr + j];
                assert!((v - 4.0).abs() < 1e-10, "Δr² = {v} at j={j}");
            }
        }
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = unit_torus(16);
        let u = ScalarField::constant(g, 3.0);
        let (gx, gy) = apply_gradient(&u).unwrap();
        assert_eq!(gx.linf(), 0.0);
        assert_eq!(gy.linf(), 0.0);
    }

    #[test]
    fn gradient_discrete_symbol_on_sine() {
        // Centered difference of sin(2πx) has amplitude sin(2π dx)/dx.
        let n = 128;
        let g = unit_torus(n);
        let u = ScalarField::from_fn(g.clone(), |x, _| (TAU * x).sin());
        let (gx, _) = apply_gradient(&u).unwrap();
        let dx = 1.0 / n as f64;
        let expect = (TAU * dx).sin() / dx;
        assert!((expect - 6.280662313909506).abs() < 1e-12);
        assert!((gx.linf() - expect).abs() < 1e-12);
    }

    #[test]
    fn polar_radial_gradient_of_r() {
        let g = build_grid(GridSpec::Polar { nr: 32, nang: 32, r_inner: 0.25, r_outer: 1.0 })
            .unwrap();
        let u = ScalarField::from_fn(g.clone(), |x, y| (x * x + y * y).sqrt());
        let (gr, _) = apply_gradient(&u).unwrap();
        let (nr, nang) = g.counts();
        for k in 0..nang {
            for j in 1..nr - 1 {
                assert!((gr.values()[k * nr + j] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_symmetric_and_negative_on_torus() {
        use rand::{Rng, SeedableRng};
        let g = unit_torus(24);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let u = ScalarField::from_fn(g.clone(), |_, _| rng.gen_range(-1.0..1.0));
            let v = ScalarField::from_fn(g.clone(), |_, _| rng.gen_range(-1.0..1.0));
            let lu = apply_laplacian(&u).unwrap();
            let lv = apply_laplacian(&v).unwrap();
            let a = lu.inner(&v).unwrap();
            let b = u.inner(&lv).unwrap();
            let scale = 1.0 + a.abs().max(b.abs());
            assert!((a - b).abs() / scale < 1e-10);
            assert!(lu.inner(&u).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn laplacian_second_order_convergence() {
        // Error on sin(2πx) must shrink by at least 3.5x per grid doubling.
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let g = unit_torus(n);
            let u = ScalarField::from_fn(g.clone(), |x, _| (TAU * x).sin());
            let lap = apply_laplacian(&u).unwrap();
            let err = lap
                .values()
                .iter()
                .zip(u.values())
                .map(|(l, v)| (l + TAU * TAU * v).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        assert!(errs[0] / errs[1] >= 3.5, "{errs:?}");
        assert!(errs[1] / errs[2] >= 3.5, "{errs:?}");
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let g1 = unit_torus(8);
        let g2 = unit_torus(16);
        let u = ScalarField::constant(g2, 1.0);
        assert!(crate::grid::integrate(&g1, &u).is_err());
    }
}
