//! Discrete model domains and their quadrature.
//!
//! Two grid kinds cover the reduced geometries the experiments run on:
//!
//! * `Torus`: a flat periodic rectangle `[0,Lx) × [0,Ly)`, node spacing
//!   `L/n`, uniform cell weights. One fundamental domain stands in for a
//!   closed Euclidean-quotient surface; index arithmetic wraps on both axes.
//! * `Polar`: a disk or annulus sampled at cell-centered radii
//!   `r_j = r_inner + (j+1/2)·dr` and uniform angles. The center `r = 0` is
//!   excluded by construction; the midpoint weights `r_j·dr·dθ` sum to the
//!   annulus area exactly. Only the angular axis wraps.

use std::sync::Arc;

use crate::error::LabError;
use crate::field::ScalarField;
use crate::Result;

/// Minimum admissible point count per axis.
pub const MIN_POINTS: usize = 8;

/// Declarative grid description.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Torus { nx: usize, ny: usize, lx: f64, ly: f64 },
    Polar { nr: usize, nang: usize, r_inner: f64, r_outer: f64 },
}

/// A constructed grid: spec plus precomputed coordinates and quadrature.
#[derive(Debug)]
pub struct Grid {
    spec: GridSpec,
    /// Cartesian coordinates per point (torus: node positions; polar:
    /// cell-center positions in the plane).
    coords: Vec<(f64, f64)>,
    /// Per-point quadrature weight.
    weights: Vec<f64>,
    /// Polar only: radius per ring, length `nr`.
    radii: Vec<f64>,
}

impl Grid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.spec, GridSpec::Torus { .. })
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Axis point counts `(n0, n1)`: torus `(nx, ny)`, polar `(nr, nang)`.
    pub fn counts(&self) -> (usize, usize) {
        match self.spec {
            GridSpec::Torus { nx, ny, .. } => (nx, ny),
            GridSpec::Polar { nr, nang, .. } => (nr, nang),
        }
    }

    /// Axis spacings: torus `(dx, dy)`, polar `(dr, dθ)`.
    pub fn spacings(&self) -> (f64, f64) {
        match self.spec {
            GridSpec::Torus { nx, ny, lx, ly } => (lx / nx as f64, ly / ny as f64),
            GridSpec::Polar { nr, nang, r_inner, r_outer } => (
                (r_outer - r_inner) / nr as f64,
                std::f64::consts::TAU / nang as f64,
            ),
        }
    }

    /// Largest physical spacing between neighbouring points. For polar grids
    /// the angular arc length is measured at the outer radius.
    pub fn max_spacing(&self) -> f64 {
        match self.spec {
            GridSpec::Torus { .. } => {
                let (dx, dy) = self.spacings();
                dx.max(dy)
            }
            GridSpec::Polar { r_outer, .. } => {
                let (dr, dth) = self.spacings();
                dr.max(r_outer * dth)
            }
        }
    }

    /// Exact domain area.
    pub fn area(&self) -> f64 {
        match self.spec {
            GridSpec::Torus { lx, ly, .. } => lx * ly,
            GridSpec::Polar { r_inner, r_outer, .. } => {
                std::f64::consts::PI * (r_outer * r_outer - r_inner * r_inner)
            }
        }
    }

    /// Flat index of the point `(i, j)`; `i` is the x/radial index.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        let (n0, _) = self.counts();
        j * n0 + i
    }

    #[inline]
    pub fn coord(&self, idx: usize) -> (f64, f64) {
        self.coords[idx]
    }

    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Polar ring radii (empty for torus grids).
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Radius of the point: polar ring radius, or distance from the torus
    /// center `(Lx/2, Ly/2)` measured periodically.
    pub fn radius(&self, idx: usize) -> f64 {
        match self.spec {
            GridSpec::Polar { nr, .. } => {
                let (n0, _) = self.counts();
                debug_assert_eq!(n0, nr);
                self.radii[idx % n0]
            }
            GridSpec::Torus { lx, ly, .. } => self.distance(idx, (0.5 * lx, 0.5 * ly)),
        }
    }

    /// Distance from a grid point to an arbitrary plane point. Periodic
    /// (shortest-image) on the torus, Euclidean on polar grids.
    pub fn distance(&self, idx: usize, to: (f64, f64)) -> f64 {
        let (x, y) = self.coords[idx];
        match self.spec {
            GridSpec::Torus { lx, ly, .. } => {
                let dx = periodic_delta(x - to.0, lx);
                let dy = periodic_delta(y - to.1, ly);
                (dx * dx + dy * dy).sqrt()
            }
            GridSpec::Polar { .. } => ((x - to.0).powi(2) + (y - to.1).powi(2)).sqrt(),
        }
    }

    /// True if `other` describes the same grid.
    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other) || self.spec == other.spec
    }
}

#[inline]
fn periodic_delta(mut d: f64, period: f64) -> f64 {
    d %= period;
    if d > 0.5 * period {
        d -= period;
    } else if d < -0.5 * period {
        d += period;
    }
    d
}

/// Build a grid, validating the type invariants.
pub fn build_grid(spec: GridSpec) -> Result<Arc<Grid>> {
    match spec {
        GridSpec::Torus { nx, ny, lx, ly } => {
            check_count("n_x", nx)?;
            check_count("n_y", ny)?;
            check_positive("L_x", lx)?;
            check_positive("L_y", ly)?;
            let dx = lx / nx as f64;
            let dy = ly / ny as f64;
            let mut coords = Vec::with_capacity(nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    coords.push((i as f64 * dx, j as f64 * dy));
                }
            }
            let weights = vec![dx * dy; nx * ny];
            Ok(Arc::new(Grid { spec, coords, weights, radii: Vec::new() }))
        }
        GridSpec::Polar { nr, nang, r_inner, r_outer } => {
            check_count("n_r", nr)?;
            check_count("n_ang", nang)?;
            if r_inner < 0.0 {
                return Err(LabError::GridConstruction {
                    field: "r_inner",
                    message: format!("must be >= 0, got {r_inner}"),
                });
            }
            check_positive("r_outer", r_outer)?;
            if r_inner >= r_outer {
                return Err(LabError::GridConstruction {
                    field: "r_inner",
                    message: format!("must be < r_outer ({r_inner} >= {r_outer})"),
                });
            }
            let dr = (r_outer - r_inner) / nr as f64;
            let dth = std::f64::consts::TAU / nang as f64;
            let radii: Vec<f64> = (0..nr).map(|j| r_inner + (j as f64 + 0.5) * dr).collect();
            let mut coords = Vec::with_capacity(nr * nang);
            let mut weights = Vec::with_capacity(nr * nang);
            for k in 0..nang {
                let th = k as f64 * dth;
                let (s, c) = th.sin_cos();
                for &r in &radii {
                    coords.push((r * c, r * s));
                    weights.push(r * dr * dth);
                }
            }
            Ok(Arc::new(Grid { spec, coords, weights, radii }))
        }
    }
}

fn check_count(field: &'static str, n: usize) -> Result<()> {
    if n < MIN_POINTS {
        Err(LabError::GridConstruction {
            field,
            message: format!("counts below minimum: {n} < {MIN_POINTS}"),
        })
    } else {
        Ok(())
    }
}

fn check_positive(field: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0) {
        Err(LabError::GridConstruction { field, message: format!("must be > 0, got {v}") })
    } else {
        Ok(())
    }
}

/// Σ weight·value over the grid.
pub fn integrate(grid: &Grid, u: &ScalarField) -> Result<f64> {
    u.check_grid(grid)?;
    Ok(u.values().iter().zip(grid.weights()).map(|(v, w)| v * w).sum())
}

/// Result of [`make_cutoff`]: the field plus a flag raised when the
/// transition band is thinner than four grid spacings.
#[derive(Debug, Clone)]
pub struct Cutoff {
    pub field: ScalarField,
    pub thin_transition: bool,
}

/// Quintic smoothstep `6t⁵ − 15t⁴ + 10t³`, C² at both seams.
#[inline]
pub fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Peak slope of the quintic profile, attained at t = 1/2.
pub const SMOOTHSTEP5_MAX_SLOPE: f64 = 1.875;

/// Smooth radial cutoff around `center`: exactly 0 for dist ≤ `r_zero`,
/// exactly 1 for dist ≥ `r_one`, quintic in between.
///
/// Distances follow the grid topology (periodic images on the torus).
pub fn make_cutoff(
    grid: &Arc<Grid>,
    r_zero: f64,
    r_one: f64,
    center: (f64, f64),
) -> Result<Cutoff> {
    if !(r_zero >= 0.0) || !(r_one > r_zero) {
        return Err(LabError::BadCutoff(format!(
            "need 0 <= r_zero < r_one, got r_zero={r_zero}, r_one={r_one}"
        )));
    }
    let extent = match grid.spec() {
        GridSpec::Torus { lx, ly, .. } => 0.5 * (lx * lx + ly * ly).sqrt(),
        GridSpec::Polar { r_outer, .. } => 2.0 * r_outer,
    };
    if r_one > extent {
        return Err(LabError::BadCutoff(format!(
            "r_one={r_one} exceeds the grid extent {extent}"
        )));
    }
    let width = r_one - r_zero;
    let thin_transition = width < 4.0 * grid.max_spacing();
    let values: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let d = grid.distance(idx, center);
            if d <= r_zero {
                0.0
            } else if d >= r_one {
                1.0
            } else {
                smoothstep5((d - r_zero) / width)
            }
        })
        .collect();
    Ok(Cutoff { field: ScalarField::new(grid.clone(), values)?, thin_transition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::apply_gradient;

    fn unit_torus(n: usize) -> Arc<Grid> {
        build_grid(GridSpec::Torus { nx: n, ny: n, lx: 1.0, ly: 1.0 }).unwrap()
    }

    #[test]
    fn torus_spacing_8x8() {
        let g = unit_torus(8);
        let (dx, dy) = g.spacings();
        assert_eq!(dx, 0.125);
        assert_eq!(dy, 0.125);
    }

    #[test]
    fn counts_below_minimum_rejected() {
        let err = build_grid(GridSpec::Torus { nx: 4, ny: 4, lx: 1.0, ly: 1.0 }).unwrap_err();
        match err {
            LabError::GridConstruction { field, message } => {
                assert_eq!(field, "n_x");
                assert!(message.contains("counts below minimum"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn inverted_radii_rejected() {
        let err = build_grid(GridSpec::Polar {
            nr: 16,
            nang: 16,
            r_inner: 1.0,
            r_outer: 0.5,
        })
        .unwrap_err();
        assert!(matches!(err, LabError::GridConstruction { field: "r_inner", .. }));
    }

    #[test]
    fn torus_quadrature_is_exact() {
        let g = unit_torus(8);
        let one = ScalarField::constant(g.clone(), 1.0);
        assert_eq!(integrate(&g, &one).unwrap(), 1.0);
    }

    #[test]
    fn disk_quadrature_matches_area() {
        let g = build_grid(GridSpec::Polar { nr: 32, nang: 64, r_inner: 0.0, r_outer: 1.0 })
            .unwrap();
        let one = ScalarField::constant(g.clone(), 1.0);
        let s = integrate(&g, &one).unwrap();
        let area = std::f64::consts::PI;
        // 2% headroom is granted; the midpoint rule is exact up to roundoff.
        assert!((s - area).abs() / area < 0.02);
        assert!((s - area).abs() / area < 1e-12);
    }

    #[test]
    fn annulus_quadrature_matches_area() {
        let g = build_grid(GridSpec::Polar { nr: 48, nang: 96, r_inner: 0.25, r_outer: 1.0 })
            .unwrap();
        let one = ScalarField::constant(g.clone(), 1.0);
        let s = integrate(&g, &one).unwrap();
        assert!((s - g.area()).abs() / g.area() < 1e-12);
    }

    #[test]
    fn sin_squared_integrates_to_half_exactly() {
        // Discrete orthogonality: Σ sin²(2πi/n)/n = 1/2 for n ≥ 3.
        for n in [8usize, 12, 128] {
            let g = unit_torus(n);
            let u = ScalarField::from_fn(g.clone(), |x, _| (std::f64::consts::TAU * x).sin().powi(2));
            let s = integrate(&g, &u).unwrap();
            assert!((s - 0.5).abs() < 1e-13, "n={n}: {s}");
        }
    }

    #[test]
    fn cutoff_plateaus_are_bit_exact() {
        let g = unit_torus(64);
        let c = make_cutoff(&g, 0.1, 0.2, (0.5, 0.5)).unwrap();
        assert!(!c.thin_transition);
        for idx in 0..g.len() {
            let d = g.distance(idx, (0.5, 0.5));
            let v = c.field.values()[idx];
            if d <= 0.05 {
                assert_eq!(v, 0.0);
            }
            if d >= 0.4 {
                assert_eq!(v, 1.0);
            }
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn cutoff_monotone_along_ray() {
        let g = unit_torus(128);
        let c = make_cutoff(&g, 0.1, 0.3, (0.0, 0.0)).unwrap();
        // Walk the +x axis from the center.
        let mut prev = -1.0;
        for i in 0..64 {
            let v = c.field.values()[g.index(i, 0)];
            assert!(v >= prev - 1e-15, "not nondecreasing at i={i}");
            prev = v;
        }
    }

    #[test]
    fn cutoff_gradient_bound() {
        let g = unit_torus(256);
        let (r0, r1) = (0.1, 0.3);
        let c = make_cutoff(&g, r0, r1, (0.5, 0.5)).unwrap();
        let (gx, gy) = apply_gradient(&c.field).unwrap();
        let mut max_grad: f64 = 0.0;
        for (a, b) in gx.values().iter().zip(gy.values()) {
            max_grad = max_grad.max((a * a + b * b).sqrt());
        }
        let analytic = SMOOTHSTEP5_MAX_SLOPE / (r1 - r0);
        assert!(max_grad <= analytic * 1.01, "{max_grad} vs {analytic}");
        assert!(max_grad <= 2.0 / (r1 - r0));
        // The discrete maximum should actually come close to the profile peak.
        assert!(max_grad > 0.9 * analytic);
    }

    #[test]
    fn thin_transition_is_flagged() {
        let g = unit_torus(16);
        let c = make_cutoff(&g, 0.1, 0.15, (0.5, 0.5)).unwrap();
        assert!(c.thin_transition);
    }

    #[test]
    fn cutoff_rejects_inverted_radii() {
        let g = unit_torus(16);
        assert!(make_cutoff(&g, 0.3, 0.2, (0.5, 0.5)).is_err());
    }

    #[test]
    fn periodic_distance_wraps() {
        let g = unit_torus(8);
        // Point (0,0) vs center (0.875, 0): wrapped distance is 0.125.
        let d = g.distance(0, (0.875, 0.0));
        assert!((d - 0.125).abs() < 1e-15);
    }
}
