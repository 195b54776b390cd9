//! Real-valued sample vectors bound to a grid.
//!
//! Fields are immutable after construction in the sense that every operation
//! returns a fresh field; complex quantities (plane waves) are handled by the
//! experiment layer as explicit real/imaginary pairs, which is exact because
//! all operators here have real coefficients.

use std::sync::Arc;

use crate::error::LabError;
use crate::grid::Grid;
use crate::Result;

#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    /// Wrap a value vector; the length must match the grid and every entry
    /// must be finite.
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::GridMismatch(format!(
                "field has {} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(LabError::GridMismatch(format!("non-finite sample {bad}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        ScalarField { grid, values: vec![0.0; n] }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.len();
        ScalarField { grid, values: vec![c; n] }
    }

    /// Sample a function of the Cartesian coordinates (points are visited in
    /// index order, so stateful closures are deterministic).
    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = grid.coords().iter().map(|&(x, y)| f(x, y)).collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.grid.same_as(grid) {
            Ok(())
        } else {
            Err(LabError::GridMismatch("field lives on a different grid".into()))
        }
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        self.check_grid(other.grid())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values =
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// self + s·other.
    pub fn axpy(&self, s: f64, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + s * b)
    }

    /// Quadrature inner product ⟨u, v⟩ = Σ w·u·v.
    pub fn inner(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((a, b), w)| a * b * w)
            .sum())
    }

    /// Quadrature norm squared ∫ u².
    pub fn norm_sq(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v * v * w)
            .sum()
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};

    #[test]
    fn length_mismatch_rejected() {
        let g = build_grid(GridSpec::Torus { nx: 8, ny: 8, lx: 1.0, ly: 1.0 }).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 3]).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let g = build_grid(GridSpec::Torus { nx: 8, ny: 8, lx: 1.0, ly: 1.0 }).unwrap();
        let mut v = vec![0.0; 64];
        v[5] = f64::NAN;
        assert!(ScalarField::new(g, v).is_err());
    }

    #[test]
    fn inner_product_uses_quadrature() {
        let g = build_grid(GridSpec::Torus { nx: 8, ny: 8, lx: 1.0, ly: 1.0 }).unwrap();
        let u = ScalarField::constant(g.clone(), 2.0);
        let v = ScalarField::constant(g, 3.0);
        assert!((u.inner(&v).unwrap() - 6.0).abs() < 1e-14);
    }
}
