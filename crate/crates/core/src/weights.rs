//! Carleman weight families, their radial principal symbols, Poisson
//! brackets, and subelliptic lower-bound certificates.
//!
//! On an annulus, conjugating the free operator `-h²Δ` by `e^{φ(r)/h}` gives
//! the principal symbol
//!
//! ```text
//! p_φ(r, ρ, ω) = (ρ + i φ'(r))² + ω²/r²,
//! Re p_φ = ρ² - φ'² + ω²/r²,    Im p_φ = 2 ρ φ'.
//! ```
//!
//! With the convention `{f, g} = ∂_ρ f ∂_r g - ∂_r f ∂_ρ g` (the sign that
//! makes the positivity statements below come out), the bracket satisfies
//!
//! ```text
//! (1/4) {Re p_φ, Im p_φ} = ρ² φ'' + (φ' φ'' + ω²/r³) φ'.
//! ```
//!
//! All bracket values exposed here are this quarter-bracket. On the
//! characteristic set (ρ = 0, ω = r|φ'|) it evaluates to
//! `c³e^{3r}(1 + 1/r) ≥ c³` for `φ = c eʳ` and to exactly `r⁻⁷` for
//! `φ = 1/r`; the latter matches the unnormalized reading `{Re, Im} = r⁻⁷`
//! up to the factor 4, and both readings are documented by the tests.
//!
//! Weights are always handled in log domain: [`build_weight`] returns the
//! field `2φ(x)/(δh)`, and glued combinations are max-shifted log-sum-exps.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::LabError;
use crate::field::ScalarField;
use crate::grid::{make_cutoff, Grid};
use crate::logsum::logsumexp2;
use crate::Result;

/// Weight family.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFamily {
    /// Two-center glued exponential weight
    /// `e^{2φ/h} = e^{2φ₁/h}χ₁² + e^{2φ₂/h}χ₂²` with `φᵢ = c e^{‖x-xᵢ‖}`.
    GluedExp {
        c: f64,
        x1: (f64, f64),
        x2: (f64, f64),
        /// Cutoff radii around each center: χᵢ is 0 inside `inner`, 1
        /// outside `outer`.
        inner1: f64,
        outer1: f64,
        inner2: f64,
        outer2: f64,
    },
    /// φ(r) = c eʳ, radially increasing.
    RadialExp { c: f64 },
    /// φ(r) = 1/r, positive and radially decreasing.
    RadialInverse,
}

/// Weight specification: a family plus the smallness rescaling δ, which
/// replaces φ by φ/δ (equivalently evaluates the δ=1 weight at δ·h).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub family: WeightFamily,
    pub delta: f64,
}

impl WeightSpec {
    pub fn new(family: WeightFamily) -> Self {
        WeightSpec { family, delta: 1.0 }
    }

    pub fn radial_exp(c: f64) -> Self {
        WeightSpec::new(WeightFamily::RadialExp { c })
    }

    pub fn radial_inverse() -> Self {
        WeightSpec::new(WeightFamily::RadialInverse)
    }

    /// Glued weight with the default cutoff radii `|x₁-x₂|/4` (inner) and
    /// `|x₁-x₂|/3` (outer), which keeps the two cutoff annuli disjoint.
    pub fn glued_default(c: f64, x1: (f64, f64), x2: (f64, f64)) -> Self {
        let d = ((x1.0 - x2.0).powi(2) + (x1.1 - x2.1).powi(2)).sqrt();
        WeightSpec::new(WeightFamily::GluedExp {
            c,
            x1,
            x2,
            inner1: d / 4.0,
            outer1: d / 3.0,
            inner2: d / 4.0,
            outer2: d / 3.0,
        })
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(LabError::BadWeight(format!(
                "delta must be in (0,1], got {}",
                self.delta
            )));
        }
        match self.family {
            WeightFamily::GluedExp { c, x1, x2, inner1, outer1, inner2, outer2 } => {
                if !(c > 0.0) {
                    return Err(LabError::BadWeight(format!("c must be > 0, got {c}")));
                }
                if !(inner1 < outer1) || !(inner2 < outer2) || inner1 < 0.0 || inner2 < 0.0 {
                    return Err(LabError::BadWeight(
                        "cutoff radii must satisfy 0 <= inner < outer".into(),
                    ));
                }
                let d = ((x1.0 - x2.0).powi(2) + (x1.1 - x2.1).powi(2)).sqrt();
                if d <= outer1 + outer2 {
                    return Err(LabError::BadWeight(format!(
                        "cutoff annuli overlap: |x1-x2| = {d} <= {outer1} + {outer2}"
                    )));
                }
            }
            WeightFamily::RadialExp { c } => {
                if !(c > 0.0) {
                    return Err(LabError::BadWeight(format!("c must be > 0, got {c}")));
                }
            }
            WeightFamily::RadialInverse => {}
        }
        Ok(())
    }

    pub fn variant_name(&self) -> &'static str {
        match self.family {
            WeightFamily::GluedExp { .. } => "glued_exp",
            WeightFamily::RadialExp { .. } => "radial_exp",
            WeightFamily::RadialInverse => "radial_inverse",
        }
    }

    fn radial_c(&self) -> Option<f64> {
        match self.family {
            WeightFamily::RadialExp { c } | WeightFamily::GluedExp { c, .. } => Some(c),
            WeightFamily::RadialInverse => None,
        }
    }
}

/// Point of the radial phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolPoint {
    pub r: f64,
    pub rho: f64,
    pub omega: f64,
}

impl SymbolPoint {
    pub fn new(r: f64, rho: f64, omega: f64) -> Result<Self> {
        if !(r > 0.0) || omega < 0.0 || !rho.is_finite() {
            return Err(LabError::BadWeight(format!(
                "symbol point needs r > 0, omega >= 0, finite rho; got ({r}, {rho}, {omega})"
            )));
        }
        Ok(SymbolPoint { r, rho, omega })
    }
}

/// φ for the radial families, including the δ rescaling.
fn phi(spec: &WeightSpec, r: f64) -> Result<f64> {
    let raw = match spec.family {
        WeightFamily::RadialExp { c } => c * r.exp(),
        WeightFamily::RadialInverse => 1.0 / r,
        WeightFamily::GluedExp { .. } => {
            return Err(LabError::Unsupported(
                "glued_exp has no single radial profile; use build_weight".into(),
            ))
        }
    };
    Ok(raw / spec.delta)
}

fn phi_prime(spec: &WeightSpec, r: f64) -> Result<f64> {
    let raw = match spec.family {
        WeightFamily::RadialExp { c } => c * r.exp(),
        WeightFamily::RadialInverse => -1.0 / (r * r),
        WeightFamily::GluedExp { .. } => {
            return Err(LabError::Unsupported("glued_exp symbol analysis is out of scope".into()))
        }
    };
    Ok(raw / spec.delta)
}

fn phi_second(spec: &WeightSpec, r: f64) -> Result<f64> {
    let raw = match spec.family {
        WeightFamily::RadialExp { c } => c * r.exp(),
        WeightFamily::RadialInverse => 2.0 / (r * r * r),
        WeightFamily::GluedExp { .. } => {
            return Err(LabError::Unsupported("glued_exp symbol analysis is out of scope".into()))
        }
    };
    Ok(raw / spec.delta)
}

/// Log-domain weight field `2φ(x)/(δh)`.
///
/// Radial families use the grid's radial coordinate (distance from the torus
/// center on torus grids). The glued family combines the two branches as a
/// max-shifted log-sum-exp of `2φᵢ/h + 2 ln χᵢ`; inside a plateau where one
/// cutoff vanishes this reduces bitwise to the surviving branch.
pub fn build_weight(spec: &WeightSpec, grid: &Arc<Grid>, h: f64) -> Result<ScalarField> {
    spec.validate()?;
    if !(h > 0.0) {
        return Err(LabError::BadWeight(format!("h must be > 0, got {h}")));
    }
    let dh = spec.delta * h;
    match spec.family {
        WeightFamily::RadialExp { .. } | WeightFamily::RadialInverse => {
            let values = (0..grid.len())
                .map(|idx| Ok(2.0 * phi(spec, grid.radius(idx))? / h))
                .collect::<Result<Vec<f64>>>()?;
            ScalarField::new(grid.clone(), values)
        }
        WeightFamily::GluedExp { c, x1, x2, inner1, outer1, inner2, outer2 } => {
            let chi1 = make_cutoff(grid, inner1, outer1, x1)?.field;
            let chi2 = make_cutoff(grid, inner2, outer2, x2)?.field;
            let mut values = Vec::with_capacity(grid.len());
            for idx in 0..grid.len() {
                let d1 = grid.distance(idx, x1);
                let d2 = grid.distance(idx, x2);
                let b1 = branch_log(2.0 * c * d1.exp() / dh, chi1.values()[idx]);
                let b2 = branch_log(2.0 * c * d2.exp() / dh, chi2.values()[idx]);
                let v = logsumexp2(b1, b2);
                if v == f64::NEG_INFINITY {
                    return Err(LabError::BadWeight(
                        "glued weight vanishes identically at a grid point (both cutoffs zero)"
                            .into(),
                    ));
                }
                values.push(v);
            }
            ScalarField::new(grid.clone(), values)
        }
    }
}

#[inline]
fn branch_log(two_phi_over_h: f64, chi: f64) -> f64 {
    if chi == 0.0 {
        f64::NEG_INFINITY
    } else {
        two_phi_over_h + 2.0 * chi.ln()
    }
}

/// p_φ(r, ρ, ω) for the radial families.
pub fn eval_symbol(spec: &WeightSpec, pt: SymbolPoint) -> Result<Complex64> {
    let dp = phi_prime(spec, pt.r)?;
    let re = pt.rho * pt.rho - dp * dp + pt.omega * pt.omega / (pt.r * pt.r);
    let im = 2.0 * pt.rho * dp;
    Ok(Complex64::new(re, im))
}

/// Closed-form quarter-bracket `(1/4){Re p_φ, Im p_φ}`.
pub fn bracket_closed_form(spec: &WeightSpec, pt: SymbolPoint) -> Result<f64> {
    let dp = phi_prime(spec, pt.r)?;
    let ddp = phi_second(spec, pt.r)?;
    Ok(pt.rho * pt.rho * ddp + (dp * ddp + pt.omega * pt.omega / pt.r.powi(3)) * dp)
}

/// Central-difference quarter-bracket, the independent oracle for
/// [`bracket_closed_form`]. `ω` is frozen; the bracket acts in `(r, ρ)`.
pub fn bracket_fd(spec: &WeightSpec, pt: SymbolPoint, step: f64) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&step) {
        return Err(LabError::StepOutOfRange(format!(
            "step must be in [1e-6, 1e-3], got {step}"
        )));
    }
    if pt.r <= step {
        return Err(LabError::StepOutOfRange(format!(
            "r = {} too close to the coordinate singularity for step {step}",
            pt.r
        )));
    }
    let re = |r: f64, rho: f64| -> Result<f64> {
        Ok(eval_symbol(spec, SymbolPoint { r, rho, omega: pt.omega })?.re)
    };
    let im = |r: f64, rho: f64| -> Result<f64> {
        Ok(eval_symbol(spec, SymbolPoint { r, rho, omega: pt.omega })?.im)
    };
    let drho_re = (re(pt.r, pt.rho + step)? - re(pt.r, pt.rho - step)?) / (2.0 * step);
    let dr_re = (re(pt.r + step, pt.rho)? - re(pt.r - step, pt.rho)?) / (2.0 * step);
    let drho_im = (im(pt.r, pt.rho + step)? - im(pt.r, pt.rho - step)?) / (2.0 * step);
    let dr_im = (im(pt.r + step, pt.rho)? - im(pt.r - step, pt.rho)?) / (2.0 * step);
    Ok((drho_re * dr_im - dr_re * drho_im) / 4.0)
}

/// Quarter-bracket along the characteristic set `ρ = 0, ω = r|φ'(r)|`,
/// sampled at `samples` radii spanning `r_range` inclusively.
pub fn characteristic_profile(
    spec: &WeightSpec,
    r_range: (f64, f64),
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    if !(r_range.0 > 0.0) || !(r_range.1 > r_range.0) || samples < 2 {
        return Err(LabError::EmptyRange(format!(
            "need 0 < r_lo < r_hi and samples >= 2, got {r_range:?} x {samples}"
        )));
    }
    let (lo, hi) = r_range;
    let step = (hi - lo) / (samples - 1) as f64;
    (0..samples)
        .map(|i| {
            let r = lo + i as f64 * step;
            let dp = phi_prime(spec, r)?;
            let pt = SymbolPoint { r, rho: 0.0, omega: r * dp.abs() };
            Ok((r, bracket_closed_form(spec, pt)?))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct HormanderReport {
    pub min_char_bracket: f64,
    /// Radius attaining the minimum.
    pub arg_min: f64,
    /// Analytic floor the minimum is compared against.
    pub floor: f64,
    pub pass: bool,
}

/// Scan the characteristic set for the Hörmander positivity condition.
///
/// The pass floor is `c³` for the exponential family and `r_hi⁻⁷` for the
/// inverse family (where the quarter-bracket equals `r⁻⁷` identically on the
/// characteristic set, decreasing in r).
pub fn hormander_scan(
    spec: &WeightSpec,
    r_range: (f64, f64),
    samples: usize,
) -> Result<HormanderReport> {
    let profile = characteristic_profile(spec, r_range, samples)?;
    let (mut arg_min, mut min_val) = (profile[0].0, profile[0].1);
    for &(r, b) in &profile[1..] {
        if b < min_val {
            min_val = b;
            arg_min = r;
        }
    }
    let floor = match spec.family {
        WeightFamily::RadialExp { c } | WeightFamily::GluedExp { c, .. } => {
            (c / spec.delta).powi(3)
        }
        WeightFamily::RadialInverse => r_range.1.powi(-7) / spec.delta.powi(3),
    };
    Ok(HormanderReport {
        min_char_bracket: min_val,
        arg_min,
        floor,
        pass: min_val >= floor * (1.0 - 1e-9),
    })
}

/// Serialized certificate for the subelliptic lower bound
/// `2{Re p_φ, Im p_φ} + d|p_φ|² ≥ C (ρ²+1)²` over a phase-space box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubellipticReport {
    pub variant: String,
    pub c: Option<f64>,
    pub d: f64,
    /// Box ranges [[r_lo, r_hi], [rho_lo, rho_hi], [omega_lo, omega_hi]].
    #[serde(rename = "box")]
    pub box_ranges: [[f64; 2]; 3],
    pub samples: usize,
    #[serde(rename = "C")]
    pub constant: f64,
    pub argmin: [f64; 3],
    pub pass: bool,
}

/// Ratio (8·quarter_bracket + d|p_φ|²) / (ρ²+1)² at one point.
pub fn subelliptic_ratio(spec: &WeightSpec, d: f64, pt: SymbolPoint) -> Result<f64> {
    let q = bracket_closed_form(spec, pt)?;
    let p = eval_symbol(spec, pt)?;
    let denom = (pt.rho * pt.rho + 1.0).powi(2);
    Ok((8.0 * q + d * p.norm_sqr()) / denom)
}

/// Infimum of [`subelliptic_ratio`] over a deterministic lattice of about
/// `samples` points in the box; `C > 0` certifies the bound there.
///
/// Axis counts are proportional to the side lengths, so doubling `samples`
/// eightfold refines each axis about twofold.
pub fn subelliptic_constant(
    spec: &WeightSpec,
    d: f64,
    box_ranges: [[f64; 2]; 3],
    samples: usize,
) -> Result<SubellipticReport> {
    if d < 0.0 {
        return Err(LabError::BadWeight(format!("d must be >= 0, got {d}")));
    }
    let lens: Vec<f64> = box_ranges.iter().map(|r| r[1] - r[0]).collect();
    if lens.iter().any(|l| !(*l > 0.0)) || box_ranges[0][0] <= 0.0 || box_ranges[2][0] < 0.0 {
        return Err(LabError::EmptyRange(format!("invalid box {box_ranges:?}")));
    }
    if samples < 64 {
        return Err(LabError::EmptyRange(format!("samples too small: {samples}")));
    }
    let scale = (samples as f64 / (lens[0] * lens[1] * lens[2])).cbrt();
    let counts: Vec<usize> =
        lens.iter().map(|l| ((l * scale).round() as usize).max(4)).collect();
    let axis = |k: usize, i: usize| -> f64 {
        box_ranges[k][0] + lens[k] * i as f64 / (counts[k] - 1) as f64
    };

    // Deterministic reduction: ties broken by the lowest lattice index.
    let reduce = |a: (f64, usize), b: (f64, usize)| -> (f64, usize) {
        if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }
    };
    let n_total = counts[0] * counts[1] * counts[2];
    let best = (0..counts[0])
        .into_par_iter()
        .map(|ir| {
            let r = axis(0, ir);
            let mut local = (f64::INFINITY, usize::MAX);
            for irho in 0..counts[1] {
                let rho = axis(1, irho);
                for iom in 0..counts[2] {
                    let omega = axis(2, iom);
                    let pt = SymbolPoint { r, rho, omega };
                    let val = subelliptic_ratio(spec, d, pt).expect("radial spec");
                    let flat = (ir * counts[1] + irho) * counts[2] + iom;
                    local = reduce(local, (val, flat));
                }
            }
            local
        })
        .reduce(|| (f64::INFINITY, usize::MAX), reduce);

    let flat = best.1;
    let iom = flat % counts[2];
    let irho = (flat / counts[2]) % counts[1];
    let ir = flat / (counts[1] * counts[2]);
    Ok(SubellipticReport {
        variant: spec.variant_name().to_string(),
        c: spec.radial_c(),
        d,
        box_ranges,
        samples: n_total,
        constant: best.0,
        argmin: [axis(0, ir), axis(1, irho), axis(2, iom)],
        pass: best.0 > 0.0,
    })
}

/// Search d on the log ladder {1, 2, 4, ..., 128} for a positive certificate.
pub fn certificate_search(
    spec: &WeightSpec,
    box_ranges: [[f64; 2]; 3],
    samples: usize,
) -> Result<SubellipticReport> {
    let mut last = None;
    for k in 0..8 {
        let d = 2f64.powi(k);
        let rep = subelliptic_constant(spec, d, box_ranges, samples)?;
        if rep.pass {
            return Ok(rep);
        }
        last = Some(rep);
    }
    Ok(last.expect("ladder is nonempty"))
}

/// Certificate search with both c and d on the log ladder, for callers that
/// supply neither: the first exponential weight `φ = c·eʳ` with a positive
/// constant wins.
pub fn certificate_search_auto(
    box_ranges: [[f64; 2]; 3],
    samples: usize,
) -> Result<SubellipticReport> {
    let mut last = None;
    for kc in 0..8 {
        let spec = WeightSpec::radial_exp(2f64.powi(kc));
        let rep = certificate_search(&spec, box_ranges, samples)?;
        if rep.pass {
            return Ok(rep);
        }
        last = Some(rep);
    }
    Ok(last.expect("ladder is nonempty"))
}

/// Seeded sample points for the bracket oracle-agreement runs.
pub fn seeded_symbol_points(seed: u64, count: usize, r_range: (f64, f64)) -> Vec<SymbolPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| SymbolPoint {
            r: rng.gen_range(r_range.0..r_range.1),
            rho: rng.gen_range(-5.0..5.0),
            omega: rng.gen_range(0.0..5.0),
        })
        .collect()
}
