//! Potential catalog, mollification and the regularity functionals.
//!
//! The mollifier is a nonnegative radial kernel of unit mass supported in the
//! unit ball; at scale `θ` the regularized potential is the discrete
//! convolution
//!
//! ```text
//! Ṽ_θ(x) = V(x) + Σ_t w̃(t) (V(x-t) - V(x)),   Σ w̃ = 1,  |t| < θ,
//! ```
//!
//! written in increment form so constants are preserved bitwise and
//! `sup|Ṽ_θ - V| ≤ ω_V(θ)` holds with no discretization slack. The modulus
//!
//! ```text
//! ω_V(θ) = sup_{x} sup_{|t| ≤ θ} |V(x-t) - V(x)|
//! ```
//!
//! is evaluated over grid offsets with a periodic sliding-maximum filter; a
//! naive double scan of the same finite set is kept as the reference oracle.
//! The growth functional is `β(h) = ω_V(h^{2/3}κ)^{1/2} / h^{4/3}`, zero for
//! constant potentials.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::LabError;
use crate::field::ScalarField;
use crate::grid::{Grid, GridSpec};
use crate::Result;

/// Parametric potential catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Constant { value: f64 },
    Trig { terms: Vec<TrigTerm> },
    /// Truncated Weierstrass-type series  Σ_{k=0}^{levels} 2^{-kα} cos(2π 2^k x / Lx).
    Weierstrass { alpha: f64, levels: u32 },
    Checkerboard { cell: f64, jump: f64 },
    PiecewiseRandom { cell: f64, amplitude: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub amp: f64,
    pub kx: i32,
    pub ky: i32,
    pub phase: f64,
}

impl PotentialSpec {
    /// Single sine mode in x: `amp · sin(2π k x / Lx)`.
    pub fn sine_x(amp: f64, k: i32) -> Self {
        PotentialSpec::Trig {
            terms: vec![TrigTerm { amp, kx: k, ky: 0, phase: -std::f64::consts::FRAC_PI_2 }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(LabError::BadPotential("constant value must be finite".into()));
                }
            }
            PotentialSpec::Trig { terms } => {
                if terms.is_empty() {
                    return Err(LabError::BadPotential("trig needs at least one term".into()));
                }
                for t in terms {
                    if !(t.amp.is_finite() && t.phase.is_finite()) {
                        return Err(LabError::BadPotential("trig term must be finite".into()));
                    }
                }
            }
            PotentialSpec::Weierstrass { alpha, levels } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(LabError::BadPotential(format!(
                        "alpha must be in (0,1], got {alpha}"
                    )));
                }
                if *levels < 1 {
                    return Err(LabError::BadPotential("levels must be >= 1".into()));
                }
            }
            PotentialSpec::Checkerboard { cell, jump } => {
                if !(*cell > 0.0) || !jump.is_finite() {
                    return Err(LabError::BadPotential(format!(
                        "checkerboard needs cell > 0 and finite jump, got cell={cell}"
                    )));
                }
            }
            PotentialSpec::PiecewiseRandom { cell, amplitude, .. } => {
                if !(*cell > 0.0) || !(*amplitude > 0.0) {
                    return Err(LabError::BadPotential(
                        "piecewise_random needs cell > 0 and amplitude > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, PotentialSpec::Constant { .. })
    }

    /// Analytic bound on sup |V|.
    pub fn sup_bound(&self) -> f64 {
        match self {
            PotentialSpec::Constant { value } => value.abs(),
            PotentialSpec::Trig { terms } => terms.iter().map(|t| t.amp.abs()).sum(),
            PotentialSpec::Weierstrass { alpha, levels } => {
                (0..=*levels).map(|k| 2f64.powf(-(k as f64) * alpha)).sum()
            }
            PotentialSpec::Checkerboard { jump, .. } => jump.abs(),
            PotentialSpec::PiecewiseRandom { amplitude, .. } => *amplitude,
        }
    }

    /// Analytic bound on sup |∇V| for the smooth variants; zero for the
    /// piecewise-constant ones (cell-aligned convention).
    pub fn lip_bound(&self, grid: &Grid) -> f64 {
        let tau = std::f64::consts::TAU;
        match (self, grid.spec()) {
            (PotentialSpec::Constant { .. }, _) => 0.0,
            (PotentialSpec::Trig { terms }, GridSpec::Torus { lx, ly, .. }) => terms
                .iter()
                .map(|t| {
                    t.amp.abs()
                        * tau
                        * ((t.kx as f64 / lx).powi(2) + (t.ky as f64 / ly).powi(2)).sqrt()
                })
                .sum(),
            (PotentialSpec::Weierstrass { alpha, levels }, GridSpec::Torus { lx, .. }) => {
                (0..=*levels)
                    .map(|k| 2f64.powf(-(k as f64) * alpha) * tau * 2f64.powi(k as i32) / lx)
                    .sum()
            }
            (PotentialSpec::Checkerboard { .. }, _) => 0.0,
            (PotentialSpec::PiecewiseRandom { .. }, _) => 0.0,
            // Non-constant variants are torus-only; sampling rejects the rest.
            _ => 0.0,
        }
    }
}

impl fmt::Display for PotentialSpec {
    /// Canonical textual form used by config files.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Constant { value } => write!(f, "constant{{value={value}}}"),
            PotentialSpec::Trig { terms } => {
                if terms.len() == 1 {
                    let t = &terms[0];
                    write!(f, "trig{{amp={},kx={},ky={},phase={}}}", t.amp, t.kx, t.ky, t.phase)
                } else {
                    write!(f, "trig{{terms=")?;
                    for (i, t) in terms.iter().enumerate() {
                        if i > 0 {
                            write!(f, "|")?;
                        }
                        write!(f, "({},{},{},{})", t.amp, t.kx, t.ky, t.phase)?;
                    }
                    write!(f, "}}")
                }
            }
            PotentialSpec::Weierstrass { alpha, levels } => {
                write!(f, "weierstrass{{alpha={alpha},levels={levels}}}")
            }
            PotentialSpec::Checkerboard { cell, jump } => {
                write!(f, "checkerboard{{cell={cell},jump={jump}}}")
            }
            PotentialSpec::PiecewiseRandom { cell, amplitude, seed } => {
                write!(f, "piecewise_random{{cell={cell},amplitude={amplitude},seed={seed}}}")
            }
        }
    }
}

/// Number of cells per period, rejecting incommensurate sizes.
fn cells_per_period(length: f64, cell: f64, axis: &str) -> Result<usize> {
    let ratio = length / cell;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(LabError::BadPotential(format!(
            "cell size {cell} does not divide the {axis} period {length}"
        )));
    }
    Ok(n as usize)
}

#[inline]
fn cell_index(x: f64, cell: f64, cells: usize) -> usize {
    (((x / cell) + 1e-9).floor() as usize).min(cells - 1)
}

/// Sample a catalog potential on a grid. Non-constant variants require a
/// torus (the experiments' periodic model domain).
pub fn sample_potential(spec: &PotentialSpec, grid: &Arc<Grid>) -> Result<ScalarField> {
    spec.validate()?;
    let tau = std::f64::consts::TAU;
    match (spec, grid.spec().clone()) {
        (PotentialSpec::Constant { value }, _) => Ok(ScalarField::constant(grid.clone(), *value)),
        (PotentialSpec::Trig { terms }, GridSpec::Torus { lx, ly, .. }) => {
            let terms = terms.clone();
            Ok(ScalarField::from_fn(grid.clone(), move |x, y| {
                terms
                    .iter()
                    .map(|t| {
                        t.amp
                            * (tau * (t.kx as f64 * x / lx + t.ky as f64 * y / ly) + t.phase).cos()
                    })
                    .sum()
            }))
        }
        (PotentialSpec::Weierstrass { alpha, levels }, GridSpec::Torus { lx, .. }) => {
            let (alpha, levels) = (*alpha, *levels);
            Ok(ScalarField::from_fn(grid.clone(), move |x, _| {
                (0..=levels)
                    .map(|k| {
                        2f64.powf(-(k as f64) * alpha) * (tau * 2f64.powi(k as i32) * x / lx).cos()
                    })
                    .sum()
            }))
        }
        (PotentialSpec::Checkerboard { cell, jump }, GridSpec::Torus { lx, ly, .. }) => {
            let ncx = cells_per_period(lx, *cell, "x")?;
            let ncy = cells_per_period(ly, *cell, "y")?;
            if ncx % 2 != 0 || ncy % 2 != 0 {
                return Err(LabError::BadPotential(format!(
                    "checkerboard needs an even cell count per period for periodicity, got {ncx}x{ncy}"
                )));
            }
            let (cell, jump) = (*cell, *jump);
            Ok(ScalarField::from_fn(grid.clone(), move |x, y| {
                let ix = cell_index(x, cell, ncx);
                let iy = cell_index(y, cell, ncy);
                jump * ((ix + iy) % 2) as f64
            }))
        }
        (PotentialSpec::PiecewiseRandom { cell, amplitude, seed }, GridSpec::Torus { lx, ly, .. }) => {
            let ncx = cells_per_period(lx, *cell, "x")?;
            let ncy = cells_per_period(ly, *cell, "y")?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let cells: Vec<f64> =
                (0..ncx * ncy).map(|_| rng.gen_range(0.0..*amplitude)).collect();
            let cell = *cell;
            Ok(ScalarField::from_fn(grid.clone(), move |x, y| {
                let ix = cell_index(x, cell, ncx);
                let iy = cell_index(y, cell, ncy);
                cells[iy * ncx + ix]
            }))
        }
        (other, GridSpec::Polar { .. }) => Err(LabError::Unsupported(format!(
            "potential {other} is only sampled on torus grids; polar experiments use constant{{..}}"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Mollifier kernel
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MollifierProfile {
    /// exp(1/(r²-1)) on r < 1, the classical bump.
    StandardBump,
    /// cos²(πr/2) on r < 1.
    Cosine,
}

/// Normalized radial smoothing kernel with unit mass and support radius 1.
#[derive(Debug, Clone)]
pub struct MollifierKernel {
    profile: MollifierProfile,
    /// Normalized profile φ(r_i) at the native quadrature radii
    /// r_i = (i+1/2)/N.
    samples: Vec<f64>,
    /// Normalization Z with ∫φ = (1/Z)∫ψ = 1.
    norm: f64,
    /// ‖∇φ‖_{L¹} = 2π ∫ |φ'(r)| r dr, recorded for the derivative bound.
    grad_l1: f64,
}

const KERNEL_QUADRATURE_POINTS: usize = 8192;

fn profile_raw(profile: MollifierProfile, r: f64) -> f64 {
    if r >= 1.0 {
        return 0.0;
    }
    match profile {
        MollifierProfile::StandardBump => (1.0 / (r * r - 1.0)).exp(),
        MollifierProfile::Cosine => {
            let c = (std::f64::consts::FRAC_PI_2 * r).cos();
            c * c
        }
    }
}

fn profile_raw_deriv(profile: MollifierProfile, r: f64) -> f64 {
    if r >= 1.0 {
        return 0.0;
    }
    match profile {
        MollifierProfile::StandardBump => {
            let d = r * r - 1.0;
            (1.0 / d).exp() * (-2.0 * r / (d * d))
        }
        MollifierProfile::Cosine => {
            -std::f64::consts::FRAC_PI_2 * (std::f64::consts::PI * r).sin()
        }
    }
}

/// Build a normalized kernel; the normalization and ‖∇φ‖_{L¹} come from a
/// high-resolution midpoint rule in the radial variable.
pub fn build_mollifier(profile: MollifierProfile) -> MollifierKernel {
    let n = KERNEL_QUADRATURE_POINTS;
    let dr = 1.0 / n as f64;
    let tau = std::f64::consts::TAU;
    let mut z = 0.0;
    let mut g1 = 0.0;
    let mut raw = Vec::with_capacity(n);
    for i in 0..n {
        let r = (i as f64 + 0.5) * dr;
        let psi = profile_raw(profile, r);
        raw.push(psi);
        z += tau * r * psi * dr;
        g1 += tau * r * profile_raw_deriv(profile, r).abs() * dr;
    }
    let samples = raw.iter().map(|psi| psi / z).collect();
    MollifierKernel { profile, samples, norm: z, grad_l1: g1 / z }
}

impl MollifierKernel {
    pub fn profile(&self) -> MollifierProfile {
        self.profile
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn normalization(&self) -> f64 {
        self.norm
    }

    pub fn grad_l1(&self) -> f64 {
        self.grad_l1
    }

    /// Normalized kernel value φ(r); exactly zero for r ≥ 1.
    pub fn eval(&self, r: f64) -> f64 {
        if r >= 1.0 {
            0.0
        } else {
            profile_raw(self.profile, r) / self.norm
        }
    }

    /// ∫ φ under the kernel's own radial quadrature.
    pub fn mass(&self) -> f64 {
        let n = self.samples.len();
        let dr = 1.0 / n as f64;
        let tau = std::f64::consts::TAU;
        self.samples
            .iter()
            .enumerate()
            .map(|(i, phi)| tau * ((i as f64 + 0.5) * dr) * phi * dr)
            .sum()
    }

    /// ∫ ∂_{x_i} φ for i ∈ {1, 2}, evaluated with central differences on an
    /// n×n Cartesian grid covering the support.
    pub fn derivative_masses(&self, n: usize) -> (f64, f64) {
        let half = 1.25;
        let dh = 2.0 * half / n as f64;
        let eval_at = |i: usize, j: usize| {
            let x = -half + (i as f64 + 0.5) * dh;
            let y = -half + (j as f64 + 0.5) * dh;
            self.eval((x * x + y * y).sqrt())
        };
        let mut mx = 0.0;
        let mut my = 0.0;
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                mx += (eval_at(i + 1, j) - eval_at(i - 1, j)) / (2.0 * dh) * dh * dh;
                my += (eval_at(i, j + 1) - eval_at(i, j - 1)) / (2.0 * dh) * dh * dh;
            }
        }
        (mx, my)
    }
}

// ---------------------------------------------------------------------------
// Mollification
// ---------------------------------------------------------------------------

/// A mollified potential together with the scale it was produced at.
#[derive(Debug, Clone)]
pub struct MollifiedPotential {
    pub field: ScalarField,
    pub theta: f64,
}

/// Discrete mollification Ṽ_θ on the torus (periodic wrap).
pub fn mollify(v: &ScalarField, theta: f64, kernel: &MollifierKernel) -> Result<ScalarField> {
    let grid = v.grid().clone();
    let (nx, ny, dx, dy) = match *grid.spec() {
        GridSpec::Torus { nx, ny, lx, ly } => (nx, ny, lx / nx as f64, ly / ny as f64),
        GridSpec::Polar { .. } => {
            return Err(LabError::Unsupported(
                "mollification is defined with periodic wrap on torus grids".into(),
            ))
        }
    };
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(LabError::BadPotential(format!("theta must be in (0,1], got {theta}")));
    }
    if theta < 2.0 * dx.max(dy) {
        return Err(LabError::KernelUnresolved(format!(
            "theta={theta} below 2x grid spacing {}",
            dx.max(dy)
        )));
    }

    // Offset table over the kernel support, renormalized to exact unit mass.
    let ki = (theta / dx).ceil() as isize;
    let kj = (theta / dy).ceil() as isize;
    let mut offsets: Vec<(isize, isize, f64)> = Vec::new();
    let mut total = 0.0;
    for dj in -kj..=kj {
        for di in -ki..=ki {
            let tx = di as f64 * dx;
            let ty = dj as f64 * dy;
            let rho = (tx * tx + ty * ty).sqrt() / theta;
            let w = kernel.eval(rho) * dx * dy / (theta * theta);
            if w > 0.0 {
                offsets.push((di, dj, w));
                total += w;
            }
        }
    }
    for o in &mut offsets {
        o.2 /= total;
    }

    // Padded copy with periodic halo so the inner loops stay branch-free.
    let pw = nx + 2 * ki as usize;
    let ph = ny + 2 * kj as usize;
    let src = v.values();
    let mut padded = vec![0.0; pw * ph];
    for j in 0..ph {
        let sj = (j as isize - kj).rem_euclid(ny as isize) as usize;
        for i in 0..pw {
            let si = (i as isize - ki).rem_euclid(nx as isize) as usize;
            padded[j * pw + i] = src[sj * nx + si];
        }
    }

    let out: Vec<f64> = (0..ny)
        .into_par_iter()
        .flat_map_iter(|j| {
            let padded = &padded;
            let offsets = &offsets;
            (0..nx).map(move |i| {
                let center = padded[(j + kj as usize) * pw + (i + ki as usize)];
                let mut acc = 0.0;
                for &(di, dj, w) in offsets.iter() {
                    // Convolution uses V(x - t).
                    let jj = (j as isize + kj - dj) as usize;
                    let ii = (i as isize + ki - di) as usize;
                    acc += w * (padded[jj * pw + ii] - center);
                }
                center + acc
            })
        })
        .collect();
    ScalarField::new(grid, out)
}

/// [`mollify`] plus the scale tag required by the separation-inequality check.
pub fn mollify_tagged(
    v: &ScalarField,
    theta: f64,
    kernel: &MollifierKernel,
) -> Result<MollifiedPotential> {
    Ok(MollifiedPotential { field: mollify(v, theta, kernel)?, theta })
}

// ---------------------------------------------------------------------------
// Modulus of continuity
// ---------------------------------------------------------------------------

/// Largest x-offset count at physical y-offset `ty` inside the ball |t| ≤ θ.
#[inline]
fn x_halfwidth(theta: f64, ty: f64, dx: f64) -> isize {
    let rem = theta * theta - ty * ty;
    if rem < 0.0 {
        -1
    } else {
        (rem.sqrt() / dx).floor() as isize
    }
}

fn torus_dims(grid: &Grid) -> Result<(usize, usize, f64, f64)> {
    match *grid.spec() {
        GridSpec::Torus { nx, ny, lx, ly } => Ok((nx, ny, lx / nx as f64, ly / ny as f64)),
        GridSpec::Polar { .. } => Err(LabError::Unsupported(
            "modulus of continuity is defined over the periodic torus".into(),
        )),
    }
}

/// Periodic sliding maximum along x with half-width `w`, one row.
fn sliding_max_row(row: &[f64], w: isize, out: &mut [f64]) {
    let n = row.len() as isize;
    if 2 * w + 1 >= n {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.iter_mut().for_each(|o| *o = m);
        return;
    }
    // Monotone deque over the extended index range [-w, n+w).
    let mut deque: std::collections::VecDeque<isize> = std::collections::VecDeque::new();
    let at = |k: isize| row[k.rem_euclid(n) as usize];
    for k in -w..n + w {
        while let Some(&back) = deque.back() {
            if at(back) <= at(k) {
                deque.pop_back();
            } else {
                break;
            }
        }
        deque.push_back(k);
        let i = k - w; // window [i-w, i+w] is complete once k reaches i+w
        if i >= 0 {
            while let Some(&front) = deque.front() {
                if front < i - w {
                    deque.pop_front();
                } else {
                    break;
                }
            }
            out[i as usize] = at(*deque.front().unwrap());
        }
    }
}

/// ω_V(θ): sup over grid points and grid offsets |t| ≤ θ of |V(x-t) - V(x)|,
/// with periodic wrap. Evaluated with a sliding-max filter; see
/// [`modulus_of_continuity_naive`] for the reference scan.
pub fn modulus_of_continuity(v: &ScalarField, theta: f64) -> Result<f64> {
    let grid = v.grid();
    let (nx, ny, dx, dy) = torus_dims(grid)?;
    if theta < dx.max(dy) * (1.0 - 1e-12) {
        return Err(LabError::KernelUnresolved(format!(
            "modulus radius theta={theta} below the grid spacing {}",
            dx.max(dy)
        )));
    }
    let vals = v.values();
    let kj = (theta / dy).floor() as isize;

    // For each y-offset, slide-max every row, then fold the shifted rows into
    // the running ball maximum M(x) = max_{|t|<=θ} V(x - t).
    let mut ball_max = vec![f64::NEG_INFINITY; nx * ny];
    let mut row_max = vec![0.0; nx];
    for dj in -kj..=kj {
        let w = x_halfwidth(theta, dj as f64 * dy, dx);
        if w < 0 {
            continue;
        }
        for j in 0..ny as isize {
            let sj = (j - dj).rem_euclid(ny as isize) as usize;
            sliding_max_row(&vals[sj * nx..(sj + 1) * nx], w, &mut row_max);
            let dst = &mut ball_max[j as usize * nx..(j as usize + 1) * nx];
            for (d, r) in dst.iter_mut().zip(&row_max) {
                if *r > *d {
                    *d = *r;
                }
            }
        }
    }
    let omega = ball_max
        .iter()
        .zip(vals)
        .map(|(m, v)| m - v)
        .fold(0.0f64, f64::max);
    Ok(omega)
}

/// Reference implementation of [`modulus_of_continuity`]: an explicit scan of
/// every (point, offset) pair. Same offset set, bit-identical result.
pub fn modulus_of_continuity_naive(v: &ScalarField, theta: f64) -> Result<f64> {
    let grid = v.grid();
    let (nx, ny, dx, dy) = torus_dims(grid)?;
    if theta < dx.max(dy) * (1.0 - 1e-12) {
        return Err(LabError::KernelUnresolved(format!(
            "modulus radius theta={theta} below the grid spacing {}",
            dx.max(dy)
        )));
    }
    let vals = v.values();
    let kj = (theta / dy).floor() as isize;
    let mut omega = 0.0f64;
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            let c = vals[j as usize * nx + i as usize];
            for dj in -kj..=kj {
                let w = x_halfwidth(theta, dj as f64 * dy, dx);
                if w < 0 {
                    continue;
                }
                let sj = (j - dj).rem_euclid(ny as isize) as usize;
                for di in -w..=w {
                    let si = (i - di).rem_euclid(nx as isize) as usize;
                    omega = omega.max((vals[sj * nx + si] - c).abs());
                }
            }
        }
    }
    Ok(omega)
}

/// Precomputed (θ, ω_V(θ)) pairs.
#[derive(Debug, Clone)]
pub struct ModulusTable {
    entries: Vec<(f64, f64)>,
    /// Grid spacing the table was computed at.
    pub resolution: f64,
}

impl ModulusTable {
    pub fn build(v: &ScalarField, thetas: &[f64]) -> Result<Self> {
        let mut entries: Vec<(f64, f64)> = thetas
            .iter()
            .map(|&t| Ok((t, modulus_of_continuity(v, t)?)))
            .collect::<Result<_>>()?;
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(ModulusTable { entries, resolution: v.grid().max_spacing() })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn omega_at(&self, theta: f64) -> Option<f64> {
        self.entries.iter().find(|(t, _)| *t == theta).map(|(_, w)| *w)
    }
}

// ---------------------------------------------------------------------------
// β(h) and the θ-selection rules
// ---------------------------------------------------------------------------

/// β(h) = ω_V(h^{2/3}κ)^{1/2} / h^{4/3}; zero for constant potentials.
pub fn beta_of_h(v: &ScalarField, h: f64, kappa: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(LabError::BadConfig(format!("h must be in (0,1), got {h}")));
    }
    let (lo, hi) = v.min_max();
    if lo == hi {
        return Ok(0.0);
    }
    let radius = kappa * h.powf(2.0 / 3.0);
    if radius < v.grid().max_spacing() {
        return Err(LabError::KernelUnresolved(format!(
            "radius under-resolved: h^(2/3)*kappa = {radius} below grid spacing {}",
            v.grid().max_spacing()
        )));
    }
    Ok(modulus_of_continuity(v, radius)?.sqrt() / h.powf(4.0 / 3.0))
}

/// Mollification-scale rule: θ = κ h^{2/3}, refined to θ = κ h^{2/(α+3)} for
/// an α-Hölder potential.
pub fn select_theta(h: f64, kappa: f64, alpha: Option<f64>) -> Result<f64> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(LabError::BadConfig(format!("h must be in (0,1], got {h}")));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(LabError::BadConfig(format!("kappa must be in (0,1], got {kappa}")));
    }
    match alpha {
        None => Ok(kappa * h.powf(2.0 / 3.0)),
        Some(a) if a > 0.0 && a <= 1.0 => Ok(kappa * h.powf(2.0 / (a + 3.0))),
        Some(a) => Err(LabError::BadConfig(format!("alpha must be in (0,1], got {a}"))),
    }
}

// ---------------------------------------------------------------------------
// Regularization bound verification
// ---------------------------------------------------------------------------

/// Outcome of checking `sup|Ṽ_θ-V| ≤ ω_V(θ)` and
/// `sup|∂Ṽ_θ| ≤ (‖∇φ‖_{L¹}/θ) ω_V(θ)` on a grid.
#[derive(Debug, Clone)]
pub struct RegularizationReport {
    pub theta: f64,
    pub omega: f64,
    pub sup_diff: f64,
    pub sup_grad: f64,
    pub bound1: f64,
    pub bound2: f64,
    pub bound1_margin: f64,
    pub bound2_margin: f64,
    pub eps_grid: f64,
    pub pass: bool,
}

/// Relative slack granted on the analytic bounds before the recorded
/// discretization allowance `eps_grid` is added.
pub const REGULARIZATION_REL_SLACK: f64 = 1e-6;

pub fn verify_regularization_bounds(
    spec: &PotentialSpec,
    grid: &Arc<Grid>,
    theta: f64,
    kernel: &MollifierKernel,
) -> Result<RegularizationReport> {
    let v = sample_potential(spec, grid)?;
    let vt = mollify(&v, theta, kernel)?;
    let omega = modulus_of_continuity(&v, theta)?;
    let sup_diff = vt.sub(&v)?.linf();
    let (gx, gy) = crate::calculus::apply_gradient(&vt)?;
    let sup_grad = gx.linf().max(gy.linf());
    let eps_grid = spec.lip_bound(grid) * grid.max_spacing();
    let bound1 = omega * (1.0 + REGULARIZATION_REL_SLACK) + eps_grid;
    let bound2 = (kernel.grad_l1() / theta) * omega * (1.0 + REGULARIZATION_REL_SLACK) + eps_grid;
    let bound1_margin = bound1 - sup_diff;
    let bound2_margin = bound2 - sup_grad;
    let tol = -1e-12 * (1.0 + bound1.abs().max(bound2.abs()));
    Ok(RegularizationReport {
        theta,
        omega,
        sup_diff,
        sup_grad,
        bound1,
        bound2,
        bound1_margin,
        bound2_margin,
        eps_grid,
        pass: bound1_margin >= tol && bound2_margin >= tol,
    })
}
