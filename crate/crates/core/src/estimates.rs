//! End-to-end estimate experiments.
//!
//! Three experiment kinds are provided:
//!
//! * [`run_carleman_ratio`]: weighted a-priori ratio on a disk/annulus: for
//!   each `h` it forms `θ`, `ω_V(θ)`, the mollified potential and the weight
//!   `exp(2φ ω^{1/2} / (h θ^{1/2}))`, then measures the empirical constant
//!   `C_emp(h) = max_u LHS/RHS` over a family of compactly supported test
//!   functions. All weighted integrals stay in max-shifted log domain.
//! * [`run_local_to_global`]: on the torus, compares the global
//!   semiclassical energy of `u` against its energy on an open set `U` plus
//!   the source norm `∫|(P_V-E)u|²`, and fits `log ratio = C·β(h)` through
//!   the origin.
//! * [`run_holder_scaling`]: repeats the local-to-global run per Hölder
//!   exponent α with `θ = κ h^{2/(α+3)}` and checks the fitted growth
//!   exponent against the ceiling `(4-α)/3`.
//!
//! Reports are plain data and serialize deterministically; identical configs
//! and seeds reproduce byte-identical output.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{apply_gradient, apply_laplacian, torus_mode_eigenvalue};
use crate::error::LabError;
use crate::field::ScalarField;
use crate::grid::{build_grid, make_cutoff, Grid, GridSpec};
use crate::logsum::logsumexp;
use crate::operators::{eigen_near, semiclassical_norm, EigenOptions, SchrodingerOp};
use crate::potentials::{
    beta_of_h, build_mollifier, modulus_of_continuity, mollify, sample_potential, select_theta,
    MollifierProfile, PotentialSpec,
};
use crate::weights::{build_weight, WeightSpec};
use crate::Result;

/// Growth cap on consecutive empirical Carleman constants.
pub const CARLEMAN_GROWTH_FACTOR: f64 = 10.0;
/// Maximum residual-normalized misfit accepted for the through-origin fit.
pub const FIT_QUALITY_MAX: f64 = 0.5;
/// Default h ladder.
pub const DEFAULT_H_LADDER: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// Open subset of the domain: a metric ball or a centered annulus.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionSpec {
    Ball { cx: f64, cy: f64, r: f64 },
    Annulus { r1: f64, r2: f64 },
}

impl RegionSpec {
    pub fn contains(&self, grid: &Grid, idx: usize) -> bool {
        match *self {
            RegionSpec::Ball { cx, cy, r } => grid.distance(idx, (cx, cy)) <= r,
            RegionSpec::Annulus { r1, r2 } => {
                let r = grid.radius(idx);
                r >= r1 && r <= r2
            }
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        match (*self, grid.spec()) {
            (RegionSpec::Ball { r, .. }, GridSpec::Torus { lx, ly, .. }) => {
                if !(r > 0.0) || r >= 0.5 * lx.min(*ly) {
                    return Err(LabError::BadConfig(format!(
                        "ball radius {r} must sit strictly inside the torus"
                    )));
                }
            }
            (RegionSpec::Ball { cx, cy, r }, GridSpec::Polar { r_outer, .. }) => {
                let dist = (cx * cx + cy * cy).sqrt();
                if !(r > 0.0) || dist + r >= *r_outer {
                    return Err(LabError::BadConfig(format!(
                        "ball of radius {r} at ({cx},{cy}) leaves the disk of radius {r_outer}"
                    )));
                }
            }
            (RegionSpec::Annulus { r1, r2 }, GridSpec::Polar { r_inner, r_outer, .. }) => {
                if !(r1 >= *r_inner && r1 < r2 && r2 <= *r_outer) {
                    return Err(LabError::BadConfig(format!(
                        "annulus [{r1},{r2}] not inside [{r_inner},{r_outer}]"
                    )));
                }
            }
            (RegionSpec::Annulus { r1, r2 }, GridSpec::Torus { lx, ly, .. }) => {
                if !(r1 >= 0.0 && r1 < r2 && r2 < 0.5 * lx.min(*ly)) {
                    return Err(LabError::BadConfig(format!(
                        "annulus [{r1},{r2}] must sit strictly inside the torus"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl Copy for RegionSpec {}

/// Test-function family.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    /// Seeded Gaussian bumps confined to the support region.
    Gaussian { count: usize, width: f64 },
    /// Seeded band-limited trigonometric samples confined to the support.
    BandLimited { count: usize, max_freq: i32 },
    /// A single complex plane wave (constant potentials only).
    PlaneWave { kx: i32, ky: i32 },
    /// Eigenpairs near a target energy.
    Eigen { target: f64, count: usize, tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    CarlemanRatio,
    LocalToGlobal,
    HolderScaling,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::CarlemanRatio => "carleman_ratio",
            ExperimentKind::LocalToGlobal => "local_to_global",
            ExperimentKind::HolderScaling => "holder_scaling",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "carleman_ratio" => Some(ExperimentKind::CarlemanRatio),
            "local_to_global" => Some(ExperimentKind::LocalToGlobal),
            "holder_scaling" => Some(ExperimentKind::HolderScaling),
            _ => None,
        }
    }
}

/// Declarative experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub potential: PotentialSpec,
    pub kind: Option<ExperimentKind>,
    pub weight: Option<WeightSpec>,
    /// The open set U of the local-to-global estimate.
    pub u_region: Option<RegionSpec>,
    /// Support region for compactly supported test functions.
    pub support: Option<RegionSpec>,
    pub family: Option<FamilySpec>,
    pub energy: Option<f64>,
    pub h_ladder: Vec<f64>,
    pub kappa: f64,
    pub delta: f64,
    pub d: f64,
    pub slack: f64,
    pub alpha: Option<f64>,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub mollifier: MollifierProfile,
    /// Provenance hash filled in by the runner.
    pub config_hash: String,
}

impl ExperimentConfig {
    pub fn new(grid: GridSpec, potential: PotentialSpec) -> Self {
        ExperimentConfig {
            grid,
            potential,
            kind: None,
            weight: None,
            u_region: None,
            support: None,
            family: None,
            energy: None,
            h_ladder: DEFAULT_H_LADDER.to_vec(),
            kappa: 0.5,
            delta: 1.0,
            d: 10.0,
            slack: 0.2,
            alpha: None,
            alphas: Vec::new(),
            seed: 42,
            mollifier: MollifierProfile::StandardBump,
            config_hash: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_ladder.is_empty() {
            return Err(LabError::BadConfig("h ladder is empty".into()));
        }
        for w in self.h_ladder.windows(2) {
            if !(w[1] < w[0]) {
                return Err(LabError::BadConfig(format!(
                    "h ladder must be strictly decreasing, got {:?}",
                    self.h_ladder
                )));
            }
        }
        if self.h_ladder.iter().any(|h| !(*h > 0.0 && *h < 1.0)) {
            return Err(LabError::BadConfig("every h must lie in (0,1)".into()));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(LabError::BadConfig(format!("kappa must be in (0,1], got {}", self.kappa)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(LabError::BadConfig(format!("delta must be in (0,1], got {}", self.delta)));
        }
        if self.d < 0.0 {
            return Err(LabError::BadConfig(format!("d must be >= 0, got {}", self.d)));
        }
        if !(self.slack >= 0.0) {
            return Err(LabError::BadConfig(format!("slack must be >= 0, got {}", self.slack)));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(LabError::BadConfig(format!("alpha must be in (0,1], got {a}")));
            }
        }
        for a in &self.alphas {
            if !(*a > 0.0 && *a <= 1.0) {
                return Err(LabError::BadConfig(format!("alpha must be in (0,1], got {a}")));
            }
        }
        self.potential.validate()?;
        if let Some(w) = &self.weight {
            w.validate()?;
        }
        let grid = build_grid(self.grid.clone())?;
        if let Some(r) = &self.u_region {
            r.validate(&grid)?;
        }
        if let Some(r) = &self.support {
            r.validate(&grid)?;
        }
        Ok(())
    }
}

/// One valid ladder entry.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HRecord {
    pub h: f64,
    pub theta: f64,
    pub omega: f64,
    pub beta: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub log_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SkippedRecord {
    pub h: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct FitSummary {
    /// Through-origin constant of `log_ratio = C·β(h)`.
    pub c_beta: Option<f64>,
    /// Residual-normalized misfit of the through-origin fit.
    pub c_beta_residual: Option<f64>,
    /// Power-law fit `y = A·h^{-p}` of the primary per-h quantity.
    pub amplitude: Option<f64>,
    pub exponent: Option<f64>,
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AlphaFit {
    pub alpha: f64,
    pub ceiling: f64,
    pub amplitude: f64,
    pub exponent: f64,
    pub residual: f64,
    pub pass: bool,
}

/// Structured experiment outcome.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EstimateReport {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub grid: String,
    pub potential: String,
    pub records: Vec<HRecord>,
    pub skipped: Vec<SkippedRecord>,
    pub fit: FitSummary,
    pub alpha_fits: Vec<AlphaFit>,
    pub pass: bool,
    pub flags: Vec<String>,
}

pub fn grid_text(spec: &GridSpec) -> String {
    match *spec {
        GridSpec::Torus { nx, ny, lx, ly } => format!("torus{{nx={nx},ny={ny},lx={lx},ly={ly}}}"),
        GridSpec::Polar { nr, nang, r_inner, r_outer } => {
            format!("polar{{nr={nr},nang={nang},rin={r_inner},rout={r_outer}}}")
        }
    }
}

// ---------------------------------------------------------------------------
// Test-function construction
// ---------------------------------------------------------------------------

/// Real/imaginary pair; `im = None` for real test functions.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub label: String,
    pub re: ScalarField,
    pub im: Option<ScalarField>,
}

impl TestFunction {
    fn parts(&self) -> impl Iterator<Item = &ScalarField> {
        std::iter::once(&self.re).chain(self.im.as_ref())
    }

    pub fn l2_sq(&self) -> f64 {
        self.parts().map(|p| p.norm_sq()).sum()
    }
}

/// Smooth plateau field: 1 well inside the region, exactly 0 outside it.
fn support_plateau(grid: &Arc<Grid>, region: &RegionSpec) -> Result<ScalarField> {
    match *region {
        RegionSpec::Annulus { r1, r2 } => {
            let m = (r2 - r1) / 6.0;
            let center = annulus_center(grid);
            let inner = make_cutoff(grid, r1, r1 + m, center)?.field;
            let outer = make_cutoff(grid, r2 - m, r2, center)?.field;
            inner.zip_map(&outer, |a, b| a * (1.0 - b))
        }
        RegionSpec::Ball { cx, cy, r } => {
            let m = r / 6.0;
            let outer = make_cutoff(grid, r - m, r, (cx, cy))?.field;
            Ok(outer.map(|b| 1.0 - b))
        }
    }
}

fn annulus_center(grid: &Arc<Grid>) -> (f64, f64) {
    match *grid.spec() {
        GridSpec::Torus { lx, ly, .. } => (0.5 * lx, 0.5 * ly),
        GridSpec::Polar { .. } => (0.0, 0.0),
    }
}

fn seeded_center_in(grid: &Arc<Grid>, region: &RegionSpec, rng: &mut ChaCha8Rng) -> (f64, f64) {
    match *region {
        RegionSpec::Ball { cx, cy, r } => {
            let rad = rng.gen_range(0.0..0.5 * r);
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            (cx + rad * ang.cos(), cy + rad * ang.sin())
        }
        RegionSpec::Annulus { r1, r2 } => {
            let gap = r2 - r1;
            let rad = rng.gen_range(r1 + 0.3 * gap..r2 - 0.3 * gap);
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            let c = annulus_center(grid);
            (c.0 + rad * ang.cos(), c.1 + rad * ang.sin())
        }
    }
}

/// Build the compactly supported test family for the ratio experiments.
pub fn build_test_family(
    grid: &Arc<Grid>,
    family: &FamilySpec,
    support: &RegionSpec,
    seed: u64,
) -> Result<Vec<TestFunction>> {
    let plateau = support_plateau(grid, support)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    match *family {
        FamilySpec::Gaussian { count, width } => {
            if count == 0 || !(width > 0.0) {
                return Err(LabError::BadConfig("gaussian family needs count>0, width>0".into()));
            }
            for k in 0..count {
                let c = seeded_center_in(grid, support, &mut rng);
                let bump = ScalarField::from_fn(grid.clone(), |x, y| {
                    let d2 = match grid.spec() {
                        GridSpec::Torus { .. } => {
                            // periodic distance through the grid helper is per
                            // index; recompute directly for closure use
                            let dx = shortest(x - c.0, grid.spec(), true);
                            let dy = shortest(y - c.1, grid.spec(), false);
                            dx * dx + dy * dy
                        }
                        GridSpec::Polar { .. } => (x - c.0).powi(2) + (y - c.1).powi(2),
                    };
                    (-d2 / (2.0 * width * width)).exp()
                });
                let u = bump.mul(&plateau)?;
                ensure_not_degenerate(&u, &format!("gaussian bump {k}"))?;
                out.push(TestFunction { label: format!("gaussian_{k}"), re: u, im: None });
            }
        }
        FamilySpec::BandLimited { count, max_freq } => {
            if count == 0 || max_freq < 1 {
                return Err(LabError::BadConfig(
                    "band_limited family needs count>0, max_freq>=1".into(),
                ));
            }
            let tau = std::f64::consts::TAU;
            let scale = match *grid.spec() {
                GridSpec::Torus { lx, ly, .. } => (lx, ly),
                GridSpec::Polar { r_outer, .. } => (2.0 * r_outer, 2.0 * r_outer),
            };
            for k in 0..count {
                let mut modes = Vec::new();
                for kx in -max_freq..=max_freq {
                    for ky in -max_freq..=max_freq {
                        if kx == 0 && ky == 0 {
                            continue;
                        }
                        modes.push((
                            kx as f64,
                            ky as f64,
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(0.0..tau),
                        ));
                    }
                }
                let wave = ScalarField::from_fn(grid.clone(), |x, y| {
                    modes
                        .iter()
                        .map(|&(kx, ky, a, ph)| {
                            a * (tau * (kx * x / scale.0 + ky * y / scale.1) + ph).cos()
                        })
                        .sum()
                });
                let u = wave.mul(&plateau)?;
                ensure_not_degenerate(&u, &format!("band-limited sample {k}"))?;
                out.push(TestFunction { label: format!("band_limited_{k}"), re: u, im: None });
            }
        }
        FamilySpec::PlaneWave { .. } | FamilySpec::Eigen { .. } => {
            return Err(LabError::BadConfig(
                "plane_wave/eigen families are not compactly supported; use them with local_to_global"
                    .into(),
            ));
        }
    }
    Ok(out)
}

fn shortest(mut d: f64, spec: &GridSpec, x_axis: bool) -> f64 {
    if let GridSpec::Torus { lx, ly, .. } = *spec {
        let period = if x_axis { lx } else { ly };
        d %= period;
        if d > 0.5 * period {
            d -= period;
        } else if d < -0.5 * period {
            d += period;
        }
    }
    d
}

fn ensure_not_degenerate(u: &ScalarField, label: &str) -> Result<()> {
    if u.norm_sq() == 0.0 {
        return Err(LabError::DegenerateTestFunction(format!(
            "{label} vanishes identically on its support"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Weighted ratio machinery
// ---------------------------------------------------------------------------

/// Log-domain Carleman sides for one test function:
/// `log LHS = log h + log Σ w·q·(|u|² + (θ/ω)|h∇u|²)` and
/// `log RHS = (3/2)log(θ/ω) + log Σ w·q·|Pu|²`, with `w = exp(logw)`.
pub fn weighted_carleman_sides(
    logw: &ScalarField,
    u: &ScalarField,
    pu: &ScalarField,
    theta_over_omega: f64,
    h: f64,
) -> Result<(f64, f64)> {
    logw.check_same_grid(u)?;
    let grid = u.grid();
    let (gx, gy) = apply_gradient(u)?;
    let n = grid.len();
    let mut lhs_terms = Vec::with_capacity(n);
    let mut rhs_terms = Vec::with_capacity(n);
    for i in 0..n {
        let q = grid.weight(i);
        let uu = u.values()[i];
        let grad = gx.values()[i].powi(2) + gy.values()[i].powi(2);
        let lhs_i = q * (uu * uu + theta_over_omega * h * h * grad);
        let rhs_i = q * pu.values()[i].powi(2);
        let lw = logw.values()[i];
        lhs_terms.push(if lhs_i > 0.0 { lw + lhs_i.ln() } else { f64::NEG_INFINITY });
        rhs_terms.push(if rhs_i > 0.0 { lw + rhs_i.ln() } else { f64::NEG_INFINITY });
    }
    let log_lhs = h.ln() + logsumexp(&lhs_terms);
    let log_rhs = 1.5 * theta_over_omega.ln() + logsumexp(&rhs_terms);
    Ok((log_lhs, log_rhs))
}

/// θ, ω and the mollified potential for one ladder entry, honoring the
/// constant-potential degeneration (ω := θ, V_θ := 0, E shifted).
struct LadderScales {
    theta: f64,
    omega: f64,
    v_theta: ScalarField,
    e_eff: f64,
    degenerate: bool,
}

fn ladder_scales(
    grid: &Arc<Grid>,
    v: &ScalarField,
    potential: &PotentialSpec,
    h: f64,
    kappa: f64,
    alpha: Option<f64>,
    energy: f64,
    mollifier: MollifierProfile,
) -> Result<LadderScales> {
    let theta = select_theta(h, kappa, alpha)?;
    let (lo, hi) = v.min_max();
    if potential.is_constant() || lo == hi {
        return Ok(LadderScales {
            theta,
            omega: theta,
            v_theta: ScalarField::zeros(grid.clone()),
            e_eff: energy - lo,
            degenerate: true,
        });
    }
    let omega = modulus_of_continuity(v, theta)?;
    if omega == 0.0 {
        return Ok(LadderScales {
            theta,
            omega: theta,
            v_theta: ScalarField::zeros(grid.clone()),
            e_eff: energy,
            degenerate: true,
        });
    }
    let kernel = build_mollifier(mollifier);
    let v_theta = mollify(v, theta, &kernel)?;
    Ok(LadderScales { theta, omega, v_theta, e_eff: energy, degenerate: false })
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

/// Discrete Carleman ratio experiment; `C_emp(h)` is stored in `ratio`.
pub fn run_carleman_ratio(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let grid = build_grid(cfg.grid.clone())?;
    let weight = cfg
        .weight
        .clone()
        .ok_or_else(|| LabError::BadConfig("carleman_ratio requires a weight".into()))?
        .with_delta(cfg.delta);
    let support = cfg
        .support
        .ok_or_else(|| LabError::BadConfig("carleman_ratio requires a support region".into()))?;
    let family = cfg
        .family
        .clone()
        .ok_or_else(|| LabError::BadConfig("carleman_ratio requires a test family".into()))?;
    let energy = cfg
        .energy
        .ok_or_else(|| LabError::BadConfig("carleman_ratio requires an energy".into()))?;
    let v = sample_potential(&cfg.potential, &grid)?;
    let test_fns = build_test_family(&grid, &family, &support, cfg.seed)?;
    let mut flags = Vec::new();

    let results: Vec<std::result::Result<HRecord, SkippedRecord>> = cfg
        .h_ladder
        .par_iter()
        .map(|&h| {
            let scales = match ladder_scales(
                &grid,
                &v,
                &cfg.potential,
                h,
                cfg.kappa,
                cfg.alpha,
                energy,
                cfg.mollifier,
            ) {
                Ok(s) => s,
                Err(e) => return Err(SkippedRecord { h, reason: e.to_string() }),
            };
            let t_over_w = scales.theta / scales.omega;
            let h_eff = h * t_over_w.sqrt();
            let logw = match build_weight(&weight, &grid, h_eff) {
                Ok(w) => w,
                Err(e) => return Err(SkippedRecord { h, reason: e.to_string() }),
            };
            let op = match SchrodingerOp::new(grid.clone(), h, scales.v_theta.clone(), scales.e_eff)
            {
                Ok(op) => op,
                Err(e) => return Err(SkippedRecord { h, reason: e.to_string() }),
            };
            let mut best: Option<(f64, f64, f64)> = None; // (log_ratio, log_lhs, log_rhs)
            for tf in &test_fns {
                let pu = op.apply(&tf.re).expect("operator application");
                let (log_lhs, log_rhs) =
                    weighted_carleman_sides(&logw, &tf.re, &pu, t_over_w, h)
                        .expect("carleman sides");
                let lr = log_lhs - log_rhs;
                if best.is_none_or(|(b, _, _)| lr > b) {
                    best = Some((lr, log_lhs, log_rhs));
                }
            }
            let (log_ratio, log_lhs, log_rhs) = best.expect("nonempty family");
            // Shift both sides so the larger one is 1; the ratio is exact.
            let shift = log_lhs.max(log_rhs);
            let beta = beta_for_record(&v, h, cfg.kappa, scales.degenerate);
            Ok(HRecord {
                h,
                theta: scales.theta,
                omega: scales.omega,
                beta,
                lhs: (log_lhs - shift).exp(),
                rhs: (log_rhs - shift).exp(),
                ratio: log_ratio.exp(),
                log_ratio,
            })
        })
        .collect();

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(sk) => skipped.push(sk),
        }
    }

    let mut pass = !records.is_empty();
    for rec in &records {
        if !(rec.ratio.is_finite() && rec.ratio > 0.0) {
            pass = false;
            flags.push(format!("non-finite ratio at h={}", rec.h));
        }
    }
    for w in records.windows(2) {
        // ladder is descending in h; growth is measured toward smaller h
        let growth = w[1].ratio / w[0].ratio;
        if !(growth <= CARLEMAN_GROWTH_FACTOR) {
            pass = false;
            flags.push(format!(
                "C_emp growth {growth:.3} from h={} to h={} exceeds {CARLEMAN_GROWTH_FACTOR}",
                w[0].h, w[1].h
            ));
        }
    }
    let fit = fit_summary_from_records(&records, FitTarget::Ratio);
    Ok(EstimateReport {
        experiment: ExperimentKind::CarlemanRatio.as_str().into(),
        config_hash: cfg.config_hash.clone(),
        seed: cfg.seed,
        grid: grid_text(&cfg.grid),
        potential: cfg.potential.to_string(),
        records,
        skipped,
        fit,
        alpha_fits: Vec::new(),
        pass,
        flags,
    })
}

fn beta_for_record(v: &ScalarField, h: f64, kappa: f64, degenerate: bool) -> f64 {
    if degenerate {
        return 0.0;
    }
    beta_of_h(v, h, kappa).unwrap_or(0.0)
}

/// Quadrature weight of a region (its discrete area).
pub fn region_weight(grid: &Grid, region: &RegionSpec) -> f64 {
    (0..grid.len())
        .filter(|&i| region.contains(grid, i))
        .map(|i| grid.weight(i))
        .sum()
}

fn masked_energy(u: &ScalarField, h: f64, mask: &[bool]) -> Result<f64> {
    let grid = u.grid();
    let (gx, gy) = apply_gradient(u)?;
    let mut acc = 0.0;
    for i in 0..grid.len() {
        if mask[i] {
            let g = gx.values()[i].powi(2) + gy.values()[i].powi(2);
            acc += grid.weight(i) * (u.values()[i].powi(2) + h * h * g);
        }
    }
    Ok(acc)
}

struct LocalGlobalSample {
    global: f64,
    local: f64,
    source: f64,
}

fn local_global_sample(
    u: &TestFunction,
    f: &TestFunction,
    h: f64,
    mask: &[bool],
) -> Result<LocalGlobalSample> {
    let mut global = 0.0;
    let mut local = 0.0;
    let mut source = 0.0;
    for part in u.parts() {
        let (_, h1) = semiclassical_norm(part, h)?;
        global += h1;
        local += masked_energy(part, h, mask)?;
    }
    for part in f.parts() {
        source += part.norm_sq();
    }
    Ok(LocalGlobalSample { global, local, source })
}

/// Local-to-global concentration experiment on the torus.
pub fn run_local_to_global(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let grid = build_grid(cfg.grid.clone())?;
    if !grid.is_torus() {
        return Err(LabError::BadConfig(
            "local_to_global runs on the periodic torus model".into(),
        ));
    }
    let region = cfg
        .u_region
        .ok_or_else(|| LabError::BadConfig("local_to_global requires a U region".into()))?;
    let family = cfg
        .family
        .clone()
        .ok_or_else(|| LabError::BadConfig("local_to_global requires a test family".into()))?;
    let v = sample_potential(&cfg.potential, &grid)?;
    let mask: Vec<bool> = (0..grid.len()).map(|i| region.contains(&grid, i)).collect();
    let (v_lo, v_hi) = v.min_max();
    let constant_potential = v_lo == v_hi;
    let mut flags = Vec::new();

    if matches!(family, FamilySpec::PlaneWave { .. }) && !constant_potential {
        return Err(LabError::BadConfig(
            "plane_wave family needs a constant potential (it is only then an eigenfunction)"
                .into(),
        ));
    }

    let results: Vec<std::result::Result<HRecord, SkippedRecord>> = cfg
        .h_ladder
        .par_iter()
        .enumerate()
        .map(|(h_idx, &h)| {
            let theta = match select_theta(h, cfg.kappa, cfg.alpha) {
                Ok(t) => t,
                Err(e) => return Err(SkippedRecord { h, reason: e.to_string() }),
            };
            let (omega, beta) = if constant_potential {
                (theta, 0.0)
            } else {
                match beta_of_h(&v, h, cfg.kappa) {
                    Ok(b) => {
                        let radius = cfg.kappa * h.powf(2.0 / 3.0);
                        let w = modulus_of_continuity(&v, radius)
                            .expect("resolved by beta_of_h");
                        (w, b)
                    }
                    Err(e) => return Err(SkippedRecord { h, reason: e.to_string() }),
                }
            };

            // Assemble (u, f = (P_V - E)u) samples for this h.
            let samples: Vec<(TestFunction, TestFunction)> = match &family {
                FamilySpec::PlaneWave { kx, ky } => {
                    let tau = std::f64::consts::TAU;
                    let (lx, ly) = match *grid.spec() {
                        GridSpec::Torus { lx, ly, .. } => (lx, ly),
                        _ => unreachable!(),
                    };
                    let (kx, ky) = (*kx, *ky);
                    let re = ScalarField::from_fn(grid.clone(), move |x, y| {
                        (tau * (kx as f64 * x / lx + ky as f64 * y / ly)).cos()
                    });
                    let im = ScalarField::from_fn(grid.clone(), move |x, y| {
                        (tau * (kx as f64 * x / lx + ky as f64 * y / ly)).sin()
                    });
                    let lambda = torus_mode_eigenvalue(grid.spec(), kx, ky).expect("torus");
                    let e = h * h * lambda + v_lo;
                    let op = SchrodingerOp::new(grid.clone(), h, v.clone(), e)
                        .expect("plane wave operator");
                    let fre = op.apply(&re).expect("apply");
                    let fim = op.apply(&im).expect("apply");
                    vec![(
                        TestFunction { label: "plane_wave".into(), re, im: Some(im) },
                        TestFunction { label: "residual".into(), re: fre, im: Some(fim) },
                    )]
                }
                FamilySpec::Eigen { target, count, tol } => {
                    let op = SchrodingerOp::new(grid.clone(), h, v.clone(), 0.0)
                        .expect("eigen operator");
                    let opts = EigenOptions {
                        seed: cfg.seed.wrapping_add(h_idx as u64),
                        ..EigenOptions::default()
                    };
                    match eigen_near(&op, *target, *count, *tol, &opts) {
                        Ok(pairs) => pairs
                            .into_iter()
                            .enumerate()
                            .map(|(i, (lambda, u))| {
                                let f = op
                                    .apply(&u)
                                    .expect("apply")
                                    .axpy(-lambda, &u)
                                    .expect("residual");
                                (
                                    TestFunction {
                                        label: format!("eigen_{i}@{lambda:.6}"),
                                        re: u,
                                        im: None,
                                    },
                                    TestFunction { label: "residual".into(), re: f, im: None },
                                )
                            })
                            .collect(),
                        Err(e) => {
                            return Err(SkippedRecord { h, reason: e.to_string() });
                        }
                    }
                }
                manufactured => {
                    let energy = match cfg.energy {
                        Some(e) => e,
                        None => {
                            return Err(SkippedRecord {
                                h,
                                reason: "manufactured families need an energy".into(),
                            })
                        }
                    };
                    let support = cfg.support.unwrap_or(RegionSpec::Annulus {
                        r1: 0.0,
                        r2: grid_half_extent(&grid) * 0.9,
                    });
                    let fns =
                        match build_test_family(&grid, manufactured, &support, cfg.seed) {
                            Ok(f) => f,
                            Err(e) => return Err(SkippedRecord { h, reason: e.to_string() }),
                        };
                    let op = SchrodingerOp::new(grid.clone(), h, v.clone(), energy)
                        .expect("manufactured operator");
                    fns.into_iter()
                        .map(|tf| {
                            let f = op.apply(&tf.re).expect("apply");
                            (
                                tf,
                                TestFunction { label: "residual".into(), re: f, im: None },
                            )
                        })
                        .collect()
                }
            };

            let mut best: Option<(f64, LocalGlobalSample)> = None;
            for (u, f) in &samples {
                let s = local_global_sample(u, f, h, &mask).expect("sample");
                let denom = s.local + s.source;
                if denom < 1e-300 {
                    return Err(SkippedRecord {
                        h,
                        reason: "degenerate: local + source below 1e-300".into(),
                    });
                }
                let lr = (s.global / denom).ln();
                if best.as_ref().is_none_or(|(b, _)| lr > *b) {
                    best = Some((lr, s));
                }
            }
            let (log_ratio, s) = best.expect("nonempty family");
            Ok(HRecord {
                h,
                theta,
                omega,
                beta,
                lhs: s.global,
                rhs: s.local + s.source,
                ratio: s.global / (s.local + s.source),
                log_ratio,
            })
        })
        .collect();

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(sk) => skipped.push(sk),
        }
    }

    let mut fit = fit_summary_from_records(&records, FitTarget::LogRatio);
    let betas: Vec<f64> = records.iter().map(|r| r.beta).collect();
    let log_ratios: Vec<f64> = records.iter().map(|r| r.log_ratio).collect();
    let mut pass = !records.is_empty()
        && records.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0);
    if betas.iter().any(|b| *b > 0.0) {
        let (c, resid) = fit_through_origin(&betas, &log_ratios);
        fit.c_beta = Some(c);
        fit.c_beta_residual = Some(resid);
        if resid > FIT_QUALITY_MAX {
            pass = false;
            flags.push(format!("through-origin fit residual {resid:.3} exceeds {FIT_QUALITY_MAX}"));
        }
        for r in &records {
            if r.log_ratio > c * r.beta * (1.0 + cfg.slack) {
                pass = false;
                flags.push(format!(
                    "log_ratio {:.4} at h={} exceeds C·β(h)(1+slack) = {:.4}",
                    r.log_ratio,
                    r.h,
                    c * r.beta * (1.0 + cfg.slack)
                ));
            }
        }
    } else {
        flags.push("beta identically zero (constant potential); no through-origin fit".into());
    }

    Ok(EstimateReport {
        experiment: ExperimentKind::LocalToGlobal.as_str().into(),
        config_hash: cfg.config_hash.clone(),
        seed: cfg.seed,
        grid: grid_text(&cfg.grid),
        potential: cfg.potential.to_string(),
        records,
        skipped,
        fit,
        alpha_fits: Vec::new(),
        pass,
        flags,
    })
}

fn grid_half_extent(grid: &Grid) -> f64 {
    match *grid.spec() {
        GridSpec::Torus { lx, ly, .. } => 0.5 * lx.min(ly),
        GridSpec::Polar { r_outer, .. } => r_outer,
    }
}

/// Hölder scaling study: one local-to-global run per α with the refined
/// mollification scale, plus a power-law fit against the ceiling `(4-α)/3`.
pub fn run_holder_scaling(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    if cfg.alphas.is_empty() {
        return Err(LabError::BadConfig("holder_scaling needs a nonempty alpha list".into()));
    }
    if cfg.h_ladder.len() < 3 {
        return Err(LabError::BadFit("underdetermined fit: need at least 3 h points".into()));
    }
    if !matches!(cfg.potential, PotentialSpec::Weierstrass { .. }) {
        return Err(LabError::BadConfig(
            "holder_scaling is calibrated for weierstrass potentials".into(),
        ));
    }

    let mut all_records = Vec::new();
    let mut all_skipped = Vec::new();
    let mut alpha_fits = Vec::new();
    let mut flags = Vec::new();
    let mut pass = true;

    for &alpha in &cfg.alphas {
        let mut sub = cfg.clone();
        sub.alpha = Some(alpha);
        sub.alphas = Vec::new();
        let rep = run_local_to_global(&sub)?;
        let pairs: Vec<(f64, f64)> = rep
            .records
            .iter()
            .filter(|r| r.log_ratio > 0.0)
            .map(|r| (r.h, r.log_ratio))
            .collect();
        let ceiling = (4.0 - alpha) / 3.0;
        match fit_exponent(&pairs) {
            Ok((a, p, resid)) => {
                let ok = p <= ceiling + cfg.slack;
                if !ok {
                    pass = false;
                    flags.push(format!(
                        "alpha={alpha}: fitted exponent {p:.4} above ceiling {ceiling:.4} + slack"
                    ));
                }
                alpha_fits.push(AlphaFit {
                    alpha,
                    ceiling,
                    amplitude: a,
                    exponent: p,
                    residual: resid,
                    pass: ok,
                });
            }
            Err(e) => {
                pass = false;
                flags.push(format!("alpha={alpha}: {e}"));
            }
        }
        flags.push(format!("alpha={alpha}: {} ladder records", rep.records.len()));
        all_records.extend(rep.records);
        all_skipped.extend(rep.skipped);
    }

    // Summary fit: the α with the largest exponent (the binding one).
    let mut fit = FitSummary::default();
    if let Some(worst) =
        alpha_fits.iter().max_by(|a, b| a.exponent.total_cmp(&b.exponent))
    {
        fit.amplitude = Some(worst.amplitude);
        fit.exponent = Some(worst.exponent);
        fit.residual = Some(worst.residual);
    }
    pass = pass && !alpha_fits.is_empty();

    Ok(EstimateReport {
        experiment: ExperimentKind::HolderScaling.as_str().into(),
        config_hash: cfg.config_hash.clone(),
        seed: cfg.seed,
        grid: grid_text(&cfg.grid),
        potential: cfg.potential.to_string(),
        records: all_records,
        skipped: all_skipped,
        fit,
        alpha_fits,
        pass,
        flags,
    })
}

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

enum FitTarget {
    Ratio,
    LogRatio,
}

fn fit_summary_from_records(records: &[HRecord], target: FitTarget) -> FitSummary {
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| {
            let y = match target {
                FitTarget::Ratio => r.ratio,
                FitTarget::LogRatio => r.log_ratio,
            };
            (y > 0.0).then_some((r.h, y))
        })
        .collect();
    let mut fit = FitSummary::default();
    if let Ok((a, p, resid)) = fit_exponent(&pairs) {
        fit.amplitude = Some(a);
        fit.exponent = Some(p);
        fit.residual = Some(resid);
    }
    fit
}

/// Least squares for `y = A·h^{-p}` in log-log coordinates.
/// Returns `(A, p, rms log-residual)`.
pub fn fit_exponent(pairs: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if pairs.len() < 3 {
        return Err(LabError::BadFit(format!(
            "need at least 3 pairs for the exponent fit, got {}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|(h, y)| !(*h > 0.0) || !(*y > 0.0)) {
        return Err(LabError::BadFit("exponent fit needs strictly positive data".into()));
    }
    let xs: Vec<f64> = pairs.iter().map(|(h, _)| h.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|(_, y)| y.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(LabError::BadFit("degenerate design: all h equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let p = -slope;
    let a = intercept.exp();
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((a, p, rms))
}

/// Through-origin least squares `y = C·x`; returns `(C, ‖y-Cx‖/‖y‖)`.
pub fn fit_through_origin(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let c = sxy / sxx;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (y - c * x).powi(2)).sum();
    let den: f64 = ys.iter().map(|y| y * y).sum();
    (c, if den > 0.0 { (num / den).sqrt() } else { 0.0 })
}

/// Measured constant of the cutoff-commutator bound
/// `∫|[-h²Δ, χ]u|² ≤ β·h²·(∫|u|² + ∫|h∇u|²)`.
pub fn cutoff_commutator_constant(u: &ScalarField, chi: &ScalarField, h: f64) -> Result<f64> {
    let chi_u = chi.mul(u)?;
    let comm = apply_laplacian(&chi_u)?
        .sub(&chi.mul(&apply_laplacian(u)?)?)?
        .scale(-h * h);
    let (_, h1) = semiclassical_norm(u, h)?;
    Ok(comm.norm_sq() / (h * h * h1))
}
