//! The semiclassical Schrödinger operator, its Carleman-conjugated form,
//! commutator quadratic forms, and eigenpair extraction.
//!
//! The conjugated operator is applied as the exact similarity transform of
//! the discrete stencil,
//!
//! ```text
//! (e^{φ/h} P₀ e^{-φ/h} u)(x) = -h² Σ_nbr s(nbr) e^{(φ(x)-φ(nbr))/h} u(nbr) + diag,
//! ```
//!
//! so only exponentials of *neighbour differences* `(φ(x)-φ(nbr))/h ≈ φ'·dx/h`
//! are ever formed; full weights `e^{φ/h}` never materialize. This keeps the
//! application overflow-safe for small `h` and agrees with the direct
//! conjugation to rounding wherever the direct form is representable. The
//! discrete adjoint swaps the sign of the exponent, which makes
//! `⟨P_φ u, v⟩ = ⟨u, P*_φ v⟩` exact under the grid quadrature and turns the
//! commutator identity `⟨[P*_φ, P_φ]u, u⟩ = ‖P_φ u‖² - ‖P*_φ u‖²` into
//! plain arithmetic.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{apply_gradient, apply_laplacian, gradient_energy};
use crate::error::LabError;
use crate::field::ScalarField;
use crate::grid::{Grid, GridSpec};
use crate::potentials::MollifiedPotential;
use crate::Result;

/// `P_V - E = -h²Δ + V - E` on a grid.
#[derive(Debug, Clone)]
pub struct SchrodingerOp {
    grid: Arc<Grid>,
    h: f64,
    v: ScalarField,
    e: f64,
}

impl SchrodingerOp {
    pub fn new(grid: Arc<Grid>, h: f64, v: ScalarField, e: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(LabError::BadOperator(format!("h must be in (0,1), got {h}")));
        }
        if !e.is_finite() {
            return Err(LabError::BadOperator(format!("E must be finite, got {e}")));
        }
        v.check_grid(&grid)?;
        Ok(SchrodingerOp { grid, h, v, e })
    }

    /// The free operator P₀ = -h²Δ.
    pub fn free(grid: Arc<Grid>, h: f64) -> Result<Self> {
        let v = ScalarField::zeros(grid.clone());
        SchrodingerOp::new(grid, h, v, 0.0)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn potential(&self) -> &ScalarField {
        &self.v
    }

    pub fn energy(&self) -> f64 {
        self.e
    }

    pub fn with_energy(&self, e: f64) -> Result<Self> {
        SchrodingerOp::new(self.grid.clone(), self.h, self.v.clone(), e)
    }

    /// (P_V - E) u = -h²Δu + (V - E)u.
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        u.check_grid(&self.grid)?;
        let mut out = vec![0.0; u.len()];
        self.apply_raw(u.values(), &mut out);
        ScalarField::new(self.grid.clone(), out)
    }

    /// Matrix-free application on raw slices; the solver's hot path.
    fn apply_raw(&self, v: &[f64], out: &mut [f64]) {
        let h2 = self.h * self.h;
        let pot = self.v.values();
        let e = self.e;
        match *self.grid.spec() {
            GridSpec::Torus { nx, ny, lx, ly } => {
                let dx2 = (lx / nx as f64).powi(2);
                let dy2 = (ly / ny as f64).powi(2);
                for j in 0..ny {
                    let jp = if j + 1 == ny { 0 } else { j + 1 };
                    let jm = if j == 0 { ny - 1 } else { j - 1 };
                    for i in 0..nx {
                        let ip = if i + 1 == nx { 0 } else { i + 1 };
                        let im = if i == 0 { nx - 1 } else { i - 1 };
                        let me = j * nx + i;
                        let c = v[me];
                        let lap = (v[j * nx + ip] - 2.0 * c + v[j * nx + im]) / dx2
                            + (v[jp * nx + i] - 2.0 * c + v[jm * nx + i]) / dy2;
                        out[me] = -h2 * lap + (pot[me] - e) * c;
                    }
                }
            }
            GridSpec::Polar { nr, nang, r_inner, .. } => {
                let (dr, dth) = self.grid.spacings();
                let dr2 = dr * dr;
                let dth2 = dth * dth;
                let radii = self.grid.radii();
                for k in 0..nang {
                    let kp = if k + 1 == nang { 0 } else { k + 1 };
                    let km = if k == 0 { nang - 1 } else { k - 1 };
                    for j in 0..nr {
                        let me = k * nr + j;
                        let c = v[me];
                        let up = if j + 1 < nr { v[me + 1] } else { 0.0 };
                        let um = if j > 0 { v[me - 1] } else { 0.0 };
                        let face_in = r_inner + j as f64 * dr;
                        let face_out = r_inner + (j + 1) as f64 * dr;
                        let r = radii[j];
                        let lap = (face_out * (up - c) - face_in * (c - um)) / (r * dr2)
                            + (v[kp * nr + j] - 2.0 * c + v[km * nr + j]) / (r * r * dth2);
                        out[me] = -h2 * lap + (pot[me] - e) * c;
                    }
                }
            }
        }
    }

    fn apply_into(&self, u: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(u.len(), 0.0);
        self.apply_raw(u, out);
    }
}

/// Carleman-conjugated operator `e^{φ/h}(P_V - E)e^{-φ/h}` with the weight
/// derivatives precomputed.
#[derive(Debug, Clone)]
pub struct ConjugatedOp {
    op: SchrodingerOp,
    phi: ScalarField,
    grad_phi: (ScalarField, ScalarField),
    lap_phi: ScalarField,
    grad_phi_sq: ScalarField,
}

impl ConjugatedOp {
    pub fn new(op: SchrodingerOp, phi: ScalarField) -> Result<Self> {
        phi.check_grid(op.grid())?;
        let grad_phi = apply_gradient(&phi)?;
        let lap_phi = apply_laplacian(&phi)?;
        let grad_phi_sq = grad_phi.0.zip_map(&grad_phi.1, |a, b| a * a + b * b)?;
        Ok(ConjugatedOp { op, phi, grad_phi, lap_phi, grad_phi_sq })
    }

    /// Conjugated free operator `e^{φ/h} P₀ e^{-φ/h}`.
    pub fn free(grid: Arc<Grid>, h: f64, phi: ScalarField) -> Result<Self> {
        ConjugatedOp::new(SchrodingerOp::free(grid, h)?, phi)
    }

    pub fn base(&self) -> &SchrodingerOp {
        &self.op
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn grad_phi(&self) -> &(ScalarField, ScalarField) {
        &self.grad_phi
    }

    pub fn lap_phi(&self) -> &ScalarField {
        &self.lap_phi
    }

    pub fn grad_phi_sq(&self) -> &ScalarField {
        &self.grad_phi_sq
    }

    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        self.apply_signed(u, 1.0)
    }

    /// Exact discrete adjoint `P*_φ = e^{-φ/h} P₀ e^{φ/h} + (V - E)`.
    pub fn apply_adjoint(&self, u: &ScalarField) -> Result<ScalarField> {
        self.apply_signed(u, -1.0)
    }

    fn apply_signed(&self, u: &ScalarField, sign: f64) -> Result<ScalarField> {
        u.check_grid(self.op.grid())?;
        let grid = self.op.grid();
        let h = self.op.h();
        let h2 = h * h;
        let v = u.values();
        let phi = self.phi.values();
        let pot = self.op.potential().values();
        let e = self.op.energy();
        let mut out = vec![0.0; v.len()];
        // Ratio of the weight between a point and its neighbour.
        let ratio = |me: usize, nbr: usize| ((phi[me] - phi[nbr]) * sign / h).exp();
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
                        let me = j * nx + i;
                        let c = v[me];
                        let lap = (ratio(me, j * nx + ip) * v[j * nx + ip] - 2.0 * c
                            + ratio(me, j * nx + im) * v[j * nx + im])
                            / dx2
                            + (ratio(me, jp * nx + i) * v[jp * nx + i] - 2.0 * c
                                + ratio(me, jm * nx + i) * v[jm * nx + i])
                                / dy2;
                        out[me] = -h2 * lap + (pot[me] - e) * c;
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
                        let me = k * nr + j;
                        let c = v[me];
                        let up = if j + 1 < nr { ratio(me, me + 1) * v[me + 1] } else { 0.0 };
                        let um = if j > 0 { ratio(me, me - 1) * v[me - 1] } else { 0.0 };
                        let face_in = r_inner + j as f64 * dr;
                        let face_out = r_inner + (j + 1) as f64 * dr;
                        let r = radii[j];
                        let radial = (face_out * (up - c) - face_in * (c - um)) / (r * dr2);
                        let angular = (ratio(me, kp * nr + j) * v[kp * nr + j] - 2.0 * c
                            + ratio(me, km * nr + j) * v[km * nr + j])
                            / (r * r * dth2);
                        out[me] = -h2 * (radial + angular) + (pot[me] - e) * c;
                    }
                }
            }
        }
        ScalarField::new(grid.clone(), out)
    }
}

/// Require that `u` vanishes on the outermost 3 grid layers of its domain
/// (near the seam on the torus, near the radial edges on polar grids).
pub fn check_compact_support(u: &ScalarField) -> Result<()> {
    let grid = u.grid();
    let sup = u.linf();
    if sup == 0.0 {
        return Err(LabError::DegenerateTestFunction("test function is identically zero".into()));
    }
    let tol = 1e-10 * sup;
    let (n0, n1) = grid.counts();
    let mut worst = 0.0f64;
    match grid.spec() {
        GridSpec::Torus { .. } => {
            for j in 0..n1 {
                for i in 0..n0 {
                    let edge = i < 3 || i >= n0 - 3 || j < 3 || j >= n1 - 3;
                    if edge {
                        worst = worst.max(u.values()[j * n0 + i].abs());
                    }
                }
            }
        }
        GridSpec::Polar { .. } => {
            for k in 0..n1 {
                for j in 0..n0 {
                    if j < 3 || j >= n0 - 3 {
                        worst = worst.max(u.values()[k * n0 + j].abs());
                    }
                }
            }
        }
    }
    if worst > tol {
        return Err(LabError::SupportViolation(format!(
            "boundary layers carry {worst:e} against sup {sup:e}"
        )));
    }
    Ok(())
}

/// ⟨[P*_φ, P_φ]u, u⟩ evaluated through the norm identity
/// `‖P_φ u‖² - ‖P*_φ u‖²`. Requires compactly supported `u`.
pub fn commutator_form(op: &ConjugatedOp, u: &ScalarField) -> Result<f64> {
    check_compact_support(u)?;
    let pu = op.apply(u)?;
    let psu = op.apply_adjoint(u)?;
    Ok(pu.norm_sq() - psu.norm_sq())
}

/// Report of the separation inequality
/// `(1/h)‖Pu‖² ≥ (1/h)⟨[P*₀_φ, P₀_φ]u, u⟩ - 4‖∇V_θ·∇φ‖_∞ ‖u‖²`.
#[derive(Debug, Clone)]
pub struct SeparationReport {
    pub lhs: f64,
    pub commutator_term: f64,
    pub grad_coupling_sup: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Check the separation inequality for a mollified potential.
///
/// `grad_bound` optionally overrides the discrete sup of |∇V_θ·∇φ|.
pub fn check_separation_inequality(
    grid: &Arc<Grid>,
    h: f64,
    v_theta: &MollifiedPotential,
    e: f64,
    phi: &ScalarField,
    u: &ScalarField,
    grad_bound: Option<f64>,
) -> Result<SeparationReport> {
    if !(v_theta.theta > 0.0) {
        return Err(LabError::NonMollified(
            "the separation inequality needs ∇V_θ; mollify the potential first".into(),
        ));
    }
    check_compact_support(u)?;
    let op = SchrodingerOp::new(grid.clone(), h, v_theta.field.clone(), e)?;
    let conj = ConjugatedOp::new(op, phi.clone())?;
    let lhs = conj.apply(u)?.norm_sq() / h;

    let free = ConjugatedOp::free(grid.clone(), h, phi.clone())?;
    let commutator_term = (free.apply(u)?.norm_sq() - free.apply_adjoint(u)?.norm_sq()) / h;

    let grad_coupling_sup = match grad_bound {
        Some(b) => b,
        None => {
            let (vx, vy) = apply_gradient(&v_theta.field)?;
            let (px, py) = (&free.grad_phi.0, &free.grad_phi.1);
            vx.values()
                .iter()
                .zip(vy.values())
                .zip(px.values().iter().zip(py.values()))
                .map(|((a, b), (c, d))| (a * c + b * d).abs())
                .fold(0.0f64, f64::max)
        }
    };
    let rhs = commutator_term - 4.0 * grad_coupling_sup * u.norm_sq();
    let margin = lhs - rhs;
    let pass = margin >= -1e-9 * (1.0 + lhs.abs());
    Ok(SeparationReport { lhs, commutator_term, grad_coupling_sup, rhs, margin, pass })
}

/// Semiclassical norms: `(∫|u|², ∫|u|² + h²∫|∇u|²)`.
pub fn semiclassical_norm(u: &ScalarField, h: f64) -> Result<(f64, f64)> {
    let l2 = u.norm_sq();
    Ok((l2, l2 + h * h * gradient_energy(u)?))
}

// ---------------------------------------------------------------------------
// Shift-invert eigensolver
// ---------------------------------------------------------------------------

/// Solver knobs; all runs with the same options and seed are deterministic.
#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub seed: u64,
    pub lanczos_steps: usize,
    pub restarts: usize,
    pub minres_tol: f64,
    pub minres_max_iters: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            seed: 2024,
            lanczos_steps: 48,
            restarts: 4,
            minres_tol: 1e-11,
            minres_max_iters: 20_000,
        }
    }
}

struct Workspace<'a> {
    weights: &'a [f64],
}

impl Workspace<'_> {
    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(self.weights).map(|((x, y), w)| x * y * w).sum()
    }

    fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }
}

/// Unpreconditioned MINRES for `(A - σ)x = b` with the quadrature inner
/// product. Returns the iterate and its relative residual estimate.
fn minres_shifted(
    op: &SchrodingerOp,
    sigma: f64,
    b: &[f64],
    tol: f64,
    max_iters: usize,
    ws: &Workspace,
) -> (Vec<f64>, f64) {
    let n = b.len();
    let mut scratch = Vec::with_capacity(n);
    let apply = |x: &[f64], out: &mut Vec<f64>, tmp: &mut Vec<f64>| {
        op.apply_into(x, tmp);
        out.clear();
        out.extend(tmp.iter().zip(x).map(|(ax, xx)| ax - sigma * xx));
    };

    let mut x = vec![0.0; n];
    let beta1 = ws.norm(b);
    if beta1 == 0.0 {
        return (x, 0.0);
    }
    let mut v_prev = vec![0.0; n];
    let mut v: Vec<f64> = b.iter().map(|bi| bi / beta1).collect();
    let mut w = vec![0.0; n];
    let mut w_prev = vec![0.0; n];
    let mut beta = beta1;
    let (mut c, mut c_prev) = (1.0f64, 1.0f64);
    let (mut s, mut s_prev) = (0.0f64, 0.0f64);
    let mut eta = beta1;
    let mut p = Vec::with_capacity(n);
    let mut rel = 1.0;

    for _ in 0..max_iters {
        apply(&v, &mut p, &mut scratch);
        let alpha = ws.dot(&v, &p);
        for i in 0..n {
            p[i] -= alpha * v[i] + beta * v_prev[i];
        }
        let beta_next = ws.norm(&p);

        let delta = c * alpha - c_prev * s * beta;
        let rho1 = (delta * delta + beta_next * beta_next).sqrt();
        let rho2 = s * alpha + c_prev * c * beta;
        let rho3 = s_prev * beta;
        if rho1 == 0.0 {
            break;
        }
        let c_next = delta / rho1;
        let s_next = beta_next / rho1;

        for i in 0..n {
            let wn = (v[i] - rho3 * w_prev[i] - rho2 * w[i]) / rho1;
            w_prev[i] = w[i];
            w[i] = wn;
            x[i] += c_next * eta * wn;
        }
        eta *= -s_next;
        rel = eta.abs() / beta1;
        if rel <= tol || beta_next <= f64::EPSILON * beta1 {
            break;
        }
        for i in 0..n {
            let vn = p[i] / beta_next;
            v_prev[i] = v[i];
            v[i] = vn;
        }
        beta = beta_next;
        c_prev = c;
        c = c_next;
        s_prev = s;
        s = s_next;
    }
    (x, rel)
}

/// Cyclic Jacobi eigensolver for a small dense symmetric matrix.
/// Returns (eigenvalues, eigenvectors as columns).
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p][q] * a[p][q];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = cs * vkp - sn * vkq;
                    v[k][q] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    let evals = (0..n).map(|i| a[i][i]).collect();
    (evals, v)
}

/// Eigenpairs of `P_V` nearest `e_target` by shift-invert Lanczos with full
/// reorthogonalization and MINRES inner solves. Each returned pair satisfies
/// `‖(P_V - λ)u‖ ≤ tol·‖u‖` and `‖u‖ = 1`; vectors are mutually orthonormal.
pub fn eigen_near(
    op: &SchrodingerOp,
    e_target: f64,
    count: usize,
    tol: f64,
    opts: &EigenOptions,
) -> Result<Vec<(f64, ScalarField)>> {
    if !op.grid().is_torus() {
        return Err(LabError::Unsupported(
            "eigen_near runs on the symmetric torus operator".into(),
        ));
    }
    if count < 1 || !(tol > 0.0) {
        return Err(LabError::BadOperator(format!(
            "need count >= 1 and tol > 0, got {count}, {tol}"
        )));
    }
    let grid = op.grid().clone();
    let n = grid.len();
    let ws = Workspace { weights: grid.weights() };
    let mut accepted: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut best_residual = f64::INFINITY;
    let mut scratch = Vec::with_capacity(n);

    for restart in 0..opts.restarts {
        // Seeded start vector, locked against everything already accepted.
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(restart as u64));
        let mut v0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut v0, &accepted, &ws);
        let nrm = ws.norm(&v0);
        if nrm == 0.0 {
            continue;
        }
        v0.iter_mut().for_each(|x| *x /= nrm);

        let m = opts.lanczos_steps.min(n);
        let mut basis: Vec<Vec<f64>> = vec![v0];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        for k in 0..m {
            let (mut w, _rel) =
                minres_shifted(op, e_target, &basis[k], opts.minres_tol, opts.minres_max_iters, &ws);
            orthogonalize(&mut w, &accepted, &ws);
            let alpha = ws.dot(&w, &basis[k]);
            for i in 0..n {
                w[i] -= alpha * basis[k][i];
                if k > 0 {
                    w[i] -= betas[k - 1] * basis[k - 1][i];
                }
            }
            // Full reorthogonalization, twice.
            for _ in 0..2 {
                for b in &basis {
                    let proj = ws.dot(&w, b);
                    for i in 0..n {
                        w[i] -= proj * b[i];
                    }
                }
            }
            alphas.push(alpha);
            let beta = ws.norm(&w);
            if beta < 1e-12 * alphas[0].abs().max(1.0) {
                break;
            }
            betas.push(beta);
            w.iter_mut().for_each(|x| *x /= beta);
            basis.push(w);
        }
        let steps = alphas.len();
        if steps == 0 {
            continue;
        }

        // Ritz pairs of the tridiagonal projection of (A - σ)⁻¹.
        let mut t = vec![vec![0.0; steps]; steps];
        for i in 0..steps {
            t[i][i] = alphas[i];
            if i + 1 < steps {
                t[i][i + 1] = betas[i];
                t[i + 1][i] = betas[i];
            }
        }
        let (mus, vecs) = jacobi_eigen(t);
        let mut order: Vec<usize> = (0..steps).collect();
        order.sort_by(|&a, &b| mus[b].abs().total_cmp(&mus[a].abs()));

        for &idx in &order {
            if accepted.len() >= count {
                break;
            }
            if mus[idx].abs() < 1e-300 {
                continue;
            }
            let mut y = vec![0.0; n];
            for (k, b) in basis.iter().take(steps).enumerate() {
                let coef = vecs[k][idx];
                for i in 0..n {
                    y[i] += coef * b[i];
                }
            }
            orthogonalize(&mut y, &accepted, &ws);
            let nrm = ws.norm(&y);
            if nrm < 1e-8 {
                continue;
            }
            y.iter_mut().for_each(|x| *x /= nrm);
            // Rayleigh quotient sharpens the shift-invert estimate.
            op.apply_into(&y, &mut scratch);
            let lambda = ws.dot(&scratch, &y);
            let mut res = 0.0;
            for i in 0..n {
                let r = scratch[i] - lambda * y[i];
                res += r * r * ws.weights[i];
            }
            let res = res.sqrt();
            best_residual = best_residual.min(res);
            if res <= tol {
                accepted.push((lambda, y));
            }
        }
        if accepted.len() >= count {
            break;
        }
    }

    if accepted.len() < count {
        return Err(LabError::NonConvergence { best_residual });
    }
    accepted.sort_by(|a, b| {
        (a.0 - e_target)
            .abs()
            .total_cmp(&(b.0 - e_target).abs())
            .then(a.0.total_cmp(&b.0))
    });
    accepted
        .into_iter()
        .take(count)
        .map(|(l, v)| Ok((l, ScalarField::new(grid.clone(), v)?)))
        .collect()
}

fn orthogonalize(v: &mut [f64], against: &[(f64, Vec<f64>)], ws: &Workspace) {
    for _ in 0..2 {
        for (_, a) in against {
            let proj = ws.dot(v, a);
            for i in 0..v.len() {
                v[i] -= proj * a[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, make_cutoff, GridSpec};
    use crate::potentials::{build_mollifier, mollify_tagged, sample_potential, MollifierProfile, PotentialSpec};
    use crate::weights::{build_weight, WeightSpec};
    use std::f64::consts::TAU;

    fn unit_torus(n: usize) -> Arc<Grid> {
        build_grid(GridSpec::Torus { nx: n, ny: n, lx: 1.0, ly: 1.0 }).unwrap()
    }

    /// Gaussian bump with bit-exact compact support in an annulus around the
    /// torus center.
    fn supported_bump(grid: &Arc<Grid>, center: (f64, f64), sigma: f64) -> ScalarField {
        let chi_in = make_cutoff(grid, 0.12, 0.18, (0.5, 0.5)).unwrap().field;
        let chi_out = make_cutoff(grid, 0.38, 0.44, (0.5, 0.5)).unwrap().field;
        let g = ScalarField::from_fn(grid.clone(), |x, y| {
            let dx = x - center.0;
            let dy = y - center.1;
            (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
        });
        let ann = chi_in.zip_map(&chi_out, |a, b| a * (1.0 - b)).unwrap();
        g.mul(&ann).unwrap()
    }

    #[test]
    fn plane_wave_is_discrete_eigenfunction() {
        let n = 32;
        let g = unit_torus(n);
        let h = 0.1;
        let e = 0.2;
        let op = SchrodingerOp::new(g.clone(), h, ScalarField::zeros(g.clone()), e).unwrap();
        let lambda = crate::calculus::torus_mode_eigenvalue(g.spec(), 1, 0).unwrap();
        for phase in [0.0, -std::f64::consts::FRAC_PI_2] {
            let u = ScalarField::from_fn(g.clone(), |x, _| (TAU * x + phase).cos());
            let pu = op.apply(&u).unwrap();
            let factor = h * h * lambda - e;
            for (p, uu) in pu.values().iter().zip(u.values()) {
                assert!((p - factor * uu).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn constant_potential_on_constants() {
        let g = unit_torus(16);
        let op =
            SchrodingerOp::new(g.clone(), 0.3, ScalarField::constant(g.clone(), 2.0), 0.5).unwrap();
        let u = ScalarField::constant(g, 1.0);
        let pu = op.apply(&u).unwrap();
        for p in pu.values() {
            assert!((p - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_is_linear() {
        use rand::{Rng, SeedableRng};
        let g = unit_torus(24);
        let v = sample_potential(&PotentialSpec::Checkerboard { cell: 0.25, jump: 1.0 }, &g)
            .unwrap();
        let op = SchrodingerOp::new(g.clone(), 0.1, v, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = ScalarField::from_fn(g.clone(), |_, _| rng.gen_range(-1.0..1.0));
        let w = ScalarField::from_fn(g.clone(), |_, _| rng.gen_range(-1.0..1.0));
        let (a, b) = (1.3, -0.7);
        let lhs = op.apply(&u.scale(a).add(&w.scale(b)).unwrap()).unwrap();
        let rhs = op.apply(&u).unwrap().scale(a).add(&op.apply(&w).unwrap().scale(b)).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn schrodinger_symmetric_on_torus() {
        use rand::{Rng, SeedableRng};
        let g = unit_torus(20);
        let v = sample_potential(&PotentialSpec::PiecewiseRandom { cell: 0.25, amplitude: 1.0, seed: 1 }, &g)
            .unwrap();
        let op = SchrodingerOp::new(g.clone(), 0.2, v, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let u = ScalarField::from_fn(g.clone(), |_, _| rng.gen_range(-1.0..1.0));
            let w = ScalarField::from_fn(g.clone(), |_, _| rng.gen_range(-1.0..1.0));
            let a = op.apply(&u).unwrap().inner(&w).unwrap();
            let b = u.inner(&op.apply(&w).unwrap()).unwrap();
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn conjugation_with_zero_weight_is_identity() {
        let g = unit_torus(24);
        let v = sample_potential(&PotentialSpec::sine_x(1.0, 1), &g).unwrap();
        let op = SchrodingerOp::new(g.clone(), 0.15, v, 0.2).unwrap();
        let conj = ConjugatedOp::new(op.clone(), ScalarField::zeros(g.clone())).unwrap();
        let u = ScalarField::from_fn(g, |x, y| (TAU * x).cos() + (TAU * y).sin());
        let a = op.apply(&u).unwrap();
        let b = conj.apply(&u).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn two_path_conjugation_agreement_in_moderate_regime() {
        use rand::{Rng, SeedableRng};
        // max |φ/h| ≈ 14: the direct path e^{φ/h} P (e^{-φ/h} u) is still
        // representable and must match the factored application to rounding.
        let g = unit_torus(32);
        let h = 0.25;
        let phi = ScalarField::from_fn(g.clone(), |x, y| {
            1.5 * ((TAU * x).sin() + 0.7 * (TAU * y).cos())
        });
        assert!(phi.linf() / h <= 20.0);
        let v = sample_potential(&PotentialSpec::sine_x(0.5, 1), &g).unwrap();
        let op = SchrodingerOp::new(g.clone(), h, v, 0.1).unwrap();
        let conj = ConjugatedOp::new(op.clone(), phi.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u = ScalarField::from_fn(g.clone(), |_, _| rng.gen_range(-1.0..1.0));
            let direct = {
                let wexp = phi.map(|p| (p / h).exp());
                let winv = phi.map(|p| (-p / h).exp());
                op.apply(&u.mul(&winv).unwrap()).unwrap().mul(&wexp).unwrap()
            };
            let fast = conj.apply(&u).unwrap();
            let scale = direct.linf().max(1.0);
            for (a, b) in fast.values().iter().zip(direct.values()) {
                assert!((a - b).abs() <= 1e-8 * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn factored_form_tracks_continuum_expansion() {
        // -h²Δ + 2h∇φ·∇ + hΔφ - |∇φ|² agrees with the factored application
        // up to the O(dx²/h) consistency gap between the two discretizations
        // (the tight oracle is the two-path test above).
        let g = unit_torus(128);
        let h = 0.2;
        let phi = ScalarField::from_fn(g.clone(), |x, _| 0.5 * (TAU * x).sin());
        let conj = ConjugatedOp::free(g.clone(), h, phi.clone()).unwrap();
        let u = ScalarField::from_fn(g.clone(), |x, y| (TAU * x).cos() * (TAU * y).sin());
        let fast = conj.apply(&u).unwrap();
        let expanded = {
            let lap = apply_laplacian(&u).unwrap();
            let (ux, uy) = apply_gradient(&u).unwrap();
            let (px, py) = conj.grad_phi();
            let transport = px.mul(&ux).unwrap().add(&py.mul(&uy).unwrap()).unwrap();
            let zeroth = conj
                .lap_phi()
                .scale(h)
                .sub(conj.grad_phi_sq())
                .unwrap()
                .mul(&u)
                .unwrap();
            lap.scale(-h * h)
                .add(&transport.scale(2.0 * h))
                .unwrap()
                .add(&zeroth)
                .unwrap()
        };
        let scale = expanded.linf();
        for (a, b) in fast.values().iter().zip(expanded.values()) {
            assert!((a - b).abs() <= 1e-2 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn adjoint_consistency() {
        use rand::{Rng, SeedableRng};
        let g = unit_torus(24);
        let h = 0.1;
        let phi = build_weight(&WeightSpec::radial_exp(1.0), &g, 1.0)
            .unwrap()
            .scale(0.5); // turn the log-weight 2φ/h (h=1) back into φ
        let v = sample_potential(&PotentialSpec::sine_x(0.7, 1), &g).unwrap();
        let op = SchrodingerOp::new(g.clone(), h, v, 0.4).unwrap();
        let conj = ConjugatedOp::new(op, phi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let u = ScalarField::from_fn(g.clone(), |_, _| rng.gen_range(-1.0..1.0));
            let w = ScalarField::from_fn(g.clone(), |_, _| rng.gen_range(-1.0..1.0));
            let a = conj.apply(&u).unwrap().inner(&w).unwrap();
            let b = u.inner(&conj.apply_adjoint(&w).unwrap()).unwrap();
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn commutator_examples() {
        let g = unit_torus(128);
        let h = 0.1;
        let u = supported_bump(&g, (0.5, 0.22), 0.04);
        // φ ≡ 0: P is self-adjoint, the commutator form vanishes.
        let conj0 = ConjugatedOp::free(g.clone(), h, ScalarField::zeros(g.clone())).unwrap();
        let c0 = commutator_form(&conj0, &u).unwrap();
        assert!(c0.abs() < 1e-12 * (1.0 + u.norm_sq()));
        // Radial exponential weight: positive on a supported bump, matching
        // the sign the subelliptic certificate predicts.
        let log_w = build_weight(&WeightSpec::radial_exp(1.0), &g, 1.0).unwrap();
        let phi = log_w.scale(0.5);
        let conj = ConjugatedOp::free(g.clone(), h, phi).unwrap();
        let c = commutator_form(&conj, &u).unwrap();
        assert!(c > 0.0, "commutator form {c}");
        // Identity route: ⟨P*(Pu) - P(P*u), u⟩ equals the norm difference.
        let pu = conj.apply(&u).unwrap();
        let psu = conj.apply_adjoint(&u).unwrap();
        let direct = conj.apply_adjoint(&pu).unwrap().inner(&u).unwrap()
            - conj.apply(&psu).unwrap().inner(&u).unwrap();
        assert!((direct - c).abs() <= 1e-10 * (1.0 + c.abs()));
        // Antisymmetry: swapping the roles flips the sign.
        let swapped = psu.norm_sq() - pu.norm_sq();
        assert!((swapped + c).abs() <= 1e-10 * (1.0 + c.abs()));
    }

    #[test]
    fn commutator_rejects_unsupported_u() {
        let g = unit_torus(32);
        let conj = ConjugatedOp::free(g.clone(), 0.1, ScalarField::zeros(g.clone())).unwrap();
        let u = ScalarField::constant(g, 1.0);
        assert!(matches!(
            commutator_form(&conj, &u),
            Err(LabError::SupportViolation(_))
        ));
    }

    #[test]
    fn separation_inequality_with_constant_potential_and_zero_weight() {
        let g = unit_torus(64);
        let h = 0.1;
        let kernel = build_mollifier(MollifierProfile::Cosine);
        let v = ScalarField::constant(g.clone(), 1.0);
        let vt = mollify_tagged(&v, 0.1, &kernel).unwrap();
        let u = supported_bump(&g, (0.5, 0.25), 0.04);
        let rep = check_separation_inequality(
            &g,
            h,
            &vt,
            1.0,
            &ScalarField::zeros(g.clone()),
            &u,
            None,
        )
        .unwrap();
        // ∇V = 0 and φ = 0 reduce the inequality to ‖Pu‖²/h ≥ 0.
        assert!(rep.pass);
        assert!(rep.lhs >= 0.0);
        assert!((rep.margin - rep.lhs).abs() <= 1e-9 * (1.0 + rep.lhs));
    }

    #[test]
    fn separation_inequality_on_mollified_checkerboard() {
        let g = unit_torus(128);
        let h = 0.1;
        let kernel = build_mollifier(MollifierProfile::Cosine);
        let v = sample_potential(&PotentialSpec::Checkerboard { cell: 0.25, jump: 1.0 }, &g)
            .unwrap();
        let vt = mollify_tagged(&v, 0.1, &kernel).unwrap();
        let phi = build_weight(&WeightSpec::radial_exp(1.0), &g, 1.0).unwrap().scale(0.5);
        let u = supported_bump(&g, (0.5, 0.24), 0.05);
        let rep = check_separation_inequality(&g, h, &vt, 0.5, &phi, &u, None).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn separation_inequality_requires_mollified_potential() {
        let g = unit_torus(32);
        let v = ScalarField::constant(g.clone(), 1.0);
        let vt = MollifiedPotential { field: v, theta: 0.0 };
        let u = supported_bump(&g, (0.5, 0.25), 0.05);
        let err = check_separation_inequality(
            &g,
            0.1,
            &vt,
            0.0,
            &ScalarField::zeros(g.clone()),
            &u,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, LabError::NonMollified(_)));
    }

    #[test]
    fn semiclassical_norm_examples() {
        let g = unit_torus(64);
        let one = ScalarField::constant(g.clone(), 1.0);
        let (l2, h1) = semiclassical_norm(&one, 0.37).unwrap();
        assert!((l2 - 1.0).abs() < 1e-13);
        assert!((h1 - 1.0).abs() < 1e-13);

        let h = 0.1;
        let u = ScalarField::from_fn(g.clone(), |x, _| (TAU * x).sin());
        let (l2, h1) = semiclassical_norm(&u, h).unwrap();
        assert!((l2 - 0.5).abs() < 1e-13);
        let dx = 1.0 / 64.0;
        let s = (TAU * dx).sin() / dx; // discrete differentiation symbol
        let expect = 0.5 * (1.0 + h * h * s * s);
        assert!((h1 - expect).abs() < 1e-12, "{h1} vs {expect}");
        // Against the continuum value the gap is the symbol correction.
        assert!((h1 - 0.5 * (1.0 + 4.0 * std::f64::consts::PI.powi(2) * h * h)).abs() < 2e-3);

        let (l2b, h1b) = semiclassical_norm(&u.scale(2.0), h).unwrap();
        assert!((l2b - 4.0 * l2).abs() < 1e-12);
        assert!((h1b - 4.0 * h1).abs() < 1e-12);
    }

    #[test]
    fn eigen_near_free_torus() {
        let n = 32;
        let g = unit_torus(n);
        let h = 0.1;
        let op = SchrodingerOp::new(g.clone(), h, ScalarField::zeros(g.clone()), 0.0).unwrap();
        let tol = 1e-8;
        let pairs = eigen_near(&op, 0.4, 2, tol, &EigenOptions::default()).unwrap();
        let lambda = h * h * crate::calculus::torus_mode_eigenvalue(g.spec(), 1, 0).unwrap();
        assert!((lambda - 0.3935174573425065).abs() < 1e-12);
        for (l, u) in &pairs {
            assert!((l - lambda).abs() < 1e-7, "eigenvalue {l} vs {lambda}");
            // Residual contract.
            let r = op.apply(u).unwrap().axpy(-*l, u).unwrap();
            assert!(r.norm_sq().sqrt() <= tol * u.norm_sq().sqrt() * (1.0 + 1e-12));
            assert!((u.norm_sq() - 1.0).abs() < 1e-10);
        }
        // Degenerate pair: orthonormal within 1e-8.
        let cross = pairs[0].1.inner(&pairs[1].1).unwrap();
        assert!(cross.abs() < 1e-8, "cross {cross}");
    }

    #[test]
    fn eigen_near_is_deterministic() {
        let g = unit_torus(16);
        let v = sample_potential(&PotentialSpec::Checkerboard { cell: 0.25, jump: 1.0 }, &g)
            .unwrap();
        let op = SchrodingerOp::new(g.clone(), 0.2, v, 0.0).unwrap();
        let opts = EigenOptions::default();
        let a = eigen_near(&op, 0.8, 1, 1e-7, &opts).unwrap();
        let b = eigen_near(&op, 0.8, 1, 1e-7, &opts).unwrap();
        assert_eq!(a[0].0, b[0].0);
        assert_eq!(a[0].1.values(), b[0].1.values());
    }

    #[test]
    fn eigen_near_second_order_convergence() {
        // The solver's ground mode for V = 0 converges to the continuum
        // value 4π²h² at second order in the spacing.
        let h = 0.1;
        let continuum = 4.0 * std::f64::consts::PI.powi(2) * h * h;
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let g = unit_torus(n);
            let op = SchrodingerOp::new(g.clone(), h, ScalarField::zeros(g.clone()), 0.0).unwrap();
            let pairs = eigen_near(&op, continuum, 1, 1e-9, &EigenOptions::default()).unwrap();
            errs.push((pairs[0].0 - continuum).abs());
        }
        assert!(errs[0] / errs[1] >= 3.5, "{errs:?}");
        assert!(errs[1] / errs[2] >= 3.5, "{errs:?}");
    }

    #[test]
    fn eigen_near_reports_nonconvergence() {
        let g = unit_torus(16);
        let op = SchrodingerOp::new(g.clone(), 0.2, ScalarField::zeros(g.clone()), 0.0).unwrap();
        let opts = EigenOptions { lanczos_steps: 2, restarts: 1, ..EigenOptions::default() };
        let err = eigen_near(&op, 0.8, 6, 1e-14, &opts).unwrap_err();
        assert!(matches!(err, LabError::NonConvergence { .. }));
    }
}
