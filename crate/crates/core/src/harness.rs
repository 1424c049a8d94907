//! Experiments that measure the constants in the a-priori estimates.
//!
//! Every inequality `lhs ≤ N · rhs` is reported as a row with the observed
//! ratio `N_obs = lhs / rhs`. The scientific content is how `N_obs` moves
//! with `λ`, the kernel and `p`; see [`EstimateReport::stability`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Error, Result};
use crate::grid::{Extension, ScalarField};
use crate::kernel::{Decomposition, Kernel, KernelSpec};
use crate::norms::{
    holder_seminorm, lp_norm, lp_norm_on, oscillation, sobolev_seminorm, weighted_l1, weighted_lp, Ball,
    OscillationMode, WeightOmega,
};
use crate::operator::{apply_spectral, gradient, riesz_apply};
use crate::quad::{power_integral, GaussLegendre};
use crate::solver::{solve, solve_with_drift};
use crate::symbol::{SymbolEvaluator, SymbolTable};

/// Max/min spread allowed across a `λ` sweep.
pub const STABILITY_FACTOR: f64 = 10.0;

/// Largest grid accepted by [`identity_suite`].
pub const IDENTITY_MAX_NODES: usize = 64;

/// Gate on the mean-oscillation ratio, fixed before any run.
pub const MEAN_OSC_BOUND: f64 = 10.0;

/// `ε` values swept in the `σ = 1` local estimate.
pub const LOCAL_EPS: [f64; 3] = [0.5, 0.1, 0.02];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimateId {
    /// `‖u‖_{Ḣ^σ_2} + √λ‖u‖_{Ḣ^{σ/2}_2} + λ‖u‖_2 ≤ N‖f‖_2`.
    L2,
    /// The same with `p ≠ 2`.
    Lp,
    /// `‖Lu‖_p ≤ N‖u‖_{Ḣ^σ_p}`.
    Continuity,
    /// [`EstimateId::Lp`] for `L + b·∇` with the extra term `‖b·∇u‖_p`.
    Drift,
}

impl EstimateId {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateId::L2 => "l2",
            EstimateId::Lp => "lp",
            EstimateId::Continuity => "continuity",
            EstimateId::Drift => "drift",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateRow {
    pub estimate_id: EstimateId,
    /// Index into [`EstimateConfig::kernels`].
    pub kernel: usize,
    /// Index into [`EstimateConfig::sources`].
    pub source: usize,
    pub lambda: f64,
    pub p: f64,
    pub params: String,
    pub lhs: f64,
    pub rhs: f64,
    pub n_obs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityRow {
    pub estimate_id: EstimateId,
    pub kernel: usize,
    pub source: usize,
    pub p: f64,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EstimateReport {
    pub rows: Vec<EstimateRow>,
}

impl EstimateReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Groups rows by `(estimate, kernel, source, p)` and reports the spread
    /// of `N_obs` over the `λ` sweep.
    pub fn stability(&self) -> Vec<StabilityRow> {
        let mut out: Vec<StabilityRow> = Vec::new();
        for r in &self.rows {
            let slot = out.iter_mut().find(|s| {
                s.estimate_id == r.estimate_id && s.kernel == r.kernel && s.source == r.source && s.p == r.p
            });
            match slot {
                Some(s) => {
                    s.min = s.min.min(r.n_obs);
                    s.max = s.max.max(r.n_obs);
                }
                None => out.push(StabilityRow {
                    estimate_id: r.estimate_id,
                    kernel: r.kernel,
                    source: r.source,
                    p: r.p,
                    min: r.n_obs,
                    max: r.n_obs,
                    spread: 1.0,
                    pass: true,
                }),
            }
        }
        for s in &mut out {
            s.spread = spread(s.min, s.max);
            s.pass = s.spread < STABILITY_FACTOR;
        }
        out
    }
}

fn spread(min: f64, max: f64) -> f64 {
    if min > 0.0 && max.is_finite() {
        max / min
    } else if max == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Debug)]
pub struct EstimateConfig {
    pub kernels: Vec<KernelSpec>,
    pub lambdas: Vec<f64>,
    /// Exponents; each `p ≠ 2` should come with `p/(p-1)`.
    pub ps: Vec<f64>,
    /// Right-hand sides, all on one grid.
    pub sources: Vec<ScalarField>,
    /// Adds [`EstimateId::Drift`] rows with `b` from [`Kernel::drift_vector`] (`σ ≠ 1`).
    pub drift: bool,
    pub tol: f64,
}

impl EstimateConfig {
    /// Appends the dual exponent of every `p` that is missing.
    pub fn with_dual_exponents(mut self) -> Self {
        let mut extra = Vec::new();
        for &p in &self.ps {
            let q = p / (p - 1.0);
            if !self.ps.iter().chain(&extra).any(|v| (v - q).abs() < 1e-12) {
                extra.push(q);
            }
        }
        self.ps.extend(extra);
        self
    }
}

/// Left side of the `L_p` estimate: `‖u‖_{Ḣ^σ_p} + √λ‖u‖_{Ḣ^{σ/2}_p} + λ‖u‖_p`.
pub fn resolvent_lhs(u: &ScalarField, sigma: f64, lambda: f64, p: f64) -> Result<f64> {
    Ok(sobolev_seminorm(u, sigma, p, true)?
        + libm::sqrt(lambda) * sobolev_seminorm(u, sigma / 2.0, p, true)?
        + lambda * lp_norm(u, p)?)
}

pub fn estimate_suite(config: &EstimateConfig) -> Result<EstimateReport> {
    let Some(first) = config.sources.first() else {
        return Ok(EstimateReport::default());
    };
    let grid = *first.grid();
    for s in &config.sources {
        if *s.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }
    let mut rows = Vec::new();
    for (ki, spec) in config.kernels.iter().enumerate() {
        let kernel = spec.kernel();
        let sigma = kernel.sigma();
        let table = SymbolTable::new(kernel, &grid, config.tol)?;
        let drift = if config.drift && sigma != 1.0 { Some(kernel.drift_vector()?) } else { None };
        for (si, f) in config.sources.iter().enumerate() {
            for &lambda in &config.lambdas {
                let u = solve(&table, lambda, f)?.u;
                let lu = apply_spectral(&table, &u)?;
                let ud = match drift {
                    Some(b) => Some((b, solve_with_drift(&table, &b, lambda, f)?.u)),
                    None => None,
                };
                for &p in &config.ps {
                    let fp = lp_norm(f, p)?;
                    if fp == 0.0 {
                        continue;
                    }
                    let params = format!("kernel={ki},source={si},sigma={sigma},lambda={lambda},p={p}");
                    let id = if p == 2.0 { EstimateId::L2 } else { EstimateId::Lp };
                    rows.push(row(id, ki, si, lambda, p, &params, resolvent_lhs(&u, sigma, lambda, p)?, fp));
                    let hs = sobolev_seminorm(&u, sigma, p, true)?;
                    if hs > 0.0 {
                        rows.push(row(EstimateId::Continuity, ki, si, lambda, p, &params, lp_norm(&lu, p)?, hs));
                    }
                    if let Some((b, v)) = &ud {
                        let grad = gradient(v);
                        let mut bg = ScalarField::zeros(grid, v.extension());
                        for (a, g) in grad.iter().enumerate() {
                            bg = bg.combine(1.0, g, b[a])?;
                        }
                        let lhs = resolvent_lhs(v, sigma, lambda, p)? + lp_norm(&bg, p)?;
                        rows.push(row(EstimateId::Drift, ki, si, lambda, p, &params, lhs, fp));
                    }
                }
            }
        }
    }
    Ok(EstimateReport { rows })
}

#[allow(clippy::too_many_arguments)]
fn row(id: EstimateId, kernel: usize, source: usize, lambda: f64, p: f64, params: &str, lhs: f64, rhs: f64) -> EstimateRow {
    let n_obs = lhs / rhs;
    EstimateRow {
        estimate_id: id,
        kernel,
        source,
        lambda,
        p,
        params: params.into(),
        lhs,
        rhs,
        n_obs,
        pass: n_obs.is_finite(),
    }
}

// ---------------------------------------------------------------------------
// L2 identities

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdentityId {
    /// `-2∫u Lu = ∬ (u(x+y) - u(x))² K(y) dy dx`.
    Energy,
    /// `4∫|L_e u|² = ∭ (u(x+y+z) - u(x+y) - u(x+z) + u(x))² K_e(y) K_e(z)`.
    Quadruple,
    /// `∫ L_e u · L_o u = 0`.
    Orthogonality,
}

impl IdentityId {
    pub fn as_str(self) -> &'static str {
        match self {
            IdentityId::Energy => "energy",
            IdentityId::Quadruple => "quadruple",
            IdentityId::Orthogonality => "orthogonality",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityRow {
    pub identity_id: IdentityId,
    /// Fourier side.
    pub lhs: f64,
    /// Physical side; `0` for orthogonality.
    pub rhs: f64,
    /// Relative gap; for orthogonality `|⟨L_e u, L_o u⟩| / (‖L_e u‖‖L_o u‖)`.
    pub gap: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IdentityReport {
    pub rows: Vec<IdentityRow>,
}

impl IdentityReport {
    pub fn gap(&self, id: IdentityId) -> Option<f64> {
        self.rows.iter().find(|r| r.identity_id == id).map(|r| r.gap)
    }
}

/// Both sides of the L2 identities for a one-dimensional `ZeroOutside` field.
///
/// The Fourier sides integrate `|û(ξ)|²` against `Re m` over the band
/// `|ξ| < π/h`, with `û(ξ) = h Σ u_j e^{-iξx_j}`. The physical sides reduce the
/// inner integrals to the discrete autocorrelation `A_j = h Σ u_i u_{i+j}`,
/// which is exact algebra for the nested Riemann sums, and integrate against
/// the kernel by product quadrature on the shift lattice.
pub fn identity_suite(spec: &KernelSpec, u: &ScalarField) -> Result<IdentityReport> {
    let grid = *u.grid();
    if grid.dim() != 1 {
        bail!(Unsupported, "identity suite is one-dimensional");
    }
    if u.extension() != Extension::ZeroOutside {
        bail!(InvalidParameter, "identity suite needs a ZeroOutside field");
    }
    if grid.n() > IDENTITY_MAX_NODES {
        bail!(Budget, "identity suite is capped at n = {IDENTITY_MAX_NODES}, got {}", grid.n());
    }
    let kernel = spec.kernel();
    let (even, odd) = spec.decompose(Decomposition::EvenOdd)?;
    let mut rows = Vec::with_capacity(3);

    let (lhs_energy, lhs_quad) = fourier_sides(kernel, u)?;
    let (rhs_energy, rhs_quad) = physical_sides(kernel, u);
    rows.push(IdentityRow { identity_id: IdentityId::Energy, lhs: lhs_energy, rhs: rhs_energy, gap: rel_gap(lhs_energy, rhs_energy) });
    rows.push(IdentityRow { identity_id: IdentityId::Quadruple, lhs: lhs_quad, rhs: rhs_quad, gap: rel_gap(lhs_quad, rhs_quad) });

    let le = apply_spectral(&SymbolTable::new(even.kernel(), &grid, 1e-12)?, u)?;
    let lo = apply_spectral(&SymbolTable::new(&odd, &grid, 1e-12)?, u)?;
    let ip = le.inner(&lo)?;
    let scale = libm::sqrt(le.inner(&le)? * lo.inner(&lo)?);
    let gap = if scale > 0.0 { ip.abs() / scale } else { 0.0 };
    rows.push(IdentityRow { identity_id: IdentityId::Orthogonality, lhs: ip, rhs: 0.0, gap });
    Ok(IdentityReport { rows })
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s > 0.0 {
        (a - b).abs() / s
    } else {
        0.0
    }
}

/// `(2/π)∫_0^Ξ |û|² (-Re m)` and `(4/π)∫_0^Ξ |û|² (Re m)²` with `Ξ = π/h`.
fn fourier_sides(kernel: &Kernel, u: &ScalarField) -> Result<(f64, f64)> {
    let grid = u.grid();
    let h = grid.h();
    let xs: Vec<f64> = (0..grid.n()).map(|i| grid.coord(i)).collect();
    let ev = SymbolEvaluator::new(kernel);
    let gl = GaussLegendre::new(16);
    let top = PI / h;
    // geometric panels toward 0, uniform ones at the top
    let mut cuts: Vec<f64> = (0..48).map(|k| top * libm::pow(0.5, (k + 2) as f64)).collect();
    cuts.push(0.0);
    cuts.reverse();
    for k in 1..=6 {
        cuts.push(top * (0.25 + 0.125 * k as f64));
    }
    let (mut e, mut q) = (0.0, 0.0);
    for w in cuts.windows(2) {
        for (xi, wt) in gl.on(w[0], w[1]) {
            let mut uh = Complex64::new(0.0, 0.0);
            for (x, v) in xs.iter().zip(u.values()) {
                uh += Complex64::from_polar(*v, -xi * x);
            }
            let p = (uh * h).norm_sqr();
            let m = ev.eval(&[xi], 1e-12)?.re;
            e -= wt * p * m;
            q += wt * p * m * m;
        }
    }
    Ok((2.0 / PI * e, 4.0 / PI * q))
}

/// Quadrature for `∫_0^Y g(y) k(y) dy`, `k(y) = (a(y) + a(-y)) |y|^{-1-σ}`,
/// from samples `g(jh)`, `j = 0..=J`, of an even function with `g(0) = 0`.
struct ShiftRule {
    /// Weights on `g(jh)`.
    w: Vec<f64>,
    /// `∫_Y^∞ k`.
    tail: f64,
    /// `∫_Y^∞ k²`.
    tail_sq: f64,
    /// `k(Y)`.
    k_end: f64,
}

impl ShiftRule {
    fn new(kernel: &Kernel, h: f64, n_shift: usize) -> Self {
        let sigma = kernel.sigma();
        let am = kernel.angular();
        let cells = [am.cell_of(&[1.0, 0.0, 0.0]), am.cell_of(&[-1.0, 0.0, 0.0])];
        let asum = |y: f64| {
            let s = kernel.shell_of(y);
            kernel.value(s, cells[0]) + kernel.value(s, cells[1])
        };
        let mom = |lo: f64, hi: f64, p: f64| -> f64 {
            cells.iter().map(|&c| crate::operator::radial_moment(kernel, c, lo, hi, p)).sum()
        };
        let big_j = n_shift;
        let y_end = big_j as f64 * h;
        let mut w = vec![0.0; big_j + 1];

        // [0, h]: g ≈ Σ_k d_k (y/h)^{2k}, k = 1..4, through g(h), …, g(4h)
        let m: [f64; 4] = core::array::from_fn(|k| {
            let e = 2 * (k + 1);
            mom(0.0, h, e as f64 - 1.0 - sigma) / libm::pow(h, e as f64)
        });
        // row k holds i^{2k} for the nodes i = 1..4
        let vt: [[f64; 4]; 4] = core::array::from_fn(|k| core::array::from_fn(|i| libm::pow((i + 1) as f64, 2.0 * (k + 1) as f64)));
        let x = solve_small(vt, m);
        for i in 0..4 {
            w[i + 1] += x[i];
        }

        // [jh, (j+1)h], j ≥ 1: Lagrange through six neighbouring samples
        let gl = GaussLegendre::new(8);
        let edges = kernel.edges();
        for j in 1..big_j {
            let base = j.saturating_sub(2).min(big_j - 5);
            let (lo, hi) = (j as f64 * h, (j + 1) as f64 * h);
            let mut cuts = vec![lo];
            cuts.extend(edges.iter().copied().filter(|e| *e > lo && *e < hi));
            cuts.push(hi);
            for c in cuts.windows(2) {
                for (y, wt) in gl.on(c[0], c[1]) {
                    let ky = asum(y) * libm::pow(y, -1.0 - sigma);
                    let t = y / h - base as f64;
                    for i in 0..6 {
                        let mut l = 1.0;
                        for k in 0..6 {
                            if k != i {
                                l *= (t - k as f64) / (i as f64 - k as f64);
                            }
                        }
                        w[base + i] += wt * ky * l;
                    }
                }
            }
        }

        let tail = mom(y_end, f64::INFINITY, -1.0 - sigma);
        let mut tail_sq = 0.0;
        for s in kernel.shell_of(y_end)..kernel.n_shells() {
            let (a, b) = kernel.shell_bounds(s);
            let v = kernel.value(s, cells[0]) + kernel.value(s, cells[1]);
            tail_sq += v * v * power_integral(a.max(y_end), b, -2.0 - 2.0 * sigma);
        }
        let k_end = asum(y_end) * libm::pow(y_end, -1.0 - sigma);
        Self { w, tail, tail_sq, k_end }
    }
}

/// Gaussian elimination with partial pivoting for a small dense system.
fn solve_small<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> [f64; N] {
    for c in 0..N {
        let p = (c..N).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap_or(c);
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..N {
            let f = a[r][c] / a[c][c];
            for k in c..N {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; N];
    for r in (0..N).rev() {
        let s: f64 = (r + 1..N).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Discrete autocorrelation `A_j = h Σ_i u_i u_{i+j}`, `0 ≤ j < n`.
fn autocorrelation(u: &ScalarField) -> Vec<f64> {
    let v = u.values();
    let n = v.len();
    let h = u.grid().h();
    (0..n).map(|j| h * (0..n - j).map(|i| v[i] * v[i + j]).sum::<f64>()).collect()
}

/// `∬(u(x+y)-u(x))² K` and `∬ ‖u(·+y+z) - u(·+y) - u(·+z) + u‖² K_e(y) K_e(z)`.
///
/// With `B(t) = A(0) - A(t)` the inner integrals are `2B(y)` and
/// `4B(y) + 4B(z) - 2B(y+z) - 2B(y-z)`; `B = A(0)` once the shift clears the
/// support. Beyond `Y` the double integral is closed with the tail moments.
fn physical_sides(kernel: &Kernel, u: &ScalarField) -> (f64, f64) {
    let h = u.grid().h();
    let n = u.grid().n();
    let a = autocorrelation(u);
    let a0 = a[0];
    let b = |j: usize| if j < n { a0 - a[j] } else { a0 };
    let big_j = 4 * n;
    let rule = ShiftRule::new(kernel, h, big_j);

    let energy = (1..=big_j).map(|j| rule.w[j] * 2.0 * b(j)).sum::<f64>() + rule.tail * 2.0 * a0;

    let mut square = 0.0;
    for j in 1..=big_j {
        let mut inner = 0.0;
        for l in 1..=big_j {
            let jl = 4.0 * b(j) + 4.0 * b(l) - 2.0 * b(j + l) - 2.0 * b(j.abs_diff(l));
            inner += rule.w[l] * jl;
        }
        square += rule.w[j] * inner;
    }
    let q1 = (1..=big_j).map(|j| rule.w[j] * 4.0 * b(j)).sum::<f64>() + rule.tail * 4.0 * a0;
    let mass = h * u.values().iter().sum::<f64>();
    let first_moment_a = h * (1..n).map(|j| j as f64 * h * a[j]).sum::<f64>();
    let quad = square + 2.0 * rule.tail * q1 - 4.0 * a0 * rule.tail * rule.tail
        + 2.0 * mass * mass * rule.tail_sq
        + 2.0 * rule.k_end * rule.k_end * first_moment_a;
    (energy, quad)
}

// ---------------------------------------------------------------------------
// Hölder estimate

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderRow {
    pub lambda: f64,
    pub alpha: f64,
    /// `[u]_{C^α(B_{1/2})}`.
    pub seminorm: f64,
    /// `‖u‖_{L_1(ω)}` over the box.
    pub weighted_l1: f64,
    /// `sup f - inf f` on `B_1`.
    pub osc_f: f64,
    /// `sup |f| - inf |f|` on `B_1`.
    pub osc_abs_f: f64,
    /// `seminorm / (weighted_l1 + osc_f)`.
    pub ratio: f64,
    /// `seminorm / (weighted_l1 + osc_abs_f)`.
    pub ratio_abs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HolderReport {
    pub rows: Vec<HolderRow>,
}

impl HolderReport {
    /// `max ratio / min ratio` over the sweep.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self.rows.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.ratio), hi.max(r.ratio)));
        spread(lo, hi)
    }

    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.ratio))
    }
}

/// Solves `Lu - λu = f` for each `λ` and measures the Hölder ratio with
/// `α = min(1, σ)/2`.
pub fn holder_suite(spec: &KernelSpec, lambdas: &[f64], f: &ScalarField) -> Result<HolderReport> {
    let kernel = spec.kernel();
    let sigma = kernel.sigma();
    let grid = *f.grid();
    let table = SymbolTable::new(kernel, &grid, 1e-10)?;
    let alpha = sigma.min(1.0) / 2.0;
    let omega = WeightOmega::new(grid.dim(), sigma)?;
    let (b_half, b_one) = (Ball::centered(0.5), Ball::centered(1.0));
    let osc_f = oscillation(f, &b_one, OscillationMode::SupInf)?;
    let osc_abs_f = oscillation(&f.map(f64::abs), &b_one, OscillationMode::SupInf)?;
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let u = solve(&table, lambda, f)?.u;
        let seminorm = holder_seminorm(&u, alpha, &b_half)?;
        let wl1 = weighted_l1(&u, &omega)?.value;
        let q = |den: f64| if seminorm == 0.0 { 0.0 } else { seminorm / den };
        rows.push(HolderRow {
            lambda,
            alpha,
            seminorm,
            weighted_l1: wl1,
            osc_f,
            osc_abs_f,
            ratio: q(wl1 + osc_f),
            ratio_abs: q(wl1 + osc_abs_f),
        });
    }
    Ok(HolderReport { rows })
}

// ---------------------------------------------------------------------------
// Local estimates

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalCase {
    /// `σ < 1`: `‖(-Δ)^{σ/2}u‖_{L_p(B_1)} ≤ N‖f‖_{L_p(B_2)} + N‖u‖_{L_p(ω)}`.
    Below,
    /// `σ = 1`: `… ≤ N‖f‖_{L_p(B_2)} + N(ε)‖u‖_{L_p(ω)} + ε‖Du‖_{L_p(B_4)}`.
    Critical,
    /// `σ > 1`: `… ≤ N‖f‖_{L_p(B_2)} + N‖u‖_{L_p(ω)} + N‖Du‖_{L_p(B_4)}`.
    Above,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalEstimateReport {
    pub case: LocalCase,
    pub p: f64,
    pub lambda: f64,
    /// `‖(-Δ)^{σ/2}u‖_{L_p(B_1)}`.
    pub lhs: f64,
    /// `‖f‖_{L_p(B_2)}`.
    pub f_term: f64,
    /// `‖u‖_{L_p(ω)}`.
    pub u_term: f64,
    /// `‖Du‖_{L_p(B_4)}`.
    pub du_term: f64,
    /// `lhs / (f_term + u_term)` below `σ = 1`, `lhs / (f_term + u_term + du_term)` otherwise.
    pub n_obs: f64,
    /// For `σ = 1`: `(ε, N(ε))` with `N(ε) = (lhs - ε du_term)₊ / (f_term + u_term)`,
    /// the smallest constant in front of both lower-order terms.
    pub eps_sweep: Vec<(f64, f64)>,
}

impl LocalEstimateReport {
    pub fn pass(&self) -> bool {
        self.n_obs.is_finite() && self.eps_sweep.iter().all(|(_, n)| n.is_finite())
    }

    /// `N(ε)` grows as `ε` decreases along the sweep: strictly once it is
    /// positive and `Du ≠ 0`, otherwise it may only stay flat.
    pub fn monotone_in_eps(&self) -> bool {
        let mut s = self.eps_sweep.clone();
        s.sort_by(|a, b| b.0.total_cmp(&a.0));
        let strict = self.du_term > 0.0;
        s.windows(2).all(|w| if strict && w[1].1 > 0.0 { w[1].1 > w[0].1 } else { w[1].1 >= w[0].1 })
    }
}

/// Interior estimate for `Lu - λu = f` on the balls `B_1 ⊂ B_2 ⊂ B_4`, which
/// must fit in the box.
pub fn local_estimate_check(spec: &KernelSpec, p: f64, lambda: f64, f: &ScalarField) -> Result<LocalEstimateReport> {
    let kernel = spec.kernel();
    let sigma = kernel.sigma();
    let grid = *f.grid();
    let table = SymbolTable::new(kernel, &grid, 1e-10)?;
    let u = solve(&table, lambda, f)?.u;
    let lhs = lp_norm_on(&riesz_apply(&u, sigma)?, &Ball::centered(1.0), p)?;
    let f_term = lp_norm_on(f, &Ball::centered(2.0), p)?;
    let u_term = weighted_lp(&u, &WeightOmega::new(grid.dim(), sigma)?, p)?;
    let du = crate::operator::gradient_norm(&u);
    let du_term = lp_norm_on(&du, &Ball::centered(4.0), p)?;
    let case = if sigma < 1.0 {
        LocalCase::Below
    } else if sigma == 1.0 {
        LocalCase::Critical
    } else {
        LocalCase::Above
    };
    let den = match case {
        LocalCase::Below => f_term + u_term,
        _ => f_term + u_term + du_term,
    };
    let n_obs = if lhs == 0.0 { 0.0 } else { lhs / den };
    let eps_sweep = match case {
        LocalCase::Critical => LOCAL_EPS
            .iter()
            .map(|&e| {
                let num = (lhs - e * du_term).max(0.0);
                (e, if num == 0.0 { 0.0 } else { num / (f_term + u_term) })
            })
            .collect(),
        _ => Vec::new(),
    };
    Ok(LocalEstimateReport { case, p, lambda, lhs, f_term, u_term, du_term, n_obs, eps_sweep })
}
