//! The Fourier symbol
//!
//! ```text
//! m(ξ) = ∫ ( e^{iy·ξ} - 1 - i y·ξ χ(y) ) K(y) dy
//! ```
//!
//! In polar coordinates `y = rθ` the Jacobian cancels `|y|^{-d}`, and for a
//! direction with `t = θ·ξ > 0` the substitution `u = r t` turns the radial
//! integral over a shell `[b_i, b_{i+1})` into `t^σ (Φ(b_{i+1} t) - Φ(b_i t))`
//! with the universal function
//!
//! ```text
//! Φ(s) = ∫_0^s ( e^{iu} - 1 - iu χ̃(u) ) u^{-1-σ} du,    χ̃ = 0 (σ<1), 1_{u<1} (σ=1), 1 (σ>1)
//! ```
//!
//! `Φ` is evaluated by its power series for `s ≤ 4`, from a Gauss–Legendre
//! table on `[4, 40]`, and as `Φ(∞)` minus an asymptotic expansion of the tail
//! beyond. Negative `t` gives the complex conjugate. The radial part is thus
//! exact to rounding, and only the angular integral (cellwise Gauss–Legendre
//! split at the zero set of `θ·ξ`) carries quadrature error.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Error, Result};
use crate::grid::TorusGrid;
use crate::kernel::{AngularMesh, Kernel, KernelSpec};
use crate::quad::{grade, GaussLegendre};
use crate::{norm, Point};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_MAX: f64 = 4.0;
const ASYMPTOTIC_MIN: f64 = 40.0;
const TABLE_STEP: f64 = 1.0 / 16.0;
const MAX_DEPTH: u32 = 14;
const MAX_NODES_3D: usize = 64;

/// `c(d, σ)` such that `∫ (1 - cos(ξ·y)) |y|^{-d-σ} dy = c |ξ|^σ`.
pub fn frac_laplace_constant(d: usize, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 2.0) {
        bail!(Domain, "sigma must lie in (0, 2), got {sigma}");
    }
    if d == 0 {
        bail!(Domain, "dimension must be positive");
    }
    let df = d as f64;
    Ok(libm::pow(PI, df / 2.0) * libm::pow(2.0, 2.0 - sigma) / (sigma * (2.0 - sigma))
        * libm::tgamma(2.0 - sigma / 2.0)
        / libm::tgamma((df + sigma) / 2.0))
}

/// `c(d, σ)·(2-σ)`, which stays bounded away from zero as `σ → 2`.
pub fn frac_laplace_constant_scaled(d: usize, sigma: f64) -> Result<f64> {
    Ok(frac_laplace_constant(d, sigma)? * (2.0 - sigma))
}

/// The radial function `Φ_σ`.
///
/// Reference values come from the power series (`s ≤ 4`) and from a fine
/// Gauss–Legendre table (`4 < s < 40`); both ranges are then replaced by
/// Chebyshev fits for speed. The series part is fitted as `Q(s)` in
/// `Φ(s) = s^{2-σ} Q(s) + (first-order term)` so that relative accuracy
/// survives as `s → 0`.
#[derive(Clone, Debug)]
pub struct Phi {
    sigma: f64,
    at_infinity: Complex64,
    table: Vec<Complex64>,
    gl: GaussLegendre,
    series_fit: Chebyshev,
    mid_fits: Vec<Chebyshev>,
}

impl Phi {
    pub fn new(sigma: f64) -> Self {
        let at_infinity = if sigma == 1.0 {
            Complex64::new(-PI / 2.0, 1.0 - EULER_GAMMA)
        } else {
            Complex64::from_polar(libm::tgamma(-sigma), -PI * sigma / 2.0)
        };
        let mut phi = Self {
            sigma,
            at_infinity,
            table: Vec::new(),
            gl: GaussLegendre::new(8),
            series_fit: Chebyshev::default(),
            mid_fits: Vec::new(),
        };
        let steps = ((ASYMPTOTIC_MIN - SERIES_MAX) / TABLE_STEP + 0.5) as usize;
        let gl16 = GaussLegendre::new(16);
        let mut acc = phi.series(SERIES_MAX);
        phi.table.reserve(steps + 1);
        phi.table.push(acc);
        for k in 0..steps {
            let a = SERIES_MAX + k as f64 * TABLE_STEP;
            for (u, w) in gl16.on(a, a + TABLE_STEP) {
                acc += phi.integrand(u) * w;
            }
            phi.table.push(acc);
        }
        phi.series_fit = Chebyshev::fit(0.0, SERIES_MAX, 40, |s| phi.series_core(s));
        let units = (ASYMPTOTIC_MIN - SERIES_MAX) as usize;
        phi.mid_fits = (0..units)
            .map(|k| {
                let a = SERIES_MAX + k as f64;
                Chebyshev::fit(a, a + 1.0, 24, |s| phi.eval_reference(s))
            })
            .collect();
        phi
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn at_infinity(&self) -> Complex64 {
        self.at_infinity
    }

    pub fn eval(&self, s: f64) -> Complex64 {
        if s <= 0.0 {
            Complex64::new(0.0, 0.0)
        } else if s.is_infinite() {
            self.at_infinity
        } else if s <= SERIES_MAX {
            self.series_fit.eval(s) * libm::pow(s, 2.0 - self.sigma) + self.first_order(s)
        } else if s < ASYMPTOTIC_MIN {
            let k = ((s - SERIES_MAX) as usize).min(self.mid_fits.len() - 1);
            self.mid_fits[k].eval(s)
        } else {
            self.at_infinity - self.tail(s)
        }
    }

    /// Slow but direct evaluation (series, table plus quadrature, asymptotics).
    pub(crate) fn eval_reference(&self, s: f64) -> Complex64 {
        if s <= 0.0 {
            Complex64::new(0.0, 0.0)
        } else if s.is_infinite() {
            self.at_infinity
        } else if s <= SERIES_MAX {
            self.series(s)
        } else if s < ASYMPTOTIC_MIN {
            let k = (((s - SERIES_MAX) / TABLE_STEP) as usize).min(self.table.len() - 1);
            let a = SERIES_MAX + k as f64 * TABLE_STEP;
            let mut v = self.table[k];
            for (u, w) in self.gl.on(a, s) {
                v += self.integrand(u) * w;
            }
            v
        } else {
            self.at_infinity - self.tail(s)
        }
    }

    /// Integrand for `u > 1`, where `χ̃` is constant.
    fn integrand(&self, u: f64) -> Complex64 {
        let (s, c) = libm::sincos(u);
        let comp = if self.sigma > 1.0 { u } else { 0.0 };
        Complex64::new(c - 1.0, s - comp) * libm::pow(u, -1.0 - self.sigma)
    }

    /// `Q(s) = Σ_{k≥2} (is)^k s^{-2} / (k! (k-σ))`.
    fn series_core(&self, s: f64) -> Complex64 {
        let sig = self.sigma;
        let is = Complex64::new(0.0, s);
        let mut term = Complex64::new(-0.5, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut k = 2usize;
        loop {
            let add = term / (k as f64 - sig);
            sum += add;
            if k as f64 > s && add.norm() < 1e-18 * sum.norm() {
                break;
            }
            term = term * is / (k as f64 + 1.0);
            k += 1;
        }
        sum
    }

    fn first_order(&self, s: f64) -> Complex64 {
        let sig = self.sigma;
        if sig < 1.0 {
            Complex64::new(0.0, libm::pow(s, 1.0 - sig) / (1.0 - sig))
        } else if sig == 1.0 && s > 1.0 {
            Complex64::new(0.0, libm::log(s))
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    fn series(&self, s: f64) -> Complex64 {
        self.series_core(s) * libm::pow(s, 2.0 - self.sigma) + self.first_order(s)
    }

    /// `∫_s^∞ (e^{iu} - 1 - iuχ̃) u^{-1-σ} du` for `s ≥ 40`.
    fn tail(&self, s: f64) -> Complex64 {
        let sig = self.sigma;
        let mut t = osc_tail(1.0 + sig, s) - libm::pow(s, -sig) / sig;
        if sig > 1.0 {
            t -= Complex64::new(0.0, libm::pow(s, 1.0 - sig) / (sig - 1.0));
        }
        t
    }
}

/// Chebyshev interpolant of a complex function on `[a, b]`.
#[derive(Clone, Debug, Default)]
struct Chebyshev {
    a: f64,
    b: f64,
    coef: Vec<Complex64>,
}

impl Chebyshev {
    fn fit(a: f64, b: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Self {
        let vals: Vec<Complex64> = (0..n)
            .map(|k| {
                let x = libm::cos(PI * (k as f64 + 0.5) / n as f64);
                f(0.5 * (a + b) + 0.5 * (b - a) * x)
            })
            .collect();
        let coef = (0..n)
            .map(|j| {
                let s: Complex64 = vals
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * libm::cos(PI * j as f64 * (k as f64 + 0.5) / n as f64))
                    .sum();
                s * (2.0 / n as f64)
            })
            .collect();
        Self { a, b, coef }
    }

    fn eval(&self, s: f64) -> Complex64 {
        let x = (2.0 * s - self.a - self.b) / (self.b - self.a);
        let (mut b1, mut b2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for c in self.coef[1..].iter().rev() {
            let t = b1 * (2.0 * x) - b2 + c;
            b2 = b1;
            b1 = t;
        }
        b1 * x - b2 + self.coef[0] * 0.5
    }
}

/// `∫_s^∞ e^{iu} u^{-a} du = i e^{is} Σ_k (-i)^k (a)_k s^{-a-k}`, summed up to the smallest term.
fn osc_tail(a: f64, s: f64) -> Complex64 {
    let mut term = Complex64::new(libm::pow(s, -a), 0.0);
    let mut sum = term;
    let mut prev = term.norm();
    let minus_i = Complex64::new(0.0, -1.0);
    for k in 0..200 {
        let next = term * minus_i * ((a + k as f64) / s);
        let mag = next.norm();
        if mag >= prev {
            break;
        }
        sum += next;
        term = next;
        prev = mag;
        if mag < 1e-18 * sum.norm() {
            break;
        }
    }
    Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, s) * sum
}

/// Evaluates `m(ξ)` (or the truncated symbol over `|y| > ε`) for one kernel.
#[derive(Clone, Debug)]
pub struct SymbolEvaluator<'a> {
    kernel: &'a Kernel,
    phi: Phi,
    /// Radial breakpoints: shell `i` of the (clipped) kernel is `[b_i, b_{i+1})`.
    breaks: Vec<f64>,
    rho: f64,
    a_max: f64,
}

impl<'a> SymbolEvaluator<'a> {
    pub fn new(kernel: &'a Kernel) -> Self {
        Self::truncated(kernel, 0.0)
    }

    /// Symbol of the kernel restricted to `|y| > eps`.
    pub fn truncated(kernel: &'a Kernel, eps: f64) -> Self {
        let n = kernel.n_shells();
        let mut breaks = Vec::with_capacity(n + 1);
        breaks.push(eps.max(0.0));
        for i in 1..n {
            breaks.push(kernel.edges()[i].max(eps));
        }
        breaks.push(f64::INFINITY);
        Self { kernel, phi: Phi::new(kernel.sigma()), breaks, rho: kernel.chi_radius(), a_max: kernel.max_abs() }
    }

    pub fn kernel(&self) -> &Kernel {
        self.kernel
    }

    /// `Φ(b_i s)` for every breakpoint.
    fn phis(&self, s: f64, out: &mut Vec<Complex64>) {
        out.clear();
        if s == 0.0 {
            out.resize(self.breaks.len(), Complex64::new(0.0, 0.0));
            return;
        }
        out.extend(self.breaks.iter().map(|b| self.phi.eval(b * s)));
    }

    /// `∫_0^∞ (e^{irt} - 1 - irtχ(r)) a_cell(r) r^{-1-σ} dr` given the `Φ` values at `|t|`.
    fn radial(&self, cell: usize, t: f64, phis: &[Complex64]) -> Complex64 {
        if t == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let s = t.abs();
        let nc = self.kernel.n_cells();
        let vals = self.kernel.values();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut log_acc = 0.0;
        let unit_sigma = self.kernel.sigma() == 1.0;
        for i in 0..self.breaks.len() - 1 {
            let a = vals[i * nc + cell];
            if a == 0.0 {
                continue;
            }
            acc += (phis[i + 1] - phis[i]) * a;
            if unit_sigma {
                log_acc += a * (self.chi_shift(self.breaks[i + 1] * s, s) - self.chi_shift(self.breaks[i] * s, s));
            }
        }
        let v = (acc + Complex64::new(0.0, log_acc)) * libm::pow(s, self.kernel.sigma());
        if t > 0.0 {
            v
        } else {
            v.conj()
        }
    }

    /// Antiderivative of `u^{-1}(1_{u<1} - 1_{u<ρ|t|})` vanishing at 0.
    fn chi_shift(&self, u: f64, s: f64) -> f64 {
        let c = self.rho * s;
        if u == 0.0 {
            0.0
        } else if u.is_infinite() {
            -libm::log(c)
        } else {
            libm::log(u.min(1.0)) - libm::log(u.min(c))
        }
    }

    /// `m(ξ)` to relative accuracy `tol` (relative to `max(|m|, max|a|·|ξ|^σ)`).
    pub fn eval(&self, xi: &[f64], tol: f64) -> Result<Complex64> {
        self.eval_with_error(xi, tol).map(|(m, _)| m)
    }

    /// `m(ξ)` and an estimate of the absolute quadrature error.
    pub fn eval_with_error(&self, xi: &[f64], tol: f64) -> Result<(Complex64, f64)> {
        if !(tol > 0.0) {
            bail!(InvalidParameter, "tolerance must be positive, got {tol}");
        }
        let d = self.kernel.dim();
        let r = norm(&xi[..d]);
        if r == 0.0 {
            return Ok((Complex64::new(0.0, 0.0), 0.0));
        }
        let scale = self.a_max * libm::pow(r, self.kernel.sigma());
        let mut phis = Vec::with_capacity(self.breaks.len());
        match self.kernel.angular() {
            AngularMesh::Line => {
                self.phis(r, &mut phis);
                let m = self.radial(0, xi[0], &phis) + self.radial(1, -xi[0], &phis);
                Ok((m, 0.0))
            }
            AngularMesh::Circle { .. } => {
                let (m, err) = self.circle(xi, tol * scale, &mut phis)?;
                if err > tol * m.norm().max(scale) {
                    return Err(Error::Quadrature { achieved: err / m.norm().max(scale), requested: tol });
                }
                Ok((m, err))
            }
            AngularMesh::Sphere { .. } => adaptive(tol, scale, MAX_NODES_3D, |q| self.sphere(xi, q, &mut phis)),
        }
    }

    /// Cellwise integral over the circle. Each arc between cell edges and the
    /// two zeros of `θ·ξ` is graded at both ends and bisected adaptively.
    fn circle(&self, xi: &[f64], tol_abs: f64, phis: &mut Vec<Complex64>) -> Result<(Complex64, f64)> {
        let gl = GaussLegendre::new(10);
        let am = self.kernel.angular();
        let r = libm::hypot(xi[0], xi[1]);
        let phi_xi = libm::atan2(xi[1], xi[0]);
        let roots = [phi_xi + PI / 2.0, phi_xi - PI / 2.0];
        let mut total = Complex64::new(0.0, 0.0);
        let mut err = 0.0;
        for j in 0..am.n_cells() {
            let (a, b) = am.phi_range(j);
            for (lo, hi) in split_arc(a, b, &roots) {
                let share = tol_abs * (hi - lo) / (2.0 * PI);
                let mut f = |v: f64| {
                    let (x, dx) = grade(v);
                    let phi = lo + (hi - lo) * x;
                    let t = r * libm::cos(phi - phi_xi);
                    self.phis(t.abs(), phis);
                    self.radial(j, t, phis) * (dx * (hi - lo))
                };
                let (v, e) = bisect(&gl, &mut f, share)?;
                total += v;
                err += e;
            }
        }
        Ok((total, err))
    }

    fn sphere(&self, xi: &[f64], q: usize, phis: &mut Vec<Complex64>) -> Complex64 {
        let gl = GaussLegendre::new(q);
        let am = self.kernel.angular();
        let a_xy = libm::hypot(xi[0], xi[1]);
        let phi_xi = libm::atan2(xi[1], xi[0]);
        let mut total = Complex64::new(0.0, 0.0);
        for j in 0..am.n_cells() {
            let (pa, pb) = am.phi_range(j);
            let (z0, z1) = am.z_range(j);
            // z at which the zero set of θ·ξ enters, leaves or touches the cell
            let mut zb = vec![z0, z1];
            for al in [a_xy * libm::cos(pa - phi_xi), a_xy * libm::cos(pb - phi_xi), a_xy] {
                let den = libm::hypot(al, xi[2]);
                if den > 0.0 {
                    let z = al.abs() / den;
                    zb.push(z);
                    zb.push(-z);
                }
            }
            zb.retain(|z| *z >= z0 && *z <= z1);
            zb.sort_by(|a, b| a.total_cmp(b));
            zb.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
            for zw in zb.windows(2) {
                let (za, zc) = (zw[0], zw[1]);
                for (v, w) in gl.on(0.0, 1.0) {
                    let (x, dx) = grade(v);
                    let z = za + (zc - za) * x;
                    let wz = w * dx * (zc - za);
                    let rho = libm::sqrt((1.0 - z * z).max(0.0));
                    let mut roots = [f64::NAN; 2];
                    if rho * a_xy > 0.0 {
                        let c = -z * xi[2] / (rho * a_xy);
                        if c.abs() <= 1.0 {
                            let ac = libm::acos(c);
                            roots = [phi_xi + ac, phi_xi - ac];
                        }
                    }
                    for (lo, hi) in split_arc(pa, pb, &roots) {
                        for (v2, w2) in gl.on(0.0, 1.0) {
                            let (x2, dx2) = grade(v2);
                            let phi = lo + (hi - lo) * x2;
                            let t = rho * a_xy * libm::cos(phi - phi_xi) + z * xi[2];
                            self.phis(t.abs(), phis);
                            total += self.radial(j, t, phis) * (wz * w2 * dx2 * (hi - lo));
                        }
                    }
                }
            }
        }
        total
    }
}

/// Splits `[a, b]` at the given angles (taken mod 2π); NaN roots are ignored.
fn split_arc(a: f64, b: f64, roots: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts = vec![a, b];
    for &r in roots {
        if r.is_nan() {
            continue;
        }
        let w = crate::kernel::wrap_angle(r);
        for c in [w, w + 2.0 * PI, w - 2.0 * PI] {
            if c > a + 1e-14 && c < b - 1e-14 {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Adaptive bisection of `∫_0^1 f` with a fixed Gauss–Legendre rule per
/// interval; an interval is accepted when it agrees with the sum over its
/// halves to within its share of `tol_abs`.
fn bisect(
    gl: &GaussLegendre,
    f: &mut impl FnMut(f64) -> Complex64,
    tol_abs: f64,
) -> Result<(Complex64, f64)> {
    let mut rule = |a: f64, b: f64| -> Complex64 { gl.on(a, b).map(|(x, w)| f(x) * w).sum() };
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut stack = vec![(0.0f64, 1.0f64, rule(0.0, 1.0), 0u32)];
    while let Some((a, b, whole, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let (left, right) = (rule(a, m), rule(m, b));
        let e = (left + right - whole).norm();
        if e <= tol_abs * (b - a) || depth >= MAX_DEPTH {
            total += left + right;
            err += e;
            continue;
        }
        stack.push((a, m, left, depth + 1));
        stack.push((m, b, right, depth + 1));
    }
    Ok((total, err))
}

/// Doubles the node count until two successive results agree to `tol·max(|m|, scale)`.
fn adaptive(
    tol: f64,
    scale: f64,
    max_nodes: usize,
    mut rule: impl FnMut(usize) -> Complex64,
) -> Result<(Complex64, f64)> {
    let mut q = 8;
    let mut prev = rule(q);
    loop {
        q *= 2;
        let cur = rule(q);
        let err = (cur - prev).norm();
        let target = tol * cur.norm().max(scale);
        if err <= target {
            return Ok((cur, err));
        }
        if q >= max_nodes {
            return Err(Error::Quadrature { achieved: err / cur.norm().max(scale), requested: tol });
        }
        prev = cur;
    }
}

pub fn symbol_at(kernel: &Kernel, xi: &[f64], tol: f64) -> Result<Complex64> {
    SymbolEvaluator::new(kernel).eval(xi, tol)
}

/// `m(ξ_k)` on the whole frequency lattice of a grid, in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolTable {
    grid: TorusGrid,
    values: Vec<Complex64>,
    error: Vec<f64>,
    tol: f64,
}

impl SymbolTable {
    pub fn new(kernel: &Kernel, grid: &TorusGrid, tol: f64) -> Result<Self> {
        Self::with_evaluator(&SymbolEvaluator::new(kernel), grid, tol)
    }

    pub fn with_evaluator(ev: &SymbolEvaluator<'_>, grid: &TorusGrid, tol: f64) -> Result<Self> {
        if ev.kernel().dim() != grid.dim() {
            bail!(InvalidParameter, "kernel dimension {} does not match grid dimension {}", ev.kernel().dim(), grid.dim());
        }
        let n = grid.len();
        let mut values = vec![Complex64::new(0.0, 0.0); n];
        let mut error = vec![0.0; n];
        for i in 0..n {
            let mi = grid.mirror_index(i);
            if mi < i {
                values[i] = values[mi].conj();
                error[i] = error[mi];
                continue;
            }
            let (m, e) = ev.eval_with_error(&grid.frequency(i), tol)?;
            // self-conjugate nodes carry a real cosine mode
            values[i] = if mi == i { Complex64::new(m.re, 0.0) } else { m };
            error[i] = e;
        }
        Ok(Self { grid: *grid, values, error, tol })
    }

    /// A table from a closed-form multiplier, e.g. `-|ξ|^σ`.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&Point) -> Complex64) -> Self {
        let values = grid.frequencies().map(|xi| f(&xi)).collect();
        Self { grid: *grid, values, error: vec![0.0; grid.len()], tol: 0.0 }
    }

    /// `-|ξ|^σ`, the symbol of `-(-Δ)^{σ/2}`.
    pub fn fractional(grid: &TorusGrid, sigma: f64) -> Self {
        Self::from_fn(grid, |xi| Complex64::new(-libm::pow(norm(&xi[..grid.dim()]), sigma), 0.0))
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Per-node quadrature error estimates.
    pub fn error(&self) -> &[f64] {
        &self.error
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Entrywise combination `α m_1 + β m_2` of two tables on the same grid.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x * a + y * b).collect();
        let error = self.error.iter().zip(&other.error).map(|(x, y)| a.abs() * x + b.abs() * y).collect();
        Ok(Self { grid: self.grid, values, error, tol: self.tol.max(other.tol) })
    }

    /// Adds the drift multiplier `i b·ξ`.
    pub fn with_drift(&self, b: &[f64]) -> Self {
        let d = self.grid.dim();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let xi = self.grid.frequency(i);
                m + Complex64::new(0.0, crate::dot(&b[..d], &xi[..d]))
            })
            .collect();
        Self { values, ..self.clone() }
    }

    /// Symbol of the adjoint, i.e. of the reflected kernel `K(-y)`.
    pub fn adjoint(&self) -> Self {
        Self { values: self.values.iter().map(|m| m.conj()).collect(), ..self.clone() }
    }

    /// `max_k |m(ξ_k) - conj m(-ξ_k)|` over non-Nyquist nodes.
    pub fn conjugate_symmetry_residual(&self) -> f64 {
        let g = &self.grid;
        (0..g.len())
            .filter(|&i| {
                let m = g.multi_index(i);
                m[..g.dim()].iter().all(|&p| p != g.n() / 2)
            })
            .map(|i| (self.values[i] - self.values[g.mirror_index(i)].conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Observed constants in `|m| ≤ C|ξ|^σ` and `-Re m ≥ c_low ν c(d,σ)(2-σ)|ξ|^σ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolBoundsReport {
    /// `max |m(ξ)| / |ξ|^σ`.
    pub c_upper_obs: f64,
    /// `min -Re m(ξ) / (ν c (2-σ) |ξ|^σ)`; the lower bound holds when this is ≥ 1.
    pub c_lower_obs: f64,
    /// `c_lower_obs ≥ 0.99`.
    pub pass: bool,
}

pub fn verify_symbol_bounds(spec: &KernelSpec, xi_samples: &[Point], tol: f64) -> Result<SymbolBoundsReport> {
    let k = spec.kernel();
    let d = k.dim();
    let s = k.sigma();
    let c = frac_laplace_constant_scaled(d, s)?;
    let ev = SymbolEvaluator::new(k);
    let mut upper: f64 = 0.0;
    let mut lower = f64::INFINITY;
    for xi in xi_samples {
        let r = norm(&xi[..d]);
        if r == 0.0 {
            bail!(InvalidParameter, "frequency samples must be nonzero");
        }
        let m = ev.eval(xi, tol)?;
        let p = libm::pow(r, s);
        upper = upper.max(m.norm() / p);
        lower = lower.min(-m.re / (spec.nu() * c * p));
    }
    Ok(SymbolBoundsReport { c_upper_obs: upper, c_lower_obs: lower, pass: lower >= 0.99 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{random_kernel, Decomposition};
    use proptest::prelude::*;

    /// `Φ(s)` by brute-force Gauss–Legendre on `[0, s]` with a graded mesh at the origin.
    fn phi_oracle(sigma: f64, s: f64) -> Complex64 {
        let gl = GaussLegendre::new(30);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut edges = vec![0.0];
        let mut e = 1e-12f64;
        while e < s {
            edges.push(e);
            e *= 2.0;
        }
        if sigma == 1.0 && s > 1.0 {
            edges.push(1.0);
        }
        edges.push(s);
        edges.sort_by(|a, b| a.total_cmp(b));
        edges.dedup();
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1].min(s));
            if b <= a {
                continue;
            }
            let n = (1.0 + (b - a) * 2.0) as usize;
            for k in 0..n {
                let (aa, bb) = (a + (b - a) * k as f64 / n as f64, a + (b - a) * (k + 1) as f64 / n as f64);
                // u = aa + (bb-aa) x^10 absorbs the algebraic singularity at the origin
                let nodes = gl.on(0.0, 1.0).map(|(x, w)| (aa + (bb - aa) * x.powi(10), w * 10.0 * x.powi(9) * (bb - aa)));
                for (u, wt) in nodes {
                    let chi = if sigma > 1.0 || (sigma == 1.0 && u < 1.0) { 1.0 } else { 0.0 };
                    let (sn, cs) = libm::sincos(u);
                    // e^{iu} - 1 for small u without cancellation
                    let re = if u < 1e-3 { -u * u / 2.0 + u.powi(4) / 24.0 } else { cs - 1.0 };
                    let im = if u < 1e-3 { u - u.powi(3) / 6.0 } else { sn };
                    acc += Complex64::new(re, im - chi * u) * (wt * libm::pow(u, -1.0 - sigma));
                }
            }
        }
        acc
    }

    #[test]
    fn constants() {
        assert!((frac_laplace_constant(1, 1.0).unwrap() - PI).abs() < 1e-12);
        assert!((frac_laplace_constant(2, 1.0).unwrap() - 2.0 * PI).abs() < 1e-12);
        assert!((frac_laplace_constant(3, 1.0).unwrap() - PI * PI).abs() < 1e-12);
        assert!(matches!(frac_laplace_constant(1, 2.0), Err(Error::Domain(_))));
        // c(2-σ) stays bounded as σ → 2
        let near = frac_laplace_constant_scaled(2, 1.999).unwrap();
        assert!(near.is_finite() && near > 0.1);
    }

    #[test]
    fn phi_matches_oracle() {
        for sigma in [0.3, 0.5, 1.0, 1.5, 1.8] {
            let phi = Phi::new(sigma);
            for s in [1e-6, 0.3, 1.0, 2.5, 3.99, 4.01, 7.3, 20.0, 39.9] {
                let (a, b) = (phi.eval(s), phi_oracle(sigma, s));
                let r = phi.eval_reference(s);
                assert!((a - r).norm() < 1e-13 * (1.0 + r.norm()), "fit: sigma={sigma} s={s}: {a} vs {r}");
                assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()), "sigma={sigma} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn phi_continuous_across_regimes() {
        for sigma in [0.2, 0.5, 0.9, 1.0, 1.1, 1.5, 1.9] {
            let phi = Phi::new(sigma);
            for s in [SERIES_MAX, ASYMPTOTIC_MIN] {
                let (a, b) = (phi.eval(s * (1.0 - 1e-12)), phi.eval(s * (1.0 + 1e-12)));
                assert!((a - b).norm() < 1e-11, "sigma={sigma} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn fractional_symbol_1d() {
        for sigma in [0.5, 1.0, 1.5] {
            let k = Kernel::fractional(1, sigma).unwrap();
            for xi in [0.01, 0.3, 1.0, 5.0, 100.0, 3000.0] {
                let m = symbol_at(&k, &[xi], 1e-10).unwrap();
                let e = -libm::pow(xi, sigma);
                assert!((m.re - e).abs() < 1e-10 * e.abs() && m.im.abs() < 1e-10 * e.abs(), "{sigma} {xi} {m}");
            }
            assert_eq!(symbol_at(&k, &[0.0], 1e-10).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn fractional_symbol_2d_3d() {
        for sigma in [0.5, 1.0, 1.5] {
            let k = Kernel::fractional(2, sigma).unwrap();
            for xi in [[0.7, 0.2, 0.0], [-3.0, 4.0, 0.0]] {
                let m = symbol_at(&k, &xi, 1e-9).unwrap();
                let e = -libm::pow(norm(&xi), sigma);
                assert!((m - e).norm() < 1e-7 * e.abs(), "{sigma} {m} {e}");
            }
            let k = Kernel::fractional(3, sigma).unwrap();
            let xi = [0.3, -1.1, 0.8];
            let m = symbol_at(&k, &xi, 1e-6).unwrap();
            let e = -libm::pow(norm(&xi), sigma);
            assert!((m - e).norm() < 1e-5 * e.abs(), "{sigma} {m} {e}");
        }
    }

    #[test]
    fn two_sided_kernel_closed_form() {
        // d=1, a = c1 on y>0, c2 on y<0, σ<1: m(ξ) = |ξ|^σ (c1 Φ∞(sgn ξ) + c2 conj)
        let k = Kernel::new(0.5, vec![1e-6, 1e3], AngularMesh::Line, vec![3.0, 1.0]).unwrap();
        let phi = Phi::new(0.5).at_infinity();
        let xi = 2.0;
        let m = symbol_at(&k, &[xi], 1e-12).unwrap();
        let e = (phi * 3.0 + phi.conj()) * libm::pow(xi, 0.5);
        assert!((m - e).norm() < 1e-12 * e.norm());
    }

    #[test]
    fn scaling_covariance() {
        for sigma in [0.6, 1.4] {
            let spec = random_kernel(2, sigma, 0.5, 2.0, 5).unwrap();
            let k = spec.kernel();
            let r = 2.0;
            let ks = k.scaled(r);
            let tol = 1e-9;
            for xi in [[0.5, 0.1, 0.0], [2.0, -3.0, 0.0]] {
                let a = symbol_at(&ks, &xi, tol).unwrap();
                let b = symbol_at(k, &[xi[0] / r, xi[1] / r, 0.0], tol).unwrap() * libm::pow(r, sigma);
                let scale = k.max_abs() * libm::pow(norm(&xi), sigma);
                assert!((a - b).norm() < 4.0 * tol * scale);
            }
        }
    }

    #[test]
    fn chi_radius_invariance_under_cancellation() {
        let spec = random_kernel(2, 1.0, 0.5, 2.0, 17).unwrap();
        let xi = [1.3, -0.4, 0.0];
        let base = symbol_at(spec.kernel(), &xi, 1e-10).unwrap();
        for rho in [0.5, 2.0] {
            let k = spec.kernel().clone().with_chi_radius(rho).unwrap();
            let m = symbol_at(&k, &xi, 1e-10).unwrap();
            assert!((m - base).norm() < 1e-8 * base.norm());
        }
        // without cancellation the radius matters: moving ρ from 1 to 2 adds -iξ∫_{1<|y|<2} yK = -2i ln 2
        let k = Kernel::new(1.0, vec![1e-6, 1e3], AngularMesh::Line, vec![3.0, 1.0]).unwrap();
        let m1 = symbol_at(&k, &[1.0], 1e-12).unwrap();
        let m2 = symbol_at(&k.clone().with_chi_radius(2.0).unwrap(), &[1.0], 1e-12).unwrap();
        assert!(((m2 - m1).im + 2.0 * libm::log(2.0)).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_tight_for_uniform_floor() {
        let (nu, sigma) = (0.7, 1.3);
        let k = Kernel::uniform(2, sigma, (2.0 - sigma) * nu).unwrap();
        let spec = KernelSpec::new(k, nu, 1.0).unwrap();
        let rep = verify_symbol_bounds(&spec, &[[1.0, 0.0, 0.0], [0.3, -2.0, 0.0]], 1e-10).unwrap();
        assert!((rep.c_lower_obs - 1.0).abs() < 1e-7);
        assert!(rep.pass);
    }

    #[test]
    fn symmetric_kernel_has_real_symbol() {
        let spec = random_kernel(2, 0.8, 0.5, 2.0, 3).unwrap();
        let (even, _) = spec.decompose(Decomposition::EvenOdd).unwrap();
        let m = symbol_at(even.kernel(), &[0.9, 2.1, 0.0], 1e-10).unwrap();
        assert!(m.im.abs() < 1e-9 * m.norm());
        let rep = verify_symbol_bounds(&even, &[[0.9, 2.1, 0.0]], 1e-10).unwrap();
        assert!((rep.c_upper_obs - (-m.re) / libm::pow(norm(&[0.9, 2.1]), 0.8)).abs() < 1e-12);
    }

    #[test]
    fn table_symmetry_and_zero_mode() {
        let spec = random_kernel(2, 1.5, 0.5, 2.0, 8).unwrap();
        let g = TorusGrid::new(2, 4.0, 8).unwrap();
        let t = SymbolTable::new(spec.kernel(), &g, 1e-8).unwrap();
        assert_eq!(t.values()[0], Complex64::new(0.0, 0.0));
        assert!(t.conjugate_symmetry_residual() < 1e-10);
        assert!(t.values().iter().all(|m| m.re <= 0.0));
        let g1 = TorusGrid::new(1, 8.0, 16).unwrap();
        let t = SymbolTable::new(Kernel::fractional(1, 0.5).as_ref().unwrap(), &g1, 1e-10).unwrap();
        for (i, m) in t.values().iter().enumerate() {
            let xi = g1.frequency(i)[0];
            assert!((m.re + libm::pow(xi.abs(), 0.5)).abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn real_part_nonpositive_and_bounds(seed in 0u64..1000, sigma in 0.2f64..1.8, x in -8.0f64..8.0, y in -8.0f64..8.0) {
            prop_assume!(x.abs() + y.abs() > 1e-3);
            let spec = random_kernel(2, sigma, 0.5, 2.0, seed).unwrap();
            let rep = verify_symbol_bounds(&spec, &[[x, y, 0.0]], 1e-6).unwrap();
            prop_assert!(rep.pass, "{rep:?}");
            prop_assert!(rep.c_upper_obs.is_finite());
        }

        #[test]
        fn one_dimensional_random_bound(seed in 0u64..1000, sigma in 0.05f64..1.95, x in 1e-3f64..1e3) {
            let spec = random_kernel(1, sigma, 0.5, 2.0, seed).unwrap();
            let rep = verify_symbol_bounds(&spec, &[[x, 0.0, 0.0], [-x, 0.0, 0.0]], 1e-10).unwrap();
            prop_assert!(rep.c_lower_obs >= 1.0 - 1e-9, "{rep:?}");
        }
    }
}
