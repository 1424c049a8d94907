//! Kernels `K(y) = a(y) / |y|^(d+σ)` with `a` piecewise constant on a polar mesh.
//!
//! The radial mesh is a list of shell edges `r_0 < r_1 < … < r_n`. Shell `i`
//! is `[r_i, r_{i+1})`, except that the first shell extends down to the origin
//! and the last one out to infinity, so only the interior edges are genuine
//! breakpoints of `a`. Angular cells are described by [`AngularMesh`].
//!
//! [`Kernel`] holds a possibly signed density table (odd parts and residuals of
//! decompositions are signed). [`KernelSpec`] is a kernel together with
//! ellipticity constants it has been validated against.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Error, Result};
use crate::{dot, norm, point, Point, MAX_DIM};

pub const DEFAULT_R_MIN: f64 = 1e-6;
pub const DEFAULT_R_MAX: f64 = 1e3;
pub const DEFAULT_SHELLS: usize = 18;

/// Tolerance on the per-shell first angular moment when `σ = 1`, relative to
/// the largest `|a|` on the shell.
pub const CANCELLATION_TOL: f64 = 1e-12;

/// The compensator `χ` in `u(x+y) - u(x) - y·∇u(x) χ(y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Chi {
    Zero,
    BallIndicator { radius: f64 },
    One,
}

impl Chi {
    pub fn for_sigma(sigma: f64, radius: f64) -> Self {
        if sigma < 1.0 {
            Chi::Zero
        } else if sigma > 1.0 {
            Chi::One
        } else {
            Chi::BallIndicator { radius }
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Chi::Zero => 0.0,
            Chi::One => 1.0,
            Chi::BallIndicator { radius } => {
                if r < radius {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Partition of the unit sphere `S^{d-1}` into cells.
///
/// * `Line`: the two points `+1` (cell 0) and `-1` (cell 1).
/// * `Circle`: `sectors` equal arcs, cell `j` covering `[2πj/n, 2π(j+1)/n)`.
/// * `Sphere`: `bands` equal-area bands in `z`, each split into `2·bands`
///   azimuthal sectors; cell `(i, j)` is stored at `i·2·bands + j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngularMesh {
    Line,
    Circle { sectors: usize },
    Sphere { bands: usize },
}

impl AngularMesh {
    pub fn default_for(d: usize) -> Self {
        match d {
            1 => AngularMesh::Line,
            2 => AngularMesh::Circle { sectors: 16 },
            _ => AngularMesh::Sphere { bands: 4 },
        }
    }

    /// The mesh for dimension `d` with `n_cells` cells in total.
    pub fn with_cells(d: usize, n_cells: usize) -> Result<Self> {
        let mesh = match d {
            1 if n_cells == 2 => AngularMesh::Line,
            2 if n_cells >= 4 && n_cells % 2 == 0 => AngularMesh::Circle { sectors: n_cells },
            3 => {
                let b = libm::round(libm::sqrt(n_cells as f64 / 2.0)) as usize;
                if b < 2 || 2 * b * b != n_cells {
                    bail!(InvalidParameter, "d=3 needs 2b^2 angular cells with b >= 2, got {n_cells}");
                }
                AngularMesh::Sphere { bands: b }
            }
            1 => bail!(InvalidParameter, "d=1 has exactly 2 angular cells, got {n_cells}"),
            2 => bail!(InvalidParameter, "d=2 needs an even number >= 4 of sectors, got {n_cells}"),
            _ => bail!(InvalidParameter, "dimension must be 1, 2 or 3, got {d}"),
        };
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        match self {
            AngularMesh::Line => 1,
            AngularMesh::Circle { .. } => 2,
            AngularMesh::Sphere { .. } => 3,
        }
    }

    pub fn n_cells(&self) -> usize {
        match *self {
            AngularMesh::Line => 2,
            AngularMesh::Circle { sectors } => sectors,
            AngularMesh::Sphere { bands } => 2 * bands * bands,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            AngularMesh::Line => Ok(()),
            AngularMesh::Circle { sectors } if sectors >= 4 && sectors % 2 == 0 => Ok(()),
            AngularMesh::Sphere { bands } if bands >= 2 => Ok(()),
            m => bail!(InvalidParameter, "unsupported angular mesh {m:?}"),
        }
    }

    /// The cell containing `-θ` for `θ` in cell `j`.
    pub fn antipode(&self, j: usize) -> usize {
        match *self {
            AngularMesh::Line => 1 - j,
            AngularMesh::Circle { sectors } => (j + sectors / 2) % sectors,
            AngularMesh::Sphere { bands } => {
                let s = 2 * bands;
                let (i, k) = (j / s, j % s);
                (bands - 1 - i) * s + (k + bands) % s
            }
        }
    }

    /// Surface measure of a cell (counting measure for `d = 1`).
    pub fn cell_measure(&self, _j: usize) -> f64 {
        match *self {
            AngularMesh::Line => 1.0,
            AngularMesh::Circle { sectors } => 2.0 * PI / sectors as f64,
            AngularMesh::Sphere { bands } => (2.0 / bands as f64) * (PI / bands as f64),
        }
    }

    pub fn total_measure(&self) -> f64 {
        match self {
            AngularMesh::Line => 2.0,
            AngularMesh::Circle { .. } => 2.0 * PI,
            AngularMesh::Sphere { .. } => 4.0 * PI,
        }
    }

    /// Angle range `[φ0, φ1]` of a circle sector or the azimuth range of a sphere cell.
    pub fn phi_range(&self, j: usize) -> (f64, f64) {
        match *self {
            AngularMesh::Line => (0.0, 0.0),
            AngularMesh::Circle { sectors } => {
                let w = 2.0 * PI / sectors as f64;
                (j as f64 * w, (j + 1) as f64 * w)
            }
            AngularMesh::Sphere { bands } => {
                let s = 2 * bands;
                let w = 2.0 * PI / s as f64;
                let k = j % s;
                (k as f64 * w, (k + 1) as f64 * w)
            }
        }
    }

    /// `z` range of a sphere cell.
    pub fn z_range(&self, j: usize) -> (f64, f64) {
        match *self {
            AngularMesh::Sphere { bands } => {
                let i = j / (2 * bands);
                let w = 2.0 / bands as f64;
                (-1.0 + i as f64 * w, -1.0 + (i + 1) as f64 * w)
            }
            _ => (0.0, 0.0),
        }
    }

    /// First moment `∫_cell θ dS(θ)`.
    pub fn moment(&self, j: usize) -> Point {
        match *self {
            AngularMesh::Line => [if j == 0 { 1.0 } else { -1.0 }, 0.0, 0.0],
            AngularMesh::Circle { .. } => {
                let (a, b) = self.phi_range(j);
                [libm::sin(b) - libm::sin(a), libm::cos(a) - libm::cos(b), 0.0]
            }
            AngularMesh::Sphere { .. } => {
                let (a, b) = self.phi_range(j);
                let (z0, z1) = self.z_range(j);
                let g = |z: f64| 0.5 * (z * libm::sqrt((1.0 - z * z).max(0.0)) + libm::asin(z));
                let rho = g(z1) - g(z0);
                [
                    rho * (libm::sin(b) - libm::sin(a)),
                    rho * (libm::cos(a) - libm::cos(b)),
                    0.5 * (z1 * z1 - z0 * z0) * (b - a),
                ]
            }
        }
    }

    /// A representative unit direction inside cell `j`.
    pub fn center(&self, j: usize) -> Point {
        match *self {
            AngularMesh::Line => [if j == 0 { 1.0 } else { -1.0 }, 0.0, 0.0],
            AngularMesh::Circle { .. } => {
                let (a, b) = self.phi_range(j);
                let p = 0.5 * (a + b);
                [libm::cos(p), libm::sin(p), 0.0]
            }
            AngularMesh::Sphere { .. } => {
                let (a, b) = self.phi_range(j);
                let (z0, z1) = self.z_range(j);
                let (p, z) = (0.5 * (a + b), 0.5 * (z0 + z1));
                let rho = libm::sqrt(1.0 - z * z);
                [rho * libm::cos(p), rho * libm::sin(p), z]
            }
        }
    }

    /// Cell index of the direction of a nonzero vector.
    pub fn cell_of(&self, y: &[f64]) -> usize {
        match *self {
            AngularMesh::Line => usize::from(y[0] < 0.0),
            AngularMesh::Circle { sectors } => {
                let phi = wrap_angle(libm::atan2(y[1], y[0]));
                ((phi / (2.0 * PI) * sectors as f64) as usize).min(sectors - 1)
            }
            AngularMesh::Sphere { bands } => {
                let r = norm(&y[..3]);
                let z = (y[2] / r).clamp(-1.0, 1.0);
                let i = (((z + 1.0) / 2.0 * bands as f64) as usize).min(bands - 1);
                let s = 2 * bands;
                let phi = wrap_angle(libm::atan2(y[1], y[0]));
                let k = ((phi / (2.0 * PI) * s as f64) as usize).min(s - 1);
                i * s + k
            }
        }
    }
}

pub(crate) fn wrap_angle(phi: f64) -> f64 {
    let t = phi % (2.0 * PI);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Log-spaced shell edges on `[r_min, r_max]`.
pub fn log_edges(r_min: f64, r_max: f64, n_shells: usize) -> Vec<f64> {
    let (l0, l1) = (libm::log(r_min), libm::log(r_max));
    (0..=n_shells)
        .map(|i| libm::exp(l0 + (l1 - l0) * i as f64 / n_shells as f64))
        .collect()
}

/// A piecewise-constant density `a` on a polar mesh, plus `d`, `σ` and the χ radius.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    d: usize,
    sigma: f64,
    chi_radius: f64,
    edges: Vec<f64>,
    angular: AngularMesh,
    values: Vec<f64>,
}

impl Kernel {
    /// Builds a kernel from shell-major values (`values[i * n_cells + j]` is
    /// the density on shell `i`, cell `j`).
    pub fn new(sigma: f64, edges: Vec<f64>, angular: AngularMesh, values: Vec<f64>) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 2.0) {
            bail!(Domain, "sigma must lie in (0, 2), got {sigma}");
        }
        angular.validate()?;
        if edges.len() < 2 {
            bail!(InvalidParameter, "need at least one radial shell");
        }
        if edges[0] <= 0.0 || edges.windows(2).any(|w| !(w[1] > w[0])) || !edges[edges.len() - 1].is_finite() {
            bail!(InvalidParameter, "shell edges must be positive, finite and increasing");
        }
        let expected = (edges.len() - 1) * angular.n_cells();
        if values.len() != expected {
            return Err(Error::SizeMismatch { expected, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            bail!(Kernel, "kernel values must be finite");
        }
        Ok(Self { d: angular.dim(), sigma, chi_radius: 1.0, edges, angular, values })
    }

    /// `a ≡ value` on a single shell.
    pub fn uniform(d: usize, sigma: f64, value: f64) -> Result<Self> {
        let angular = AngularMesh::default_for(d);
        if !(1..=MAX_DIM).contains(&d) {
            bail!(InvalidParameter, "dimension must be 1, 2 or 3, got {d}");
        }
        let n = angular.n_cells();
        Self::new(sigma, vec![DEFAULT_R_MIN, DEFAULT_R_MAX], angular, vec![value; n])
    }

    /// The kernel of `-(-Δ)^{σ/2}`: `a ≡ 1/c(d, σ)`.
    pub fn fractional(d: usize, sigma: f64) -> Result<Self> {
        let c = crate::symbol::frac_laplace_constant(d, sigma)?;
        Self::uniform(d, sigma, 1.0 / c)
    }

    /// Tabulates `a(r, θ)` at the geometric centre of each shell and the
    /// centre direction of each cell.
    pub fn from_fn(
        sigma: f64,
        edges: Vec<f64>,
        angular: AngularMesh,
        mut a: impl FnMut(f64, &Point) -> f64,
    ) -> Result<Self> {
        let nc = angular.n_cells();
        let mut values = Vec::with_capacity((edges.len().saturating_sub(1)) * nc);
        for w in edges.windows(2) {
            let r = libm::sqrt(w[0] * w[1]);
            for j in 0..nc {
                values.push(a(r, &angular.center(j)));
            }
        }
        Self::new(sigma, edges, angular, values)
    }

    pub fn with_chi_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            bail!(InvalidParameter, "chi radius must be positive, got {radius}");
        }
        self.chi_radius = radius;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn chi_radius(&self) -> f64 {
        self.chi_radius
    }

    pub fn chi(&self) -> Chi {
        Chi::for_sigma(self.sigma, self.chi_radius)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn angular(&self) -> AngularMesh {
        self.angular
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_shells(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn n_cells(&self) -> usize {
        self.angular.n_cells()
    }

    pub fn value(&self, shell: usize, cell: usize) -> f64 {
        self.values[shell * self.n_cells() + cell]
    }

    pub fn shell_values(&self, shell: usize) -> &[f64] {
        let nc = self.n_cells();
        &self.values[shell * nc..(shell + 1) * nc]
    }

    /// Radial extent of shell `i` after the constant extension at both ends.
    pub fn shell_bounds(&self, i: usize) -> (f64, f64) {
        let n = self.n_shells();
        let lo = if i == 0 { 0.0 } else { self.edges[i] };
        let hi = if i + 1 == n { f64::INFINITY } else { self.edges[i + 1] };
        (lo, hi)
    }

    pub fn shell_of(&self, r: f64) -> usize {
        let n = self.n_shells();
        // number of interior edges <= r
        self.edges[1..n].partition_point(|&e| e <= r)
    }

    /// `a(y)`; `y` must be nonzero.
    pub fn density(&self, y: &[f64]) -> Result<f64> {
        let r = norm(&y[..self.d]);
        if r == 0.0 {
            bail!(Domain, "kernel density is undefined at the origin");
        }
        Ok(self.value(self.shell_of(r), self.angular.cell_of(y)))
    }

    /// `K(y) = a(y) / |y|^(d+σ)`.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        let a = self.density(y)?;
        let r = norm(&y[..self.d]);
        Ok(a / libm::pow(r, self.d as f64 + self.sigma))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self) -> bool {
        let nc = self.n_cells();
        (0..self.n_shells()).all(|i| {
            let s = self.shell_values(i);
            (0..nc).all(|j| s[j] == s[self.angular.antipode(j)])
        })
    }

    /// `y ↦ K(-y)`, the kernel of the formal adjoint.
    pub fn reflected(&self) -> Self {
        let nc = self.n_cells();
        let mut values = self.values.clone();
        for i in 0..self.n_shells() {
            for j in 0..nc {
                values[i * nc + j] = self.values[i * nc + self.angular.antipode(j)];
            }
        }
        Self { values, ..self.clone() }
    }

    /// `K_R(z) = R^(d+σ) K(Rz)`, i.e. `a_R(z) = a(Rz)`.
    pub fn scaled(&self, r: f64) -> Self {
        let edges = self.edges.iter().map(|e| e / r).collect();
        Self { edges, chi_radius: self.chi_radius, ..self.clone() }
    }

    /// Same mesh, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        let k = Self::new(self.sigma, self.edges.clone(), self.angular, values)?;
        Ok(Self { chi_radius: self.chi_radius, ..k })
    }

    /// `Σ_j a_ij μ_j`, the first angular moment on shell `i`.
    pub fn shell_moment(&self, i: usize) -> Point {
        let mut m = [0.0; MAX_DIM];
        for (j, a) in self.shell_values(i).iter().enumerate() {
            let mu = self.angular.moment(j);
            for k in 0..MAX_DIM {
                m[k] += a * mu[k];
            }
        }
        m
    }

    /// `∫_{∂B_r} y K(y) dS(y)`.
    pub fn cancellation_defect(&self, r: f64) -> Point {
        let m = self.shell_moment(self.shell_of(r));
        let s = libm::pow(r, -self.sigma);
        [m[0] * s, m[1] * s, m[2] * s]
    }

    /// Largest per-shell moment relative to the largest `|a|` on that shell.
    pub fn max_relative_defect(&self) -> f64 {
        (0..self.n_shells())
            .map(|i| {
                let scale = self.shell_values(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let m = self.shell_moment(i);
                if scale == 0.0 {
                    0.0
                } else {
                    norm(&m) / scale
                }
            })
            .fold(0.0, f64::max)
    }

    /// `∫ yχ K` style drift: `-∫_{B_1} yK` for `σ < 1`, `∫_{|y|>1} yK` for `σ > 1`.
    pub fn drift_vector(&self) -> Result<Point> {
        let s = self.sigma;
        if s == 1.0 {
            bail!(Unsupported, "the drift vector is only defined for sigma != 1");
        }
        let mut b = [0.0; MAX_DIM];
        for i in 0..self.n_shells() {
            let (lo, hi) = self.shell_bounds(i);
            let w = if s < 1.0 {
                -crate::quad::power_integral(lo.min(1.0), hi.min(1.0), -s)
            } else {
                crate::quad::power_integral(lo.max(1.0), hi.max(1.0), -s)
            };
            let m = self.shell_moment(i);
            for k in 0..MAX_DIM {
                b[k] += w * m[k];
            }
        }
        Ok(b)
    }
}

/// Result of [`check_ellipticity`]; ratios are `a / (2-σ)`, to be compared with `[ν, Λ]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticityReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Checks `(2-σ)ν ≤ a ≤ (2-σ)Λ` on every mesh cell and on `n_samples` random points.
pub fn check_ellipticity(kernel: &Kernel, nu: f64, lambda_up: f64, n_samples: usize) -> EllipticityReport {
    let scale = 2.0 - kernel.sigma;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in kernel.values() {
        lo = lo.min(v / scale);
        hi = hi.max(v / scale);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (l0, l1) = (libm::log(kernel.edges[0] * 1e-2), libm::log(kernel.edges[kernel.n_shells()] * 1e2));
    for _ in 0..n_samples {
        let mut y = [0.0; MAX_DIM];
        for c in y.iter_mut().take(kernel.d) {
            *c = rng.random::<f64>() * 2.0 - 1.0;
        }
        let r = norm(&y);
        if r == 0.0 {
            continue;
        }
        let target = libm::exp(l0 + (l1 - l0) * rng.random::<f64>());
        for c in y.iter_mut() {
            *c *= target / r;
        }
        if let Ok(a) = kernel.density(&y) {
            lo = lo.min(a / scale);
            hi = hi.max(a / scale);
        }
    }
    let tol = 1e-12 * lambda_up.abs().max(1.0);
    EllipticityReport { min_ratio: lo, max_ratio: hi, pass: lo >= nu - tol && hi <= lambda_up + tol }
}

/// A kernel validated against ellipticity constants `ν ≤ Λ`.
///
/// `ν = 0` is accepted: it drops the lower bound, which only makes sense for
/// continuity statements.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    kernel: Kernel,
    nu: f64,
    lambda_up: f64,
    symmetric: bool,
}

impl AsRef<Kernel> for KernelSpec {
    fn as_ref(&self) -> &Kernel {
        &self.kernel
    }
}

impl KernelSpec {
    pub fn new(kernel: Kernel, nu: f64, lambda_up: f64) -> Result<Self> {
        if !(nu >= 0.0 && lambda_up >= nu && lambda_up.is_finite()) {
            bail!(InvalidParameter, "need 0 <= nu <= lambda < inf, got nu={nu}, lambda={lambda_up}");
        }
        let rep = check_ellipticity(&kernel, nu, lambda_up, 0);
        if !rep.pass {
            bail!(
                Kernel,
                "a/(2-sigma) ranges over [{}, {}], outside [{nu}, {lambda_up}]",
                rep.min_ratio,
                rep.max_ratio
            );
        }
        if kernel.sigma == 1.0 {
            let defect = kernel.max_relative_defect();
            if defect > 1e-10 {
                bail!(Kernel, "sigma = 1 requires the cancellation condition; relative shell moment {defect:e}");
            }
        }
        let symmetric = kernel.is_symmetric();
        Ok(Self { kernel, nu, lambda_up, symmetric })
    }

    /// The fractional Laplacian kernel with `ν = Λ = 1/((2-σ)c)`.
    pub fn fractional(d: usize, sigma: f64) -> Result<Self> {
        let k = Kernel::fractional(d, sigma)?;
        let v = k.values()[0] / (2.0 - sigma);
        Self::new(k, v, v)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn into_kernel(self) -> Kernel {
        self.kernel
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lambda_up(&self) -> f64 {
        self.lambda_up
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn dim(&self) -> usize {
        self.kernel.d
    }

    pub fn sigma(&self) -> f64 {
        self.kernel.sigma
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        self.kernel.eval(y)
    }

    pub fn check_ellipticity(&self, n_samples: usize) -> EllipticityReport {
        check_ellipticity(&self.kernel, self.nu, self.lambda_up, n_samples)
    }

    /// The adjoint kernel `K(-y)`, same constants.
    pub fn reflected(&self) -> Self {
        Self { kernel: self.kernel.reflected(), ..self.clone() }
    }

    pub fn with_chi_radius(&self, radius: f64) -> Result<Self> {
        Ok(Self { kernel: self.kernel.clone().with_chi_radius(radius)?, ..self.clone() })
    }

    pub fn decompose(&self, mode: Decomposition) -> Result<(KernelSpec, Kernel)> {
        decompose(self, mode)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decomposition {
    /// `K_e = (K(y)+K(-y))/2`, `K_o = K - K_e`.
    EvenOdd,
    /// `K_1 = min(K(y), K(-y))`, `K_2 = K - K_1 ≥ 0`.
    MinResidual,
}

/// Splits `K` into a symmetric elliptic part and a signed remainder.
pub fn decompose(spec: &KernelSpec, mode: Decomposition) -> Result<(KernelSpec, Kernel)> {
    let k = &spec.kernel;
    let nc = k.n_cells();
    let mut first = k.values.clone();
    for i in 0..k.n_shells() {
        let s = k.shell_values(i);
        for j in 0..nc {
            let (a, b) = (s[j], s[k.angular.antipode(j)]);
            first[i * nc + j] = match mode {
                Decomposition::EvenOdd => 0.5 * (a + b),
                Decomposition::MinResidual => a.min(b),
            };
        }
    }
    let rest: Vec<f64> = k.values.iter().zip(&first).map(|(a, b)| a - b).collect();
    let part = KernelSpec::new(k.with_values(first)?, spec.nu, spec.lambda_up)?;
    Ok((part, k.with_values(rest)?))
}

/// Removes the first angular moment of every shell while keeping all values
/// in `[(2-σ)ν, (2-σ)Λ]`.
///
/// Per shell the odd part `o` (with respect to `θ ↦ -θ`) carries the whole
/// moment. It is replaced by `o - Σ_k β_k μ_j^k / |cell_j|`, with `β` solving
/// the `d×d` moment system, and then scaled by the largest factor in `[0, 1]`
/// that keeps `even ± odd` inside the band. Both steps preserve a zero moment.
pub fn enforce_cancellation(kernel: &Kernel, nu: f64, lambda_up: f64) -> Result<Kernel> {
    let d = kernel.d;
    let am = kernel.angular;
    let nc = kernel.n_cells();
    let (lo, hi) = ((2.0 - kernel.sigma) * nu, (2.0 - kernel.sigma) * lambda_up);
    let mus: Vec<Point> = (0..nc).map(|j| am.moment(j)).collect();
    let basis: Vec<Point> = (0..nc)
        .map(|j| {
            let w = 1.0 / am.cell_measure(j);
            [mus[j][0] * w, mus[j][1] * w, mus[j][2] * w]
        })
        .collect();
    let mut gram = [[0.0; MAX_DIM]; MAX_DIM];
    for j in 0..nc {
        for k in 0..d {
            for l in 0..d {
                gram[k][l] += basis[j][k] * mus[j][l];
            }
        }
    }
    let mut values = kernel.values.clone();
    for i in 0..kernel.n_shells() {
        let s = kernel.shell_values(i);
        let even: Vec<f64> = (0..nc).map(|j| 0.5 * (s[j] + s[am.antipode(j)])).collect();
        let mut odd: Vec<f64> = (0..nc).map(|j| 0.5 * (s[j] - s[am.antipode(j)])).collect();
        if even.iter().any(|e| *e < lo - 1e-12 || *e > hi + 1e-12) {
            bail!(Kernel, "shell {i}: symmetric part leaves the ellipticity band");
        }
        let mut m = [0.0; MAX_DIM];
        for j in 0..nc {
            for k in 0..d {
                m[k] += odd[j] * mus[j][k];
            }
        }
        let beta = solve_small(&gram, &m, d);
        for j in 0..nc {
            odd[j] -= dot(&beta[..d], &basis[j][..d]);
        }
        let mut t: f64 = 1.0;
        for j in 0..nc {
            let slack = (even[j] - lo).min(hi - even[j]).max(0.0);
            if odd[j].abs() > slack {
                t = t.min(slack / odd[j].abs());
            }
        }
        for j in 0..nc {
            values[i * nc + j] = even[j] + t * odd[j];
        }
    }
    let out = kernel.with_values(values)?;
    let defect = out.max_relative_defect();
    if defect > CANCELLATION_TOL {
        bail!(Kernel, "cancellation enforcement left a relative moment of {defect:e}");
    }
    Ok(out)
}

/// Solves `G β = m` for a symmetric positive semi-definite `d×d` system,
/// setting components along (numerically) null pivots to zero.
fn solve_small(g: &[[f64; MAX_DIM]; MAX_DIM], m: &Point, d: usize) -> Point {
    let mut a = *g;
    let mut b = *m;
    let scale = (0..d).map(|k| g[k][k].abs()).fold(0.0, f64::max).max(1e-300);
    let mut active = [true; MAX_DIM];
    for c in 0..d {
        let p = (c..d).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap_or(c);
        a.swap(c, p);
        b.swap(c, p);
        if a[c][c].abs() < 1e-13 * scale {
            active[c] = false;
            continue;
        }
        for r in (c + 1)..d {
            let f = a[r][c] / a[c][c];
            for k in c..d {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; MAX_DIM];
    for c in (0..d).rev() {
        if !active[c] {
            continue;
        }
        let s: f64 = ((c + 1)..d).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    x
}

/// A kernel with i.i.d. uniform cell values in `[(2-σ)ν, (2-σ)Λ]`; for
/// `σ = 1` the result is passed through [`enforce_cancellation`].
pub fn make_random_kernel(
    d: usize,
    sigma: f64,
    nu: f64,
    lambda_up: f64,
    seed: u64,
    n_r: usize,
    n_theta: usize,
) -> Result<KernelSpec> {
    if !(nu > 0.0 && lambda_up >= nu) {
        bail!(InvalidParameter, "need 0 < nu <= lambda, got nu={nu}, lambda={lambda_up}");
    }
    if n_r == 0 {
        bail!(InvalidParameter, "need at least one shell");
    }
    let angular = AngularMesh::with_cells(d, n_theta)?;
    let (lo, hi) = ((2.0 - sigma) * nu, (2.0 - sigma) * lambda_up);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n_r * angular.n_cells())
        .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        .collect();
    let mut kernel = Kernel::new(sigma, log_edges(DEFAULT_R_MIN, DEFAULT_R_MAX, n_r), angular, values)?;
    if sigma == 1.0 {
        kernel = enforce_cancellation(&kernel, nu, lambda_up)?;
    }
    KernelSpec::new(kernel, nu, lambda_up)
}

/// [`make_random_kernel`] with the default mesh for dimension `d`.
pub fn random_kernel(d: usize, sigma: f64, nu: f64, lambda_up: f64, seed: u64) -> Result<KernelSpec> {
    make_random_kernel(d, sigma, nu, lambda_up, seed, DEFAULT_SHELLS, AngularMesh::default_for(d).n_cells())
}

/// A random point with `|y|` log-uniform on `[r0, r1]`.
pub fn sample_point(rng: &mut impl Rng, d: usize, r0: f64, r1: f64) -> Point {
    loop {
        let mut y = [0.0; MAX_DIM];
        for c in y.iter_mut().take(d) {
            *c = rng.random::<f64>() * 2.0 - 1.0;
        }
        let r = norm(&y);
        if r > 1e-3 && r <= 1.0 {
            let t = libm::exp(libm::log(r0) + (libm::log(r1) - libm::log(r0)) * rng.random::<f64>());
            return point(&[y[0] * t / r, y[1] * t / r, y[2] * t / r]);
        }
    }
}

impl core::fmt::Display for Kernel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "Kernel(d={}, sigma={}, shells={}, cells={})",
            self.d,
            self.sigma,
            self.n_shells(),
            self.n_cells()
        )
    }
}
