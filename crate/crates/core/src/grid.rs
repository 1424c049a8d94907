//! Periodic grids on `[-R, R)^d`, real fields and their spectra.
//!
//! Nodes are `x_j = -R + j h` with `h = 2R/n`, stored row-major with the last
//! axis fastest. Frequencies are `ξ_k = (π/R) k` with the signed index `k`
//! recovered from the FFT index `p` as `p` for `p < n/2` and `p - n` otherwise.
//!
//! The transform pair is
//!
//! ```text
//! û(ξ_k) = h^d Σ_x u(x) e^{-iξ_k·x},      u(x) = (2R)^{-d} Σ_k û(ξ_k) e^{iξ_k·x}
//! ```

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Error, Result};
use crate::fft::{transform_nd, Fft};
use crate::{Point, MAX_DIM};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusGrid {
    d: usize,
    half_period: f64,
    n: usize,
}

impl TorusGrid {
    pub fn new(d: usize, half_period: f64, n: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) {
            bail!(InvalidParameter, "dimension must be 1, 2 or 3, got {d}");
        }
        if n < 2 || n % 2 != 0 {
            bail!(InvalidParameter, "points per dimension must be even and >= 2, got {n}");
        }
        if !(half_period > 0.0 && half_period.is_finite()) {
            bail!(InvalidParameter, "half-period must be positive, got {half_period}");
        }
        Ok(Self { d, half_period, n })
    }

    /// `R = 16, n = 512` in one dimension, `R = 8, n = 128` in two, `R = 8, n = 32` in three.
    pub fn default_for(d: usize) -> Result<Self> {
        match d {
            1 => Self::new(1, 16.0, 512),
            2 => Self::new(2, 8.0, 128),
            _ => Self::new(d, 8.0, 32),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn half_period(&self) -> f64 {
        self.half_period
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_period / self.n as f64
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        libm::pow(self.h(), self.d as f64)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-axis indices of a linear index.
    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for a in (0..self.d).rev() {
            m[a] = idx % self.n;
            idx /= self.n;
        }
        m
    }

    pub fn linear_index(&self, m: &[usize]) -> usize {
        m[..self.d].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_period + i as f64 * self.h()
    }

    pub fn node(&self, idx: usize) -> Point {
        let m = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.d {
            x[a] = self.coord(m[a]);
        }
        x
    }

    /// Linear index of the node at the origin.
    pub fn origin_index(&self) -> usize {
        self.linear_index(&[self.n / 2; MAX_DIM])
    }

    /// Signed frequency index of FFT index `p`.
    pub fn signed_index(&self, p: usize) -> i64 {
        if p < self.n / 2 {
            p as i64
        } else {
            p as i64 - self.n as i64
        }
    }

    pub fn frequency(&self, idx: usize) -> Point {
        let m = self.multi_index(idx);
        let mut xi = [0.0; MAX_DIM];
        for a in 0..self.d {
            xi[a] = PI / self.half_period * self.signed_index(m[a]) as f64;
        }
        xi
    }

    /// Linear FFT index of `-ξ` for the frequency at `idx`.
    pub fn mirror_index(&self, idx: usize) -> usize {
        let mut m = self.multi_index(idx);
        for a in m.iter_mut().take(self.d) {
            *a = (self.n - *a) % self.n;
        }
        self.linear_index(&m)
    }

    pub fn frequencies(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |i| self.frequency(i))
    }

    pub fn nodes(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    /// The grid with the same spacing and twice the half-period.
    pub fn doubled(&self) -> Self {
        Self { half_period: 2.0 * self.half_period, n: 2 * self.n, d: self.d }
    }
}

/// How a field is read outside the computational box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Extension {
    Periodic,
    #[default]
    ZeroOutside,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
    extension: Extension,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>, extension: Extension) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values, extension })
    }

    pub fn zeros(grid: TorusGrid, extension: Extension) -> Self {
        Self { grid, values: vec![0.0; grid.len()], extension }
    }

    pub fn from_fn(grid: TorusGrid, extension: Extension, f: impl Fn(&Point) -> f64) -> Self {
        let values = grid.nodes().map(|x| f(&x)).collect();
        Self { grid, values, extension }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    pub fn with_extension(mut self, extension: Extension) -> Self {
        self.extension = extension;
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|v| f(*v)).collect(), ..self.clone() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { values, ..self.clone() })
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `∫ u v` by the rectangle rule.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(x, y)| x * y).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|u|` on the outermost layer of nodes.
    pub fn boundary_max(&self) -> f64 {
        let n = self.grid.n;
        let mut m: f64 = 0.0;
        for (idx, v) in self.values.iter().enumerate() {
            let mi = self.grid.multi_index(idx);
            if mi[..self.grid.d].iter().any(|&i| i == 0 || i == n - 1) {
                m = m.max(v.abs());
            }
        }
        m
    }

    pub fn transform(&self) -> Spectrum {
        transform(self)
    }

    /// Trigonometric interpolant on a grid `factor` times finer (same box).
    /// Nyquist coefficients are split evenly between `±n/2`.
    pub fn upsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidParameter("upsampling factor must be positive".into()));
        }
        let g = &self.grid;
        let fine = TorusGrid::new(g.d, g.half_period, g.n * factor)?;
        let coarse = self.transform();
        let mut buf = vec![Complex64::new(0.0, 0.0); fine.len()];
        let (n, nf) = (g.n as i64, fine.n as i64);
        for (i, v) in coarse.values.iter().enumerate() {
            let mi = g.multi_index(i);
            let nyq: Vec<usize> = (0..g.d).filter(|&a| mi[a] == g.n / 2).collect();
            let share = libm::pow(0.5, nyq.len() as f64);
            for combo in 0..(1usize << nyq.len()) {
                let mut idx = 0usize;
                for a in 0..g.d {
                    let mut s = g.signed_index(mi[a]);
                    if let Some(b) = nyq.iter().position(|&x| x == a) {
                        s = if combo >> b & 1 == 1 { n / 2 } else { -n / 2 };
                    }
                    idx = idx * fine.n + s.rem_euclid(nf) as usize;
                }
                buf[idx] += v * share;
            }
        }
        Ok(Spectrum { grid: fine, values: buf }.inverse(self.extension))
    }
}

/// Spectral coefficients in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Multiplies every coefficient by `f(ξ)`.
    pub fn multiply(&self, f: impl Fn(&Point) -> Complex64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v * f(&self.grid.frequency(i)))
            .collect();
        Self { grid: self.grid, values }
    }

    /// Real part of the inverse transform.
    pub fn inverse(&self, extension: Extension) -> ScalarField {
        let c = self.inverse_complex();
        ScalarField { grid: self.grid, values: c.into_iter().map(|z| z.re).collect(), extension }
    }

    pub fn inverse_complex(&self) -> Vec<Complex64> {
        let g = &self.grid;
        let mut buf: Vec<Complex64> =
            self.values.iter().enumerate().map(|(i, v)| v * parity(g, i)).collect();
        transform_nd(&Fft::new(g.n), g.d, &mut buf, true);
        let scale = libm::pow(2.0 * g.half_period, -(g.d as f64));
        for v in buf.iter_mut() {
            *v *= scale;
        }
        buf
    }

    /// `(2R)^{-d} Σ |û|^2 w(ξ)`, the Plancherel form of `∫ |u|^2` weighted by `w`.
    pub fn weighted_energy(&self, w: impl Fn(&Point) -> f64) -> f64 {
        let g = &self.grid;
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v.norm_sqr() * w(&g.frequency(i)))
            .sum();
        s * libm::pow(2.0 * g.half_period, -(g.d as f64))
    }
}

/// `(-1)^{Σ p}`: the phase from shifting the box origin to `-R`.
fn parity(g: &TorusGrid, idx: usize) -> f64 {
    let m = g.multi_index(idx);
    if m[..g.d].iter().sum::<usize>() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn transform(u: &ScalarField) -> Spectrum {
    transform_complex(&u.grid, u.values.iter().map(|v| Complex64::new(*v, 0.0)).collect())
}

pub fn transform_complex(grid: &TorusGrid, mut buf: Vec<Complex64>) -> Spectrum {
    transform_nd(&Fft::new(grid.n), grid.d, &mut buf, false);
    let hd = grid.cell_volume();
    for (i, v) in buf.iter_mut().enumerate() {
        *v *= hd * parity(grid, i);
    }
    Spectrum { grid: *grid, values: buf }
}

pub fn inverse_transform(s: &Spectrum, extension: Extension) -> ScalarField {
    s.inverse(extension)
}

/// Spectral partial derivative along `axis`.
pub fn derivative(u: &ScalarField, axis: usize) -> ScalarField {
    u.transform()
        .multiply(|xi| Complex64::new(0.0, xi[axis]))
        .inverse(u.extension)
}
