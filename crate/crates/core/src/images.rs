//! Periodic-image correction for fields that vanish outside the box.
//!
//! On the torus the multiplier `m(ξ_k)` applies `L` to the periodic extension
//! of `u`. For `u` supported in the box this differs from the whole-space
//! `Lu` by
//!
//! ```text
//! C(x) = ∫_box u(z) K_img(z - x) dz,      K_img(w) = Σ_{j ≠ 0} K(w + 2R j)
//! ```
//!
//! `K_img` is tabulated on the grid differences, the lattice sum is taken
//! explicitly for `|j|_∞ ≤ J` and the remainder is replaced by the integral of
//! `K` outside the corresponding square (exact per shell and cell). The
//! convolution is done with a zero-padded FFT.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Result};
use crate::fft::{transform_nd, Fft};
use crate::grid::{Extension, ScalarField, TorusGrid};
use crate::kernel::{AngularMesh, Kernel};
use crate::quad::{power_integral, GaussLegendre};

/// `K_img` sampled at all grid differences of one grid, ready for convolution.
#[derive(Clone, Debug)]
pub struct ImageCorrection {
    grid: TorusGrid,
    /// Spectrum of the reflected, zero-padded `K_img` table (size `(2n)^d`).
    kernel_hat: Vec<Complex64>,
}

impl ImageCorrection {
    pub fn new(kernel: &Kernel, grid: &TorusGrid) -> Result<Self> {
        let d = grid.dim();
        if kernel.dim() != d {
            bail!(InvalidParameter, "kernel and grid dimensions differ");
        }
        let n = grid.n();
        let m = 2 * n;
        let h = grid.h();
        let period = 2.0 * grid.half_period();
        let tails = RadialTails::new(kernel);
        let mut table = vec![Complex64::new(0.0, 0.0); m.pow(d as u32)];
        match d {
            1 => {
                let r_last = kernel.edges()[kernel.n_shells() - 1];
                let j_max = 8.max(libm::ceil(r_last / period) as i64 + 1);
                for k in -(n as i64 - 1)..(n as i64) {
                    // entry k holds K_img(-k h) so that the correlation becomes a convolution
                    let w = -(k as f64) * h;
                    let mut s = 0.0;
                    for j in 1..=j_max {
                        for sg in [-1.0, 1.0] {
                            let y = w + sg * period * j as f64;
                            s += kernel.eval(&[y]).unwrap_or(0.0);
                        }
                    }
                    // Σ_{j>J} f(j) ≈ ∫_{J+1/2}^∞ f + f'(J+1/2)/24 in each direction
                    let sig = kernel.sigma();
                    for (cell, y0) in [(0usize, w + period * (j_max as f64 + 0.5)), (1, -w + period * (j_max as f64 + 0.5))] {
                        let a = kernel.value(kernel.n_shells() - 1, cell);
                        s += tails.beyond(cell, y0) / period;
                        s -= period * (1.0 + sig) * a * libm::pow(y0, -2.0 - sig) / 24.0;
                    }
                    table[k.rem_euclid(m as i64) as usize] = Complex64::new(s, 0.0);
                }
            }
            2 => {
                let j_max: i64 = 6;
                let half = period * (j_max as f64 + 0.5);
                let gl = GaussLegendre::new(10);
                for k0 in -(n as i64 - 1)..(n as i64) {
                    for k1 in -(n as i64 - 1)..(n as i64) {
                        let w = [-(k0 as f64) * h, -(k1 as f64) * h];
                        let mut s = 0.0;
                        for j0 in -j_max..=j_max {
                            for j1 in -j_max..=j_max {
                                if j0 == 0 && j1 == 0 {
                                    continue;
                                }
                                let y = [w[0] + period * j0 as f64, w[1] + period * j1 as f64];
                                s += kernel.eval(&y).unwrap_or(0.0);
                            }
                        }
                        // square [-half, half]^2 shifted by w, seen from the origin
                        s += tails.outside_square(&gl, kernel.angular(), [-w[0], -w[1]], half) / (period * period);
                        let idx = k0.rem_euclid(m as i64) as usize * m + k1.rem_euclid(m as i64) as usize;
                        table[idx] = Complex64::new(s, 0.0);
                    }
                }
            }
            _ => bail!(Unsupported, "whole-space image correction is implemented for d = 1, 2"),
        }
        transform_nd(&Fft::new(m), d, &mut table, false);
        Ok(Self { grid: *grid, kernel_hat: table })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// `C(x)` at every node.
    pub fn correction(&self, u: &ScalarField) -> Result<ScalarField> {
        if *u.grid() != self.grid {
            return Err(crate::Error::GridMismatch);
        }
        let g = &self.grid;
        let (d, n) = (g.dim(), g.n());
        let m = 2 * n;
        let mut buf = vec![Complex64::new(0.0, 0.0); m.pow(d as u32)];
        for (i, v) in u.values().iter().enumerate() {
            let mi = g.multi_index(i);
            let idx = mi[..d].iter().fold(0, |acc, &p| acc * m + p);
            buf[idx] = Complex64::new(*v, 0.0);
        }
        let plan = Fft::new(m);
        transform_nd(&plan, d, &mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        transform_nd(&plan, d, &mut buf, true);
        let scale = g.cell_volume() / (m.pow(d as u32) as f64);
        let values = (0..g.len())
            .map(|i| {
                let mi = g.multi_index(i);
                let idx = mi[..d].iter().fold(0, |acc, &p| acc * m + p);
                buf[idx].re * scale
            })
            .collect();
        ScalarField::new(*g, values, Extension::ZeroOutside)
    }
}

/// Per-cell radial tail integrals `∫_ρ^∞ a(r) r^{-1-σ} dr`.
#[derive(Clone, Debug)]
pub(crate) struct RadialTails<'a> {
    kernel: &'a Kernel,
    /// `cum[c][i] = Σ_{k > i} a_kc ∫_{shell k} r^{-1-σ}`.
    cum: Vec<Vec<f64>>,
}

impl<'a> RadialTails<'a> {
    pub(crate) fn new(kernel: &'a Kernel) -> Self {
        let ns = kernel.n_shells();
        let p = -1.0 - kernel.sigma();
        let cum = (0..kernel.n_cells())
            .map(|c| {
                let mut v = vec![0.0; ns];
                for i in (0..ns.saturating_sub(1)).rev() {
                    let (lo, hi) = kernel.shell_bounds(i + 1);
                    v[i] = v[i + 1] + kernel.value(i + 1, c) * power_integral(lo, hi, p);
                }
                v
            })
            .collect();
        Self { kernel, cum }
    }

    /// `∫_ρ^∞ a_c(r) r^{-1-σ} dr` for `ρ > 0`.
    pub(crate) fn beyond(&self, cell: usize, rho: f64) -> f64 {
        let i = self.kernel.shell_of(rho);
        let (_, hi) = self.kernel.shell_bounds(i);
        self.kernel.value(i, cell) * power_integral(rho, hi, -1.0 - self.kernel.sigma()) + self.cum[cell][i]
    }

    /// `∫_{y ∉ c + [-H, H]^2} K(y) dy` for a square containing the origin.
    fn outside_square(&self, gl: &GaussLegendre, am: AngularMesh, c: [f64; 2], half: f64) -> f64 {
        let mut cuts: Vec<f64> = Vec::new();
        for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
            cuts.push(crate::kernel::wrap_angle(libm::atan2(c[1] + sy * half, c[0] + sx * half)));
        }
        let n = am.n_cells();
        for j in 0..=n {
            cuts.push(2.0 * PI * j as f64 / n as f64);
        }
        cuts.sort_by(|a, b| a.total_cmp(b));
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi - lo < 1e-15 {
                continue;
            }
            let mid = 0.5 * (lo + hi);
            let cell = am.cell_of(&[libm::cos(mid), libm::sin(mid), 0.0]);
            for (phi, wt) in gl.on(lo, hi) {
                let (s, co) = libm::sincos(phi);
                // exit distance from the origin through the square boundary
                let tx = if co > 0.0 { (c[0] + half) / co } else if co < 0.0 { (c[0] - half) / co } else { f64::INFINITY };
                let ty = if s > 0.0 { (c[1] + half) / s } else if s < 0.0 { (c[1] - half) / s } else { f64::INFINITY };
                total += wt * self.beyond(cell, tx.min(ty));
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::random_kernel;

    /// Brute-force `Σ_{j≠0} K(w + 2Rj)` with a very long lattice and an integral tail.
    fn brute_1d(k: &Kernel, w: f64, period: f64) -> f64 {
        let mut s = 0.0;
        let jm = 200_000i64;
        for j in 1..=jm {
            s += k.eval(&[w + period * j as f64]).unwrap() + k.eval(&[w - period * j as f64]).unwrap();
        }
        let tails = RadialTails::new(k);
        let y0 = period * (jm as f64 + 0.5);
        s + (tails.beyond(0, y0 + w) + tails.beyond(1, y0 - w)) / period
    }

    #[test]
    fn one_dimensional_table_matches_brute_force() {
        let spec = random_kernel(1, 0.5, 0.5, 2.0, 4).unwrap();
        let k = spec.kernel();
        let g = TorusGrid::new(1, 4.0, 16).unwrap();
        let ic = ImageCorrection::new(k, &g).unwrap();
        // correction of a point mass at node z reproduces h K_img(z - x)
        let mut u = ScalarField::zeros(g, Extension::ZeroOutside);
        u.values_mut()[5] = 1.0 / g.h();
        let c = ic.correction(&u).unwrap();
        for x in [0usize, 7, 15] {
            let w = g.coord(5) - g.coord(x);
            let b = brute_1d(k, w, 8.0);
            assert!((c.values()[x] - b).abs() < 1e-9 * b, "{} vs {b}", c.values()[x]);
        }
    }

    #[test]
    fn outside_square_of_uniform_kernel() {
        // a ≡ 1, σ: ∫_{|y|∞ > H} |y|^{-2-σ} dy = (1/σ) ∫ ρ(θ)^{-σ} dθ, centred square
        let k = Kernel::uniform(2, 0.7, 1.0).unwrap();
        let t = RadialTails::new(&k);
        let gl = GaussLegendre::new(10);
        let v = t.outside_square(&gl, k.angular(), [0.0, 0.0], 3.0);
        let gl40 = GaussLegendre::new(40);
        let oracle = 8.0 * gl40.integrate(0.0, PI / 4.0, |p| libm::pow(3.0 / libm::cos(p), -0.7)) / 0.7;
        assert!((v - oracle).abs() < 1e-10 * oracle);
    }
}
