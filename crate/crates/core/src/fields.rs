//! Test-field families: Gaussian bumps, single modes and band-limited noise.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::grid::{Extension, ScalarField, Spectrum, TorusGrid};

/// `exp(-|x - c|² / w²)`, read as zero outside the box.
pub fn gaussian_bump(grid: TorusGrid, center: &[f64], width: f64) -> ScalarField {
    let d = grid.dim();
    let c = crate::point(center);
    ScalarField::from_fn(grid, Extension::ZeroOutside, |x| {
        let r2: f64 = (0..d).map(|a| (x[a] - c[a]) * (x[a] - c[a])).sum();
        libm::exp(-r2 / (width * width))
    })
}

/// `cos(ξ·x)` for a lattice frequency `ξ`.
pub fn cosine_mode(grid: TorusGrid, xi: &[f64]) -> ScalarField {
    let d = grid.dim();
    ScalarField::from_fn(grid, Extension::Periodic, |x| libm::cos(crate::dot(&xi[..d], &x[..d])))
}

/// Real periodic noise with independent Gaussian coefficients on the modes
/// `0 < |k|_∞ ≤ k_max`, normalized to unit sup norm.
pub fn band_limited_noise(grid: TorusGrid, k_max: usize, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![Complex64::new(0.0, 0.0); grid.len()];
    let kmax = k_max.min(grid.n() / 2 - 1) as i64;
    for (i, c) in buf.iter_mut().enumerate() {
        let m = grid.multi_index(i);
        let ks: Vec<i64> = (0..grid.dim()).map(|a| grid.signed_index(m[a])).collect();
        let inf = ks.iter().map(|k| k.abs()).max().unwrap_or(0);
        if inf == 0 || inf > kmax {
            continue;
        }
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *c = Complex64::new(re, im);
    }
    let u = Spectrum::new(grid, buf).expect("sized to grid").inverse(Extension::Periodic);
    let s = u.sup_norm();
    if s > 0.0 {
        u.scaled(1.0 / s)
    } else {
        u
    }
}

/// Band-limited noise under a Gaussian window of width `w`, zero outside.
pub fn windowed_noise(grid: TorusGrid, k_max: usize, width: f64, seed: u64) -> ScalarField {
    let noise = band_limited_noise(grid, k_max, seed);
    let window = gaussian_bump(grid, &[0.0; 3], width);
    let values = noise.values().iter().zip(window.values()).map(|(a, b)| a * b).collect();
    ScalarField::new(grid, values, Extension::ZeroOutside).expect("same grid")
}
