//! Compound-Poisson approximation of the jump process with generator `L`.
//!
//! Jumps shorter than `ε` are dropped. The remaining jumps arrive at rate
//! `Λ_ε = ∫_{|y|>ε} K` with law `K 1_{|y|>ε} / Λ_ε`, and the compensator
//! `∫_{|y|>ε} yχ(y)K(y) dy` is applied as a deterministic drift, so the
//! simulated process has generator
//! `A_ε u(x) = ∫_{|y|>ε} (u(x+y) - u(x) - y·∇u(x) χ(y)) K(y) dy`.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{bail, Result};
use crate::kernel::{AngularMesh, Chi, Kernel};
use crate::operator::radial_moment;
use crate::symbol::SymbolEvaluator;
use crate::{Point, MAX_DIM};

/// Largest admissible expected number of jumps per path.
pub const MAX_EXPECTED_JUMPS: f64 = 1e6;

/// Sampler for the normalized jump law of `K` restricted to `|y| > ε`.
#[derive(Clone, Debug)]
pub struct JumpSampler {
    dim: usize,
    sigma: f64,
    eps: f64,
    angular: AngularMesh,
    /// `(cell, lo, hi)` pieces with cumulative probabilities.
    pieces: Vec<(usize, f64, f64)>,
    cum: Vec<f64>,
    intensity: f64,
    /// Per-cell radial tail masses `∫_ε^∞ a_c r^{-1-σ} dr`, used by the CDF.
    cell_mass: Vec<f64>,
    kernel: Kernel,
}

impl JumpSampler {
    pub fn new(kernel: &Kernel, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            bail!(InvalidParameter, "jump cutoff must be positive, got {eps}");
        }
        let am = kernel.angular();
        let p = -1.0 - kernel.sigma();
        let mut pieces = Vec::new();
        let mut cum = Vec::new();
        let mut total = 0.0;
        for c in 0..kernel.n_cells() {
            for i in kernel.shell_of(eps)..kernel.n_shells() {
                let (lo, hi) = kernel.shell_bounds(i);
                let lo = lo.max(eps);
                let w = am.cell_measure(c) * kernel.value(i, c) * crate::quad::power_integral(lo, hi, p);
                if w > 0.0 {
                    total += w;
                    pieces.push((c, lo, hi));
                    cum.push(total);
                }
            }
        }
        if !(total > 0.0) || !total.is_finite() {
            bail!(Kernel, "jump intensity beyond ε = {eps} is not positive and finite");
        }
        let cell_mass = (0..kernel.n_cells())
            .map(|c| am.cell_measure(c) * radial_moment(kernel, c, eps, f64::INFINITY, p))
            .collect();
        Ok(Self {
            dim: kernel.dim(),
            sigma: kernel.sigma(),
            eps,
            angular: am,
            pieces,
            cum,
            intensity: total,
            cell_mass,
            kernel: kernel.clone(),
        })
    }

    /// `Λ_ε = ∫_{|y|>ε} K(y) dy`.
    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Point {
        let target = rng.random::<f64>() * self.intensity;
        let k = self.cum.partition_point(|&c| c <= target).min(self.pieces.len() - 1);
        let (cell, lo, hi) = self.pieces[k];
        // inverse CDF of r^{-1-σ} on [lo, hi]
        let v: f64 = rng.random();
        let s = self.sigma;
        let (a, b) = (libm::pow(lo, -s), if hi.is_finite() { libm::pow(hi, -s) } else { 0.0 });
        let r = libm::pow(a - v * (a - b), -1.0 / s);
        let mut y = [0.0; MAX_DIM];
        match self.angular {
            AngularMesh::Line => y[0] = if cell == 0 { r } else { -r },
            AngularMesh::Circle { .. } => {
                let (p0, p1) = self.angular.phi_range(cell);
                let phi = p0 + (p1 - p0) * rng.random::<f64>();
                y[0] = r * libm::cos(phi);
                y[1] = r * libm::sin(phi);
            }
            AngularMesh::Sphere { .. } => {
                let (p0, p1) = self.angular.phi_range(cell);
                let (z0, z1) = self.angular.z_range(cell);
                let phi = p0 + (p1 - p0) * rng.random::<f64>();
                let z = z0 + (z1 - z0) * rng.random::<f64>();
                let rho = libm::sqrt((1.0 - z * z).max(0.0));
                y = [r * rho * libm::cos(phi), r * rho * libm::sin(phi), r * z];
            }
        }
        y
    }

    /// `P(|Y| ≤ r)` for the normalized jump law.
    pub fn radial_cdf(&self, r: f64) -> f64 {
        if r <= self.eps {
            return 0.0;
        }
        let p = -1.0 - self.sigma;
        let am = self.angular;
        let below: f64 = (0..self.kernel.n_cells())
            .map(|c| am.cell_measure(c) * radial_moment(&self.kernel, c, self.eps, r, p))
            .sum();
        let total: f64 = self.cell_mass.iter().sum();
        below / total
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// `∫_{lo<|y|<hi} y χ(y) K(y) dy`.
fn compensator(kernel: &Kernel, lo: f64, hi: f64) -> Point {
    let (lo, hi) = match kernel.chi() {
        Chi::Zero => return [0.0; MAX_DIM],
        Chi::One => (lo, hi),
        Chi::BallIndicator { radius } => (lo.min(radius), hi.min(radius)),
    };
    first_moment(kernel, lo, hi)
}

/// `∫_{lo<|y|<hi} y K(y) dy`.
fn first_moment(kernel: &Kernel, lo: f64, hi: f64) -> Point {
    let am = kernel.angular();
    let mut v = [0.0; MAX_DIM];
    for c in 0..kernel.n_cells() {
        let w = radial_moment(kernel, c, lo, hi, -kernel.sigma());
        let mu = am.moment(c);
        for k in 0..MAX_DIM {
            v[k] += w * mu[k];
        }
    }
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    pub dim: usize,
    pub n_paths: usize,
    pub t: f64,
    pub eps: f64,
    pub x0: Point,
    pub seed: u64,
    /// `Λ_ε`.
    pub intensity: f64,
    /// Deterministic drift applied over `[0, t]`.
    pub drift: Point,
    pub terminal: Vec<Point>,
    pub jump_counts: Vec<u64>,
}

impl PathEnsemble {
    /// Mean terminal displacement with its per-axis standard error.
    pub fn mean_displacement(&self) -> (Point, Point) {
        let n = self.n_paths as f64;
        let mut mean = [0.0; MAX_DIM];
        let mut var = [0.0; MAX_DIM];
        if self.n_paths == 0 {
            return (mean, var);
        }
        for x in &self.terminal {
            for k in 0..self.dim {
                mean[k] += (x[k] - self.x0[k]) / n;
            }
        }
        for x in &self.terminal {
            for k in 0..self.dim {
                let e = x[k] - self.x0[k] - mean[k];
                var[k] += e * e / (n - 1.0).max(1.0);
            }
        }
        for v in var.iter_mut() {
            *v = libm::sqrt(*v / n);
        }
        (mean, var)
    }
}

/// Each path draws from its own ChaCha stream (`stream = path index`).
pub fn simulate_paths(kernel: &Kernel, eps: f64, t: f64, x0: &[f64], n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    if !(t > 0.0) {
        bail!(InvalidParameter, "horizon must be positive, got {t}");
    }
    let sampler = JumpSampler::new(kernel, eps)?;
    let mean_jumps = sampler.intensity() * t;
    if mean_jumps > MAX_EXPECTED_JUMPS {
        bail!(Budget, "{mean_jumps:.3e} expected jumps per path; raise ε or lower t");
    }
    let d = kernel.dim();
    let comp = compensator(kernel, eps, f64::INFINITY);
    let mut drift = [0.0; MAX_DIM];
    for k in 0..d {
        drift[k] = -t * comp[k];
    }
    let x0 = crate::point(x0);
    let poisson = Poisson::new(mean_jumps).map_err(|e| crate::Error::InvalidParameter(alloc::format!("{e}")))?;
    let mut terminal = Vec::with_capacity(n_paths);
    let mut jump_counts = Vec::with_capacity(n_paths);
    for p in 0..n_paths {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(p as u64);
        let count = poisson.sample(&mut rng) as u64;
        let mut x = x0;
        for k in 0..d {
            x[k] += drift[k];
        }
        for _ in 0..count {
            let y = sampler.sample(&mut rng);
            for k in 0..d {
                x[k] += y[k];
            }
        }
        terminal.push(x);
        jump_counts.push(count);
    }
    Ok(PathEnsemble { dim: d, n_paths, t, eps, x0, seed, intensity: sampler.intensity(), drift, terminal, jump_counts })
}

/// A bounded smooth test function with the bounds used in the bias allowance.
pub struct TestFunction<'a> {
    pub u: &'a dyn Fn(&[f64]) -> f64,
    /// `sup |∇u|`.
    pub grad_sup: f64,
    /// `sup ‖D²u‖`.
    pub hess_sup: f64,
    /// `sup |A_ε A_ε u|`, bounding the time-discretization error by `t/2` times it.
    pub generator_sq_sup: f64,
}

impl<'a> TestFunction<'a> {
    /// `cos(ξ·x)`, with `|A_ε² u| ≤ |m_ε(ξ)|²`.
    pub fn cosine(u: &'a dyn Fn(&[f64]) -> f64, xi: &[f64], m_eps: Complex64) -> Self {
        let k2: f64 = xi.iter().map(|v| v * v).sum();
        Self { u, grad_sup: libm::sqrt(k2), hess_sup: k2, generator_sq_sup: m_eps.norm_sqr() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorReport {
    /// `(mean u(X_t) - u(x0)) / t`.
    pub mc_estimate: f64,
    pub analytic_lu: f64,
    pub std_err: f64,
    pub z_score: f64,
    /// Small-jump truncation allowance plus the `O(t)` term.
    pub bias_bound: f64,
    pub pass: bool,
}

/// Bound on `|A_ε u(x) - Lu(x)|` from the dropped jumps:
/// `|∇u| |∫_{|y|<ε} y(1-χ)K| + ½ |D²u| ∫_{|y|<ε} |y|² K`.
pub fn small_jump_bias(kernel: &Kernel, eps: f64, grad_sup: f64, hess_sup: f64) -> f64 {
    let uncompensated = match kernel.chi() {
        Chi::Zero => first_moment(kernel, 0.0, eps),
        Chi::One => [0.0; MAX_DIM],
        Chi::BallIndicator { radius } => first_moment(kernel, radius.min(eps), eps),
    };
    let drift = crate::norm(&uncompensated);
    let am = kernel.angular();
    let second: f64 = (0..kernel.n_cells())
        .map(|c| am.cell_measure(c) * radial_moment(kernel, c, 0.0, eps, 1.0 - kernel.sigma()))
        .sum();
    grad_sup * drift + 0.5 * hess_sup * second
}

pub fn generator_check(ensemble: &PathEnsemble, kernel: &Kernel, test: &TestFunction<'_>, analytic_lu: f64) -> Result<GeneratorReport> {
    let n = ensemble.n_paths;
    if n < 2 {
        bail!(InvalidParameter, "generator check needs at least two paths");
    }
    let u0 = (test.u)(&ensemble.x0[..ensemble.dim]);
    let vals: Vec<f64> = ensemble.terminal.iter().map(|x| ((test.u)(&x[..ensemble.dim]) - u0) / ensemble.t).collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let std_err = libm::sqrt(var / n as f64);
    let bias_bound = small_jump_bias(kernel, ensemble.eps, test.grad_sup, test.hess_sup) + 0.5 * ensemble.t * test.generator_sq_sup;
    let diff = (mean - analytic_lu).abs();
    if std_err == 0.0 && diff > bias_bound {
        bail!(Domain, "zero-variance ensemble disagrees with the generator");
    }
    let z_score = if std_err > 0.0 { (mean - analytic_lu) / std_err } else { 0.0 };
    Ok(GeneratorReport { mc_estimate: mean, analytic_lu, std_err, z_score, bias_bound, pass: diff <= 3.0 * std_err + bias_bound })
}

/// `A_ε u(x0)` for `u = cos(ξ·x)`, i.e. `Re(m_ε(ξ) e^{iξ·x0})`.
pub fn truncated_generator_cos(kernel: &Kernel, xi: &[f64], x0: &[f64], eps: f64, tol: f64) -> Result<f64> {
    let d = kernel.dim();
    let m = SymbolEvaluator::truncated(kernel, eps).eval(xi, tol)?;
    Ok((m * Complex64::from_polar(1.0, crate::dot(&xi[..d], &x0[..d]))).re)
}

/// `|A_ε u(x0) - Lu(x0)|` for `u = cos(ξ·x)` over a ladder of cutoffs.
pub fn truncation_bias_ladder(kernel: &Kernel, xi: &[f64], x0: &[f64], eps: &[f64], tol: f64) -> Result<Vec<f64>> {
    let d = kernel.dim();
    let full = SymbolEvaluator::new(kernel).eval(xi, tol)?;
    let lu = (full * Complex64::from_polar(1.0, crate::dot(&xi[..d], &x0[..d]))).re;
    eps.iter().map(|&e| Ok((truncated_generator_cos(kernel, xi, x0, e, tol)? - lu).abs())).collect()
}

/// Kolmogorov–Smirnov statistic of sampled jump radii against [`JumpSampler::radial_cdf`].
pub fn radial_ks_statistic(sampler: &JumpSampler, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r: Vec<f64> = (0..n).map(|_| crate::norm(&sampler.sample(&mut rng)[..sampler.dim()])).collect();
    r.sort_by(|a, b| a.total_cmp(b));
    r.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = sampler.radial_cdf(x);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value `1.628 / √n` of the KS statistic.
pub fn ks_critical(n: usize) -> f64 {
    1.628 / libm::sqrt(n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{random_kernel, KernelSpec};
    use core::f64::consts::PI;

    #[test]
    fn empty_and_deterministic() {
        let k = KernelSpec::fractional(1, 0.5).unwrap().into_kernel();
        let e = simulate_paths(&k, 1e-2, 0.05, &[0.0], 0, 1).unwrap();
        assert!(e.terminal.is_empty());
        let a = simulate_paths(&k, 1e-2, 0.05, &[0.3], 200, 5).unwrap();
        assert_eq!(a, simulate_paths(&k, 1e-2, 0.05, &[0.3], 200, 5).unwrap());
        assert_ne!(a.terminal, simulate_paths(&k, 1e-2, 0.05, &[0.3], 200, 6).unwrap().terminal);
    }

    #[test]
    fn budget_is_enforced() {
        let k = KernelSpec::fractional(1, 1.9).unwrap().into_kernel();
        assert!(matches!(simulate_paths(&k, 1e-6, 10.0, &[0.0], 1, 1), Err(crate::Error::Budget(_))));
    }

    #[test]
    fn intensity_closed_form() {
        // a ≡ c: Λ_ε = 2c ε^{-σ}/σ in 1-D, 2πc ε^{-σ}/σ in 2-D
        for (d, sigma) in [(1usize, 0.7), (2, 1.3), (3, 1.0)] {
            let k = Kernel::uniform(d, sigma, 0.8).unwrap();
            let s = JumpSampler::new(&k, 0.05).unwrap();
            let area = [2.0, 2.0 * PI, 4.0 * PI][d - 1];
            let expect = area * 0.8 * libm::pow(0.05, -sigma) / sigma;
            assert!((s.intensity() - expect).abs() < 1e-10 * expect);
        }
    }

    #[test]
    fn radial_law_passes_ks() {
        for (d, sigma, seed) in [(1usize, 0.5, 1u64), (2, 1.5, 2), (3, 1.0, 3)] {
            let spec = random_kernel(d, sigma, 0.5, 2.0, seed).unwrap();
            let s = JumpSampler::new(spec.kernel(), 0.01).unwrap();
            let n = 20_000;
            assert!(radial_ks_statistic(&s, n, seed) < ks_critical(n));
        }
    }

    #[test]
    fn directions_follow_cells() {
        // a single heavy cell on the circle: all jumps from that sector
        let mut vals = alloc::vec![0.0; 4];
        vals[2] = 1.0;
        let am = AngularMesh::Circle { sectors: 4 };
        let k = Kernel::new(0.5, alloc::vec![1e-6, 1e3], am, vals).unwrap();
        let s = JumpSampler::new(&k, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let y = s.sample(&mut rng);
            assert_eq!(am.cell_of(&y), 2);
            assert!(crate::norm(&y[..2]) >= 0.1);
        }
    }

    #[test]
    fn symmetric_mean_displacement_vanishes() {
        let k = KernelSpec::fractional(2, 0.6).unwrap().into_kernel();
        let e = simulate_paths(&k, 1e-2, 0.05, &[0.0, 0.0], 20_000, 3).unwrap();
        let (m, se) = e.mean_displacement();
        assert_eq!(e.drift, [0.0; 3]);
        for k in 0..2 {
            assert!(m[k].abs() < 4.0 * se[k], "{m:?} {se:?}");
        }
    }

    #[test]
    fn characteristic_function_matches_truncated_symbol() {
        // E cos(ξ X_t) = Re exp(t m_ε(ξ)) for a Lévy process started at 0
        let spec = random_kernel(1, 1.4, 0.5, 2.0, 8).unwrap();
        let k = spec.kernel();
        let (eps, t, xi) = (0.02, 0.3, 1.5);
        let e = simulate_paths(k, eps, t, &[0.0], 40_000, 9).unwrap();
        let m = SymbolEvaluator::truncated(k, eps).eval(&[xi], 1e-12).unwrap();
        let exact = (m * t).exp();
        let n = e.n_paths as f64;
        let (c, s) = e.terminal.iter().fold((0.0, 0.0), |(c, s), x| (c + libm::cos(xi * x[0]) / n, s + libm::sin(xi * x[0]) / n));
        assert!((c - exact.re).abs() < 4.0 / libm::sqrt(n), "{c} vs {}", exact.re);
        assert!((s - exact.im).abs() < 4.0 / libm::sqrt(n), "{s} vs {}", exact.im);
    }

    #[test]
    fn generator_check_constant_and_cosine() {
        let k = KernelSpec::fractional(1, 0.5).unwrap().into_kernel();
        let e = simulate_paths(&k, 1e-2, 0.05, &[0.0], 20_000, 7).unwrap();
        let one = |_: &[f64]| 1.0;
        let tc = TestFunction { u: &one, grad_sup: 0.0, hess_sup: 0.0, generator_sq_sup: 0.0 };
        let r = generator_check(&e, &k, &tc, 0.0).unwrap();
        assert_eq!(r.mc_estimate, 0.0);
        assert!(r.pass);
        let cosx = |x: &[f64]| libm::cos(x[0]);
        let m = SymbolEvaluator::truncated(&k, 1e-2).eval(&[1.0], 1e-12).unwrap();
        let r = generator_check(&e, &k, &TestFunction::cosine(&cosx, &[1.0], m), -1.0).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn truncation_bias_bound_and_monotonicity() {
        let spec = random_kernel(1, 1.2, 0.5, 2.0, 4).unwrap();
        let k = spec.kernel();
        let ladder = [4e-2, 2e-2, 1e-2, 5e-3];
        let b = truncation_bias_ladder(k, &[2.0], &[0.0], &ladder, 1e-12).unwrap();
        for (w, e) in b.windows(2).zip(&ladder[1..]) {
            assert!(w[1] <= w[0]);
            assert!(w[1] <= small_jump_bias(k, *e, 2.0, 4.0));
        }
    }
}
