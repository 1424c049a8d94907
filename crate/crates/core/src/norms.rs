//! Norms and seminorms used in the estimates.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{bail, Result};
use crate::grid::{Extension, ScalarField, TorusGrid};
use crate::operator::{apply_multiplier, riesz_apply};
use crate::{norm, Point, MAX_DIM};

/// Surface area of the unit sphere in `ℝ^d`, `d ≤ 3`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// `(h^d Σ |u|^p)^{1/p}`; `p = ∞` gives `max |u|`.
pub fn lp_norm(u: &ScalarField, p: f64) -> Result<f64> {
    if p.is_infinite() && p > 0.0 {
        return Ok(u.sup_norm());
    }
    if !(p > 1.0) {
        bail!(InvalidParameter, "L_p norms need 1 < p ≤ ∞, got {p}");
    }
    let s: f64 = u.values().iter().map(|v| libm::pow(v.abs(), p)).sum();
    Ok(libm::pow(s * u.grid().cell_volume(), 1.0 / p))
}

/// `‖(-Δ)^{s/2} u‖_p` (homogeneous) or `‖(1 - Δ)^{s/2} u‖_p`.
pub fn sobolev_seminorm(u: &ScalarField, s: f64, p: f64, homogeneous: bool) -> Result<f64> {
    if !(s > 0.0) {
        bail!(InvalidParameter, "smoothness must be positive, got {s}");
    }
    let v = if homogeneous {
        riesz_apply(u, s)?
    } else {
        let d = u.grid().dim();
        apply_multiplier(u, |xi| {
            let r2: f64 = xi[..d].iter().map(|v| v * v).sum();
            Complex64::new(libm::pow(1.0 + r2, s / 2.0), 0.0)
        })
    };
    lp_norm(&v, p)
}

/// Range of `(1 + |ξ|²)^{s/2} / (1 + |ξ|^s)` over the frequency lattice.
pub fn bessel_equivalence_factors(grid: &TorusGrid, s: f64) -> (f64, f64) {
    let d = grid.dim();
    grid.frequencies().fold((f64::INFINITY, 0.0f64), |(lo, hi), xi| {
        let r = norm(&xi[..d]);
        let q = libm::pow(1.0 + r * r, s / 2.0) / (1.0 + libm::pow(r, s));
        (lo.min(q), hi.max(q))
    })
}

/// `ω(x) = 1 / (1 + |x|^{d+σ})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightOmega {
    pub d: usize,
    pub sigma: f64,
}

impl WeightOmega {
    pub fn new(d: usize, sigma: f64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) || !(sigma > 0.0 && sigma < 2.0) {
            bail!(InvalidParameter, "weight needs 1 ≤ d ≤ 3 and σ ∈ (0,2)");
        }
        Ok(Self { d, sigma })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        1.0 / (1.0 + libm::pow(norm(&x[..self.d]), self.d as f64 + self.sigma))
    }

    /// `∫_{ℝ^d} ω = |S^{d-1}| π / ((d+σ) sin(π d / (d+σ)))`.
    pub fn integral(&self) -> f64 {
        let q = self.d as f64 + self.sigma;
        sphere_area(self.d) * PI / (q * libm::sin(PI * self.d as f64 / q))
    }

    /// `∫_{|x| > ρ} ω ≤ |S^{d-1}| ρ^{-σ} / σ`.
    pub fn tail_bound(&self, rho: f64) -> f64 {
        sphere_area(self.d) * libm::pow(rho, -self.sigma) / self.sigma
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedL1 {
    pub value: f64,
    /// Bound on the part of `∫|u|ω` outside the box.
    pub tail_bound: f64,
}

/// `h^d Σ |u| ω` over the box. Outside the box a `ZeroOutside` field is bounded
/// by its boundary layer and a periodic one by its sup norm.
pub fn weighted_l1(u: &ScalarField, omega: &WeightOmega) -> Result<WeightedL1> {
    let g = u.grid();
    if g.dim() != omega.d {
        bail!(InvalidParameter, "weight dimension {} does not match field dimension {}", omega.d, g.dim());
    }
    let value = g.nodes().zip(u.values()).map(|(x, v)| v.abs() * omega.eval(&x)).sum::<f64>() * g.cell_volume();
    let level = match u.extension() {
        Extension::ZeroOutside => u.boundary_max(),
        Extension::Periodic => u.sup_norm(),
    };
    Ok(WeightedL1 { value, tail_bound: level * omega.tail_bound(g.half_period()) })
}

/// `(h^d Σ |u|^p ω)^{1/p}` over the box.
pub fn weighted_lp(u: &ScalarField, omega: &WeightOmega, p: f64) -> Result<f64> {
    let g = u.grid();
    if g.dim() != omega.d {
        bail!(InvalidParameter, "weight dimension {} does not match field dimension {}", omega.d, g.dim());
    }
    if !(p >= 1.0 && p.is_finite()) {
        bail!(InvalidParameter, "weighted L_p needs 1 ≤ p < ∞, got {p}");
    }
    let s: f64 = g.nodes().zip(u.values()).map(|(x, v)| libm::pow(v.abs(), p) * omega.eval(&x)).sum();
    Ok(libm::pow(s * g.cell_volume(), 1.0 / p))
}

/// `(h^d Σ_{x ∈ B} |u|^p)^{1/p}`.
pub fn lp_norm_on(u: &ScalarField, ball: &Ball, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        bail!(InvalidParameter, "L_p needs 1 ≤ p < ∞, got {p}");
    }
    let nodes = ball_nodes(u.grid(), ball)?;
    let s: f64 = nodes.iter().map(|&i| libm::pow(u.values()[i].abs(), p)).sum();
    Ok(libm::pow(s * u.grid().cell_volume(), 1.0 / p))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: &[f64], radius: f64) -> Self {
        Self { center: crate::point(center), radius }
    }

    pub fn centered(radius: f64) -> Self {
        Self { center: [0.0; MAX_DIM], radius }
    }

    /// `|B_r|` in `ℝ^d`.
    pub fn volume(&self, d: usize) -> f64 {
        let unit = match d {
            1 => 2.0,
            2 => PI,
            _ => 4.0 * PI / 3.0,
        };
        unit * libm::pow(self.radius, d as f64)
    }
}

/// Grid nodes in a ball that must lie inside the box.
pub fn ball_nodes(grid: &TorusGrid, ball: &Ball) -> Result<Vec<usize>> {
    let d = grid.dim();
    let (r, h) = (grid.half_period(), grid.h());
    let tol = 1e-9 * h;
    if !(ball.radius > 0.0) {
        bail!(InvalidParameter, "ball radius must be positive");
    }
    for a in 0..d {
        if ball.center[a] - ball.radius < -r - tol || ball.center[a] + ball.radius > r - h + tol {
            bail!(Domain, "ball of radius {} does not fit in the box", ball.radius);
        }
    }
    let nodes: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let x = grid.node(i);
            let dist2: f64 = (0..d).map(|a| (x[a] - ball.center[a]) * (x[a] - ball.center[a])).sum();
            libm::sqrt(dist2) <= ball.radius + tol
        })
        .collect();
    if nodes.is_empty() {
        bail!(Domain, "ball contains no grid nodes");
    }
    Ok(nodes)
}

/// `max |u(x) - u(y)| / |x - y|^α` over node pairs in the ball with `|x - y| ≥ 2h`.
pub fn holder_seminorm(u: &ScalarField, alpha: f64, ball: &Ball) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!(InvalidParameter, "Hölder exponent must lie in (0,1), got {alpha}");
    }
    let g = u.grid();
    let d = g.dim();
    let nodes = ball_nodes(g, ball)?;
    let pts: Vec<(Point, f64)> = nodes.iter().map(|&i| (g.node(i), u.values()[i])).collect();
    let floor = 2.0 * g.h() * (1.0 - 1e-9);
    let mut best: Option<f64> = None;
    for (i, (x, ux)) in pts.iter().enumerate() {
        for (y, uy) in &pts[i + 1..] {
            let dist = libm::sqrt((0..d).map(|a| (x[a] - y[a]) * (x[a] - y[a])).sum::<f64>());
            if dist < floor {
                continue;
            }
            let q = (ux - uy).abs() / libm::pow(dist, alpha);
            best = Some(best.map_or(q, |b: f64| b.max(q)));
        }
    }
    match best {
        Some(b) => Ok(b),
        None => bail!(Domain, "ball has no node pairs at separation ≥ 2h"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OscillationMode {
    /// `sup u - inf u`.
    SupInf,
    /// `(|u - (u)_B|)_B`.
    Mean,
}

pub fn oscillation(u: &ScalarField, ball: &Ball, mode: OscillationMode) -> Result<f64> {
    let nodes = ball_nodes(u.grid(), ball)?;
    Ok(oscillation_on(u.values(), &nodes, mode))
}

pub(crate) fn oscillation_on(values: &[f64], nodes: &[usize], mode: OscillationMode) -> f64 {
    match mode {
        OscillationMode::SupInf => {
            let (lo, hi) = nodes
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(values[i]), hi.max(values[i])));
            hi - lo
        }
        OscillationMode::Mean => {
            let n = nodes.len() as f64;
            let mean = nodes.iter().map(|&i| values[i]).sum::<f64>() / n;
            nodes.iter().map(|&i| (values[i] - mean).abs()).sum::<f64>() / n
        }
    }
}
