//! Discrete maximal and sharp functions and the mean-oscillation experiments.
//!
//! Balls are centred at nodes, open (`|y - x| < r`, so radius `h` is the
//! single node) and clipped to the box.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::fields::windowed_noise;
use crate::grid::{ScalarField, TorusGrid};
use crate::norms::{lp_norm, oscillation, weighted_l1, Ball, OscillationMode, WeightOmega};
use crate::operator::{apply_spectral, riesz_apply};
use crate::solver::solve;
use crate::symbol::SymbolTable;
use crate::MAX_DIM;

/// Radii of the balls over which maximal and sharp functions take the sup.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiiLadder {
    radii: Vec<f64>,
}

impl RadiiLadder {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || !(radii[0] > 0.0) || radii.windows(2).any(|w| !(w[1] > w[0])) {
            bail!(InvalidParameter, "radii must be positive and strictly increasing");
        }
        Ok(Self { radii })
    }

    /// `h, 2h, 4h, …` up to the half-width of the box.
    pub fn geometric(grid: &TorusGrid) -> Self {
        Self::geometric_to(grid, grid.half_period())
    }

    /// `h, 2h, 4h, …`, stopping at the first radius `≥ r_max`.
    pub fn geometric_to(grid: &TorusGrid, r_max: f64) -> Self {
        let mut radii = vec![grid.h()];
        while *radii.last().unwrap() < r_max * (1.0 - 1e-12) {
            radii.push(2.0 * radii.last().unwrap());
        }
        Self { radii }
    }

    /// Every multiple of `h` up to `r_max`.
    pub fn dense(grid: &TorusGrid, r_max: f64) -> Self {
        let k = (r_max / grid.h() + 1e-9) as usize;
        Self { radii: (1..=k.max(1)).map(|j| j as f64 * grid.h()).collect() }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Only the single-node ball is guaranteed when the smallest radius is at most `h`.
    pub fn includes_single_node(&self, grid: &TorusGrid) -> bool {
        self.radii[0] <= grid.h() * (1.0 + 1e-12)
    }
}

/// Integer offsets of an open ball of radius `r` (in units of `h`).
fn offsets(d: usize, r_over_h: f64) -> Vec<[i64; MAX_DIM]> {
    let m = libm::ceil(r_over_h) as i64;
    let lim = r_over_h * r_over_h * (1.0 - 1e-12);
    let mut out = Vec::new();
    let span = |a: usize| if a < d { -m..=m } else { 0..=0 };
    for i in span(0) {
        for j in span(1) {
            for k in span(2) {
                if ((i * i + j * j + k * k) as f64) < lim {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

/// Nodes of the clipped ball around node `idx`.
fn ball_members(grid: &TorusGrid, idx: usize, offs: &[[i64; MAX_DIM]], out: &mut Vec<usize>) {
    let d = grid.dim();
    let n = grid.n() as i64;
    let c = grid.multi_index(idx);
    out.clear();
    'next: for o in offs {
        let mut lin = 0usize;
        for a in 0..d {
            let p = c[a] as i64 + o[a];
            if p < 0 || p >= n {
                continue 'next;
            }
            lin = lin * grid.n() + p as usize;
        }
        out.push(lin);
    }
}

/// `max_r (|g|)_{B_r(x)}` at the given nodes.
fn maximal_on(g: &ScalarField, ladder: &RadiiLadder, nodes: &[usize]) -> Vec<f64> {
    if g.grid().dim() == 1 {
        maximal_prefix(g, ladder, nodes)
    } else {
        maximal_offsets(g, ladder, nodes)
    }
}

fn maximal_prefix(g: &ScalarField, ladder: &RadiiLadder, nodes: &[usize]) -> Vec<f64> {
    let grid = g.grid();
    let n = grid.n();
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in g.values().iter().enumerate() {
        prefix[i + 1] = prefix[i] + v.abs();
    }
    let mut best = vec![0.0f64; nodes.len()];
    for &r in ladder.radii() {
        // open ball: |j - i| h < r
        let m = (libm::ceil(r / grid.h() * (1.0 - 1e-12)) as usize).saturating_sub(1);
        for (b, &i) in best.iter_mut().zip(nodes) {
            let (lo, hi) = (i.saturating_sub(m), (i + m).min(n - 1));
            let avg = if lo == hi {
                g.values()[i].abs()
            } else {
                (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
            };
            *b = b.max(avg);
        }
    }
    best
}

fn maximal_offsets(g: &ScalarField, ladder: &RadiiLadder, nodes: &[usize]) -> Vec<f64> {
    let grid = g.grid();
    let mut best = vec![0.0f64; nodes.len()];
    let mut members = Vec::new();
    for &r in ladder.radii() {
        let offs = offsets(grid.dim(), r / grid.h());
        for (b, &i) in best.iter_mut().zip(nodes) {
            ball_members(grid, i, &offs, &mut members);
            let avg = members.iter().map(|&j| g.values()[j].abs()).sum::<f64>() / members.len() as f64;
            *b = b.max(avg);
        }
    }
    best
}

/// Hardy–Littlewood maximal function `Mg(x) = max_r (|g|)_{B_r(x)}`.
pub fn hl_maximal(g: &ScalarField, ladder: &RadiiLadder) -> ScalarField {
    let nodes: Vec<usize> = (0..g.grid().len()).collect();
    let values = maximal_on(g, ladder, &nodes);
    ScalarField::new(*g.grid(), values, g.extension()).expect("same grid")
}

/// `Mg` at a single node.
pub fn hl_maximal_at(g: &ScalarField, ladder: &RadiiLadder, idx: usize) -> f64 {
    maximal_on(g, ladder, &[idx])[0]
}

/// Sharp function `g#(x) = max_r (|g - (g)_{B_r(x)}|)_{B_r(x)}`.
pub fn sharp_function(g: &ScalarField, ladder: &RadiiLadder) -> ScalarField {
    let grid = g.grid();
    let v = g.values();
    let mut best = vec![0.0f64; grid.len()];
    let mut members = Vec::new();
    for &r in ladder.radii() {
        let offs = offsets(grid.dim(), r / grid.h());
        for (i, b) in best.iter_mut().enumerate() {
            ball_members(grid, i, &offs, &mut members);
            let k = members.len() as f64;
            let mean = members.iter().map(|&j| v[j]).sum::<f64>() / k;
            let osc = members.iter().map(|&j| (v[j] - mean).abs()).sum::<f64>() / k;
            *b = b.max(osc);
        }
    }
    ScalarField::new(*grid, best, g.extension()).expect("same grid")
}

/// Observed constants in the maximal and sharp function inequalities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HardyFsReport {
    pub p: f64,
    pub trials: usize,
    /// `max ‖Mg‖_p / ‖g‖_p`.
    pub c_hl_obs: f64,
    /// `min ‖Mg‖_p / ‖g‖_p`, at least 1 by pointwise domination.
    pub min_hl_ratio: f64,
    /// `max ‖g‖_p / ‖g#‖_p` over non-constant fields.
    pub c_fs_obs: f64,
}

/// Random windowed band-limited fields on `[-8, 8)` with 256 nodes.
pub fn verify_hardy_fs(p: f64, n_trials: usize, seed: u64) -> Result<HardyFsReport> {
    let grid = TorusGrid::new(1, 8.0, 256)?;
    verify_hardy_fs_on(&grid, p, n_trials, seed)
}

pub fn verify_hardy_fs_on(grid: &TorusGrid, p: f64, n_trials: usize, seed: u64) -> Result<HardyFsReport> {
    let ladder = RadiiLadder::geometric(grid);
    let mut rep = HardyFsReport { p, trials: n_trials, c_hl_obs: 0.0, min_hl_ratio: f64::INFINITY, c_fs_obs: 0.0 };
    for t in 0..n_trials {
        let s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(t as u64);
        let k_max = 2 + (t % 12);
        let width = 1.0 + (t % 5) as f64;
        let g = windowed_noise(*grid, k_max, width, s);
        let ng = lp_norm(&g, p)?;
        if ng == 0.0 {
            continue;
        }
        let hl = lp_norm(&hl_maximal(&g, &ladder), p)? / ng;
        rep.c_hl_obs = rep.c_hl_obs.max(hl);
        rep.min_hl_ratio = rep.min_hl_ratio.min(hl);
        let ns = lp_norm(&sharp_function(&g, &ladder), p)?;
        if ns > 0.0 {
            rep.c_fs_obs = rep.c_fs_obs.max(ng / ns);
        }
    }
    Ok(rep)
}

/// `‖u‖_{L_1(ω)}` against `Σ_k 2^{-kσ} (|u|)_{B_{2^k}}` and `Mu(0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DyadicReport {
    pub weighted_l1: f64,
    pub dyadic_sum: f64,
    pub maximal_at_origin: f64,
    /// `weighted_l1 / dyadic_sum`; at most `|B_1| 2^{d+σ}` up to discretization.
    pub c_dyadic: f64,
    /// `weighted_l1 / Mu(0)`; at most `|B_1| 2^{d+σ} / (1 - 2^{-σ})`.
    pub c_max: f64,
}

impl DyadicReport {
    pub fn dyadic_constant(d: usize, sigma: f64) -> f64 {
        Ball::centered(1.0).volume(d) * libm::pow(2.0, d as f64 + sigma)
    }
}

/// Balls `B_{2^k}`, `k = 0, 1, …`, until they cover the box. Requires `h ≤ 1`.
pub fn dyadic_bound(u: &ScalarField, sigma: f64) -> Result<DyadicReport> {
    let grid = u.grid();
    if grid.h() > 1.0 {
        bail!(InvalidParameter, "dyadic balls need h ≤ 1");
    }
    let d = grid.dim();
    let omega = WeightOmega::new(d, sigma)?;
    let w = weighted_l1(u, &omega)?.value;
    let cover = grid.half_period() * libm::sqrt(d as f64) + grid.h();
    let mut radii = vec![1.0];
    while *radii.last().unwrap() < cover {
        radii.push(2.0 * radii.last().unwrap());
    }
    let origin = grid.origin_index();
    let mut dyadic = 0.0;
    for (k, &r) in radii.iter().enumerate() {
        let avg = hl_maximal_at(u, &RadiiLadder::new(vec![r])?, origin);
        dyadic += libm::pow(2.0, -(k as f64) * sigma) * avg;
    }
    let mut ladder = RadiiLadder::geometric_to(grid, cover).radii().to_vec();
    ladder.extend(radii.iter().copied());
    ladder.sort_by(|a, b| a.total_cmp(b));
    ladder.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * *b);
    let m0 = hl_maximal_at(u, &RadiiLadder::new(ladder)?, origin);
    Ok(DyadicReport {
        weighted_l1: w,
        dyadic_sum: dyadic,
        maximal_at_origin: m0,
        c_dyadic: if dyadic > 0.0 { w / dyadic } else { 0.0 },
        c_max: if m0 > 0.0 { w / m0 } else { 0.0 },
    })
}

/// Which operator carries the equation and which one is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OscillationVariant {
    /// `Lu - λu = f`; measured derivative `(-Δ)^{σ/2} u`.
    Equation,
    /// `-(-Δ)^{σ/2}u - λu = f`; measured derivative `Lu`.
    Interchanged,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanOscillationRow {
    pub r: f64,
    pub kappa: f64,
    pub lambda: f64,
    /// `λ (|u - (u)_B|)_B + (|Du - (Du)_B|)_B` on `B_r`.
    pub lhs: f64,
    /// `κ^{-α} (λ Mu(0) + M(Du)(0))`.
    pub rhs_osc_term: f64,
    /// `κ^{d/2} (M(f²)(0))^{1/2}`.
    pub rhs_f_term: f64,
    pub ratio: f64,
}

/// Mean-oscillation experiment with `α = min(1, σ)/2`. `table` is the symbol
/// of `L`, `sigma` its order.
pub fn mean_oscillation_report(
    table: &SymbolTable,
    sigma: f64,
    lambda: f64,
    f: &ScalarField,
    kappas: &[f64],
    r_list: &[f64],
    variant: OscillationVariant,
) -> Result<Vec<MeanOscillationRow>> {
    if kappas.iter().any(|k| !(*k >= 2.0)) {
        bail!(InvalidParameter, "κ must be at least 2");
    }
    let grid = *f.grid();
    let (u, du) = match variant {
        OscillationVariant::Equation => {
            let u = solve(table, lambda, f)?.u;
            let du = riesz_apply(&u, sigma)?;
            (u, du)
        }
        OscillationVariant::Interchanged => {
            let u = solve(&SymbolTable::fractional(&grid, sigma), lambda, f)?.u;
            let du = apply_spectral(table, &u)?;
            (u, du)
        }
    };
    let alpha = sigma.min(1.0) / 2.0;
    let ladder = RadiiLadder::geometric(&grid);
    let origin = grid.origin_index();
    let mu = hl_maximal_at(&u, &ladder, origin);
    let mdu = hl_maximal_at(&du, &ladder, origin);
    let mf2 = hl_maximal_at(&f.map(|v| v * v), &ladder, origin);
    let mut rows = Vec::with_capacity(kappas.len() * r_list.len());
    for &r in r_list {
        let ball = Ball::centered(r);
        let lhs = lambda * oscillation(&u, &ball, OscillationMode::Mean)? + oscillation(&du, &ball, OscillationMode::Mean)?;
        for &kappa in kappas {
            let rhs_osc_term = libm::pow(kappa, -alpha) * (lambda * mu + mdu);
            let rhs_f_term = libm::pow(kappa, grid.dim() as f64 / 2.0) * libm::sqrt(mf2);
            let rhs = rhs_osc_term + rhs_f_term;
            let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
            rows.push(MeanOscillationRow { r, kappa, lambda, lhs, rhs_osc_term, rhs_f_term, ratio });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{band_limited_noise, gaussian_bump};
    use crate::grid::Extension;
    use crate::kernel::random_kernel;
    use proptest::prelude::*;

    #[test]
    fn constant_field() {
        let g = TorusGrid::new(2, 2.0, 16).unwrap();
        let c = ScalarField::from_fn(g, Extension::ZeroOutside, |_| -1.5);
        let ladder = RadiiLadder::geometric(&g);
        assert!(hl_maximal(&c, &ladder).values().iter().all(|v| (v - 1.5).abs() < 1e-14));
        assert!(sharp_function(&c, &ladder).values().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn maximal_of_indicator_away_from_support() {
        // optimum at r = 4: overlap 2 over length 8
        let g = TorusGrid::new(1, 8.0, 2048).unwrap();
        let u = ScalarField::from_fn(g, Extension::ZeroOutside, |x| match x[0].abs() {
            a if a < 1.0 => 1.0,
            a if a == 1.0 => 0.5,
            _ => 0.0,
        });
        let ladder = RadiiLadder::dense(&g, 4.9);
        let idx = g.origin_index() + 3 * 128;
        assert_eq!(g.coord(idx), 3.0);
        assert!((hl_maximal_at(&u, &ladder, idx) - 0.25).abs() < 1e-3);
        assert_eq!(hl_maximal(&u, &ladder).values()[idx], hl_maximal_at(&u, &ladder, idx));
    }

    #[test]
    fn sign_function_sharp_at_origin() {
        let g = TorusGrid::new(1, 4.0, 64).unwrap();
        let u = ScalarField::from_fn(g, Extension::ZeroOutside, |x| if x[0] >= 0.0 { 1.0 } else { -1.0 });
        let s = sharp_function(&u, &RadiiLadder::geometric(&g));
        // symmetric balls around the node at 0 hold one more +1 than -1
        let k = 2.0 * 16.0 - 1.0;
        assert!(s.values()[g.origin_index()] >= 1.0 - 1.0 / (k * k));
    }

    #[test]
    fn prefix_and_offset_paths_agree() {
        let g = TorusGrid::new(1, 2.0, 32).unwrap();
        let u = band_limited_noise(g, 6, 4);
        let l = RadiiLadder::new(vec![g.h(), 2.5 * g.h(), 3.0 * g.h(), 1.0, 2.0]).unwrap();
        let nodes: Vec<usize> = (0..32).collect();
        let (a, b) = (maximal_prefix(&u, &l, &nodes), maximal_offsets(&u, &l, &nodes));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
        assert_eq!(offsets(1, 3.0).len(), 5);
        assert_eq!(offsets(2, 1.0).len(), 1);
    }

    #[test]
    fn hardy_fs_report() {
        let r = verify_hardy_fs(2.0, 6, 1).unwrap();
        assert!(r.min_hl_ratio >= 1.0 && r.c_hl_obs.is_finite() && r.c_fs_obs.is_finite() && r.c_fs_obs > 0.0);
    }

    #[test]
    fn dyadic_bound_holds() {
        let g = TorusGrid::new(1, 16.0, 512).unwrap();
        for (seed, sigma) in [(1u64, 0.5), (2, 1.0), (3, 1.7)] {
            let u = crate::fields::windowed_noise(g, 8, 3.0, seed);
            let rep = dyadic_bound(&u, sigma).unwrap();
            let c = DyadicReport::dyadic_constant(1, sigma);
            assert!(rep.c_dyadic <= c * 1.02, "{rep:?}");
            assert!(rep.c_max <= c / (1.0 - libm::pow(2.0, -sigma)) * 1.02);
        }
    }

    #[test]
    fn mean_oscillation_zero_rhs_and_finite_ratios() {
        let g = TorusGrid::new(1, 8.0, 128).unwrap();
        let spec = random_kernel(1, 0.8, 0.5, 2.0, 2).unwrap();
        let t = SymbolTable::new(spec.kernel(), &g, 1e-10).unwrap();
        let zero = ScalarField::zeros(g, Extension::ZeroOutside);
        let rows = mean_oscillation_report(&t, 0.8, 1.0, &zero, &[2.0], &[0.5], OscillationVariant::Equation).unwrap();
        assert_eq!(rows[0].lhs, 0.0);
        let f = gaussian_bump(g, &[0.3], 0.8);
        for v in [OscillationVariant::Equation, OscillationVariant::Interchanged] {
            let rows = mean_oscillation_report(&t, 0.8, 1.0, &f, &[2.0, 4.0], &[0.25, 1.0], v).unwrap();
            assert!(rows.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn sublinear_and_dominating(s1 in 0u64..1000, s2 in 0u64..1000, k in 1usize..10) {
            let g = TorusGrid::new(1, 4.0, 64).unwrap();
            let a = band_limited_noise(g, k, s1);
            let b = band_limited_noise(g, k + 2, s2).scaled(0.7);
            let sum = a.combine(1.0, &b, 1.0).unwrap();
            let l = RadiiLadder::geometric(&g);
            let (ma, mb, ms) = (hl_maximal(&a, &l), hl_maximal(&b, &l), hl_maximal(&sum, &l));
            let (sa, sb, ss) = (sharp_function(&a, &l), sharp_function(&b, &l), sharp_function(&sum, &l));
            for i in 0..g.len() {
                prop_assert!(ms.values()[i] <= ma.values()[i] + mb.values()[i] + 1e-12);
                prop_assert!(ss.values()[i] <= sa.values()[i] + sb.values()[i] + 1e-12);
                prop_assert!(ma.values()[i] >= a.values()[i].abs());
                prop_assert!(sa.values()[i] <= 2.0 * ma.values()[i] + 1e-12);
            }
        }
    }
}
