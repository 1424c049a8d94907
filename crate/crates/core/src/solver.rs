//! Spectral solution of `(L - λ) u = f` and `(L + b·∇ - λ) u = f` on the torus.

use num_complex::Complex64;

use crate::error::{bail, Error, Result};
use crate::grid::ScalarField;
use crate::operator::apply_spectral;
use crate::symbol::SymbolTable;

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub u: ScalarField,
    /// `‖(L - λ)u - f‖₂ / ‖f‖₂`, or the absolute residual when `f = 0`.
    pub residual_l2: f64,
    pub lambda: f64,
}

pub fn solve(table: &SymbolTable, lambda: f64, f: &ScalarField) -> Result<SolveResult> {
    if !(lambda > 0.0) {
        bail!(Unsupported, "solve requires λ > 0, got {lambda}");
    }
    if table.grid() != f.grid() {
        return Err(Error::GridMismatch);
    }
    let m = table.values();
    let mut s = f.transform();
    for (v, mk) in s.values_mut().iter_mut().zip(m) {
        *v /= mk - lambda;
    }
    let u = s.inverse(f.extension());
    let residual_l2 = residual(table, lambda, &u, f)?;
    Ok(SolveResult { u, residual_l2, lambda })
}

/// Solves with the extra first-order term `b·∇u`.
pub fn solve_with_drift(table: &SymbolTable, b: &[f64], lambda: f64, f: &ScalarField) -> Result<SolveResult> {
    let d = table.grid().dim();
    if b.len() < d {
        return Err(Error::SizeMismatch { expected: d, got: b.len() });
    }
    if b[..d].iter().all(|v| *v == 0.0) {
        return solve(table, lambda, f);
    }
    solve(&table.with_drift(b), lambda, f)
}

fn residual(table: &SymbolTable, lambda: f64, u: &ScalarField, f: &ScalarField) -> Result<f64> {
    let lu = apply_spectral(table, u)?;
    let r = lu.combine(1.0, u, -lambda)?.combine(1.0, f, -1.0)?;
    let rn = libm::sqrt(r.inner(&r)?);
    let fnorm = libm::sqrt(f.inner(f)?);
    Ok(if fnorm > 0.0 { rn / fnorm } else { rn })
}

/// Quantitative maximum principle `λ‖u‖_∞ ≤ ‖f‖_∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxPrincipleReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Relative slack allowed in [`max_principle_check`].
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-6;

/// Sup norms are taken over the trigonometric interpolants, sampled on a
/// grid refined by `SUP_REFINEMENT` per axis (1-D and 2-D) so that the grid
/// maximum does not undercut the true maximum of `f`.
pub const SUP_REFINEMENT: usize = 8;

pub fn max_principle_check(result: &SolveResult, f: &ScalarField) -> Result<MaxPrincipleReport> {
    f.check_grid(&result.u)?;
    let factor = match f.grid().dim() {
        1 | 2 => SUP_REFINEMENT,
        _ => 2,
    };
    let lhs = result.lambda * result.u.upsample(factor)?.sup_norm();
    let rhs = f.upsample(factor)?.sup_norm();
    Ok(MaxPrincipleReport { lhs, rhs, pass: lhs <= rhs * (1.0 + MAX_PRINCIPLE_SLACK) })
}

/// `|⟨g, u_f⟩ - ⟨v_g, f⟩| / (‖f‖₂‖g‖₂)` where `u_f` solves with `table` and
/// `v_g` with `adjoint` (the symbol of `K(-y)`).
pub fn duality_gap(table: &SymbolTable, adjoint: &SymbolTable, lambda: f64, f: &ScalarField, g: &ScalarField) -> Result<f64> {
    let u = solve(table, lambda, f)?.u;
    let v = solve(adjoint, lambda, g)?.u;
    let scale = libm::sqrt(f.inner(f)? * g.inner(g)?);
    let gap = (g.inner(&u)? - v.inner(f)?).abs();
    Ok(if scale > 0.0 { gap / scale } else { gap })
}

/// `1 / (m(ξ) + i b·ξ - λ)`, the solution multiplier at one frequency.
pub fn resolvent_multiplier(m: Complex64, b_dot_xi: f64, lambda: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) / (m + Complex64::new(-lambda, b_dot_xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Extension, TorusGrid};
    use crate::kernel::random_kernel;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn mode(g: TorusGrid, k: f64) -> ScalarField {
        ScalarField::from_fn(g, Extension::Periodic, |x| libm::cos(k * x[0]))
    }

    fn smooth_rhs(g: TorusGrid, c: [f64; 4]) -> ScalarField {
        ScalarField::from_fn(g, Extension::Periodic, |x| {
            c[0] * libm::cos(x[0]) + c[1] * libm::sin(2.0 * x[0]) + c[2] * libm::cos(5.0 * x[0] + c[3]) + c[3]
        })
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = TorusGrid::new(1, PI, 32).unwrap();
        let t = SymbolTable::fractional(&g, 0.7);
        let r = solve(&t, 1.0, &ScalarField::zeros(g, Extension::Periodic)).unwrap();
        assert_eq!(r.u.sup_norm(), 0.0);
        assert!(max_principle_check(&r, &ScalarField::zeros(g, Extension::Periodic)).unwrap().pass);
    }

    #[test]
    fn single_mode_fractional() {
        let g = TorusGrid::new(1, PI, 32).unwrap();
        let sigma = 1.3;
        let t = SymbolTable::fractional(&g, sigma);
        let f = mode(g, 3.0);
        let r = solve(&t, 1.0, &f).unwrap();
        let c = -1.0 / (libm::pow(3.0, sigma) + 1.0);
        for (x, v) in g.nodes().zip(r.u.values()) {
            assert!((v - c * libm::cos(3.0 * x[0])).abs() < 1e-13);
        }
        assert!(r.residual_l2 < 1e-13);
        let mp = max_principle_check(&solve(&t, 10.0, &f).unwrap(), &f).unwrap();
        let expect = 10.0 / (libm::pow(3.0, sigma) + 10.0);
        assert!((mp.lhs - expect).abs() < 1e-12 && mp.pass);
    }

    #[test]
    fn single_mode_with_drift() {
        // u = Re(e^{ikx} / (m(k) + i b k - λ)) for f = cos(kx)
        let g = TorusGrid::new(1, PI, 32).unwrap();
        let spec = random_kernel(1, 0.6, 0.5, 2.0, 3).unwrap();
        let t = SymbolTable::new(spec.kernel(), &g, 1e-12).unwrap();
        let (k, b, lambda) = (2.0, 0.7, 0.5);
        let r = solve_with_drift(&t, &[b], lambda, &mode(g, k)).unwrap();
        let m = crate::symbol::symbol_at(spec.kernel(), &[k], 1e-12).unwrap();
        let z = resolvent_multiplier(m, b * k, lambda);
        for (x, v) in g.nodes().zip(r.u.values()) {
            let expect = (z * Complex64::from_polar(1.0, k * x[0])).re;
            assert!((v - expect).abs() < 1e-11);
        }
        assert!(r.residual_l2 < 1e-12);
        let r0 = solve_with_drift(&t, &[0.0], lambda, &mode(g, k)).unwrap();
        assert_eq!(r0, solve(&t, lambda, &mode(g, k)).unwrap());
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        let g = TorusGrid::new(1, PI, 8).unwrap();
        let t = SymbolTable::fractional(&g, 0.5);
        assert!(matches!(solve(&t, 0.0, &mode(g, 1.0)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn duality_with_reflected_kernel() {
        let g = TorusGrid::new(1, PI, 64).unwrap();
        let spec = random_kernel(1, 1.4, 0.5, 2.0, 11).unwrap();
        let t = SymbolTable::new(spec.kernel(), &g, 1e-12).unwrap();
        let ta = SymbolTable::new(&spec.kernel().reflected(), &g, 1e-12).unwrap();
        let f = smooth_rhs(g, [1.0, -0.3, 0.2, 0.1]);
        let h = smooth_rhs(g, [0.2, 0.9, -0.5, -0.4]);
        assert!(duality_gap(&t, &ta, 0.3, &f, &h).unwrap() < 1e-10);
        assert!(duality_gap(&t, &t.adjoint(), 0.3, &f, &h).unwrap() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn linearity_damping_and_max_principle(
            c1 in proptest::array::uniform4(-1.0f64..1.0),
            c2 in proptest::array::uniform4(-1.0f64..1.0),
            a in -2.0f64..2.0,
            lambda in 0.01f64..100.0,
            seed in 0u64..1000,
        ) {
            let g = TorusGrid::new(1, PI, 64).unwrap();
            let spec = random_kernel(1, 0.3 + (seed % 17) as f64 * 0.1, 0.5, 2.0, seed).unwrap();
            let t = SymbolTable::new(spec.kernel(), &g, 1e-10).unwrap();
            let (f1, f2) = (smooth_rhs(g, c1), smooth_rhs(g, c2));
            let u1 = solve(&t, lambda, &f1).unwrap();
            let u2 = solve(&t, lambda, &f2).unwrap();
            let f12 = f1.combine(a, &f2, 1.0).unwrap();
            let u12 = solve(&t, lambda, &f12).unwrap();
            let lin = u1.u.combine(a, &u2.u, 1.0).unwrap();
            let scale = 1.0 + u12.u.sup_norm();
            for (x, y) in lin.values().iter().zip(u12.u.values()) {
                prop_assert!((x - y).abs() < 1e-12 * scale);
            }
            prop_assert!(u12.residual_l2 < 1e-10);
            let l2 = |v: &ScalarField| libm::sqrt(v.inner(v).unwrap());
            prop_assert!(lambda * l2(&u12.u) <= l2(&f12) * (1.0 + 1e-12));
            prop_assert!(max_principle_check(&u12, &f12).unwrap().pass);
        }
    }
}
