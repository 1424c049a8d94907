use nle_core::fields::{cosine_mode, gaussian_bump, windowed_noise};
use nle_core::harness::{estimate_suite, holder_suite, identity_suite, EstimateConfig, IdentityId};
use nle_core::kernel::{random_kernel, Decomposition};
use nle_core::operator::{apply_direct, apply_spectral, WholeSpaceOperator};
use nle_core::process::simulate_paths;
use nle_core::solver::{solve, solve_with_drift};
use nle_core::{Extension, KernelSpec, ScalarField, SymbolTable, TorusGrid};
use proptest::prelude::*;

/// `-(-Δ)^{σ/2} e^{-x²}` at `x = 0`, from `∫ |ξ|^σ √π e^{-ξ²/4} dξ / 2π`.
fn frac_gaussian_at_zero(sigma: f64) -> f64 {
    -libm::pow(2.0, sigma) * libm::tgamma(0.5 * (sigma + 1.0)) / core::f64::consts::PI.sqrt()
}

#[test]
fn whole_space_operator_matches_closed_form_and_direct_quadrature() {
    let g = TorusGrid::new(1, 16.0, 512).unwrap();
    let u = gaussian_bump(g, &[0.0], 1.0);
    for sigma in [0.4, 1.0, 1.6] {
        let spec = KernelSpec::fractional(1, sigma).unwrap();
        let op = WholeSpaceOperator::new(spec.kernel(), &g, 1e-12).unwrap();
        let lu = op.apply(&u).unwrap();
        let exact = frac_gaussian_at_zero(sigma);
        let spectral = lu.values()[g.origin_index()];
        assert!((spectral - exact).abs() < 1e-6 * exact.abs(), "σ={sigma}: {spectral} vs {exact}");
        let direct = apply_direct(spec.kernel(), &u, &[0.0]).unwrap();
        assert!((direct - exact).abs() < 1e-3 * exact.abs(), "σ={sigma}: direct {direct} vs {exact}");
    }
}

#[test]
fn solve_then_apply_returns_the_source() {
    let g = TorusGrid::new(1, 8.0, 256).unwrap();
    let spec = random_kernel(1, 0.9, 0.5, 2.0, 3).unwrap();
    let table = SymbolTable::new(spec.kernel(), &g, 1e-12).unwrap();
    let f = windowed_noise(g, 16, 2.0, 11);
    for lambda in [0.05, 1.0, 20.0] {
        let r = solve(&table, lambda, &f).unwrap();
        let back = apply_spectral(&table, &r.u).unwrap().combine(1.0, &r.u, -lambda).unwrap();
        let err = back.combine(1.0, &f, -1.0).unwrap().sup_norm();
        assert!(err < 1e-11, "λ={lambda}: {err}");
    }
    let b = spec.kernel().drift_vector().unwrap();
    let r = solve_with_drift(&table, &b, 1.0, &f).unwrap();
    assert!(r.residual_l2 < 1e-11);
}

#[test]
fn fractional_single_mode_ratio_through_the_suite() {
    let g = TorusGrid::new(1, std::f64::consts::PI, 64).unwrap();
    let (sigma, xi) = (1.5, 3.0);
    let f = cosine_mode(g, &[xi]);
    let lambdas = vec![0.01, 1.0, 100.0];
    let cfg = EstimateConfig {
        kernels: vec![KernelSpec::fractional(1, sigma).unwrap()],
        lambdas: lambdas.clone(),
        ps: vec![2.0],
        sources: vec![f],
        drift: false,
        tol: 1e-12,
    };
    let rep = estimate_suite(&cfg).unwrap();
    let l2: Vec<_> = rep.rows.iter().filter(|r| r.estimate_id.as_str() == "l2").collect();
    assert_eq!(l2.len(), lambdas.len());
    for (row, lambda) in l2.iter().zip(&lambdas) {
        let s = libm::pow(xi, sigma);
        let expect = (s + lambda.sqrt() * libm::pow(xi, sigma / 2.0) + lambda) / (s + lambda);
        assert!((row.n_obs - expect).abs() < 1e-9, "λ={lambda}: {} vs {expect}", row.n_obs);
    }
    assert!(rep.all_pass());
}

#[test]
fn identities_hold_for_a_symmetric_rough_kernel() {
    let g = TorusGrid::new(1, 6.0, 48).unwrap();
    let spec = random_kernel(1, 1.3, 0.5, 2.0, 21).unwrap();
    let (sym, _) = spec.decompose(Decomposition::EvenOdd).unwrap();
    let u = gaussian_bump(g, &[0.2], 0.9);
    let rep = identity_suite(&sym, &u).unwrap();
    for id in [IdentityId::Energy, IdentityId::Quadruple] {
        assert!(rep.gap(id).unwrap() < 1e-3, "{}: {:?}", id.as_str(), rep.gap(id));
    }
    assert!(rep.gap(IdentityId::Orthogonality).unwrap() < 1e-8);
}

#[test]
fn holder_ratios_are_finite_for_a_rough_kernel() {
    let g = TorusGrid::new(1, 8.0, 512).unwrap();
    let spec = random_kernel(1, 1.2, 0.5, 2.0, 5).unwrap();
    let f = gaussian_bump(g, &[0.0], 0.5);
    let rep = holder_suite(&spec, &[0.1, 1.0, 10.0], &f).unwrap();
    assert_eq!(rep.rows.len(), 3);
    assert!(rep.rows.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0));
}

#[test]
fn symmetric_process_has_no_mean_displacement() {
    let spec = random_kernel(1, 1.4, 0.5, 2.0, 8).unwrap();
    let (sym, _) = spec.decompose(Decomposition::EvenOdd).unwrap();
    let e = simulate_paths(sym.kernel(), 0.05, 0.05, &[0.0], 20_000, 3).unwrap();
    let (mean, se) = e.mean_displacement();
    assert!(mean[0].abs() < 4.0 * se[0], "{} ± {}", mean[0], se[0]);
    assert_eq!(e, simulate_paths(sym.kernel(), 0.05, 0.05, &[0.0], 20_000, 3).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solve_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0, lambda in 0.01f64..50.0) {
        let g = TorusGrid::new(1, 4.0, 64).unwrap();
        let spec = random_kernel(1, 0.7, 0.5, 2.0, seed).unwrap();
        let table = SymbolTable::new(spec.kernel(), &g, 1e-10).unwrap();
        let f1 = windowed_noise(g, 8, 1.0, seed);
        let f2 = gaussian_bump(g, &[0.3], 0.7);
        let u1 = solve(&table, lambda, &f1).unwrap().u;
        let u2 = solve(&table, lambda, &f2).unwrap().u;
        let u = solve(&table, lambda, &f1.combine(a, &f2, b).unwrap()).unwrap().u;
        let err = u.combine(1.0, &u1.combine(a, &u2, b).unwrap(), -1.0).unwrap().sup_norm();
        prop_assert!(err < 1e-11 * (1.0 + a.abs() + b.abs()) / lambda.min(1.0));
    }

    #[test]
    fn solution_of_real_source_is_real_and_keeps_extension(seed in 0u64..1000) {
        let g = TorusGrid::new(1, 4.0, 32).unwrap();
        let spec = random_kernel(1, 1.0, 0.5, 2.0, seed).unwrap();
        let table = SymbolTable::new(spec.kernel(), &g, 1e-10).unwrap();
        let f = ScalarField::from_fn(g, Extension::ZeroOutside, |x| (-x[0] * x[0]).exp() * (1.0 + x[0]));
        let u = solve(&table, 1.0, &f).unwrap().u;
        prop_assert_eq!(u.extension(), Extension::ZeroOutside);
        prop_assert!(u.values().iter().all(|v| v.is_finite()));
    }
}
