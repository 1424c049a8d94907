//! Runs the suites named in an [`ExperimentConfig`] and writes one CSV per
//! suite plus `summary.json`.
//!
//! CSV columns per suite:
//!
//! * `estimate.csv`: estimate_id, kernel, source, lambda, p, params, lhs, rhs, n_obs, pass
//! * `stability.csv`: estimate_id, kernel, source, p, min, max, spread, pass
//! * `identity.csv` (sources from `identity_sources`): identity_id, kernel, source, lhs, rhs, gap, threshold, pass
//! * `holder.csv`: kernel, source, lambda, alpha, seminorm, weighted_l1, osc_f, osc_abs_f, ratio, ratio_abs
//! * `local.csv`: kernel, source, case, p, lambda, lhs, f_term, u_term, du_term, n_obs, eps_sweep, pass
//! * `mean_oscillation.csv`: kernel, source, variant, r, kappa, lambda, lhs, rhs_osc_term, rhs_f_term, ratio
//! * `generator.csv`: kernel, eps, t, paths, xi, mc_estimate, analytic_lu, std_err, z_score, bias_bound, bias_monotone, pass

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use nle_core::analysis::{mean_oscillation_report, OscillationVariant};
use nle_core::harness::{
    estimate_suite, holder_suite, identity_suite, local_estimate_check, EstimateConfig, IdentityId, LocalCase,
    MEAN_OSC_BOUND, STABILITY_FACTOR,
};
use nle_core::kernel::Decomposition;
use nle_core::process::{generator_check, simulate_paths, truncation_bias_ladder, TestFunction};
use nle_core::symbol::{symbol_at, SymbolEvaluator};
use nle_core::{Extension, KernelSpec, ScalarField, SymbolTable};
use serde::Serialize;

use crate::config::{ExperimentConfig, Suite};

const IDENTITY_GAP: f64 = 1e-3;
const ORTHOGONALITY_GAP: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Gate {
    pub gate: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Gate {
    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self { gate: name.into(), value, threshold, pass: value < threshold }
    }

    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { gate: name.into(), value, threshold, pass: value <= threshold }
    }

    /// A yes/no gate: value is the number of failing rows.
    fn count(name: &str, failures: usize) -> Self {
        Self { gate: name.into(), value: failures as f64, threshold: 0.0, pass: failures == 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub rows: usize,
    pub files: Vec<String>,
    pub gates: Vec<Gate>,
    pub error: Option<String>,
    pub seconds: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub schema: u32,
    pub seed: u64,
    pub pass: bool,
    pub suites: Vec<SuiteSummary>,
}

struct Setup<'a> {
    cfg: &'a ExperimentConfig,
    kernels: Vec<KernelSpec>,
    out: &'a Path,
}

struct SuiteOutput {
    rows: usize,
    files: Vec<String>,
    gates: Vec<Gate>,
}

/// Runs every suite; module errors are recorded per suite and fail the run.
pub fn run_experiment(cfg: &ExperimentConfig, base_dir: &Path, out_dir: &Path) -> Result<Summary> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut suites = Vec::new();
    let kernels = cfg.kernels(base_dir);
    let kernels = match kernels {
        Ok(k) => k,
        Err(e) => {
            suites.push(SuiteSummary {
                suite: "kernels".into(),
                rows: 0,
                files: vec![],
                gates: vec![],
                error: Some(format!("{e:#}")),
                seconds: 0.0,
                pass: false,
            });
            Vec::new()
        }
    };
    if suites.is_empty() {
        let ctx = Setup { cfg, kernels, out: out_dir };
        for &suite in &cfg.suites {
            let t = Instant::now();
            let res = match suite {
                Suite::Estimate => estimate(&ctx),
                Suite::Identity => identity(&ctx),
                Suite::Holder => holder(&ctx),
                Suite::Local => local(&ctx),
                Suite::MeanOscillation => mean_oscillation(&ctx),
                Suite::Generator => generator(&ctx),
            };
            let seconds = t.elapsed().as_secs_f64();
            suites.push(match res {
                Ok(o) => SuiteSummary {
                    suite: suite.name().into(),
                    rows: o.rows,
                    files: o.files,
                    pass: o.gates.iter().all(|g| g.pass),
                    gates: o.gates,
                    error: None,
                    seconds,
                },
                Err(e) => SuiteSummary {
                    suite: suite.name().into(),
                    rows: 0,
                    files: vec![],
                    gates: vec![],
                    error: Some(format!("{e:#}")),
                    seconds,
                    pass: false,
                },
            });
        }
    }
    let summary = Summary { schema: crate::config::SCHEMA, seed: cfg.seed, pass: suites.iter().all(|s| s.pass), suites };
    let path = out_dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(summary)
}

fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<String> {
    let path: PathBuf = dir.join(name);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(name.into())
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

#[derive(Serialize)]
struct EstimateCsv<'a> {
    estimate_id: &'static str,
    kernel: usize,
    source: usize,
    lambda: f64,
    p: f64,
    params: &'a str,
    lhs: f64,
    rhs: f64,
    n_obs: f64,
    pass: bool,
}

#[derive(Serialize)]
struct StabilityCsv {
    estimate_id: &'static str,
    kernel: usize,
    source: usize,
    p: f64,
    min: f64,
    max: f64,
    spread: f64,
    pass: bool,
}

fn estimate(ctx: &Setup<'_>) -> Result<SuiteOutput> {
    let grid = ctx.cfg.grid.build()?;
    let config = EstimateConfig {
        kernels: ctx.kernels.clone(),
        lambdas: ctx.cfg.lambdas.clone(),
        ps: ctx.cfg.ps_with_duals(),
        sources: ctx.cfg.sources(grid)?,
        drift: ctx.cfg.drift,
        tol: ctx.cfg.tol,
    };
    let rep = estimate_suite(&config)?;
    let rows: Vec<_> = rep
        .rows
        .iter()
        .map(|r| EstimateCsv {
            estimate_id: r.estimate_id.as_str(),
            kernel: r.kernel,
            source: r.source,
            lambda: r.lambda,
            p: r.p,
            params: &r.params,
            lhs: r.lhs,
            rhs: r.rhs,
            n_obs: r.n_obs,
            pass: r.pass,
        })
        .collect();
    let stab: Vec<_> = rep
        .stability()
        .into_iter()
        .map(|s| StabilityCsv {
            estimate_id: s.estimate_id.as_str(),
            kernel: s.kernel,
            source: s.source,
            p: s.p,
            min: s.min,
            max: s.max,
            spread: s.spread,
            pass: s.pass,
        })
        .collect();
    let files = vec![write_csv(ctx.out, "estimate.csv", &rows)?, write_csv(ctx.out, "stability.csv", &stab)?];
    let gates = vec![
        Gate::count("rows_finite", rows.iter().filter(|r| !r.pass).count()),
        Gate::below("lambda_spread", max_of(stab.iter().map(|s| s.spread)), STABILITY_FACTOR),
    ];
    Ok(SuiteOutput { rows: rows.len(), files, gates })
}

#[derive(Serialize)]
struct IdentityCsv {
    identity_id: &'static str,
    kernel: usize,
    source: usize,
    lhs: f64,
    rhs: f64,
    gap: f64,
    threshold: f64,
    pass: bool,
}

fn identity(ctx: &Setup<'_>) -> Result<SuiteOutput> {
    // The identities are for fields on the whole line; periodic modes are skipped.
    let sources: Vec<(usize, ScalarField)> =
        ctx.cfg.identity_sources()?.into_iter().enumerate().filter(|(_, f)| f.extension() == Extension::ZeroOutside).collect();
    let mut rows = Vec::new();
    for (ki, spec) in ctx.kernels.iter().enumerate() {
        let (sym, _) = spec.decompose(Decomposition::EvenOdd)?;
        for (si, u) in &sources {
            let full = identity_suite(spec, u)?;
            let even = identity_suite(&sym, u)?;
            for (rep, id) in [(&full, IdentityId::Energy), (&even, IdentityId::Quadruple), (&full, IdentityId::Orthogonality)] {
                let Some(r) = rep.rows.iter().find(|r| r.identity_id == id) else { continue };
                let threshold = if id == IdentityId::Orthogonality { ORTHOGONALITY_GAP } else { IDENTITY_GAP };
                rows.push(IdentityCsv {
                    identity_id: id.as_str(),
                    kernel: ki,
                    source: *si,
                    lhs: r.lhs,
                    rhs: r.rhs,
                    gap: r.gap,
                    threshold,
                    pass: r.gap < threshold,
                });
            }
        }
    }
    let files = vec![write_csv(ctx.out, "identity.csv", &rows)?];
    let gates = vec![Gate::count("gaps", rows.iter().filter(|r| !r.pass).count())];
    Ok(SuiteOutput { rows: rows.len(), files, gates })
}

#[derive(Serialize)]
struct HolderCsv {
    kernel: usize,
    source: usize,
    lambda: f64,
    alpha: f64,
    seminorm: f64,
    weighted_l1: f64,
    osc_f: f64,
    osc_abs_f: f64,
    ratio: f64,
    ratio_abs: f64,
}

fn holder(ctx: &Setup<'_>) -> Result<SuiteOutput> {
    let grid = ctx.cfg.grid.build()?;
    let sources = ctx.cfg.sources(grid)?;
    let mut rows = Vec::new();
    let mut worst_spread: f64 = 1.0;
    for (ki, spec) in ctx.kernels.iter().enumerate() {
        for (si, f) in sources.iter().enumerate() {
            let rep = holder_suite(spec, &ctx.cfg.lambdas, f)?;
            if !rep.rows.is_empty() {
                worst_spread = max_of([worst_spread, rep.spread()]);
            }
            rows.extend(rep.rows.iter().map(|r| HolderCsv {
                kernel: ki,
                source: si,
                lambda: r.lambda,
                alpha: r.alpha,
                seminorm: r.seminorm,
                weighted_l1: r.weighted_l1,
                osc_f: r.osc_f,
                osc_abs_f: r.osc_abs_f,
                ratio: r.ratio,
                ratio_abs: r.ratio_abs,
            }));
        }
    }
    let files = vec![write_csv(ctx.out, "holder.csv", &rows)?];
    let gates = vec![
        Gate::count("ratios_finite", rows.iter().filter(|r| !r.ratio.is_finite()).count()),
        Gate::below("lambda_spread", worst_spread, STABILITY_FACTOR),
    ];
    Ok(SuiteOutput { rows: rows.len(), files, gates })
}

#[derive(Serialize)]
struct LocalCsv {
    kernel: usize,
    source: usize,
    case: &'static str,
    p: f64,
    lambda: f64,
    lhs: f64,
    f_term: f64,
    u_term: f64,
    du_term: f64,
    n_obs: f64,
    /// `eps:N(eps)` pairs separated by `;`, empty unless σ = 1.
    eps_sweep: String,
    pass: bool,
}

fn local(ctx: &Setup<'_>) -> Result<SuiteOutput> {
    let grid = ctx.cfg.grid.build()?;
    let sources = ctx.cfg.sources(grid)?;
    let mut rows = Vec::new();
    for (ki, spec) in ctx.kernels.iter().enumerate() {
        for (si, f) in sources.iter().enumerate() {
            for p in ctx.cfg.ps_with_duals() {
                for &lambda in &ctx.cfg.lambdas {
                    let r = local_estimate_check(spec, p, lambda, f)?;
                    let critical = r.case == LocalCase::Critical;
                    rows.push(LocalCsv {
                        kernel: ki,
                        source: si,
                        case: match r.case {
                            LocalCase::Below => "below",
                            LocalCase::Critical => "critical",
                            LocalCase::Above => "above",
                        },
                        p,
                        lambda,
                        lhs: r.lhs,
                        f_term: r.f_term,
                        u_term: r.u_term,
                        du_term: r.du_term,
                        n_obs: r.n_obs,
                        eps_sweep: r.eps_sweep.iter().map(|(e, n)| format!("{e}:{n}")).collect::<Vec<_>>().join(";"),
                        pass: r.pass() && (!critical || r.monotone_in_eps()),
                    });
                }
            }
        }
    }
    let files = vec![write_csv(ctx.out, "local.csv", &rows)?];
    let gates = vec![Gate::count("finite_and_monotone", rows.iter().filter(|r| !r.pass).count())];
    Ok(SuiteOutput { rows: rows.len(), files, gates })
}

#[derive(Serialize)]
struct MeanOscCsv {
    kernel: usize,
    source: usize,
    variant: &'static str,
    r: f64,
    kappa: f64,
    lambda: f64,
    lhs: f64,
    rhs_osc_term: f64,
    rhs_f_term: f64,
    ratio: f64,
}

fn mean_oscillation(ctx: &Setup<'_>) -> Result<SuiteOutput> {
    let grid = ctx.cfg.grid.build()?;
    let sources = ctx.cfg.sources(grid)?;
    let mut rows = Vec::new();
    for (ki, spec) in ctx.kernels.iter().enumerate() {
        let table = SymbolTable::new(spec.kernel(), &grid, ctx.cfg.tol)?;
        for (si, f) in sources.iter().enumerate() {
            for (variant, name) in [(OscillationVariant::Equation, "equation"), (OscillationVariant::Interchanged, "interchanged")] {
                for &lambda in &ctx.cfg.lambdas {
                    let rep = mean_oscillation_report(&table, spec.sigma(), lambda, f, &ctx.cfg.kappas, &ctx.cfg.radii, variant)?;
                    rows.extend(rep.into_iter().map(|r| MeanOscCsv {
                        kernel: ki,
                        source: si,
                        variant: name,
                        r: r.r,
                        kappa: r.kappa,
                        lambda: r.lambda,
                        lhs: r.lhs,
                        rhs_osc_term: r.rhs_osc_term,
                        rhs_f_term: r.rhs_f_term,
                        ratio: r.ratio,
                    }));
                }
            }
        }
    }
    let files = vec![write_csv(ctx.out, "mean_oscillation.csv", &rows)?];
    let gates = vec![Gate::at_most("max_ratio", max_of(rows.iter().map(|r| r.ratio)), MEAN_OSC_BOUND)];
    Ok(SuiteOutput { rows: rows.len(), files, gates })
}

#[derive(Serialize)]
struct GeneratorCsv {
    kernel: usize,
    eps: f64,
    t: f64,
    paths: usize,
    xi: f64,
    mc_estimate: f64,
    analytic_lu: f64,
    std_err: f64,
    z_score: f64,
    bias_bound: f64,
    bias_monotone: bool,
    pass: bool,
}

fn generator(ctx: &Setup<'_>) -> Result<SuiteOutput> {
    let p = ctx.cfg.process;
    let mut rows = Vec::new();
    for (ki, spec) in ctx.kernels.iter().enumerate() {
        let k = spec.kernel();
        let d = k.dim();
        let mut xi = [0.0; 3];
        xi[0] = p.xi;
        let origin = [0.0; 3];
        let seed = ctx.cfg.seed.wrapping_add(ki as u64);
        let e = simulate_paths(k, p.eps, p.t, &origin[..d], p.paths, seed)?;
        let m_eps = SymbolEvaluator::truncated(k, p.eps).eval(&xi[..d], 1e-12)?;
        let lu = symbol_at(k, &xi[..d], 1e-12)?.re;
        let u = move |x: &[f64]| (p.xi * x[0]).cos();
        let rep = generator_check(&e, k, &TestFunction::cosine(&u, &xi[..d], m_eps), lu)?;
        let ladder: Vec<f64> = [4.0, 2.0, 1.0, 0.5].iter().map(|s| s * p.eps).collect();
        let bias = truncation_bias_ladder(k, &xi[..d], &origin[..d], &ladder, 1e-12)?;
        let mono = bias.windows(2).all(|w| w[1] <= w[0]);
        rows.push(GeneratorCsv {
            kernel: ki,
            eps: p.eps,
            t: p.t,
            paths: p.paths,
            xi: p.xi,
            mc_estimate: rep.mc_estimate,
            analytic_lu: rep.analytic_lu,
            std_err: rep.std_err,
            z_score: rep.z_score,
            bias_bound: rep.bias_bound,
            bias_monotone: mono,
            pass: rep.pass && mono,
        });
    }
    let files = vec![write_csv(ctx.out, "generator.csv", &rows)?];
    let gates = vec![Gate::count("within_bias_and_3se", rows.iter().filter(|r| !r.pass).count())];
    Ok(SuiteOutput { rows: rows.len(), files, gates })
}

/// Resolves the output directory: CLI flag, then the config, then `results`.
pub fn out_dir(flag: Option<&Path>, cfg: &ExperimentConfig, base_dir: &Path) -> PathBuf {
    match (flag, &cfg.out_dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => base_dir.join(p),
        (None, None) => PathBuf::from("results"),
    }
}
