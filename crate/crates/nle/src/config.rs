//! Versioned experiment configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use nle_core::fields::{cosine_mode, gaussian_bump, windowed_noise};
use nle_core::kernel::random_kernel;
use nle_core::{KernelSpec, ScalarField, TorusGrid};
use serde::{Deserialize, Serialize};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Estimate,
    Identity,
    Holder,
    Local,
    MeanOscillation,
    Generator,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Estimate, Suite::Identity, Suite::Holder, Suite::Local, Suite::MeanOscillation, Suite::Generator];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Estimate => "estimate",
            Suite::Identity => "identity",
            Suite::Holder => "holder",
            Suite::Local => "local",
            Suite::MeanOscillation => "mean_oscillation",
            Suite::Generator => "generator",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    pub d: usize,
    pub half_period: f64,
    pub n: usize,
}

impl GridParams {
    pub fn build(&self) -> Result<TorusGrid> {
        Ok(TorusGrid::new(self.d, self.half_period, self.n)?)
    }
}

/// Where a kernel comes from. Random kernels without a seed take
/// `master seed + position in the list`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSource {
    Fractional {
        sigma: f64,
    },
    Random {
        sigma: f64,
        #[serde(default = "default_nu")]
        nu: f64,
        #[serde(default = "default_lambda_up")]
        lambda: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Kernel JSON, relative paths resolved against the config file.
    File {
        path: PathBuf,
    },
}

/// Right-hand side families. Noise without a seed takes `master seed + position`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceDesc {
    Bump {
        #[serde(default)]
        center: Vec<f64>,
        width: f64,
    },
    Noise {
        k_max: usize,
        width: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    Mode {
        xi: Vec<f64>,
    },
}

impl SourceDesc {
    pub fn build(&self, grid: TorusGrid, default_seed: u64) -> Result<ScalarField> {
        let d = grid.dim();
        let pad = |v: &[f64]| -> Result<[f64; 3]> {
            ensure!(v.len() <= d, "vector {v:?} longer than the grid dimension {d}");
            let mut p = [0.0; 3];
            p[..v.len()].copy_from_slice(v);
            Ok(p)
        };
        Ok(match self {
            SourceDesc::Bump { center, width } => {
                ensure!(*width > 0.0, "bump width must be positive");
                gaussian_bump(grid, &pad(center)?, *width)
            }
            SourceDesc::Noise { k_max, width, seed } => {
                ensure!(*width > 0.0 && *k_max > 0, "noise needs k_max > 0 and a positive width");
                windowed_noise(grid, *k_max, *width, seed.unwrap_or(default_seed))
            }
            SourceDesc::Mode { xi } => cosine_mode(grid, &pad(xi)?),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessParams {
    pub eps: f64,
    pub t: f64,
    pub paths: usize,
    /// Frequency of the cosine test function.
    pub xi: f64,
}

impl Default for ProcessParams {
    fn default() -> Self {
        Self { eps: 1e-2, t: 0.05, paths: 100_000, xi: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    pub suites: Vec<Suite>,
    #[serde(default = "default_grid")]
    pub grid: GridParams,
    #[serde(default = "default_identity_grid")]
    pub identity_grid: GridParams,
    #[serde(default)]
    pub kernels: Vec<KernelSource>,
    #[serde(default)]
    pub sources: Vec<SourceDesc>,
    /// Fields for the identity suite, built on `identity_grid`; they must be
    /// resolved at its spacing.
    #[serde(default = "default_identity_sources")]
    pub identity_sources: Vec<SourceDesc>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Dual exponents are added when the suites run.
    #[serde(default = "default_ps")]
    pub ps: Vec<f64>,
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default)]
    pub drift: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub process: ProcessParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn default_nu() -> f64 {
    0.5
}
fn default_lambda_up() -> f64 {
    2.0
}
fn default_grid() -> GridParams {
    GridParams { d: 1, half_period: 16.0, n: 512 }
}
fn default_identity_grid() -> GridParams {
    GridParams { d: 1, half_period: 6.0, n: 48 }
}
fn default_identity_sources() -> Vec<SourceDesc> {
    vec![SourceDesc::Bump { center: vec![0.2], width: 0.9 }]
}
fn default_lambdas() -> Vec<f64> {
    vec![1e-2, 1e-1, 1.0, 10.0, 100.0]
}
fn default_ps() -> Vec<f64> {
    vec![2.0]
}
fn default_kappas() -> Vec<f64> {
    vec![2.0, 4.0, 8.0]
}
fn default_radii() -> Vec<f64> {
    vec![0.125, 0.25, 0.5, 1.0]
}
fn default_tol() -> f64 {
    1e-10
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// The full d = 1 suite with three kernels and two right-hand sides.
    pub fn default_suite() -> Self {
        Self {
            schema: SCHEMA,
            seed: 7,
            suites: Suite::ALL.to_vec(),
            grid: default_grid(),
            identity_grid: default_identity_grid(),
            identity_sources: default_identity_sources(),
            kernels: vec![
                KernelSource::Fractional { sigma: 0.5 },
                KernelSource::Random { sigma: 1.0, nu: 0.5, lambda: 2.0, seed: None },
                KernelSource::Random { sigma: 1.5, nu: 0.5, lambda: 2.0, seed: None },
            ],
            sources: vec![
                SourceDesc::Bump { center: vec![0.0], width: 0.5 },
                SourceDesc::Noise { k_max: 20, width: 3.0, seed: None },
            ],
            lambdas: default_lambdas(),
            ps: vec![2.0, 3.0],
            kappas: default_kappas(),
            radii: default_radii(),
            drift: true,
            tol: default_tol(),
            process: ProcessParams::default(),
            out_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            bail!("unsupported schema {} (this build reads schema {SCHEMA})", self.schema);
        }
        ensure!(self.lambdas.iter().all(|l| *l > 0.0 && l.is_finite()), "λ values must be positive and finite");
        ensure!(self.ps.iter().all(|p| *p > 1.0 && p.is_finite()), "p values must lie in (1, ∞)");
        ensure!(self.kappas.iter().all(|k| *k >= 2.0), "κ values must be at least 2");
        ensure!(self.radii.iter().all(|r| *r > 0.0), "radii must be positive");
        ensure!(self.tol > 0.0, "tol must be positive");
        let p = &self.process;
        ensure!(p.eps > 0.0 && p.t > 0.0 && p.paths >= 2, "process needs eps > 0, t > 0 and at least 2 paths");
        self.grid.build().context("grid")?;
        self.identity_grid.build().context("identity_grid")?;
        for k in &self.kernels {
            let sigma = match k {
                KernelSource::Fractional { sigma } | KernelSource::Random { sigma, .. } => *sigma,
                KernelSource::File { .. } => continue,
            };
            ensure!(sigma > 0.0 && sigma < 2.0, "kernel σ must lie in (0, 2), got {sigma}");
        }
        Ok(())
    }

    pub fn kernels(&self, base_dir: &Path) -> Result<Vec<KernelSpec>> {
        let d = self.grid.d;
        self.kernels
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let spec = match k {
                    KernelSource::Fractional { sigma } => KernelSpec::fractional(d, *sigma)?,
                    KernelSource::Random { sigma, nu, lambda, seed } => {
                        random_kernel(d, *sigma, *nu, *lambda, seed.unwrap_or(self.seed.wrapping_add(i as u64)))?
                    }
                    KernelSource::File { path } => crate::io::read_kernel(&base_dir.join(path))?,
                };
                ensure!(spec.dim() == d, "kernel {i} has dimension {}, grid has {d}", spec.dim());
                Ok(spec)
            })
            .collect()
    }

    pub fn sources(&self, grid: TorusGrid) -> Result<Vec<ScalarField>> {
        build_all(&self.sources, grid, self.seed)
    }

    pub fn identity_sources(&self) -> Result<Vec<ScalarField>> {
        build_all(&self.identity_sources, self.identity_grid.build()?, self.seed)
    }

    /// `ps` with every missing dual exponent appended.
    pub fn ps_with_duals(&self) -> Vec<f64> {
        let mut ps = self.ps.clone();
        for &p in &self.ps {
            let q = p / (p - 1.0);
            if !ps.iter().any(|v| (v - q).abs() < 1e-12) {
                ps.push(q);
            }
        }
        ps
    }
}

fn build_all(sources: &[SourceDesc], grid: TorusGrid, seed: u64) -> Result<Vec<ScalarField>> {
    sources
        .iter()
        .enumerate()
        .map(|(i, s)| s.build(grid, seed.wrapping_add(i as u64)).with_context(|| format!("source {i}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::parse(r#"{"schema": 1, "suites": []}"#).unwrap();
        assert_eq!(c.grid, default_grid());
        assert_eq!(c.lambdas.len(), 5);
        assert!(c.kernels.is_empty());
    }

    #[test]
    fn default_suite_round_trips() {
        let c = ExperimentConfig::default_suite();
        assert_eq!(ExperimentConfig::parse(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_schema_and_unknown_fields() {
        assert!(ExperimentConfig::parse(r#"{"schema": 2, "suites": []}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"schema": 1, "suites": [], "colour": 1}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"schema": 1, "suites": ["nope"]}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"schema": 1, "suites": [], "ps": [1.0]}"#).is_err());
    }

    #[test]
    fn duals_and_seeds() {
        let mut c = ExperimentConfig::default_suite();
        c.ps = vec![2.0, 4.0, 1.5];
        assert_eq!(c.ps_with_duals(), vec![2.0, 4.0, 1.5, 4.0 / 3.0, 3.0]);
        let a = c.kernels(Path::new(".")).unwrap();
        c.seed = 8;
        let b = c.kernels(Path::new(".")).unwrap();
        assert_eq!(a[0], b[0]);
        assert_ne!(a[1], b[1]);
    }
}
