use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nle_core::kernel::random_kernel;
use nle_core::process::simulate_paths;
use nle_core::solver::solve;
use nle_core::{KernelSpec, SymbolTable};

use nle::config::{ExperimentConfig, SourceDesc};
use nle::io;
use nle::run::{out_dir, run_experiment};

/// Residual gate for `nle solve`.
const RESIDUAL_GATE: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "nle", version, about = "Non-local elliptic operators: symbols, solves, simulations and estimate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a kernel JSON (fractional or seeded random).
    Kernel {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        sigma: f64,
        /// Fractional Laplacian kernel instead of a random one.
        #[arg(long)]
        fractional: bool,
        #[arg(long, default_value_t = 0.5)]
        nu: f64,
        #[arg(long, default_value_t = 2.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the symbol on a lattice: xi.., re_m, im_m, tail_bound.
    Symbol {
        #[arg(long)]
        kernel: PathBuf,
        /// `n=256,R=16`.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a right-hand side field as CSV.
    Field {
        /// `n=256,R=8[,d=1]`.
        #[arg(long)]
        grid: String,
        #[arg(long, value_enum)]
        kind: FieldKind,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        center: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        width: f64,
        #[arg(long, default_value_t = 16)]
        k_max: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        xi: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve (L - λ)u = f; exits 1 if the residual gate fails.
    Solve {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        rhs: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the jump process without jumps below ε; writes path, jumps, x1..xd.
    Simulate {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        #[arg(long, default_value_t = 0.05)]
        t: f64,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the experiment suites of a config; exits 0 iff every gate holds.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the default full suite config.
    DefaultConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldKind {
    Bump,
    Noise,
    Mode,
}

/// Config that does not read or parse.
#[derive(Debug)]
struct BadConfig(anyhow::Error);

impl std::fmt::Display for BadConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for BadConfig {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is::<BadConfig>() => {
            eprintln!("error: invalid config: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Kernel { d, sigma, fractional, nu, lambda, seed, out } => {
            let spec = if fractional { KernelSpec::fractional(d, sigma)? } else { random_kernel(d, sigma, nu, lambda, seed)? };
            io::write_kernel(&spec, &out)?;
            Ok(true)
        }
        Command::Symbol { kernel, grid, tol, out } => {
            let spec = io::read_kernel(&kernel)?;
            let grid = io::parse_grid(&grid, spec.dim())?;
            if grid.dim() != spec.dim() {
                bail!("grid dimension {} does not match the kernel dimension {}", grid.dim(), spec.dim());
            }
            let table = SymbolTable::new(spec.kernel(), &grid, tol)?;
            io::write_symbol(&table, create(&out)?)?;
            Ok(true)
        }
        Command::Field { grid, kind, center, width, k_max, xi, seed, out } => {
            let grid = io::parse_grid(&grid, 1)?;
            let desc = match kind {
                FieldKind::Bump => SourceDesc::Bump { center, width },
                FieldKind::Noise => SourceDesc::Noise { k_max, width, seed: Some(seed) },
                FieldKind::Mode => SourceDesc::Mode { xi },
            };
            io::write_field_file(&desc.build(grid, seed)?, &out)?;
            Ok(true)
        }
        Command::Solve { kernel, lambda, rhs, tol, out } => {
            let spec = io::read_kernel(&kernel)?;
            let f = io::read_field_file(&rhs)?;
            let table = SymbolTable::new(spec.kernel(), f.grid(), tol)?;
            let r = solve(&table, lambda, &f)?;
            io::write_field_file(&r.u, &out)?;
            let pass = r.residual_l2 < RESIDUAL_GATE;
            eprintln!("residual {:.3e} ({})", r.residual_l2, if pass { "pass" } else { "FAIL" });
            Ok(pass)
        }
        Command::Simulate { kernel, eps, t, paths, seed, out } => {
            let spec = io::read_kernel(&kernel)?;
            let d = spec.dim();
            let e = simulate_paths(spec.kernel(), eps, t, &[0.0; 3][..d], paths, seed)?;
            let mut w = csv::Writer::from_writer(create(&out)?);
            let mut header = vec!["path".to_string(), "jumps".to_string()];
            header.extend((1..=d).map(|k| format!("x{k}")));
            w.write_record(&header)?;
            for (i, (x, n)) in e.terminal.iter().zip(&e.jump_counts).enumerate() {
                let mut rec = vec![i.to_string(), n.to_string()];
                rec.extend(x[..d].iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
            w.flush()?;
            let (mean, se) = e.mean_displacement();
            eprintln!("intensity {:.6e}, mean displacement {:?} ± {:?}", e.intensity, &mean[..d], &se[..d]);
            Ok(true)
        }
        Command::Run { config, out_dir: flag, seed } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))
                .map_err(BadConfig)?;
            let mut cfg = ExperimentConfig::parse(&text)
                .with_context(|| format!("{}", config.display()))
                .map_err(BadConfig)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let base = config.parent().unwrap_or(Path::new("."));
            let dir = out_dir(flag.as_deref(), &cfg, base);
            let summary = run_experiment(&cfg, base, &dir)?;
            for s in &summary.suites {
                let status = if s.pass { "PASS" } else { "FAIL" };
                let gates: Vec<String> = s.gates.iter().map(|g| format!("{} {:.4} vs {:e}", g.gate, g.value, g.threshold)).collect();
                let err = s.error.as_deref().map(|e| format!(" error: {e}")).unwrap_or_default();
                eprintln!("[{status}] {} ({} rows, {:.1}s) {}{err}", s.suite, s.rows, s.seconds, gates.join(", "));
            }
            eprintln!("summary written to {}", dir.join("summary.json").display());
            Ok(summary.pass)
        }
        Command::DefaultConfig => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{}", ExperimentConfig::default_suite().to_json())?;
            Ok(true)
        }
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}
