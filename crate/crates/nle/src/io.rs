//! File formats: kernel JSON, field CSV with a JSON grid header, symbol CSV.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use nle_core::kernel::AngularMesh;
use nle_core::{Extension, Kernel, KernelSpec, ScalarField, SymbolTable, TorusGrid};
use serde::{Deserialize, Serialize};

/// Kernel mesh on disk. `values[i][j]` is `a` on shell `[r_grid[i], r_grid[i+1])`
/// and angular cell `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub d: usize,
    pub sigma: f64,
    pub nu: f64,
    pub lambda: f64,
    pub r_grid: Vec<f64>,
    pub theta_cells: usize,
    pub values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_radius: Option<f64>,
}

impl KernelFile {
    pub fn from_spec(spec: &KernelSpec) -> Self {
        let k = spec.kernel();
        let nc = k.n_cells();
        Self {
            d: k.dim(),
            sigma: k.sigma(),
            nu: spec.nu(),
            lambda: spec.lambda_up(),
            r_grid: k.edges().to_vec(),
            theta_cells: nc,
            values: k.values().chunks(nc).map(<[f64]>::to_vec).collect(),
            chi_radius: (k.chi_radius() != 1.0).then_some(k.chi_radius()),
        }
    }

    pub fn to_spec(&self) -> Result<KernelSpec> {
        let angular = AngularMesh::with_cells(self.d, self.theta_cells)?;
        ensure!(
            self.values.len() + 1 == self.r_grid.len(),
            "{} shells in r_grid but {} rows of values",
            self.r_grid.len().saturating_sub(1),
            self.values.len()
        );
        for (i, row) in self.values.iter().enumerate() {
            ensure!(row.len() == self.theta_cells, "shell {i} has {} values, expected {}", row.len(), self.theta_cells);
        }
        let flat = self.values.concat();
        let mut k = Kernel::new(self.sigma, self.r_grid.clone(), angular, flat)?;
        if let Some(r) = self.chi_radius {
            k = k.with_chi_radius(r)?;
        }
        Ok(KernelSpec::new(k, self.nu, self.lambda)?)
    }
}

pub fn read_kernel(path: &Path) -> Result<KernelSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: KernelFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    file.to_spec().with_context(|| format!("kernel in {}", path.display()))
}

pub fn write_kernel(spec: &KernelSpec, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&KernelFile::from_spec(spec))?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionName {
    Periodic,
    #[default]
    ZeroOutside,
}

impl From<Extension> for ExtensionName {
    fn from(e: Extension) -> Self {
        match e {
            Extension::Periodic => Self::Periodic,
            Extension::ZeroOutside => Self::ZeroOutside,
        }
    }
}

impl From<ExtensionName> for Extension {
    fn from(e: ExtensionName) -> Self {
        match e {
            ExtensionName::Periodic => Self::Periodic,
            ExtensionName::ZeroOutside => Self::ZeroOutside,
        }
    }
}

/// Grid descriptor stored on the first line of a field CSV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub d: usize,
    pub half_period: f64,
    pub n: usize,
    #[serde(default)]
    pub extension: ExtensionName,
}

/// Writes `# {grid json}`, a header `x1,..,xd,value` and one row per node.
pub fn write_field(u: &ScalarField, mut out: impl Write) -> Result<()> {
    let g = u.grid();
    let header = GridHeader { d: g.dim(), half_period: g.half_period(), n: g.n(), extension: u.extension().into() };
    writeln!(out, "# {}", serde_json::to_string(&header)?)?;
    let mut w = csv::Writer::from_writer(out);
    let d = g.dim();
    let mut names: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
    names.push("value".into());
    w.write_record(&names)?;
    for (i, v) in u.values().iter().enumerate() {
        let x = g.node(i);
        let mut rec: Vec<String> = x[..d].iter().map(f64::to_string).collect();
        rec.push(v.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(input: impl Read) -> Result<ScalarField> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let json = first.trim().strip_prefix('#').ok_or_else(|| anyhow!("field CSV must start with a '# {{grid}}' line"))?;
    let header: GridHeader = serde_json::from_str(json.trim()).context("grid header")?;
    let grid = TorusGrid::new(header.d, header.half_period, header.n)?;
    let mut r = csv::Reader::from_reader(reader);
    let cols = r.headers()?.len();
    ensure!(cols == header.d + 1, "expected {} columns, found {cols}", header.d + 1);
    let mut values = Vec::with_capacity(grid.len());
    let tol = 1e-9 * (1.0 + header.half_period);
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        ensure!(i < grid.len(), "more rows than the {} grid nodes", grid.len());
        let nums: Vec<f64> = rec.iter().map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().with_context(|| format!("row {}", i + 1))?;
        let x = grid.node(i);
        if nums[..header.d].iter().zip(&x).any(|(a, b)| (a - b).abs() > tol) {
            bail!("row {} has coordinates {:?}, expected node {:?}", i + 1, &nums[..header.d], &x[..header.d]);
        }
        values.push(nums[header.d]);
    }
    ensure!(values.len() == grid.len(), "{} rows for {} grid nodes", values.len(), grid.len());
    Ok(ScalarField::new(grid, values, header.extension.into())?)
}

pub fn read_field_file(path: &Path) -> Result<ScalarField> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_field(f).with_context(|| format!("reading field {}", path.display()))
}

pub fn write_field_file(u: &ScalarField, path: &Path) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_field(u, std::io::BufWriter::new(f))
}

/// Columns `xi1..xid, re_m, im_m, tail_bound`, one row per lattice frequency.
pub fn write_symbol(table: &SymbolTable, out: impl Write) -> Result<()> {
    let g = table.grid();
    let d = g.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut names: Vec<String> = (1..=d).map(|k| format!("xi{k}")).collect();
    names.extend(["re_m", "im_m", "tail_bound"].map(String::from));
    w.write_record(&names)?;
    for (i, (m, e)) in table.values().iter().zip(table.error()).enumerate() {
        let xi = g.frequency(i);
        let mut rec: Vec<String> = xi[..d].iter().map(f64::to_string).collect();
        rec.extend([m.re.to_string(), m.im.to_string(), e.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses `n=256,R=16` with an optional `d=2`.
pub fn parse_grid(s: &str, default_d: usize) -> Result<TorusGrid> {
    let (mut d, mut n, mut r) = (default_d, None, None);
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, val) = part.split_once('=').ok_or_else(|| anyhow!("expected key=value in grid spec, got '{part}'"))?;
        match key.trim() {
            "d" => d = val.trim().parse().context("grid d")?,
            "n" => n = Some(val.trim().parse().context("grid n")?),
            "R" | "r" => r = Some(val.trim().parse().context("grid R")?),
            other => bail!("unknown grid key '{other}' (use n, R, d)"),
        }
    }
    let n = n.ok_or_else(|| anyhow!("grid spec needs n=..."))?;
    let r = r.ok_or_else(|| anyhow!("grid spec needs R=..."))?;
    Ok(TorusGrid::new(d, r, n)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nle_core::fields::gaussian_bump;
    use nle_core::kernel::random_kernel;

    #[test]
    fn kernel_file_round_trip() {
        for (d, sigma) in [(1, 0.7), (1, 1.0), (2, 1.4)] {
            let spec = random_kernel(d, sigma, 0.5, 2.0, 9).unwrap();
            let file = KernelFile::from_spec(&spec);
            let text = serde_json::to_string(&file).unwrap();
            let back: KernelFile = serde_json::from_str(&text).unwrap();
            assert_eq!(back, file);
            assert_eq!(back.to_spec().unwrap(), spec);
        }
    }

    #[test]
    fn kernel_file_shape_errors() {
        let mut f = KernelFile::from_spec(&KernelSpec::fractional(1, 0.5).unwrap());
        f.values[0].push(1.0);
        assert!(f.to_spec().is_err());
        f.values[0].pop();
        f.r_grid.push(1e4);
        assert!(f.to_spec().is_err());
    }

    #[test]
    fn field_round_trip() {
        let g = TorusGrid::new(2, 3.0, 8).unwrap();
        let u = gaussian_bump(g, &[0.25, -0.5], 0.9);
        let mut buf = Vec::new();
        write_field(&u, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# {\"d\":2"));
        assert_eq!(read_field(buf.as_slice()).unwrap(), u);
    }

    #[test]
    fn field_rejects_short_or_shuffled_files() {
        let g = TorusGrid::new(1, 2.0, 8).unwrap();
        let u = gaussian_bump(g, &[0.0], 1.0);
        let mut buf = Vec::new();
        write_field(&u, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.pop();
        assert!(read_field(lines.join("\n").as_bytes()).is_err());
        lines.swap(2, 3);
        assert!(read_field(lines.join("\n").as_bytes()).is_err());
        assert!(read_field("x1,value\n0,1\n".as_bytes()).is_err());
    }

    #[test]
    fn grid_spec_parsing() {
        let g = parse_grid("n=256,R=16", 1).unwrap();
        assert_eq!((g.dim(), g.n(), g.half_period()), (1, 256, 16.0));
        assert_eq!(parse_grid("d=2, n=32, R=4", 1).unwrap().dim(), 2);
        assert!(parse_grid("n=32", 1).is_err());
        assert!(parse_grid("n=32,R=4,q=1", 1).is_err());
    }
}
