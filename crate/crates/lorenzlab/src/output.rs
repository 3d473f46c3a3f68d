//! Artifact writers: JSON with provenance, CSV with 17 significant digits.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use lorenzlab_core::excursions::Excursion;
use lorenzlab_core::fokker_planck::Grid2D;
use lorenzlab_core::{DerivedConsts, Params};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const TOOL: &str = "lorenzlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AlphaUnits {
    /// Noise amplitude of the original system.
    Hat,
    /// Noise amplitude of the rescaled system.
    Transformed,
}

/// Resolved inputs stamped on every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub params: Params,
    pub consts: DerivedConsts,
    pub seed: u64,
    pub alpha_units: AlphaUnits,
}

impl Provenance {
    pub fn new(command: &str, params: Params, consts: DerivedConsts, seed: u64, alpha_units: AlphaUnits) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            params,
            consts,
            seed,
            alpha_units,
        }
    }
}

/// Provenance plus a command-specific body, flattened into one object.
#[derive(Debug, Clone, Serialize)]
pub struct Artifact<'a, T: Serialize> {
    #[serde(flatten)]
    pub provenance: &'a Provenance,
    #[serde(flatten)]
    pub body: T,
}

/// `-` or no path means stdout.
pub fn open_sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::io(p, e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

fn label(path: Option<&Path>) -> PathBuf {
    path.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("<stdout>"))
}

pub fn write_json<T: Serialize>(path: Option<&Path>, provenance: &Provenance, body: T) -> CliResult<()> {
    let mut w = open_sink(path)?;
    serde_json::to_writer_pretty(&mut w, &Artifact { provenance, body })?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(label(path), e))
}

/// `out.csv` -> `out.meta.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// Fixed 17 significant digits, enough to round-trip any finite f64.
pub fn fmt17(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.16e}")
}

/// Streams rows of floats under a fixed header.
pub struct CsvWriter {
    inner: Box<dyn Write>,
    path: PathBuf,
}

impl CsvWriter {
    pub fn create(path: Option<&Path>, header: &[&str]) -> CliResult<Self> {
        let mut w = Self {
            inner: open_sink(path)?,
            path: label(path),
        };
        w.line(&header.join(","))?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> CliResult<()> {
        writeln!(self.inner, "{s}").map_err(|e| CliError::io(&self.path, e))
    }

    pub fn row(&mut self, values: &[f64]) -> CliResult<()> {
        let s: Vec<String> = values.iter().map(|v| fmt17(*v)).collect();
        self.line(&s.join(","))
    }

    /// Row with a leading integer index.
    pub fn indexed_row(&mut self, idx: usize, values: &[f64]) -> CliResult<()> {
        let mut s = vec![idx.to_string()];
        s.extend(values.iter().map(|v| fmt17(*v)));
        self.line(&s.join(","))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.inner.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// Nodal values as `theta,z,value`, row-major over `(z, theta)` as stored.
pub fn write_grid_csv(path: Option<&Path>, grid: &Grid2D, values: &[f64]) -> CliResult<()> {
    let mut w = CsvWriter::create(path, &["theta", "z", "value"])?;
    for (k, v) in values.iter().enumerate() {
        let (i, j) = grid.coords(k);
        w.row(&[grid.theta(i), grid.z(j), *v])?;
    }
    w.finish()
}

/// `idx,z_start,z_end,tau,Fhat` per excursion.
pub fn write_excursions_csv(path: Option<&Path>, ex: &[Excursion]) -> CliResult<()> {
    let mut w = CsvWriter::create(path, &["idx", "z_start", "z_end", "tau", "Fhat"])?;
    for (i, e) in ex.iter().enumerate() {
        w.indexed_row(i, &[e.z_start_level, e.z_end_level, e.tau, e.fhat])?;
    }
    w.finish()
}

/// One JSON object per excursion, samples included.
pub fn write_excursions_jsonl(path: &Path, ex: &[Excursion]) -> CliResult<()> {
    let mut w = open_sink(Some(path))?;
    for e in ex {
        serde_json::to_writer(&mut w, e)?;
        writeln!(w).map_err(|err| CliError::io(path, err))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
