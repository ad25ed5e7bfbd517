//! On-disk run records.
//!
//! One run owns one directory: `manifest.json` is written the moment the
//! record is created (so a crash mid-run still leaves the configuration and
//! provenance on disk), series land next to it as CSV with `t` as the first
//! column, reports as JSON, and `finalize` rewrites the manifest with wall
//! time and the completion flag. Series bytes are a pure function of the
//! resolved config, so a rerun reproduces them exactly; the manifest is not
//! byte-stable (it carries the wall clock).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::normal_form::MinDivisors;

/// Everything needed to interpret a run directory without the binary.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: String,
    /// The fully-resolved configuration, defaults included.
    pub config: RunConfig,
    /// Measured L^inf / H^1 embedding norm on the run grid, when one exists.
    pub embedding_constant: Option<f64>,
    /// Smallest |denominator| admitted into the normal-form sums, when the
    /// run built the operator tables.
    pub min_divisors: Option<MinDivisors>,
    pub wall_seconds: Option<f64>,
    /// False until `finalize(true)`; a manifest with `completed = false` and
    /// annotations marks a partial run.
    pub completed: bool,
    pub annotations: Vec<String>,
}

impl Manifest {
    pub fn new(config: &RunConfig) -> Self {
        Manifest {
            tool: "mblab",
            version: env!("CARGO_PKG_VERSION"),
            experiment: config.experiment.name().to_string(),
            config: config.clone(),
            embedding_constant: None,
            min_divisors: None,
            wall_seconds: None,
            completed: false,
            annotations: Vec::new(),
        }
    }
}

/// A live run directory. Dropping it without `finalize` leaves the initial
/// manifest (completed = false) in place.
#[derive(Debug)]
pub struct RunRecord {
    dir: PathBuf,
    manifest: Manifest,
    started: Instant,
}

impl RunRecord {
    /// Create `dir` (and parents) and write the initial manifest before
    /// anything else can land in it.
    pub fn create(dir: impl Into<PathBuf>, manifest: Manifest) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let rec = RunRecord {
            dir,
            manifest,
            started: Instant::now(),
        };
        rec.write_manifest()?;
        Ok(rec)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn set_embedding_constant(&mut self, c: f64) {
        self.manifest.embedding_constant = Some(c);
    }

    pub fn set_min_divisors(&mut self, d: MinDivisors) {
        self.manifest.min_divisors = Some(d);
    }

    /// Note something unusual (blow-up, truncated series, skipped member).
    pub fn annotate(&mut self, msg: impl Into<String>) {
        self.manifest.annotations.push(msg.into());
    }

    fn write_manifest(&self) -> Result<()> {
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    /// Write `<name>.csv` for a time series: the first column must be `t`.
    pub fn write_series(&self, name: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        if columns.first() != Some(&"t") {
            return Err(Error::structure(format!(
                "series `{name}`: first column must be `t`, got {:?}",
                columns.first()
            )));
        }
        self.write_table(name, columns, rows)
    }

    /// Write `<name>.csv` for a plain table (mode profiles, spectra). Every
    /// row must have one value per column. Floats are written in shortest
    /// round-trip form, so equal bit patterns give equal bytes.
    pub fn write_table(&self, name: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::structure(format!(
                    "table `{name}` row {i} has {} values for {} columns",
                    row.len(),
                    columns.len()
                )));
            }
        }
        let path = self.dir.join(format!("{name}.csv"));
        let mut out = Vec::with_capacity(rows.len() * columns.len() * 8);
        out.extend_from_slice(columns.join(",").as_bytes());
        out.push(b'\n');
        for row in rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(b',');
                }
                first = false;
                write!(&mut out, "{v}")?;
            }
            out.push(b'\n');
        }
        fs::write(&path, out)?;
        Ok(path)
    }

    /// Write `<name>.json` (pretty, trailing newline).
    pub fn write_report<T: Serialize>(&self, name: &str, report: &T) -> Result<PathBuf> {
        let path = self.dir.join(format!("{name}.json"));
        let mut text = serde_json::to_string_pretty(report)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Record wall time and the completion flag, rewrite the manifest, and
    /// hand it back.
    pub fn finalize(mut self, completed: bool) -> Result<Manifest> {
        self.manifest.wall_seconds = Some(self.started.elapsed().as_secs_f64());
        self.manifest.completed = completed;
        self.write_manifest()?;
        Ok(self.manifest)
    }
}

/// Column-major to row-major helper for series built as parallel vectors.
/// The first entry of `cols` becomes the `t` column.
pub fn rows_from_columns(cols: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let Some(len) = cols.first().map(|c| c.len()) else {
        return Err(Error::structure("series needs at least the t column"));
    };
    for (i, c) in cols.iter().enumerate() {
        if c.len() != len {
            return Err(Error::structure(format!(
                "series column {i} has length {} where t has {len}",
                c.len()
            )));
        }
    }
    Ok((0..len)
        .map(|j| cols.iter().map(|c| c[j]).collect())
        .collect())
}
