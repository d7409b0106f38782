//! Artifact files: primary tables plus a JSON metadata sidecar.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use noisyqed::io::write_table;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// One table. `name` may contain a subdirectory, e.g. `fig3a/kappa_2sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, (header, rows): (Vec<&str>, Vec<Vec<f64>>)) -> Self {
        Dataset {
            name: name.into(),
            header: header.into_iter().map(str::to_owned).collect(),
            rows,
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Everything a task produced.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub datasets: Vec<Dataset>,
    /// Error estimates and diagnostics for the sidecar.
    pub estimates: Map<String, Value>,
    /// Extra metadata for the sidecar (figure captions, curve labels).
    pub extra: Map<String, Value>,
}

impl Artifacts {
    pub fn estimate(&mut self, key: &str, value: impl Serialize) {
        self.estimates
            .insert(key.to_owned(), serde_json::to_value(value).unwrap_or(Value::Null));
    }
}

/// Fields of the sidecar that do not come from the task.
pub struct RunInfo<'a, C: Serialize> {
    pub task: &'a str,
    pub config: &'a C,
    pub seed: u64,
    pub threads: Option<usize>,
    pub runtime_seconds: f64,
}

fn write_dataset(dir: &Path, d: &Dataset, format: Format) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{}.{}", d.name, format.extension()));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(&path)?);
    match format {
        Format::Csv => {
            let header: Vec<&str> = d.header.iter().map(String::as_str).collect();
            write_table(&mut w, &header, &d.rows)?;
        }
        Format::Json => {
            serde_json::to_writer(&mut w, &json!({ "columns": d.header, "rows": d.rows }))?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(path)
}

/// Writes the datasets and `<stem>.meta.json`; returns the written paths.
pub fn write_artifacts<C: Serialize>(
    dir: &Path,
    stem: &str,
    format: Format,
    artifacts: &Artifacts,
    info: &RunInfo<'_, C>,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for d in &artifacts.datasets {
        paths.push(write_dataset(dir, d, format)?);
    }
    let files: Vec<String> = paths
        .iter()
        .map(|p| p.strip_prefix(dir).unwrap_or(p).to_string_lossy().into_owned())
        .collect();
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = json!({
        "task": info.task,
        "code_version": env!("CARGO_PKG_VERSION"),
        "seed": info.seed,
        "threads": info.threads,
        "config": info.config,
        "files": files,
        "estimates": artifacts.estimates,
        "metadata": artifacts.extra,
        "runtime_seconds": info.runtime_seconds,
        "timestamp_unix": timestamp,
    });
    let meta_path = dir.join(format!("{stem}.meta.json"));
    let mut w = BufWriter::new(File::create(&meta_path)?);
    serde_json::to_writer_pretty(&mut w, &meta)?;
    w.write_all(b"\n")?;
    w.flush()?;
    paths.push(meta_path);
    Ok(paths)
}
