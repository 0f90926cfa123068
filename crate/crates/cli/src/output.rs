//! Output directory handling and the JSON sidecar written with every run.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ScaleOptions};
use crate::error::{CliError, CliResult};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "MISHBENCH_OUTPUT_DIR";

pub const DEFAULT_OUTPUT_DIR: &str = "mishbench-out";

/// Cell text for a metric of a diverged run.
pub const DIVERGED: &str = "diverged";

/// Precedence: command-line flag, then environment, then config, then
/// [`DEFAULT_OUTPUT_DIR`].
pub fn resolve_output_dir(flag: Option<&Path>, env: Option<PathBuf>, config: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or(env)
        .or_else(|| config.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// Formats a metric, or [`DIVERGED`] when the run diverged or the value is
/// not finite.
pub fn metric(v: f64, diverged: bool) -> String {
    if diverged || !v.is_finite() {
        DIVERGED.to_string()
    } else {
        v.to_string()
    }
}

/// Collects the files written by one run.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: PathBuf) -> CliResult<Self> {
        std::fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(OutputDir { root, files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Records a file written directly by other code.
    pub fn register(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        self.files.push(p.clone());
        Ok(p)
    }

    pub fn write_csv<R, I, S>(&mut self, name: &str, header: &[&str], rows: R) -> CliResult<PathBuf>
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let p = self.path(name);
        let fail = |e: csv::Error| CliError::io(&p, std::io::Error::other(e));
        w.write_record(header).map_err(fail)?;
        for row in rows {
            w.write_record(row).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(&p, std::io::Error::other(e.to_string())))?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::io(self.path(name), std::io::Error::other(e)))?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Writes `<stem>.json`: the resolved config, seeds, scale options, the
    /// list of data files written so far and experiment-specific `results`.
    /// The sidecar covers every file in that list.
    pub fn write_sidecar(
        &mut self,
        stem: &str,
        config: &ExperimentConfig,
        opts: ScaleOptions,
        results: Value,
    ) -> CliResult<PathBuf> {
        let outputs: Vec<String> = self
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let doc = json!({
            "experiment": config.experiment,
            "tool": concat!("mishbench ", env!("CARGO_PKG_VERSION")),
            "config": config,
            "seeds": config.seeds,
            "scale": opts,
            "outputs": outputs,
            "results": results,
        });
        self.write_json(&format!("{stem}.json"), &doc)
    }
}
