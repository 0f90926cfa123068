use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Field2D, GridSpec};
use crate::activation::ActivationKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    /// Header `x,y,value`, one row per grid point, `y` outer and `x` inner.
    Csv,
    /// Binary greyscale (P5), values min-max scaled to 0..=255. Image rows
    /// run from the largest `y` at the top to the smallest at the bottom.
    Pgm,
}

impl ExportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Pgm => "pgm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExportInfo {
    /// The field was constant, so every PGM pixel is 0.
    pub degenerate_scale: bool,
    pub min: f64,
    pub max: f64,
}

/// `<experiment>_<activation>_<seed>.<ext>`; characters outside
/// `[A-Za-z0-9._-]` in the activation label become `_`.
pub fn field_file_name(experiment: &str, activation: ActivationKind, seed: u64, format: ExportFormat) -> String {
    let label: String = activation
        .to_string()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    format!("{experiment}_{}_{seed}.{}", label.trim_end_matches('_'), format.extension())
}

pub fn export_field(field: &Field2D, path: impl AsRef<Path>, format: ExportFormat) -> Result<ExportInfo> {
    let path = path.as_ref();
    let finite = field.values.iter().copied().filter(|v| v.is_finite());
    let min = finite.clone().fold(f64::INFINITY, f64::min);
    let max = finite.fold(f64::NEG_INFINITY, f64::max);
    let degenerate = !(max > min);
    let io = |e: std::io::Error| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let n = field.grid.resolution;
    match format {
        ExportFormat::Csv => {
            writeln!(w, "x,y,value").map_err(io)?;
            for j in 0..n {
                for i in 0..n {
                    writeln!(w, "{},{},{}", field.grid.x(i), field.grid.y(j), field.at(i, j)).map_err(io)?;
                }
            }
        }
        ExportFormat::Pgm => {
            write!(w, "P5\n{n} {n}\n255\n").map_err(io)?;
            let mut row = vec![0u8; n];
            for j in (0..n).rev() {
                for (i, px) in row.iter_mut().enumerate() {
                    let v = field.at(i, j);
                    *px = if degenerate || !v.is_finite() {
                        0
                    } else {
                        (255.0 * (v - min) / (max - min)).round() as u8
                    };
                }
                w.write_all(&row).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)?;
    Ok(ExportInfo {
        degenerate_scale: degenerate,
        min,
        max,
    })
}

/// Reads a CSV written by [`export_field`]. The grid is rebuilt from the
/// distinct coordinates.
pub fn import_field_csv(path: impl AsRef<Path>) -> Result<Field2D> {
    let path = path.as_ref();
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let header = rd.headers().map_err(|e| Error::format(path, e.to_string()))?;
    if header != vec!["x", "y", "value"] {
        return Err(Error::format(path, format!("unexpected header {header:?}")));
    }
    let mut xs = BTreeSet::new();
    let mut ys = BTreeSet::new();
    let mut values = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|e| Error::format(path, format!("{:?}: {e}", &rec[k])))
        };
        xs.insert(num(0)?.to_bits());
        ys.insert(num(1)?.to_bits());
        values.push(num(2)?);
    }
    let n = xs.len();
    let range = |s: &BTreeSet<u64>| {
        let v: Vec<f64> = s.iter().map(|&b| f64::from_bits(b)).collect();
        (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    };
    if ys.len() != n || values.len() != n * n {
        return Err(Error::format(path, "not a square grid"));
    }
    Field2D::new(GridSpec::new(range(&xs), range(&ys), n)?, values)
}
