//! On-disk snapshot layout read by the plotting tools.
//!
//! ```text
//! <output_dir>/step_<n>/<field>.f64   n×n little-endian f64, row-major (i rows, j columns)
//! <output_dir>/step_<n>/meta.json     grid header, step, time, field list, build id
//! <output_dir>/step_<n>/cells.csv     step,time_s,kind,index,x_um,y_um
//! ```
//!
//! Inactive (outside the disk) nodes are stored as 0.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cells::{CellKind, CellPopulation};
use crate::grid::{Grid, ScalarField};
use crate::scalar::Real;

/// Identifier embedded in every snapshot header.
pub const BUILD_ID: &str = concat!("angio-core ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub name: String,
    pub file: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub build: String,
    /// Points per axis.
    pub n: usize,
    /// Grid half-width k (n = 2k + 1).
    pub k: usize,
    pub h: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub step: u64,
    pub time_s: f64,
    pub dtype: String,
    pub layout: String,
    pub fields: Vec<FieldEntry>,
    pub n_tips: usize,
    pub n_stalks: usize,
}

pub fn step_dir(output_dir: &Path, step: u64) -> PathBuf {
    output_dir.join(format!("step_{step}"))
}

/// Raw little-endian f64 bytes of a field, inactive nodes included as zero.
pub fn field_bytes<T: Real>(field: &ScalarField<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(field.values().len() * 8);
    for &v in field.values() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

/// Decodes a field file written by [`write_snapshot`].
pub fn read_field(path: &Path, n: usize) -> std::io::Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() != n * n * 8 {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("{}: expected {} bytes, found {}", path.display(), n * n * 8, bytes.len()),
        ));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn write_cells_csv<T: Real>(
    w: &mut impl Write,
    step: u64,
    time: f64,
    cells: &CellPopulation<T>,
) -> std::io::Result<()> {
    writeln!(w, "step,time_s,kind,index,x_um,y_um")?;
    for m in 0..cells.len() {
        let (kind, index) = cells.identify(m);
        let p = cells.position(m);
        writeln!(w, "{step},{time},{},{index},{:e},{:e}", kind.label(), p.x.as_f64(), p.y.as_f64())?;
    }
    Ok(())
}

/// Parses a `cells.csv` back into (kind, index, x, y) rows.
pub fn read_cells_csv(text: &str) -> Result<Vec<(CellKind, usize, f64, f64)>, String> {
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(format!("line {}: expected 6 columns", line_no + 1));
        }
        let kind = match cols[2] {
            "tip" => CellKind::Tip,
            "stalk" => CellKind::Stalk,
            other => return Err(format!("line {}: unknown kind `{other}`", line_no + 1)),
        };
        let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: {e}", line_no + 1));
        let index = cols[3].parse::<usize>().map_err(|e| format!("line {}: {e}", line_no + 1))?;
        rows.push((kind, index, parse(cols[4])?, parse(cols[5])?));
    }
    Ok(rows)
}

/// Writes one snapshot directory, replacing any previous content for that step.
pub fn write_snapshot<T: Real>(
    output_dir: &Path,
    grid: &Grid<T>,
    step: u64,
    time: f64,
    fields: &[(&str, &ScalarField<T>)],
    cells: &CellPopulation<T>,
) -> std::io::Result<PathBuf> {
    let dir = step_dir(output_dir, step);
    fs::create_dir_all(&dir)?;
    let mut entries = Vec::with_capacity(fields.len());
    for (name, field) in fields {
        let file = format!("{name}.f64");
        fs::write(dir.join(&file), field_bytes(field))?;
        entries.push(FieldEntry { name: name.to_string(), file, min: field.min().as_f64(), max: field.max().as_f64() });
    }
    let meta = SnapshotMeta {
        build: BUILD_ID.to_string(),
        n: grid.n(),
        k: grid.half_width(),
        h: grid.h().as_f64(),
        radius: grid.radius().as_f64(),
        step,
        time_s: time,
        dtype: "f64-le".to_string(),
        layout: "row-major; row i has x = (k-i)h, column j has y = (k-j)h".to_string(),
        fields: entries,
        n_tips: cells.tips.len(),
        n_stalks: cells.stalks.len(),
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n")?;
    let mut w = BufWriter::new(fs::File::create(dir.join("cells.csv"))?);
    write_cells_csv(&mut w, step, time, cells)?;
    w.flush()?;
    Ok(dir)
}
