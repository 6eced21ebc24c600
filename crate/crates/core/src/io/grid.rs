use super::{read_json, write_json, SCHEMA};
use crate::error::{Error, Result};
use crate::intensity::{FieldKind, GridFlags, IntensityGrid};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Metadata stored next to a grid CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub schema: String,
    pub field: FieldKind,
    pub order_s: usize,
    pub order_i: usize,
    pub damping: f64,
    pub points_s: usize,
    pub points_i: usize,
    pub w_max_s: f64,
    pub w_max_i: f64,
    pub flags: GridFlags,
}

/// `grid.csv` → `grid.json`.
pub fn grid_sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `W_s,W_i,value` rows (signal axis outermost) and the JSON sidecar.
pub fn save_grid(csv_path: impl AsRef<Path>, g: &IntensityGrid<f64>) -> Result<()> {
    let path = csv_path.as_ref();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "W_s,W_i,value")?;
    for (p, &ws) in g.axis_s.iter().enumerate() {
        for (q, &wi) in g.axis_i.iter().enumerate() {
            writeln!(w, "{:?},{:?},{:?}", ws, wi, g.values[[p, q]])?;
        }
    }
    w.flush()?;
    let side = GridSidecar {
        schema: SCHEMA.into(),
        field: g.field,
        order_s: g.order_s,
        order_i: g.order_i,
        damping: g.damping,
        points_s: g.axis_s.len(),
        points_i: g.axis_i.len(),
        w_max_s: *g.axis_s.last().unwrap_or(&0.0),
        w_max_i: *g.axis_i.last().unwrap_or(&0.0),
        flags: g.flags,
    };
    write_json(&grid_sidecar_path(path), &side)
}

pub fn load_grid(csv_path: impl AsRef<Path>) -> Result<IntensityGrid<f64>> {
    let path = csv_path.as_ref();
    let side: GridSidecar = read_json(&grid_sidecar_path(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["W_s", "W_i", "value"] {
        return Err(Error::Parse {
            line: 1,
            message: "expected header \"W_s,W_i,value\"".into(),
        });
    }
    let n = side.points_s * side.points_i;
    let mut axis_s = Vec::with_capacity(side.points_s);
    let mut axis_i = Vec::with_capacity(side.points_i);
    let mut values = Vec::with_capacity(n);
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(k + 2, |p| p.line() as usize);
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("field {i} is not a number"),
                })
        };
        let (ws, wi, v) = (num(0)?, num(1)?, num(2)?);
        if k % side.points_i == 0 {
            axis_s.push(ws);
        }
        if k < side.points_i {
            axis_i.push(wi);
        }
        values.push(v);
    }
    if values.len() != n {
        return Err(Error::Validation {
            line: 0,
            message: format!("expected {n} grid rows, found {}", values.len()),
        });
    }
    let values =
        Array2::from_shape_vec((side.points_s, side.points_i), values).map_err(|e| Error::Validation {
            line: 0,
            message: e.to_string(),
        })?;
    Ok(IntensityGrid {
        axis_s,
        axis_i,
        values,
        order_s: side.order_s,
        order_i: side.order_i,
        damping: side.damping,
        field: side.field,
        flags: side.flags,
    })
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}
