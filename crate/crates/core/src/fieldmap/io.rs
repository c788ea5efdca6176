//! Field-map CSV exchange format.
//!
//! Data file: header `x_m,y_m,z_m,Bx_T,By_T,Bz_T`, one row per grid node in
//! any order. A sidecar `<file>.meta` holds `key=value` lines: `energy_J`,
//! `nx`, `ny`, `nz`, `spacing_{x,y,z}_m` are required; `origin_{x,y,z}_m`
//! default to the smallest coordinate in the data; `vacuum_f_Hz` marks a
//! single-photon map.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use super::{FieldMap, FieldMapError, GridSpec};

pub const CSV_HEADER: &str = "x_m,y_m,z_m,Bx_T,By_T,Bz_T";

/// Rows must land within this fraction of a spacing from a node.
const SNAP_TOLERANCE: f64 = 1e-6;

const AXES: [&str; 3] = ["x", "y", "z"];

pub fn meta_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

impl FieldMap {
    /// CSV body, nodes in storage order (x fastest).
    pub fn to_csv(&self) -> String {
        let grid = self.grid();
        let mut out = String::with_capacity(64 * grid.len() + CSV_HEADER.len());
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (idx, b) in self.samples().iter().enumerate() {
            let [i, j, k] = grid.unravel(idx);
            let p = grid.node(i, j, k);
            out.push_str(&format!("{:e},{:e},{:e},{:e},{:e},{:e}\n", p.x, p.y, p.z, b.x, b.y, b.z));
        }
        out
    }

    pub fn metadata(&self) -> String {
        let g = self.grid();
        let mut out = format!("energy_J={:e}\n", self.energy_j());
        for (a, name) in AXES.iter().enumerate() {
            out.push_str(&format!("n{name}={}\n", g.dims[a]));
        }
        for (a, name) in AXES.iter().enumerate() {
            out.push_str(&format!("origin_{name}_m={:e}\n", g.origin[a]));
        }
        for (a, name) in AXES.iter().enumerate() {
            out.push_str(&format!("spacing_{name}_m={:e}\n", g.spacing[a]));
        }
        if let Some(f) = self.vacuum_frequency_hz() {
            out.push_str(&format!("vacuum_f_Hz={f:e}\n"));
        }
        out
    }

    pub fn from_csv(csv: &str, meta: &str) -> Result<FieldMap, FieldMapError> {
        let meta = parse_meta(meta)?;
        let dims = [meta.usize("nx")?, meta.usize("ny")?, meta.usize("nz")?];
        let mut spacing = Vector3::zeros();
        for a in 0..3 {
            spacing[a] = meta.f64(&format!("spacing_{}_m", AXES[a]))?;
        }
        let energy = meta.f64("energy_J")?;

        let rows = parse_rows(csv)?;
        let mut origin = Vector3::zeros();
        for a in 0..3 {
            let key = format!("origin_{}_m", AXES[a]);
            origin[a] = match meta.get(&key) {
                Some(_) => meta.f64(&key)?,
                None => rows.iter().map(|r| r.point[a]).fold(f64::INFINITY, f64::min),
            };
        }
        let grid = GridSpec::new(origin, spacing, dims)?;

        let mut samples: Vec<Option<Vector3<f64>>> = vec![None; grid.len()];
        for row in &rows {
            let mut ijk = [0usize; 3];
            for a in 0..3 {
                let f = (row.point[a] - origin[a]) / spacing[a];
                let r = f.round();
                if (f - r).abs() > SNAP_TOLERANCE || r < 0.0 || r >= dims[a] as f64 {
                    return Err(FieldMapError::OffGrid { line: row.line, x: row.point.x, y: row.point.y, z: row.point.z });
                }
                ijk[a] = r as usize;
            }
            let idx = grid.index(ijk[0], ijk[1], ijk[2]);
            if samples[idx].replace(row.field).is_some() {
                return Err(FieldMapError::DuplicateNode { line: row.line, i: ijk[0], j: ijk[1], k: ijk[2] });
            }
        }
        let mut complete = Vec::with_capacity(grid.len());
        for (idx, s) in samples.into_iter().enumerate() {
            match s {
                Some(b) => complete.push(b),
                None => {
                    let [i, j, k] = grid.unravel(idx);
                    let p = grid.node(i, j, k);
                    return Err(FieldMapError::MissingNode { i, j, k, x: p.x, y: p.y, z: p.z });
                }
            }
        }

        let mut map = FieldMap::new(grid, complete, energy)?;
        if meta.get("vacuum_f_Hz").is_some() {
            map.set_vacuum_frequency(Some(meta.f64("vacuum_f_Hz")?));
        }
        Ok(map)
    }

    /// Writes `path` and its `.meta` sidecar.
    pub fn save(&self, path: &Path) -> Result<(), FieldMapError> {
        std::fs::write(path, self.to_csv())?;
        std::fs::write(meta_path(path), self.metadata())?;
        Ok(())
    }
}

/// Reads a map from `path` and its `.meta` sidecar.
pub fn ingest_map(path: &Path) -> Result<FieldMap, FieldMapError> {
    let csv = std::fs::read_to_string(path)?;
    let meta = std::fs::read_to_string(meta_path(path))?;
    FieldMap::from_csv(&csv, &meta)
}

struct Row {
    line: usize,
    point: Vector3<f64>,
    field: Vector3<f64>,
}

fn parse_rows(csv: &str) -> Result<Vec<Row>, FieldMapError> {
    let mut lines = csv.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        Some((_, h)) => {
            return Err(FieldMapError::Parse { line: 1, msg: format!("expected header `{CSV_HEADER}`, got `{h}`") })
        }
        None => return Err(FieldMapError::Parse { line: 1, msg: "empty file".into() }),
    }
    let mut rows = Vec::new();
    for (n, text) in lines {
        let line = n + 1;
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        let mut values = [0.0; 6];
        let mut count = 0;
        for (slot, field) in text.split(',').enumerate() {
            if slot >= 6 {
                count = slot + 1;
                break;
            }
            values[slot] = field.trim().parse::<f64>().map_err(|e| FieldMapError::Parse {
                line,
                msg: format!("column {}: `{}`: {e}", slot + 1, field.trim()),
            })?;
            count = slot + 1;
        }
        if count != 6 {
            return Err(FieldMapError::Parse { line, msg: format!("expected 6 columns, got {}", text.split(',').count()) });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(FieldMapError::Parse { line, msg: "non-finite value".into() });
        }
        rows.push(Row {
            line,
            point: Vector3::new(values[0], values[1], values[2]),
            field: Vector3::new(values[3], values[4], values[5]),
        });
    }
    Ok(rows)
}

struct Meta(BTreeMap<String, String>);

impl Meta {
    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn raw(&self, key: &str) -> Result<&str, FieldMapError> {
        self.get(key).ok_or_else(|| FieldMapError::Metadata { key: key.into(), msg: "missing".into() })
    }

    fn f64(&self, key: &str) -> Result<f64, FieldMapError> {
        let v = self.raw(key)?;
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| FieldMapError::Metadata { key: key.into(), msg: format!("not a finite number: `{v}`") })
    }

    fn usize(&self, key: &str) -> Result<usize, FieldMapError> {
        let v = self.raw(key)?;
        v.parse::<usize>()
            .map_err(|_| FieldMapError::Metadata { key: key.into(), msg: format!("not a count: `{v}`") })
    }
}

fn parse_meta(text: &str) -> Result<Meta, FieldMapError> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| FieldMapError::Parse {
            line: n + 1,
            msg: format!("metadata line is not key=value: `{line}`"),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(Meta(map))
}
