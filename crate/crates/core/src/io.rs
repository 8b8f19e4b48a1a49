//! CSV field files with JSON sidecars.
//!
//! A field `name.csv` has header `i,j[,k],x,y[,z],value` and one row per
//! supported node in index order. `name.json` carries the grid, the role of
//! the field and, for time slices, the slice time. Masks are written over
//! every node with values `0` or `1`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Mask, ScalarField};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub dim: usize,
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
    pub role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
}

impl FieldMeta {
    pub fn new<T: Real>(grid: &Grid<T>, role: &str, time: Option<f64>) -> Self {
        FieldMeta {
            dim: grid.dim(),
            origin: grid.origin().iter().map(|x| x.to_f64_lossy()).collect(),
            spacing: grid.spacing().to_f64_lossy(),
            shape: grid.shape().to_vec(),
            role: role.to_string(),
            time,
        }
    }

    pub fn grid<T: Real>(&self) -> Result<Grid<T>> {
        let origin: Vec<T> = self.origin.iter().map(|&x| T::lit(x)).collect();
        Grid::new(&origin, T::lit(self.spacing), &self.shape)
    }
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn header(dim: usize) -> &'static str {
    if dim == 2 {
        "i,j,x,y,value\n"
    } else {
        "i,j,k,x,y,z,value\n"
    }
}

fn render<T: Real>(grid: &Grid<T>, rows: impl Iterator<Item = (usize, f64)>) -> String {
    let dim = grid.dim();
    let mut out = String::from(header(dim));
    for (idx, value) in rows {
        let c = grid.coords(idx);
        let p = grid.position(idx);
        for c in &c[..dim] {
            write!(out, "{c},").unwrap();
        }
        for x in &p[..dim] {
            write!(out, "{},", x.to_f64_lossy()).unwrap();
        }
        writeln!(out, "{value}").unwrap();
    }
    out
}

fn write_pair(path: &Path, csv: String, meta: &FieldMeta) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, csv)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)? + "\n")?;
    Ok(())
}

/// Writes the supported values of a field.
pub fn write_field<T: Real>(path: &Path, field: &ScalarField<T>, role: &str, time: Option<f64>) -> Result<()> {
    let grid = field.grid();
    let csv = render(grid, field.iter().map(|(i, v)| (i, v.to_f64_lossy())));
    write_pair(path, csv, &FieldMeta::new(grid, role, time))
}

/// Writes a value for every node (used for traces defined on the whole grid).
pub fn write_dense<T: Real>(path: &Path, grid: &Grid<T>, values: &[T], role: &str, time: Option<f64>) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let csv = render(grid, values.iter().enumerate().map(|(i, v)| (i, v.to_f64_lossy())));
    write_pair(path, csv, &FieldMeta::new(grid, role, time))
}

pub fn write_mask<T: Real>(path: &Path, mask: &Mask<T>, role: &str) -> Result<()> {
    let grid = mask.grid();
    let csv = render(grid, mask.members().iter().enumerate().map(|(i, &m)| (i, if m { 1.0 } else { 0.0 })));
    write_pair(path, csv, &FieldMeta::new(grid, role, None))
}

pub fn read_meta(csv: &Path) -> Result<FieldMeta> {
    let text = fs::read_to_string(sidecar_path(csv))?;
    Ok(serde_json::from_str(&text)?)
}

type Rows<T> = (FieldMeta, Grid<T>, Vec<(usize, f64)>);

/// Reads `(index, value)` rows, checking indices against the sidecar grid.
fn read_rows<T: Real>(path: &Path) -> Result<Rows<T>> {
    let meta = read_meta(path)?;
    let grid = meta.grid::<T>()?;
    let dim = grid.dim();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))?;
    if head != header(dim).trim_end() {
        return Err(Error::Parse(format!("{}: unexpected header {head:?}", path.display())));
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 2 * dim + 1 {
            return Err(Error::Parse(format!("{}:{}: expected {} columns", path.display(), n + 2, 2 * dim + 1)));
        }
        let mut c = [0usize; 3];
        for a in 0..dim {
            c[a] = cols[a].parse().map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), n + 2)))?;
            if c[a] >= grid.shape()[a] {
                return Err(Error::Parse(format!("{}:{}: index out of range", path.display(), n + 2)));
            }
        }
        let value: f64 = cols[2 * dim].parse().map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), n + 2)))?;
        rows.push((grid.index(&c[..dim]), value));
    }
    Ok((meta, grid, rows))
}

/// Reads a field; nodes without a row are absent.
pub fn read_field<T: Real>(path: &Path) -> Result<(ScalarField<T>, FieldMeta)> {
    let (meta, grid, rows) = read_rows::<T>(path)?;
    let mut members = vec![false; grid.len()];
    let mut values = vec![T::nan(); grid.len()];
    for (i, v) in rows {
        members[i] = true;
        values[i] = T::lit(v);
    }
    let support = Mask::from_members(grid, members)?;
    Ok((ScalarField::new(support, values)?, meta))
}

/// Reads a mask; nonzero values are members.
pub fn read_mask<T: Real>(path: &Path) -> Result<Mask<T>> {
    let (_, grid, rows) = read_rows::<T>(path)?;
    let mut members = vec![false; grid.len()];
    for (i, v) in rows {
        members[i] = v != 0.0;
    }
    Mask::from_members(grid, members)
}

pub fn slice_name(m: usize) -> String {
    format!("t_{m:04}.csv")
}

/// Writes `dir/t_0000.csv ...`, one file per slice.
pub fn write_series<T: Real>(dir: &Path, times: &[T], slices: &[ScalarField<T>], role: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (m, (t, s)) in times.iter().zip(slices).enumerate() {
        write_field(&dir.join(slice_name(m)), s, role, Some(t.to_f64_lossy()))?;
    }
    Ok(())
}

/// Dense variant of [`write_series`].
pub fn write_dense_series<T: Real>(dir: &Path, grid: &Grid<T>, times: &[T], values: &[Vec<T>], role: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (m, (t, v)) in times.iter().zip(values).enumerate() {
        write_dense(&dir.join(slice_name(m)), grid, v, role, Some(t.to_f64_lossy()))?;
    }
    Ok(())
}

/// Reads every `t_####.csv` in a directory, in slice order.
pub fn read_series<T: Real>(dir: &Path) -> Result<(Vec<T>, Vec<ScalarField<T>>)> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("t_") && name.ends_with(".csv")
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Parse(format!("{}: no t_####.csv slices", dir.display())));
    }
    let mut times = Vec::new();
    let mut slices = Vec::new();
    for p in names {
        let (f, meta) = read_field::<T>(&p)?;
        let t = meta.time.ok_or_else(|| Error::Parse(format!("{}: slice without time", p.display())))?;
        times.push(T::lit(t));
        slices.push(f);
    }
    if slices.windows(2).any(|w| w[0].grid() != w[1].grid()) {
        return Err(Error::GridMismatch);
    }
    Ok((times, slices))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::<f64>::cube(2, -1.0, 1.0, 5).unwrap();
        let support = Mask::from_indices(g, [0, 7, 24]);
        let mut values = vec![f64::NAN; g.len()];
        values[0] = 0.1;
        values[7] = 1.0 / 3.0;
        values[24] = 2.5e-17;
        let f = ScalarField::new(support, values).unwrap();
        let path = dir.path().join("v.csv");
        write_field(&path, &f, "v", None).unwrap();
        let (back, meta) = read_field::<f64>(&path).unwrap();
        assert_eq!(meta.role, "v");
        assert_eq!(back.support(), f.support());
        for (i, v) in f.iter() {
            assert_eq!(back.get(i), Some(v));
        }
    }

    #[test]
    fn mask_round_trip_in_3d() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::<f64>::cube(3, 0.0, 1.0, 4).unwrap();
        let m = Mask::from_predicate(g, |p| p[0] + p[2] < 0.5).unwrap();
        let path = dir.path().join("m.csv");
        write_mask(&path, &m, "omega").unwrap();
        assert_eq!(read_mask::<f64>(&path).unwrap(), m);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("i,j,k,x,y,z,value\n"));
    }

    #[test]
    fn series_keep_order_and_times() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::<f64>::cube(2, 0.0, 1.0, 3).unwrap();
        let slices: Vec<_> = (0..3).map(|m| ScalarField::constant(Mask::full(g), m as f64)).collect();
        write_series(dir.path(), &[0.0, 0.5, 1.0], &slices, "u").unwrap();
        let (times, back) = read_series::<f64>(dir.path()).unwrap();
        assert_eq!(times, vec![0.0, 0.5, 1.0]);
        assert_eq!(back[2].get(4), Some(2.0));
    }

    #[test]
    fn bad_header_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::<f64>::cube(2, 0.0, 1.0, 3).unwrap();
        let path = dir.path().join("f.csv");
        write_mask(&path, &Mask::full(g), "m").unwrap();
        fs::write(&path, "a,b\n").unwrap();
        assert!(matches!(read_mask::<f64>(&path), Err(Error::Parse(_))));
    }
}
