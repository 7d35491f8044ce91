//! Legacy ASCII VTK and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// Seventeen significant digits, enough for a bit-exact round trip.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes an UNSTRUCTURED_GRID of triangles with nodal scalar fields.
pub fn write_vtk(mesh: &TriMesh, fields: &[(&str, &[f64])], path: &Path) -> Result<()> {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nthinfilm\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.num_nodes());
    for p in mesh.physical() {
        let _ = writeln!(s, "{} {} 0", fmt_real(p[0]), fmt_real(p[1]));
    }
    let nt = mesh.num_triangles();
    let _ = writeln!(s, "CELLS {} {}", nt, 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.num_nodes());
    }
    for (name, values) in fields {
        if values.len() != mesh.num_nodes() {
            return Err(Error::InvalidArgument(format!("field {name} has the wrong length")));
        }
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in *values {
            s.push_str(&fmt_real(*v));
            s.push('\n');
        }
    }
    write_file(path, s.as_bytes())
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Real(v) => fmt_real(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(t) => t.clone(),
        }
    }
}

/// Header plus rows, written with `.` decimals regardless of locale.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

pub fn write_csv(table: &Table, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(&table.header).map_err(wrap)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    write_file(path, &bytes)
}

/// Reads a CSV written by [`write_csv`]; every cell comes back as text.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let header = r
        .headers()
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_rect_mesh, Rect, SideSet};

    #[test]
    fn two_triangle_vtk_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.vtk");
        let m = generate_rect_mesh(1, 1, Rect::new(0.0, 1.0, 0.0, 1.0), SideSet::NONE).unwrap();
        write_vtk(&m, &[("u", &[0.0, 1.0, 2.0, 0.5])], &path).unwrap();
        let golden = "# vtk DataFile Version 3.0
thinfilm
ASCII
DATASET UNSTRUCTURED_GRID
POINTS 4 double
0.0000000000000000e0 0.0000000000000000e0 0
1.0000000000000000e0 0.0000000000000000e0 0
0.0000000000000000e0 1.0000000000000000e0 0
1.0000000000000000e0 1.0000000000000000e0 0
CELLS 2 8
3 0 1 3
3 0 3 2
CELL_TYPES 2
5
5
POINT_DATA 4
SCALARS u double 1
LOOKUP_TABLE default
0.0000000000000000e0
1.0000000000000000e0
2.0000000000000000e0
5.0000000000000000e-1
";
        assert_eq!(std::fs::read_to_string(&path).unwrap(), golden);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/t.csv");
        let mut t = Table::new(&["index", "ratio", "axis"]);
        let vals = [std::f64::consts::PI, 1.0 / 3.0, -2.5e-300, 0.1 + 0.2];
        for (i, v) in vals.iter().enumerate() {
            t.push(vec![i.into(), (*v).into(), "x".into()]);
        }
        write_csv(&t, &path).unwrap();
        let (header, rows) = read_csv(&path).unwrap();
        assert_eq!(header, ["index", "ratio", "axis"]);
        for (row, v) in rows.iter().zip(&vals) {
            assert_eq!(row[1].parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = write_csv(&Table::new(&["a"]), &blocker.join("t.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("file"));
    }
}
