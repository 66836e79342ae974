//! CSV and OBJ writers, and the surface CSV reader.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use cmc_core::{GridDomain, SpacelikeGraph};
use thiserror::Error;

/// 17 significant digits: enough for every f64 to survive a text round trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header plus string records, written with ',' separators.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push_numbers(&mut self, values: impl IntoIterator<Item = f64>) {
        self.rows.push(values.into_iter().map(fmt_f64).collect());
    }

    pub fn push(&mut self, record: Vec<String>) {
        self.rows.push(record);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

pub fn coordinate_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

/// `x1[,x2],u` on every lattice node, in lattice order.
pub fn surface_table(g: &SpacelikeGraph) -> Table {
    let mut header = coordinate_header(g.dim());
    header.push("u".into());
    let mut t = Table::new(header);
    for (k, &u) in g.values().iter().enumerate() {
        let mut row = g.grid().coords(k);
        row.push(u);
        t.push_numbers(row);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImportError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("header must be x1,u or x1,x2,u (further columns allowed), got {0:?}")]
    Header(Vec<String>),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("rows do not form a square lattice: {0}")]
    NotALattice(String),
}

/// Rows of a surface CSV: lattice coordinates and heights.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceCsv {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

pub fn parse_surface_csv(text: &str) -> Result<SurfaceCsv, ImportError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> =
        r.headers().map_err(|e| ImportError::Csv(e.to_string()))?.iter().map(str::to_owned).collect();
    let dim = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x1", "u", ..] => 1,
        ["x1", "x2", "u", ..] => 2,
        _ => return Err(ImportError::Header(header)),
    };
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| ImportError::Csv(e.to_string()))?;
        if rec.len() != header.len() {
            return Err(ImportError::Row {
                row,
                message: format!("{} fields, header has {}", rec.len(), header.len()),
            });
        }
        let nums = rec
            .iter()
            .take(dim + 1)
            .map(|f| f.trim().parse::<f64>().map_err(|e| ImportError::Row { row, message: format!("{f:?}: {e}") }))
            .collect::<Result<Vec<f64>, _>>()?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(ImportError::Row { row, message: "non-finite value".into() });
        }
        values.push(nums[dim]);
        points.push(nums[..dim].to_vec());
    }
    Ok(SurfaceCsv { dim, points, values })
}

impl SurfaceCsv {
    /// Rebuilds the lattice (rows must be in lattice order, as written by
    /// [`surface_table`]) and the graph of curvature target `h_target`.
    pub fn to_graph(&self, h_target: f64) -> Result<SpacelikeGraph, ImportError> {
        let count = self.values.len();
        let m = match self.dim {
            1 => count,
            _ => (count as f64).sqrt().round() as usize,
        };
        if m < 5 || m % 2 == 0 || m.pow(self.dim as u32) != count {
            return Err(ImportError::NotALattice(format!("{count} rows")));
        }
        let half_width = -self.points[0][0];
        let spacing = 2.0 * half_width / (m - 1) as f64;
        let grid =
            GridDomain::new(self.dim, half_width, spacing).map_err(|e| ImportError::NotALattice(e.to_string()))?;
        let tol = 1e-9 * half_width.max(1.0);
        for (k, p) in self.points.iter().enumerate() {
            let q = grid.coords(k);
            if p.iter().zip(&q).any(|(a, b)| (a - b).abs() > tol) {
                return Err(ImportError::NotALattice(format!("row {k} at {p:?}, expected {q:?}")));
            }
        }
        SpacelikeGraph::new(grid, self.values.clone(), h_target).map_err(|e| ImportError::NotALattice(e.to_string()))
    }
}

/// Two triangles per lattice cell, 0-based node indices.
pub fn lattice_triangles(grid: &GridDomain) -> Vec<[usize; 3]> {
    let m = grid.nodes_per_axis();
    let mut tris = Vec::with_capacity(2 * (m - 1) * (m - 1));
    for j in 0..m - 1 {
        for i in 0..m - 1 {
            let (a, b, c, d) = (grid.index(i, j), grid.index(i + 1, j), grid.index(i + 1, j + 1), grid.index(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    tris
}

/// OBJ text: one `v x y z` per point and one 1-based `f i j k` per triangle.
pub fn obj_string(points: &[[f64; 3]], triangles: &[[usize; 3]]) -> String {
    let mut s = String::new();
    for p in points {
        writeln!(s, "v {} {} {}", p[0], p[1], p[2]).expect("string write");
    }
    for t in triangles {
        writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).expect("string write");
    }
    s
}

/// The graph (x₁, x₂, u) of an n = 2 surface as an OBJ mesh.
pub fn graph_obj(g: &SpacelikeGraph) -> Option<String> {
    if g.dim() != 2 {
        return None;
    }
    let points: Vec<[f64; 3]> = g
        .values()
        .iter()
        .enumerate()
        .map(|(k, &u)| {
            let x = g.grid().coords(k);
            [x[0], x[1], u]
        })
        .collect();
    Some(obj_string(&points, &lattice_triangles(g.grid())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hyperboloid(dim: usize) -> SpacelikeGraph {
        let grid = GridDomain::new(dim, 1.0, 0.25).unwrap();
        SpacelikeGraph::sampled(grid, 1.0, |x| (1.0 + x.iter().map(|c| c * c).sum::<f64>()).sqrt()).unwrap()
    }

    #[test]
    fn surface_round_trip_is_exact() {
        for dim in [1, 2] {
            let g = hyperboloid(dim);
            let text = surface_table(&g).to_csv();
            let back = parse_surface_csv(&text).unwrap().to_graph(1.0).unwrap();
            assert_eq!(back.grid(), g.grid());
            for (a, b) in back.values().iter().zip(g.values()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn header_and_format() {
        let text = surface_table(&hyperboloid(2)).to_csv();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x1,x2,u"));
        assert_eq!(lines.next(), Some("-1.0000000000000000e0,-1.0000000000000000e0,1.7320508075688772e0"));
    }

    #[test]
    fn obj_counts() {
        let g = hyperboloid(2);
        let obj = graph_obj(&g).unwrap();
        let m = g.grid().nodes_per_axis();
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), m * m);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 2 * (m - 1) * (m - 1));
        assert!(obj.lines().any(|l| l == "f 1 2 11"));
        assert!(graph_obj(&hyperboloid(1)).is_none());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_surface_csv("a,b\n1,2\n"), Err(ImportError::Header(_))));
        assert!(matches!(parse_surface_csv("x1,u\n1,zz\n"), Err(ImportError::Row { .. })));
        assert!(matches!(parse_surface_csv("x1,u\n1,inf\n"), Err(ImportError::Row { .. })));
        let short = parse_surface_csv("x1,u\n-1,0\n0,0\n1,0\n").unwrap();
        assert!(matches!(short.to_graph(1.0), Err(ImportError::NotALattice(_))));
    }

    proptest! {
        #[test]
        fn f64_text_round_trip(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
