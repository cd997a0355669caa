//! Structured triangulations of axis-aligned rectangles.
//!
//! Every mesh in this module belongs to one family: an `nx × ny` grid of
//! squares, each split along the lower-left to upper-right diagonal. Vertices
//! are numbered row by row, cells square by square with the lower triangle
//! first, and edges in order of first appearance while walking the cells.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];

/// Barycentric tolerance used by point location.
pub const LOCATE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Default for Rect {
    fn default() -> Self {
        Rect::UNIT
    }
}

impl Rect {
    pub const UNIT: Rect = Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 };

    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn is_valid(&self) -> bool {
        [self.x0, self.y0, self.x1, self.y1].iter().all(|v| v.is_finite())
            && self.x1 > self.x0
            && self.y1 > self.y0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// Adjacent cells; the second slot is empty for boundary edges.
    pub cells: [Option<usize>; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointLocation {
    pub cell_index: usize,
    pub barycentric: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    rect: Rect,
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    /// Local edge `k` of a cell is the edge opposite its local vertex `k`.
    cell_edges: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    vertex_on_boundary: Vec<bool>,
    edge_on_boundary: Vec<bool>,
    h_max: f64,
    h_min: f64,
}

impl Mesh {
    /// Builds the structured triangulation of `rect` with `nx × ny` squares.
    pub fn build_structured(nx: usize, ny: usize, rect: Rect) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::Input(format!("mesh resolution must be positive, got {nx}x{ny}")));
        }
        if !rect.is_valid() {
            return Err(Error::Input(format!("invalid rectangle {rect:?}")));
        }
        let hx = (rect.x1 - rect.x0) / nx as f64;
        let hy = (rect.y1 - rect.y0) / ny as f64;

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut vertex_on_boundary = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                // Snap the last row/column onto the rectangle exactly.
                let x = if i == nx { rect.x1 } else { rect.x0 + i as f64 * hx };
                let y = if j == ny { rect.y1 } else { rect.y0 + j as f64 * hy };
                vertices.push([x, y]);
                vertex_on_boundary.push(i == 0 || j == 0 || i == nx || j == ny);
            }
        }

        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }

        let mut edge_lookup = std::collections::HashMap::with_capacity(3 * nx * ny + nx + ny);
        let mut edges: Vec<Edge> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut local = [0usize; 3];
            for (k, slot) in local.iter_mut().enumerate() {
                let a = cell[(k + 1) % 3];
                let b = cell[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *edge_lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge { vertices: [key.0, key.1], cells: [None, None] });
                    edges.len() - 1
                });
                let adj = &mut edges[e].cells;
                if adj[0].is_none() {
                    adj[0] = Some(c);
                } else {
                    adj[1] = Some(c);
                }
                *slot = e;
            }
            cell_edges.push(local);
        }
        let edge_on_boundary = edges.iter().map(|e| e.cells[1].is_none()).collect();

        let diag = (hx * hx + hy * hy).sqrt();
        let mut mesh = Mesh {
            nx,
            ny,
            rect,
            vertices,
            cells,
            cell_edges,
            edges,
            vertex_on_boundary,
            edge_on_boundary,
            h_max: diag,
            h_min: diag,
        };
        let (mut h_max, mut h_min) = (0.0f64, f64::INFINITY);
        for c in 0..mesh.num_cells() {
            let d = mesh.cell_diameter(c);
            h_max = h_max.max(d);
            h_min = h_min.min(d);
        }
        mesh.h_max = h_max;
        mesh.h_min = h_min;
        Ok(mesh)
    }

    /// Uniform red refinement; identical to rebuilding at twice the resolution.
    pub fn refine_uniform(&self) -> Mesh {
        Mesh::build_structured(2 * self.nx, 2 * self.ny, self.rect)
            .expect("refining a valid mesh cannot fail")
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex_on_boundary(&self) -> &[bool] {
        &self.vertex_on_boundary
    }

    pub fn edge_on_boundary(&self) -> &[bool] {
        &self.edge_on_boundary
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn cell_vertices(&self, c: usize) -> [Point; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    /// Signed area, positive for counterclockwise cells.
    pub fn signed_area(&self, c: usize) -> f64 {
        let [p0, p1, p2] = self.cell_vertices(c);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        self.signed_area(c).abs()
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let p = self.cell_vertices(c);
        (0..3)
            .map(|k| dist(p[k], p[(k + 1) % 3]))
            .fold(0.0, f64::max)
    }

    pub fn centroid(&self, c: usize) -> Point {
        let [p0, p1, p2] = self.cell_vertices(c);
        [(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0]
    }

    /// Physical coordinates of a barycentric point in cell `c`.
    pub fn map_to_physical(&self, c: usize, bary: [f64; 3]) -> Point {
        let p = self.cell_vertices(c);
        [
            bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
            bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
        ]
    }

    pub fn barycentric(&self, c: usize, p: Point) -> [f64; 3] {
        let [a, b, d] = self.cell_vertices(c);
        let det = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Gradients of the three barycentric coordinates on cell `c` (constant).
    pub fn barycentric_gradients(&self, c: usize) -> [[f64; 2]; 3] {
        let [a, b, d] = self.cell_vertices(c);
        let det = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
        let g1 = [(d[1] - a[1]) / det, -(d[0] - a[0]) / det];
        let g2 = [-(b[1] - a[1]) / det, (b[0] - a[0]) / det];
        [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2]
    }

    pub fn contains(&self, p: Point) -> bool {
        let sx = LOCATE_TOL * (self.rect.x1 - self.rect.x0);
        let sy = LOCATE_TOL * (self.rect.y1 - self.rect.y0);
        p[0] >= self.rect.x0 - sx
            && p[0] <= self.rect.x1 + sx
            && p[1] >= self.rect.y0 - sy
            && p[1] <= self.rect.y1 + sy
    }

    /// True when `p` lies strictly inside the domain (not on its boundary).
    pub fn is_interior(&self, p: Point) -> bool {
        let sx = LOCATE_TOL * (self.rect.x1 - self.rect.x0);
        let sy = LOCATE_TOL * (self.rect.y1 - self.rect.y0);
        p[0] > self.rect.x0 + sx
            && p[0] < self.rect.x1 - sx
            && p[1] > self.rect.y0 + sy
            && p[1] < self.rect.y1 - sy
    }

    /// Finds the cell of smallest index containing `p`.
    pub fn locate_point(&self, p: Point) -> Result<PointLocation> {
        if !(p[0].is_finite() && p[1].is_finite()) || !self.contains(p) {
            return Err(Error::OutOfDomain { point: p });
        }
        let hx = (self.rect.x1 - self.rect.x0) / self.nx as f64;
        let hy = (self.rect.y1 - self.rect.y0) / self.ny as f64;
        let sx = (p[0] - self.rect.x0) / hx;
        let sy = (p[1] - self.rect.y0) / hy;
        let range = |s: f64, n: usize| {
            let lo = ((s - 1e-9).floor().max(0.0) as usize).min(n - 1);
            let hi = ((s + 1e-9).floor().max(0.0) as usize).min(n - 1);
            lo..=hi
        };
        let mut best: Option<PointLocation> = None;
        for j in range(sy, self.ny) {
            for i in range(sx, self.nx) {
                let first = 2 * (j * self.nx + i);
                for c in [first, first + 1] {
                    if best.is_some_and(|b| b.cell_index <= c) {
                        continue;
                    }
                    let bary = self.barycentric(c, p);
                    if bary.iter().all(|&l| l >= -LOCATE_TOL && l <= 1.0 + LOCATE_TOL) {
                        best = Some(PointLocation { cell_index: c, barycentric: bary });
                    }
                }
            }
        }
        best.ok_or(Error::OutOfDomain { point: p })
    }

    /// Writes the mesh as a legacy ASCII VTK unstructured grid.
    ///
    /// `point_vectors` are per-vertex 2D fields, `cell_vectors` per-cell 2D fields.
    pub fn to_vtk(
        &self,
        point_vectors: &[(&str, &[[f64; 2]])],
        cell_vectors: &[(&str, &[[f64; 2]])],
    ) -> String {
        let mut s = String::new();
        let f = |v: f64| format!("{v:.16e}");
        s.push_str("# vtk DataFile Version 3.0\nnsoc mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n");
        let _ = writeln!(s, "POINTS {} double", self.num_vertices());
        for p in &self.vertices {
            let _ = writeln!(s, "{} {} {}", f(p[0]), f(p[1]), f(0.0));
        }
        let _ = writeln!(s, "CELLS {} {}", self.num_cells(), 4 * self.num_cells());
        for c in &self.cells {
            let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.num_cells());
        for _ in &self.cells {
            s.push_str("5\n");
        }
        if !point_vectors.is_empty() {
            let _ = writeln!(s, "POINT_DATA {}", self.num_vertices());
            for (name, data) in point_vectors {
                let _ = writeln!(s, "VECTORS {name} double");
                for v in data.iter() {
                    let _ = writeln!(s, "{} {} {}", f(v[0]), f(v[1]), f(0.0));
                }
            }
        }
        if !cell_vectors.is_empty() {
            let _ = writeln!(s, "CELL_DATA {}", self.num_cells());
            for (name, data) in cell_vectors {
                let _ = writeln!(s, "VECTORS {name} double");
                for v in data.iter() {
                    let _ = writeln!(s, "{} {} {}", f(v[0]), f(v[1]), f(0.0));
                }
            }
        }
        s
    }

    pub fn write_vtk(
        &self,
        path: &Path,
        point_vectors: &[(&str, &[[f64; 2]])],
        cell_vectors: &[(&str, &[[f64; 2]])],
    ) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_vtk(point_vectors, cell_vectors).as_bytes())?;
        Ok(())
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Mesh {
        Mesh::build_structured(n, n, Rect::UNIT).unwrap()
    }

    /// Brute-force conformity check: shared vertices of any two cells must
    /// be empty, a single vertex, or a full edge, and cells may not overlap.
    fn assert_invariants(m: &Mesh) {
        for c in 0..m.num_cells() {
            assert!(m.signed_area(c) > 0.0, "cell {c} not counterclockwise");
        }
        let v = m.num_vertices() as i64;
        let e = m.num_edges() as i64;
        let c = m.num_cells() as i64;
        assert_eq!(v - e + (c + 1), 2, "Euler relation");
        assert!(m.h_max() / m.h_min() <= 4.0);
        let total: f64 = (0..m.num_cells()).map(|c| m.cell_area(c)).sum();
        assert!((total - m.rect().area()).abs() < 1e-12);
        for e in m.edges() {
            let shared = e.cells.iter().flatten().count();
            assert!(shared == 1 || shared == 2);
        }
    }

    #[test]
    fn minimal_counts() {
        let m = unit(1);
        assert_eq!((m.num_vertices(), m.num_cells(), m.num_edges()), (4, 2, 5));
        let m = unit(2);
        assert_eq!((m.num_vertices(), m.num_cells(), m.num_edges()), (9, 8, 16));
        assert_eq!(9 - 16 + 9, 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(Mesh::build_structured(0, 1, Rect::UNIT), Err(Error::Input(_))));
        assert!(matches!(
            Mesh::build_structured(1, 1, Rect::new(1.0, 0.0, 0.0, 1.0)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn structured_family_invariants() {
        for n in [1, 2, 3, 5, 8] {
            assert_invariants(&unit(n));
        }
        assert_invariants(&Mesh::build_structured(3, 7, Rect::new(-1.0, 2.0, 0.5, 3.0)).unwrap());
    }

    #[test]
    fn conformity_brute_force() {
        let m = unit(3);
        for a in 0..m.num_cells() {
            for b in (a + 1)..m.num_cells() {
                let ca = m.cells()[a];
                let cb = m.cells()[b];
                let shared = ca.iter().filter(|v| cb.contains(v)).count();
                assert!(shared <= 2);
                // No vertex of one cell strictly inside another.
                for &v in &cb {
                    let l = m.barycentric(a, m.vertices()[v]);
                    assert!(!l.iter().all(|&x| x > 1e-12), "overlap {a} {b}");
                }
            }
        }
    }

    #[test]
    fn refinement_matches_structured() {
        let m = unit(1);
        let r = m.refine_uniform();
        assert_eq!(r, unit(2));
        assert!((r.h_max() - m.h_max() / 2.0).abs() < 1e-15);
        assert_eq!(r.num_cells(), 4 * m.num_cells());
        let rect = Rect::new(0.0, 0.0, 2.0, 1.0);
        let p = Mesh::build_structured(3, 2, rect).unwrap();
        let child = p.refine_uniform();
        for (v, &b) in child.vertices().iter().zip(child.vertex_on_boundary()) {
            if b {
                let on = v[0] == rect.x0 || v[0] == rect.x1 || v[1] == rect.y0 || v[1] == rect.y1;
                assert!(on);
            }
        }
    }

    #[test]
    fn locate_examples() {
        let m = unit(1);
        let loc = m.locate_point([0.6, 0.2]).unwrap();
        assert_eq!(loc.cell_index, 0);
        // Independent oracle: barycentric coordinates over both cells.
        let inside: Vec<usize> = (0..2)
            .filter(|&c| m.barycentric(c, [0.6, 0.2]).iter().all(|&l| l >= 0.0))
            .collect();
        assert_eq!(inside, vec![0]);
        assert_eq!(m.locate_point([0.5, 0.5]).unwrap().cell_index, 0);
        assert!(matches!(m.locate_point([2.0, 2.0]), Err(Error::OutOfDomain { .. })));
        let upper = m.locate_point([0.2, 0.6]).unwrap();
        assert_eq!(upper.cell_index, 1);
    }

    #[test]
    fn locate_barycenters_and_ties() {
        let m = Mesh::build_structured(4, 3, Rect::new(0.0, 0.0, 2.0, 1.0)).unwrap();
        for c in 0..m.num_cells() {
            let loc = m.locate_point(m.centroid(c)).unwrap();
            assert_eq!(loc.cell_index, c);
            for l in loc.barycentric {
                assert!((l - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        // Interior vertex: smallest-index incident cell wins.
        let v = m.vertices()[6];
        let expected = (0..m.num_cells()).find(|&c| m.cells()[c].contains(&6)).unwrap();
        assert_eq!(m.locate_point(v).unwrap().cell_index, expected);
        // Domain corner.
        assert_eq!(m.locate_point([2.0, 1.0]).unwrap().cell_index, m.num_cells() - 2);
    }

    #[test]
    fn vtk_layout() {
        let m = unit(1);
        let s = m.to_vtk(&[], &[]);
        assert!(s.starts_with("# vtk DataFile Version 3.0"));
        assert!(s.contains("POINTS 4 double"));
        assert!(s.contains("CELLS 2 8"));
        assert!(s.contains("1.0000000000000000e0 1.0000000000000000e0"));
    }
}
