//! Taylor–Hood and MINI mixed spaces on structured triangulations.
//!
//! Scalar velocity degrees of freedom are numbered vertices first, then edges
//! (Taylor–Hood) or cell bubbles (MINI). The vector velocity stacks all
//! x-components before all y-components. Pressure is continuous P1 on the
//! vertices for both pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{self, QuadratureRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementPair {
    #[serde(rename = "th", alias = "taylor-hood")]
    TaylorHood,
    #[serde(rename = "mini")]
    Mini,
}

impl ElementPair {
    /// Local scalar velocity basis size.
    pub fn velocity_local_dofs(self) -> usize {
        match self {
            ElementPair::TaylorHood => 6,
            ElementPair::Mini => 4,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            ElementPair::TaylorHood => "th",
            ElementPair::Mini => "mini",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisField {
    VelocityScalar,
    Pressure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Field {
    Velocity,
    Pressure,
}

/// Local basis values and their derivatives with respect to the three
/// barycentric coordinates, treated as independent variables.
pub(crate) fn basis_bary(pair: ElementPair, field: BasisField, l: [f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
    match (field, pair) {
        (BasisField::Pressure, _) => (
            l.to_vec(),
            vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        ),
        (BasisField::VelocityScalar, ElementPair::Mini) => {
            let mut v = l.to_vec();
            v.push(27.0 * l[0] * l[1] * l[2]);
            let d = vec![
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [27.0 * l[1] * l[2], 27.0 * l[0] * l[2], 27.0 * l[0] * l[1]],
            ];
            (v, d)
        }
        (BasisField::VelocityScalar, ElementPair::TaylorHood) => {
            let mut v = Vec::with_capacity(6);
            let mut d = Vec::with_capacity(6);
            for i in 0..3 {
                v.push(l[i] * (2.0 * l[i] - 1.0));
                let mut g = [0.0; 3];
                g[i] = 4.0 * l[i] - 1.0;
                d.push(g);
            }
            for k in 0..3 {
                let (a, b) = ((k + 1) % 3, (k + 2) % 3);
                v.push(4.0 * l[a] * l[b]);
                let mut g = [0.0; 3];
                g[a] = 4.0 * l[b];
                g[b] = 4.0 * l[a];
                d.push(g);
            }
            (v, d)
        }
    }
}

/// Basis values and gradients with respect to the reference coordinates
/// `(ξ, η)`, where `λ = (1 − ξ − η, ξ, η)`.
pub fn evaluate_basis(pair: ElementPair, field: BasisField, bary: [f64; 3]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let (v, d) = basis_bary(pair, field, bary);
    let grads = d.iter().map(|g| [g[1] - g[0], g[2] - g[0]]).collect();
    (v, grads)
}

/// A coefficient vector on one field of a [`MixedSpace`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeFunction {
    pub field: Field,
    pub coefficients: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(space: &MixedSpace, field: Field) -> Self {
        let n = match field {
            Field::Velocity => space.velocity_dof_count(),
            Field::Pressure => space.pressure_dof_count(),
        };
        FeFunction { field, coefficients: vec![0.0; n] }
    }

    pub fn scaled(&self, s: f64) -> Self {
        FeFunction { field: self.field, coefficients: self.coefficients.iter().map(|c| s * c).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Per-cell affine geometry.
#[derive(Clone, Debug)]
pub(crate) struct CellGeometry {
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

/// Basis tabulated at the points of one quadrature rule.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub rule: QuadratureRule,
    pub vel: Vec<Vec<f64>>,
    pub vel_dbary: Vec<Vec<[f64; 3]>>,
    pub pre: Vec<Vec<f64>>,
}

impl Tabulation {
    fn new(pair: ElementPair, rule: QuadratureRule) -> Self {
        let mut vel = Vec::new();
        let mut vel_dbary = Vec::new();
        let mut pre = Vec::new();
        for &l in &rule.points {
            let (v, d) = basis_bary(pair, BasisField::VelocityScalar, l);
            vel.push(v);
            vel_dbary.push(d);
            pre.push(basis_bary(pair, BasisField::Pressure, l).0);
        }
        Tabulation { rule, vel, vel_dbary, pre }
    }

    pub fn num_points(&self) -> usize {
        self.rule.points.len()
    }
}

#[derive(Clone, Debug)]
pub struct MixedSpace {
    mesh: Mesh,
    pair: ElementPair,
    scalar_count: usize,
    /// Scalar velocity dofs of each cell, `velocity_local_dofs()` per cell.
    cell_scalar: Vec<usize>,
    /// Interpolation node of every scalar velocity dof.
    scalar_nodes: Vec<Point>,
    dirichlet_mask: Vec<bool>,
    geometry: Vec<CellGeometry>,
    tab: Tabulation,
}

impl MixedSpace {
    pub fn new(mesh: &Mesh, pair: ElementPair) -> Self {
        let nv = mesh.num_vertices();
        let nloc = pair.velocity_local_dofs();
        let mut cell_scalar = Vec::with_capacity(nloc * mesh.num_cells());
        let mut scalar_nodes: Vec<Point> = mesh.vertices().to_vec();
        let mut scalar_boundary: Vec<bool> = mesh.vertex_on_boundary().to_vec();
        match pair {
            ElementPair::TaylorHood => {
                for e in mesh.edges() {
                    let a = mesh.vertices()[e.vertices[0]];
                    let b = mesh.vertices()[e.vertices[1]];
                    scalar_nodes.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                }
                scalar_boundary.extend_from_slice(mesh.edge_on_boundary());
                for (cell, edges) in mesh.cells().iter().zip(mesh.cell_edges()) {
                    cell_scalar.extend_from_slice(cell);
                    cell_scalar.extend(edges.iter().map(|e| nv + e));
                }
            }
            ElementPair::Mini => {
                for (c, cell) in mesh.cells().iter().enumerate() {
                    scalar_nodes.push(mesh.centroid(c));
                    scalar_boundary.push(false);
                    cell_scalar.extend_from_slice(cell);
                    cell_scalar.push(nv + c);
                }
            }
        }
        let scalar_count = scalar_nodes.len();
        let mut dirichlet_mask = scalar_boundary.clone();
        dirichlet_mask.extend_from_slice(&scalar_boundary);
        let geometry = (0..mesh.num_cells())
            .map(|c| CellGeometry { area: mesh.cell_area(c), grad_lambda: mesh.barycentric_gradients(c) })
            .collect();
        let rule = quadrature::quadrature(quadrature::DEFAULT_DEGREE).expect("default degree is supported");
        MixedSpace {
            mesh: mesh.clone(),
            pair,
            scalar_count,
            cell_scalar,
            scalar_nodes,
            dirichlet_mask,
            geometry,
            tab: Tabulation::new(pair, rule),
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn pair(&self) -> ElementPair {
        self.pair
    }

    pub fn scalar_velocity_count(&self) -> usize {
        self.scalar_count
    }

    pub fn velocity_dof_count(&self) -> usize {
        2 * self.scalar_count
    }

    pub fn pressure_dof_count(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet_mask
    }

    pub fn scalar_nodes(&self) -> &[Point] {
        &self.scalar_nodes
    }

    pub fn cell_velocity_scalar_dofs(&self, c: usize) -> &[usize] {
        let n = self.pair.velocity_local_dofs();
        &self.cell_scalar[n * c..n * (c + 1)]
    }

    pub fn cell_pressure_dofs(&self, c: usize) -> [usize; 3] {
        self.mesh.cells()[c]
    }

    /// Basis tabulation at the default assembly quadrature.
    pub fn tabulation(&self) -> &Tabulation {
        &self.tab
    }

    pub fn tabulate(&self, rule: QuadratureRule) -> Tabulation {
        Tabulation::new(self.pair, rule)
    }

    /// Physical quadrature weight of point `q` of `tab` on cell `c`.
    pub fn quad_weight(&self, tab: &Tabulation, c: usize, q: usize) -> f64 {
        2.0 * self.geometry[c].area * tab.rule.weights[q]
    }

    pub fn quad_point(&self, tab: &Tabulation, c: usize, q: usize) -> Point {
        self.mesh.map_to_physical(c, tab.rule.points[q])
    }

    /// Physical gradient from barycentric derivatives.
    #[inline]
    pub(crate) fn physical_gradient(&self, c: usize, d: &[f64; 3]) -> [f64; 2] {
        let g = &self.geometry[c].grad_lambda;
        [
            d[0] * g[0][0] + d[1] * g[1][0] + d[2] * g[2][0],
            d[0] * g[0][1] + d[1] * g[1][1] + d[2] * g[2][1],
        ]
    }

    /// Velocity value and gradient (`grad[i][j] = ∂_j y_i`) at a barycentric point of cell `c`.
    pub fn velocity_in_cell(&self, y: &[f64], c: usize, bary: [f64; 3]) -> ([f64; 2], [[f64; 2]; 2]) {
        let (v, d) = basis_bary(self.pair, BasisField::VelocityScalar, bary);
        self.combine_velocity(y, c, &v, &d)
    }

    pub(crate) fn combine_velocity(
        &self,
        y: &[f64],
        c: usize,
        vals: &[f64],
        dbary: &[[f64; 3]],
    ) -> ([f64; 2], [[f64; 2]; 2]) {
        let n = self.scalar_count;
        let mut val = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        for (i, &s) in self.cell_velocity_scalar_dofs(c).iter().enumerate() {
            let g = self.physical_gradient(c, &dbary[i]);
            for comp in 0..2 {
                let coef = y[comp * n + s];
                val[comp] += coef * vals[i];
                grad[comp][0] += coef * g[0];
                grad[comp][1] += coef * g[1];
            }
        }
        (val, grad)
    }

    fn check_len(&self, f: &FeFunction) -> Result<()> {
        let expected = match f.field {
            Field::Velocity => self.velocity_dof_count(),
            Field::Pressure => self.pressure_dof_count(),
        };
        if f.coefficients.len() != expected {
            return Err(Error::Input(format!(
                "{:?} function has {} coefficients, space expects {expected}",
                f.field,
                f.coefficients.len()
            )));
        }
        Ok(())
    }

    /// Nodal interpolation of a vector field. For MINI the bubble coefficient
    /// is chosen so that the interpolant matches `f` at the barycenter.
    pub fn interpolate_velocity(&self, f: impl Fn(Point) -> [f64; 2]) -> FeFunction {
        let n = self.scalar_count;
        let mut coefficients = vec![0.0; 2 * n];
        let nv = self.mesh.num_vertices();
        for (s, &p) in self.scalar_nodes.iter().enumerate() {
            let v = f(p);
            coefficients[s] = v[0];
            coefficients[n + s] = v[1];
        }
        if self.pair == ElementPair::Mini {
            for (c, cell) in self.mesh.cells().iter().enumerate() {
                for comp in 0..2 {
                    let mean = cell.iter().map(|&v| coefficients[comp * n + v]).sum::<f64>() / 3.0;
                    coefficients[comp * n + nv + c] -= mean;
                }
            }
        }
        FeFunction { field: Field::Velocity, coefficients }
    }

    pub fn interpolate_pressure(&self, f: impl Fn(Point) -> f64) -> FeFunction {
        FeFunction { field: Field::Pressure, coefficients: self.mesh.vertices().iter().map(|&p| f(p)).collect() }
    }

    pub fn evaluate_velocity(&self, y: &FeFunction, p: Point) -> Result<[f64; 2]> {
        self.check_len(y)?;
        if y.field != Field::Velocity {
            return Err(Error::Input("expected a velocity function".into()));
        }
        let loc = self.mesh.locate_point(p)?;
        Ok(self.velocity_in_cell(&y.coefficients, loc.cell_index, loc.barycentric).0)
    }

    pub fn evaluate_pressure(&self, q: &FeFunction, p: Point) -> Result<f64> {
        self.check_len(q)?;
        if q.field != Field::Pressure {
            return Err(Error::Input("expected a pressure function".into()));
        }
        let loc = self.mesh.locate_point(p)?;
        let cell = self.mesh.cells()[loc.cell_index];
        Ok((0..3).map(|k| q.coefficients[cell[k]] * loc.barycentric[k]).sum())
    }

    /// Field-generic point evaluation; pressures come back in the first slot.
    pub fn evaluate_fe(&self, f: &FeFunction, p: Point) -> Result<[f64; 2]> {
        match f.field {
            Field::Velocity => self.evaluate_velocity(f, p),
            Field::Pressure => Ok([self.evaluate_pressure(f, p)?, 0.0]),
        }
    }
}

/// Builds the mixed space for `pair` on `mesh`.
pub fn build_space(mesh: &Mesh, pair: ElementPair) -> MixedSpace {
    MixedSpace::new(mesh, pair)
}
