//! Global operators of the discrete state, linearized state and adjoint
//! problems.
//!
//! Velocity rows and columns follow the numbering of
//! [`MixedSpace`](crate::elements::MixedSpace): index `comp * n + s` for
//! component `comp` of scalar dof `s`. All integrals use the space's default
//! quadrature rule.

use crate::elements::{basis_bary, BasisField, FeFunction, Field, MixedSpace};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::sparse::{SparseMatrix, TripletBuilder};

/// Something that can be sampled at the assembly quadrature points, such as
/// a control. `q` indexes the default tabulation of the space, `x` is the
/// physical location of that point.
pub trait ControlField {
    fn value(&self, cell: usize, q: usize, x: Point) -> [f64; 2];
}

impl<T: ControlField + ?Sized> ControlField for &T {
    fn value(&self, cell: usize, q: usize, x: Point) -> [f64; 2] {
        (**self).value(cell, q, x)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Constant(pub [f64; 2]);

impl ControlField for Constant {
    fn value(&self, _: usize, _: usize, _: Point) -> [f64; 2] {
        self.0
    }
}

/// A closed-form vector field.
pub struct Analytic<F>(pub F);

impl<F: Fn(Point) -> [f64; 2]> ControlField for Analytic<F> {
    fn value(&self, _: usize, _: usize, x: Point) -> [f64; 2] {
        (self.0)(x)
    }
}

/// One constant vector per cell.
#[derive(Clone, Copy, Debug)]
pub struct Cellwise<'a>(pub &'a [[f64; 2]]);

impl ControlField for Cellwise<'_> {
    fn value(&self, cell: usize, _: usize, _: Point) -> [f64; 2] {
        self.0[cell]
    }
}

/// Values stored at every assembly quadrature point, cell-major.
#[derive(Clone, Copy, Debug)]
pub struct Sampled<'a> {
    pub values: &'a [[f64; 2]],
    pub points_per_cell: usize,
}

impl ControlField for Sampled<'_> {
    fn value(&self, cell: usize, q: usize, _: Point) -> [f64; 2] {
        self.values[cell * self.points_per_cell + q]
    }
}

/// Velocity FE function viewed as a load.
pub struct FeVelocity<'a> {
    pub space: &'a MixedSpace,
    pub y: &'a FeFunction,
}

impl ControlField for FeVelocity<'_> {
    fn value(&self, cell: usize, q: usize, _: Point) -> [f64; 2] {
        let tab = self.space.tabulation();
        self.space.combine_velocity(&self.y.coefficients, cell, &tab.vel[q], &tab.vel_dbary[q]).0
    }
}

fn local_gradients(space: &MixedSpace, c: usize, q: usize) -> Vec<[f64; 2]> {
    space.tabulation().vel_dbary[q].iter().map(|d| space.physical_gradient(c, d)).collect()
}

/// `ν (∇φ_j, ∇φ_i)` for the vector velocity basis.
pub fn assemble_viscous(space: &MixedSpace, nu: f64) -> SparseMatrix {
    let n = space.scalar_velocity_count();
    let nloc = space.pair().velocity_local_dofs();
    let mesh = space.mesh();
    let tab = space.tabulation();
    let mut t = TripletBuilder::with_capacity(2 * n, 2 * n, 2 * nloc * nloc * mesh.num_cells());
    let mut local = vec![0.0; nloc * nloc];
    for c in 0..mesh.num_cells() {
        local.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..tab.num_points() {
            let w = nu * space.quad_weight(tab, c, q);
            let g = local_gradients(space, c, q);
            for i in 0..nloc {
                for j in 0..nloc {
                    local[i * nloc + j] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
        let dofs = space.cell_velocity_scalar_dofs(c);
        for comp in 0..2 {
            for i in 0..nloc {
                for j in 0..nloc {
                    t.push(comp * n + dofs[i], comp * n + dofs[j], local[i * nloc + j]);
                }
            }
        }
    }
    t.build()
}

/// `B[q, v] = (ψ_q, div φ_v)`, rows indexed by pressure dofs.
pub fn assemble_divergence(space: &MixedSpace) -> SparseMatrix {
    let n = space.scalar_velocity_count();
    let nloc = space.pair().velocity_local_dofs();
    let mesh = space.mesh();
    let tab = space.tabulation();
    let mut t = TripletBuilder::with_capacity(space.pressure_dof_count(), 2 * n, 6 * nloc * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let mut local = vec![[0.0; 2]; 3 * nloc];
        for q in 0..tab.num_points() {
            let w = space.quad_weight(tab, c, q);
            let g = local_gradients(space, c, q);
            for p in 0..3 {
                let wp = w * tab.pre[q][p];
                for i in 0..nloc {
                    local[p * nloc + i][0] += wp * g[i][0];
                    local[p * nloc + i][1] += wp * g[i][1];
                }
            }
        }
        let dofs = space.cell_velocity_scalar_dofs(c);
        let pdofs = space.cell_pressure_dofs(c);
        for p in 0..3 {
            for i in 0..nloc {
                for comp in 0..2 {
                    t.push(pdofs[p], comp * n + dofs[i], local[p * nloc + i][comp]);
                }
            }
        }
    }
    t.build()
}

/// Velocity value and gradient of `y` at every quadrature point of cell `c`.
fn velocity_at_quadrature(space: &MixedSpace, y: &[f64], c: usize) -> Vec<([f64; 2], [[f64; 2]; 2])> {
    let tab = space.tabulation();
    (0..tab.num_points())
        .map(|q| space.combine_velocity(y, c, &tab.vel[q], &tab.vel_dbary[q]))
        .collect()
}

/// Convection linearizations at `y`:
/// `C1[i, j] = b(y; φ_j, φ_i)` and `C2[i, j] = b(φ_j; y, φ_i)`
/// with `b(v₁; v₂, v₃) = ((v₁·∇)v₂, v₃)`.
pub fn assemble_convection(space: &MixedSpace, y: &FeFunction) -> (SparseMatrix, SparseMatrix) {
    let n = space.scalar_velocity_count();
    let nloc = space.pair().velocity_local_dofs();
    let mesh = space.mesh();
    let tab = space.tabulation();
    let mut t1 = TripletBuilder::with_capacity(2 * n, 2 * n, 2 * nloc * nloc * mesh.num_cells());
    let mut t2 = TripletBuilder::with_capacity(2 * n, 2 * n, 4 * nloc * nloc * mesh.num_cells());
    let mut l1 = vec![0.0; nloc * nloc];
    // l2[(i * nloc + j) * 4 + d * 2 + c] = ∫ φ_j φ_i ∂_c y_d
    let mut l2 = vec![0.0; nloc * nloc * 4];
    for c in 0..mesh.num_cells() {
        l1.iter_mut().for_each(|v| *v = 0.0);
        l2.iter_mut().for_each(|v| *v = 0.0);
        let yq = velocity_at_quadrature(space, &y.coefficients, c);
        for (q, (yv, yg)) in yq.iter().enumerate() {
            let w = space.quad_weight(tab, c, q);
            let g = local_gradients(space, c, q);
            let phi = &tab.vel[q];
            for i in 0..nloc {
                for j in 0..nloc {
                    let adv = yv[0] * g[j][0] + yv[1] * g[j][1];
                    l1[i * nloc + j] += w * adv * phi[i];
                    let pp = w * phi[i] * phi[j];
                    let base = (i * nloc + j) * 4;
                    for d in 0..2 {
                        for cc in 0..2 {
                            l2[base + d * 2 + cc] += pp * yg[d][cc];
                        }
                    }
                }
            }
        }
        let dofs = space.cell_velocity_scalar_dofs(c);
        for i in 0..nloc {
            for j in 0..nloc {
                let v1 = l1[i * nloc + j];
                t1.push(dofs[i], dofs[j], v1);
                t1.push(n + dofs[i], n + dofs[j], v1);
                let base = (i * nloc + j) * 4;
                for d in 0..2 {
                    for cc in 0..2 {
                        t2.push(d * n + dofs[i], cc * n + dofs[j], l2[base + d * 2 + cc]);
                    }
                }
            }
        }
    }
    (t1.build(), t2.build())
}

/// Convection part of the adjoint operator, assembled directly from its own
/// form: `D[i, j] = b(y; φ_i, φ_j) + b(φ_i; y, φ_j)`.
///
/// This is the transpose of `C1 + C2`; it is built independently so the two
/// can be compared.
pub fn assemble_adjoint_convection(space: &MixedSpace, y: &FeFunction) -> SparseMatrix {
    let n = space.scalar_velocity_count();
    let nloc = space.pair().velocity_local_dofs();
    let mesh = space.mesh();
    let tab = space.tabulation();
    let mut t = TripletBuilder::with_capacity(2 * n, 2 * n, 6 * nloc * nloc * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let dofs = space.cell_velocity_scalar_dofs(c);
        let yq = velocity_at_quadrature(space, &y.coefficients, c);
        // Test function w = φ_r e_d (row), trial z = φ_s e_c (column).
        for r in 0..nloc {
            for s in 0..nloc {
                let mut adv = 0.0;
                let mut react = [[0.0; 2]; 2];
                for (q, (yv, yg)) in yq.iter().enumerate() {
                    let w = space.quad_weight(tab, c, q);
                    let g = local_gradients(space, c, q);
                    let phi = &tab.vel[q];
                    adv += w * (yv[0] * g[r][0] + yv[1] * g[r][1]) * phi[s];
                    for d in 0..2 {
                        for cc in 0..2 {
                            react[d][cc] += w * phi[r] * phi[s] * yg[cc][d];
                        }
                    }
                }
                for d in 0..2 {
                    for cc in 0..2 {
                        let a = if d == cc { adv } else { 0.0 };
                        t.push(d * n + dofs[r], cc * n + dofs[s], a + react[d][cc]);
                    }
                }
            }
        }
    }
    t.build()
}

/// `N(y)_i = b(y; y, φ_i)`.
pub fn convection_action(space: &MixedSpace, y: &FeFunction) -> Vec<f64> {
    let n = space.scalar_velocity_count();
    let tab = space.tabulation();
    let mut out = vec![0.0; 2 * n];
    for c in 0..space.mesh().num_cells() {
        let dofs = space.cell_velocity_scalar_dofs(c);
        for (q, (yv, yg)) in velocity_at_quadrature(space, &y.coefficients, c).iter().enumerate() {
            let w = space.quad_weight(tab, c, q);
            let conv = [
                yv[0] * yg[0][0] + yv[1] * yg[0][1],
                yv[0] * yg[1][0] + yv[1] * yg[1][1],
            ];
            for (i, &s) in dofs.iter().enumerate() {
                out[s] += w * conv[0] * tab.vel[q][i];
                out[n + s] += w * conv[1] * tab.vel[q][i];
            }
        }
    }
    out
}

/// `b(a; b, c)` by quadrature.
pub fn trilinear(space: &MixedSpace, a: &FeFunction, b: &FeFunction, c3: &FeFunction) -> f64 {
    let tab = space.tabulation();
    let mut sum = 0.0;
    for c in 0..space.mesh().num_cells() {
        for q in 0..tab.num_points() {
            let w = space.quad_weight(tab, c, q);
            let (av, _) = space.combine_velocity(&a.coefficients, c, &tab.vel[q], &tab.vel_dbary[q]);
            let (_, bg) = space.combine_velocity(&b.coefficients, c, &tab.vel[q], &tab.vel_dbary[q]);
            let (cv, _) = space.combine_velocity(&c3.coefficients, c, &tab.vel[q], &tab.vel_dbary[q]);
            for d in 0..2 {
                sum += w * (av[0] * bg[d][0] + av[1] * bg[d][1]) * cv[d];
            }
        }
    }
    sum
}

/// Gram matrix of the vector velocity basis.
pub fn assemble_mass_velocity(space: &MixedSpace) -> SparseMatrix {
    let n = space.scalar_velocity_count();
    let nloc = space.pair().velocity_local_dofs();
    let tab = space.tabulation();
    let mut t = TripletBuilder::new(2 * n, 2 * n);
    for c in 0..space.mesh().num_cells() {
        let dofs = space.cell_velocity_scalar_dofs(c);
        for i in 0..nloc {
            for j in 0..nloc {
                let v: f64 = (0..tab.num_points())
                    .map(|q| space.quad_weight(tab, c, q) * tab.vel[q][i] * tab.vel[q][j])
                    .sum();
                t.push(dofs[i], dofs[j], v);
                t.push(n + dofs[i], n + dofs[j], v);
            }
        }
    }
    t.build()
}

/// Gram matrix of the P1 pressure basis.
pub fn assemble_mass_pressure(space: &MixedSpace) -> SparseMatrix {
    let tab = space.tabulation();
    let np = space.pressure_dof_count();
    let mut t = TripletBuilder::new(np, np);
    for c in 0..space.mesh().num_cells() {
        let dofs = space.cell_pressure_dofs(c);
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..tab.num_points())
                    .map(|q| space.quad_weight(tab, c, q) * tab.pre[q][i] * tab.pre[q][j])
                    .sum();
                t.push(dofs[i], dofs[j], v);
            }
        }
    }
    t.build()
}

/// `∫ ψ_q` for every pressure basis function.
pub fn pressure_mean_weights(space: &MixedSpace) -> Vec<f64> {
    let mut w = vec![0.0; space.pressure_dof_count()];
    for c in 0..space.mesh().num_cells() {
        let a = space.mesh().cell_area(c) / 3.0;
        for p in space.cell_pressure_dofs(c) {
            w[p] += a;
        }
    }
    w
}

/// `f[i] = Σ_t φ_i(t) · c_t`, component-matched.
pub fn assemble_dirac_rhs(space: &MixedSpace, points: &[Point], coefficients: &[[f64; 2]]) -> Result<Vec<f64>> {
    if points.len() != coefficients.len() {
        return Err(Error::Input(format!(
            "{} Dirac points but {} coefficients",
            points.len(),
            coefficients.len()
        )));
    }
    let n = space.scalar_velocity_count();
    let mut f = vec![0.0; 2 * n];
    for (&t, coef) in points.iter().zip(coefficients) {
        if !space.mesh().is_interior(t) {
            return Err(Error::Input(format!("Dirac point ({}, {}) is not interior", t[0], t[1])));
        }
        let loc = space.mesh().locate_point(t)?;
        let (vals, _) = basis_bary(space.pair(), BasisField::VelocityScalar, loc.barycentric);
        for (i, &s) in space.cell_velocity_scalar_dofs(loc.cell_index).iter().enumerate() {
            f[s] += vals[i] * coef[0];
            f[n + s] += vals[i] * coef[1];
        }
    }
    Ok(f)
}

/// `f[i] = (u, φ_i)` by cellwise quadrature.
pub fn assemble_load(space: &MixedSpace, u: &dyn ControlField) -> Vec<f64> {
    let n = space.scalar_velocity_count();
    let tab = space.tabulation();
    let mut f = vec![0.0; 2 * n];
    for c in 0..space.mesh().num_cells() {
        let dofs = space.cell_velocity_scalar_dofs(c);
        for q in 0..tab.num_points() {
            let w = space.quad_weight(tab, c, q);
            let uv = u.value(c, q, space.quad_point(tab, c, q));
            for (i, &s) in dofs.iter().enumerate() {
                f[s] += w * uv[0] * tab.vel[q][i];
                f[n + s] += w * uv[1] * tab.vel[q][i];
            }
        }
    }
    f
}

/// Removes the constant-pressure kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum PressureGauge {
    /// Pin pressure dof 0 to zero during the solve, then shift the pressure
    /// so that `Σ_q w_q p_q = 0`, with `w_q = ∫ψ_q`.
    PinFirstPressureDof { mean_weights: Vec<f64> },
}

/// The block system `[A Bᵀ; B 0] (x, π) = (f, g)`.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub gauge: Option<PressureGauge>,
}

impl SaddleSystem {
    pub fn new(a: SparseMatrix, b: SparseMatrix, f: Vec<f64>, g: Vec<f64>, gauge: Option<PressureGauge>) -> Result<Self> {
        if a.nrows() != a.ncols() || b.ncols() != a.nrows() || f.len() != a.nrows() || g.len() != b.nrows() {
            return Err(Error::Input(format!(
                "inconsistent saddle blocks: A {}x{}, B {}x{}, f {}, g {}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                f.len(),
                g.len()
            )));
        }
        Ok(SaddleSystem { a, b, f, g, gauge })
    }

    /// Symmetric elimination of homogeneous Dirichlet velocity dofs.
    pub fn apply_dirichlet(&self, mask: &[bool]) -> SaddleSystem {
        assert_eq!(mask.len(), self.a.nrows());
        let mut a = self.a.filter_map(|r, c, v| (!mask[r] && !mask[c]).then_some(v));
        let diag: Vec<(usize, usize, f64)> =
            mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| (i, i, 1.0)).collect();
        if !diag.is_empty() {
            a = a.add(&SparseMatrix::from_triplets(a.nrows(), a.ncols(), diag));
        }
        let b = self.b.filter_map(|_, c, v| (!mask[c]).then_some(v));
        let f = self.f.iter().zip(mask).map(|(&v, &m)| if m { 0.0 } else { v }).collect();
        SaddleSystem { a, b, f, g: self.g.clone(), gauge: self.gauge.clone() }
    }
}

/// Dirichlet-eliminated velocity block of the linearized state operator
/// `ν(∇φ, ∇v) + b(y; φ, v) + b(φ; y, v)`.
pub fn linearized_matrix(space: &MixedSpace, nu: f64, y: &FeFunction) -> SparseMatrix {
    let (c1, c2) = assemble_convection(space, y);
    let j = assemble_viscous(space, nu).add(&c1).add(&c2);
    eliminate(&j, space.dirichlet_mask())
}

/// Dirichlet-eliminated velocity block of the adjoint operator, built from
/// its own form rather than by transposition.
pub fn adjoint_matrix(space: &MixedSpace, nu: f64, y: &FeFunction) -> SparseMatrix {
    let j = assemble_viscous(space, nu).add(&assemble_adjoint_convection(space, y));
    eliminate(&j, space.dirichlet_mask())
}

fn eliminate(a: &SparseMatrix, mask: &[bool]) -> SparseMatrix {
    let mut m = a.filter_map(|r, c, v| (!mask[r] && !mask[c]).then_some(v));
    let diag = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| (i, i, 1.0)).collect();
    m = m.add(&SparseMatrix::from_triplets(m.nrows(), m.ncols(), diag));
    m
}

pub(crate) fn check_velocity(space: &MixedSpace, y: &FeFunction) -> Result<()> {
    if y.field != Field::Velocity || y.coefficients.len() != space.velocity_dof_count() {
        return Err(Error::Input("expected a velocity function on this space".into()));
    }
    Ok(())
}
