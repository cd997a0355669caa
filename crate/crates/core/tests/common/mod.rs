//! Property checks shared by the proptest suite and the acceptance runner.
//! Each returns `Err` with a description when the property is violated.
#![allow(dead_code)]

use nsoc::assembly::{assemble_load, assemble_mass_velocity, trilinear, FeVelocity};
use nsoc::elements::{build_space, evaluate_basis, BasisField, ElementPair, FeFunction, Field, MixedSpace};
use nsoc::mesh::{Mesh, Rect};
use nsoc::quadrature::quadrature;

pub type Check = Result<(), String>;

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `∫_T̂ λ₀^a λ₁^b λ₂^c = a! b! c! / (a + b + c + 2)!`.
pub fn quadrature_exactness(degree: usize, a: u32, b: u32) -> Check {
    let d = degree as u32;
    if a + b > d {
        return Ok(());
    }
    let c = d - a - b;
    let rule = quadrature(degree).map_err(|e| e.to_string())?;
    let q: f64 = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
        .sum();
    let exact = factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
    let rel = ((q - exact) / exact).abs();
    if rel <= 1e-13 {
        Ok(())
    } else {
        Err(format!("degree {degree} monomial ({a},{b},{c}): relative error {rel:e}"))
    }
}

/// Velocity and pressure bases sum to one, with gradients summing to zero.
/// The MINI bubble is excluded from the velocity sum.
pub fn partition_of_unity(pair: ElementPair, s: f64, t: f64) -> Check {
    let (s, t) = if s + t > 1.0 { (1.0 - s, 1.0 - t) } else { (s, t) };
    let l = [1.0 - s - t, s, t];
    for field in [BasisField::VelocityScalar, BasisField::Pressure] {
        let (v, g) = evaluate_basis(pair, field, l);
        let k = match (pair, field) {
            (ElementPair::Mini, BasisField::VelocityScalar) => 3,
            _ => v.len(),
        };
        let sum: f64 = v[..k].iter().sum();
        let gx: f64 = g[..k].iter().map(|d| d[0]).sum();
        let gy: f64 = g[..k].iter().map(|d| d[1]).sum();
        if (sum - 1.0).abs() > 1e-13 || gx.abs() > 1e-13 || gy.abs() > 1e-13 {
            return Err(format!("{pair:?} {field:?} at {l:?}: sum {sum}, gradient ({gx}, {gy})"));
        }
    }
    Ok(())
}

fn space(n: usize, pair: ElementPair) -> MixedSpace {
    build_space(&Mesh::build_structured(n, n, Rect::UNIT).unwrap(), pair)
}

/// A velocity with the given interior coefficients, zero on the boundary.
fn interior_velocity(space: &MixedSpace, coefs: &[f64]) -> FeFunction {
    let mask = space.dirichlet_mask();
    let coefficients = (0..space.velocity_dof_count())
        .map(|i| if mask[i] { 0.0 } else { coefs[i % coefs.len()] })
        .collect();
    FeFunction { field: Field::Velocity, coefficients }
}

/// `b(y; w, v) + b(y; v, w) = 0` for `y = (x₂, −x₁)` and `w, v` vanishing on
/// the boundary.
pub fn trilinear_antisymmetry(pair: ElementPair, n: usize, w: &[f64], v: &[f64]) -> Check {
    let s = space(n, pair);
    let y = s.interpolate_velocity(|p| [p[1], -p[0]]);
    let w = interior_velocity(&s, w);
    let v = interior_velocity(&s, v);
    let sum = trilinear(&s, &y, &w, &v) + trilinear(&s, &y, &v, &w);
    let scale = trilinear(&s, &y, &w, &v).abs().max(1.0);
    if sum.abs() <= 1e-10 * scale {
        Ok(())
    } else {
        Err(format!("{pair:?} {n}x{n}: b(y;w,v) + b(y;v,w) = {sum:e}"))
    }
}

/// The load of a finite element velocity equals the mass matrix applied to
/// its coefficients.
pub fn mass_load_gram(pair: ElementPair, n: usize, coefs: &[f64]) -> Check {
    let s = space(n, pair);
    let y = FeFunction {
        field: Field::Velocity,
        coefficients: (0..s.velocity_dof_count()).map(|i| coefs[i % coefs.len()]).collect(),
    };
    let load = assemble_load(&s, &FeVelocity { space: &s, y: &y });
    let gram = assemble_mass_velocity(&s).mul_vec(&y.coefficients);
    let diff = load.iter().zip(&gram).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if diff <= 1e-12 {
        Ok(())
    } else {
        Err(format!("{pair:?} {n}x{n}: max |load - M y| = {diff:e}"))
    }
}

/// Euler relation, counterclockwise cells, area sum and edge adjacency.
pub fn mesh_invariants(nx: usize, ny: usize, x0: f64, y0: f64, w: f64, h: f64) -> Check {
    let rect = Rect::new(x0, y0, x0 + w, y0 + h);
    let m = Mesh::build_structured(nx, ny, rect).map_err(|e| e.to_string())?;
    let (v, e, c) = (m.num_vertices() as i64, m.num_edges() as i64, m.num_cells() as i64);
    if v - e + c != 1 {
        return Err(format!("{nx}x{ny}: V - E + F = {} (expected 1 without the outer face)", v - e + c));
    }
    if let Some(c) = (0..m.num_cells()).find(|&c| m.signed_area(c) <= 0.0) {
        return Err(format!("{nx}x{ny}: cell {c} is not counterclockwise"));
    }
    let total: f64 = (0..m.num_cells()).map(|c| m.cell_area(c)).sum();
    if (total - rect.area()).abs() > 1e-12 * rect.area().max(1.0) {
        return Err(format!("{nx}x{ny}: cell areas sum to {total}, domain area {}", rect.area()));
    }
    let boundary = m.edges().iter().filter(|e| e.cells[1].is_none()).count();
    if boundary != 2 * (nx + ny) {
        return Err(format!("{nx}x{ny}: {boundary} boundary edges, expected {}", 2 * (nx + ny)));
    }
    let mut seen = vec![0usize; m.num_edges()];
    for ce in m.cell_edges() {
        for &k in ce {
            seen[k] += 1;
        }
    }
    for (k, edge) in m.edges().iter().enumerate() {
        if seen[k] != edge.cells.iter().flatten().count() {
            return Err(format!("{nx}x{ny}: edge {k} adjacency mismatch"));
        }
    }
    Ok(())
}
