//! Direct solution of saddle-point systems `[A Bᵀ; B 0] (x, π) = (f, g)`.
//!
//! The full block matrix is factored by a sparse LU with fill-reducing
//! ordering (faer), with the pressure unknowns rescaled so both blocks have
//! comparable magnitude. The gauge pins pressure dof 0 during the solve; the
//! returned pressure is then shifted to zero mean.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::assembly::{PressureGauge, SaddleSystem};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Relative residual every returned solution must meet.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSolution {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    /// `‖[A Bᵀ; B 0](x, π) − (f, g)‖₂`, recomputed after the solve.
    pub residual_norm: f64,
    /// Refinement sweeps after the direct solve.
    pub iterations: usize,
}

/// A factored saddle-point operator, reusable for several right-hand sides.
pub struct SaddleFactorization {
    a: SparseMatrix,
    b: SparseMatrix,
    gauge: Option<PressureGauge>,
    /// Pressure unknowns are factored as `π / scale` to balance `A` against `B`.
    scale: f64,
    lu: Lu<usize, f64>,
}

impl SaddleFactorization {
    pub fn new(a: &SparseMatrix, b: &SparseMatrix, gauge: Option<&PressureGauge>) -> Result<Self> {
        let n = a.nrows();
        let m = b.nrows();
        if a.ncols() != n || b.ncols() != n {
            return Err(Error::Input(format!(
                "inconsistent saddle blocks: A {}x{}, B {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if gauge.is_none() && m > 0 && constant_in_kernel(b) {
            return Err(Error::Solver {
                reason: "singular system: constant pressures lie in the kernel of Bᵀ and no gauge is set".into(),
                residual: f64::INFINITY,
            });
        }
        let pinned = pinned_row(gauge, m).map(|r| n + r);
        let scale = if b.max_abs() > 0.0 && a.max_abs() > 0.0 { a.max_abs() / b.max_abs() } else { 1.0 };
        let mut trips = Vec::with_capacity(a.nnz() + 2 * b.nnz() + 1);
        for (r, c, v) in a.triplets() {
            trips.push(Triplet::new(r, c, v));
        }
        for (r, c, v) in b.triplets() {
            if Some(n + r) != pinned {
                trips.push(Triplet::new(n + r, c, scale * v));
                trips.push(Triplet::new(c, n + r, scale * v));
            }
        }
        if let Some(p) = pinned {
            trips.push(Triplet::new(p, p, 1.0));
        }
        let k = SparseColMat::<usize, f64>::try_new_from_triplets(n + m, n + m, &trips)
            .map_err(|e| Error::Solver { reason: format!("matrix construction failed: {e:?}"), residual: f64::INFINITY })?;
        let lu = k
            .sp_lu()
            .map_err(|e| Error::Solver { reason: format!("sparse LU failed: {e:?}"), residual: f64::INFINITY })?;
        Ok(SaddleFactorization { a: a.clone(), b: b.clone(), gauge: gauge.cloned(), scale, lu })
    }

    fn n(&self) -> usize {
        self.a.nrows()
    }

    fn m(&self) -> usize {
        self.b.nrows()
    }

    fn back_substitute(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut r = Mat::from_fn(rhs.len(), 1, |i, _| if i < n { rhs[i] } else { self.scale * rhs[i] });
        if let Some(p) = pinned_row(self.gauge.as_ref(), self.m()) {
            r[(n + p, 0)] = 0.0;
        }
        self.lu.solve_in_place(r.as_mut());
        (0..rhs.len()).map(|i| if i < n { r[(i, 0)] } else { self.scale * r[(i, 0)] }).collect()
    }

    /// `[A Bᵀ; B 0] (x, π) − (f, g)` on the unpinned system.
    fn residual(&self, sol: &[f64], rhs: &[f64]) -> Vec<f64> {
        let (x, pi) = sol.split_at(self.n());
        let mut r = self.a.mul_vec(x);
        for (ri, bt) in r.iter_mut().zip(self.b.tr_mul_vec(pi)) {
            *ri += bt;
        }
        r.extend(self.b.mul_vec(x));
        r.iter_mut().zip(rhs).for_each(|(ri, b)| *ri -= b);
        r
    }

    fn mean_correct(&self, pi: &mut [f64]) {
        if let Some(PressureGauge::PinFirstPressureDof { mean_weights }) = &self.gauge {
            let total: f64 = mean_weights.iter().sum();
            let mean = mean_weights.iter().zip(pi.iter()).map(|(w, p)| w * p).sum::<f64>() / total;
            pi.iter_mut().for_each(|p| *p -= mean);
        }
    }

    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<LinearSolution> {
        if f.len() != self.n() || g.len() != self.m() {
            return Err(Error::Input(format!(
                "right-hand side sizes {} and {} do not match the system ({}, {})",
                f.len(),
                g.len(),
                self.n(),
                self.m()
            )));
        }
        let rhs: Vec<f64> = f.iter().chain(g).copied().collect();
        let rhs_norm = norm(&rhs);
        let mut sol = self.back_substitute(&rhs);
        let mut iterations = 0;
        let finalize = |sol: &mut Vec<f64>| {
            self.mean_correct(&mut sol[self.n()..]);
            self.residual(sol, &rhs)
        };
        let mut res = finalize(&mut sol);
        let mut res_norm = norm(&res);
        while res_norm > 1e-14 * rhs_norm && iterations < 2 && sol.iter().all(|v| v.is_finite()) {
            let corr = self.back_substitute(&res);
            sol.iter_mut().zip(&corr).for_each(|(s, c)| *s -= c);
            iterations += 1;
            res = finalize(&mut sol);
            let next = norm(&res);
            if !(next < res_norm) {
                res_norm = next;
                break;
            }
            res_norm = next;
        }
        if !sol.iter().all(|v| v.is_finite()) || !res_norm.is_finite() {
            return Err(Error::Solver { reason: "non-finite solution".into(), residual: res_norm });
        }
        let relative = if rhs_norm > 0.0 { res_norm / rhs_norm } else { res_norm };
        if relative > RESIDUAL_TOL {
            return Err(Error::Solver { reason: "residual target not met".into(), residual: relative });
        }
        let pressure = sol.split_off(self.n());
        Ok(LinearSolution { velocity: sol, pressure, residual_norm: res_norm, iterations })
    }
}

fn pinned_row(gauge: Option<&PressureGauge>, m: usize) -> Option<usize> {
    match gauge {
        Some(PressureGauge::PinFirstPressureDof { .. }) if m > 0 => Some(0),
        _ => None,
    }
}

/// Whether `Bᵀ 1 = 0` up to rounding.
fn constant_in_kernel(b: &SparseMatrix) -> bool {
    let s = b.tr_mul_vec(&vec![1.0; b.nrows()]);
    let scale = b.max_abs() * (b.nrows() as f64).sqrt();
    s.iter().all(|v| v.abs() <= 1e-12 * scale)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves a saddle system with its gauge (Dirichlet conditions already applied).
pub fn solve_saddle(sys: &SaddleSystem) -> Result<LinearSolution> {
    SaddleFactorization::new(&sys.a, &sys.b, sys.gauge.as_ref())?.solve(&sys.f, &sys.g)
}

/// Solves `A x = b` for a general square sparse matrix.
pub fn solve_sparse(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let empty = SparseMatrix::zeros(0, a.ncols());
    Ok(SaddleFactorization::new(a, &empty, None)?.solve(b, &[])?.velocity)
}
