//! Discrete stationary Navier–Stokes state: Newton's method with Stokes
//! initial guess and continuation in the viscosity, plus the linearized
//! state equation.

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_convection, assemble_divergence, check_velocity, assemble_load, assemble_viscous, convection_action,
    pressure_mean_weights, ControlField, PressureGauge, SaddleSystem,
};
use crate::elements::{FeFunction, Field, MixedSpace};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use crate::sparse_linalg::{solve_saddle, LinearSolution};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Nonlinear residual norms, one per evaluated iterate.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Set when viscosity continuation was needed.
    pub damping_used: bool,
}

#[derive(Clone, Debug)]
pub struct StateSolution {
    pub y: FeFunction,
    pub p: FeFunction,
    pub report: NewtonReport,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    /// Relative tolerance: stop once `‖F‖ ≤ tol (1 + ‖load‖)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest `m` tried in the continuation `ν·2^m → ν`.
    pub max_continuation: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 20, max_continuation: 6 }
    }
}

/// Operators shared by every state, linearized and adjoint solve on one
/// space: the unit-viscosity Laplacian, the divergence with Dirichlet columns
/// removed, and the pressure gauge.
#[derive(Clone, Debug)]
pub struct FlowOperators<'a> {
    space: &'a MixedSpace,
    nu: f64,
    laplacian: SparseMatrix,
    divergence: SparseMatrix,
    gauge: PressureGauge,
}

impl<'a> FlowOperators<'a> {
    pub fn new(space: &'a MixedSpace, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Input(format!("viscosity must be positive, got {nu}")));
        }
        let mask = space.dirichlet_mask();
        let divergence = assemble_divergence(space).filter_map(|_, c, v| (!mask[c]).then_some(v));
        Ok(FlowOperators {
            space,
            nu,
            laplacian: assemble_viscous(space, 1.0),
            divergence,
            gauge: PressureGauge::PinFirstPressureDof { mean_weights: pressure_mean_weights(space) },
        })
    }

    pub fn space(&self) -> &'a MixedSpace {
        self.space
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Divergence matrix with Dirichlet columns removed.
    pub fn divergence(&self) -> &SparseMatrix {
        &self.divergence
    }

    fn mask(&self) -> &[bool] {
        self.space.dirichlet_mask()
    }

    fn masked(&self, mut v: Vec<f64>) -> Vec<f64> {
        for (x, &m) in v.iter_mut().zip(self.mask()) {
            if m {
                *x = 0.0;
            }
        }
        v
    }

    /// Dirichlet-eliminated velocity block `ν K + extra`.
    fn velocity_block(&self, nu: f64, extra: &[&SparseMatrix]) -> SparseMatrix {
        let mask = self.mask();
        let mut a = self.laplacian.scaled(nu);
        for m in extra {
            a = a.add(m);
        }
        let diag = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| (i, i, 1.0)).collect();
        a.filter_map(|r, c, v| (!mask[r] && !mask[c]).then_some(v))
            .add(&SparseMatrix::from_triplets(a.nrows(), a.ncols(), diag))
    }

    fn solve(&self, a: SparseMatrix, f: Vec<f64>, g: Vec<f64>) -> Result<LinearSolution> {
        let sys = SaddleSystem::new(a, self.divergence.clone(), self.masked(f), g, Some(self.gauge.clone()))?;
        solve_saddle(&sys)
    }

    fn zero_pressure_rhs(&self) -> Vec<f64> {
        vec![0.0; self.space.pressure_dof_count()]
    }

    fn into_pair(&self, sol: LinearSolution) -> (FeFunction, FeFunction) {
        // The system carries +Bᵀπ while the weak form carries −(p, div v).
        let p = sol.pressure.iter().map(|v| -v).collect();
        (
            FeFunction { field: Field::Velocity, coefficients: sol.velocity },
            FeFunction { field: Field::Pressure, coefficients: p },
        )
    }

    /// Stokes problem `ν(∇y, ∇v) − (p, div v) = load`, `(q, div y) = 0`.
    pub fn solve_stokes(&self, load: &[f64]) -> Result<(FeFunction, FeFunction)> {
        self.stokes_at(self.nu, load)
    }

    fn stokes_at(&self, nu: f64, load: &[f64]) -> Result<(FeFunction, FeFunction)> {
        let sol = self.solve(self.velocity_block(nu, &[]), load.to_vec(), self.zero_pressure_rhs())?;
        Ok(self.into_pair(sol))
    }

    /// Momentum and continuity residuals of the discrete state equation.
    fn residual(&self, nu: f64, load: &[f64], y: &FeFunction, p: &FeFunction) -> (Vec<f64>, Vec<f64>) {
        let ay = self.laplacian.mul_vec(&y.coefficients);
        let ny = convection_action(self.space, y);
        let btp = self.divergence.tr_mul_vec(&p.coefficients);
        let fm = (0..ay.len()).map(|i| nu * ay[i] + ny[i] - btp[i] - load[i]).collect();
        // Constant pressures test nothing; drop the rounding left in that direction.
        let mut fc = self.divergence.mul_vec(&y.coefficients);
        let mean = fc.iter().sum::<f64>() / fc.len().max(1) as f64;
        fc.iter_mut().for_each(|v| *v -= mean);
        (self.masked(fm), fc)
    }

    /// Newton's method for the state with load vector `load`.
    ///
    /// Starts from `initial` when given, otherwise from the Stokes solution.
    /// If Newton fails, retries with continuation from `ν·2^m` down to `ν`.
    pub fn solve_state_load(
        &self,
        load: &[f64],
        opts: &NewtonOptions,
        initial: Option<&StateSolution>,
    ) -> Result<StateSolution> {
        if !(opts.tol > 0.0) {
            return Err(Error::Input(format!("Newton tolerance must be positive, got {}", opts.tol)));
        }
        let start = match initial {
            Some(s) => (s.y.clone(), s.p.clone()),
            None => self.stokes_at(self.nu, load)?,
        };
        let first = self.newton(self.nu, load, opts, start)?;
        if first.report.converged {
            return Ok(first);
        }
        let mut last_report = first.report;
        for m in 1..=opts.max_continuation {
            match self.continuation(m, load, opts)? {
                Ok(sol) => return Ok(sol),
                Err(report) => last_report = report,
            }
        }
        last_report.damping_used = opts.max_continuation > 0;
        Err(Error::NonlinearSolve { report: last_report })
    }

    fn continuation(
        &self,
        m: usize,
        load: &[f64],
        opts: &NewtonOptions,
    ) -> Result<std::result::Result<StateSolution, NewtonReport>> {
        let mut nu = self.nu * 2f64.powi(m as i32);
        let mut current = self.stokes_at(nu, load)?;
        loop {
            let sol = self.newton(nu, load, opts, current)?;
            if !sol.report.converged {
                return Ok(Err(sol.report));
            }
            if nu <= self.nu {
                let mut sol = sol;
                sol.report.damping_used = true;
                return Ok(Ok(sol));
            }
            nu = (nu / 2.0).max(self.nu);
            current = (sol.y, sol.p);
        }
    }

    fn newton(
        &self,
        nu: f64,
        load: &[f64],
        opts: &NewtonOptions,
        (mut y, mut p): (FeFunction, FeFunction),
    ) -> Result<StateSolution> {
        let target = opts.tol * (1.0 + norm(load));
        let mut report = NewtonReport::default();
        loop {
            let (fm, fc) = self.residual(nu, load, &y, &p);
            let r = (norm_sq(&fm) + norm_sq(&fc)).sqrt();
            report.residual_history.push(r);
            if r <= target {
                report.converged = true;
                return Ok(StateSolution { y, p, report });
            }
            let initial = report.residual_history[0];
            if report.iterations >= opts.max_iter || !r.is_finite() || r > 1e6 * initial.max(target) {
                return Ok(StateSolution { y, p, report });
            }
            let (c1, c2) = assemble_convection(self.space, &y);
            let j = self.velocity_block(nu, &[&c1, &c2]);
            let rhs_m = fm.iter().map(|v| -v).collect();
            let rhs_c = fc.iter().map(|v| -v).collect();
            let step = match self.solve(j, rhs_m, rhs_c) {
                Ok(s) => s,
                Err(Error::Solver { .. }) => return Ok(StateSolution { y, p, report }),
                Err(e) => return Err(e),
            };
            for (a, d) in y.coefficients.iter_mut().zip(&step.velocity) {
                *a += d;
            }
            for (a, d) in p.coefficients.iter_mut().zip(&step.pressure) {
                *a -= d;
            }
            report.iterations += 1;
        }
    }

    /// Linearized state at `at_y`: `ν(∇φ, ∇v) + b(at_y; φ, v) + b(φ; at_y, v) − (ζ, div v) = g`,
    /// `(q, div φ) = 0`.
    pub fn solve_linearized(&self, at_y: &FeFunction, g: &[f64]) -> Result<(FeFunction, FeFunction)> {
        check_velocity(self.space, at_y)?;
        if g.len() != self.space.velocity_dof_count() {
            return Err(Error::Input(format!("load has {} entries, expected {}", g.len(), self.space.velocity_dof_count())));
        }
        let (c1, c2) = assemble_convection(self.space, at_y);
        let sol = self.solve(self.velocity_block(self.nu, &[&c1, &c2]), g.to_vec(), self.zero_pressure_rhs())?;
        Ok(self.into_pair(sol))
    }

    /// Solves with an already assembled, Dirichlet-eliminated velocity block.
    pub(crate) fn solve_with_block(&self, block: SparseMatrix, rhs: &[f64]) -> Result<(FeFunction, FeFunction)> {
        let sol = self.solve(block, rhs.to_vec(), self.zero_pressure_rhs())?;
        Ok(self.into_pair(sol))
    }
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

/// Solves the discrete state equation with control `u`.
pub fn solve_state(space: &MixedSpace, nu: f64, u: &dyn ControlField, tol: f64, max_iter: usize) -> Result<StateSolution> {
    let ops = FlowOperators::new(space, nu)?;
    let opts = NewtonOptions { tol, max_iter, ..NewtonOptions::default() };
    ops.solve_state_load(&assemble_load(space, u), &opts, None)
}

/// Linearized state solve `S'(u)g` at `at_y` with right-hand side vector `g`.
pub fn solve_linearized(space: &MixedSpace, nu: f64, at_y: &FeFunction, g: &[f64]) -> Result<(FeFunction, FeFunction)> {
    FlowOperators::new(space, nu)?.solve_linearized(at_y, g)
}
