//! Reduced cost, gradient, projections and the optimization loops for the
//! fully discrete (piecewise constant) and semidiscrete (variational)
//! control schemes.

use serde::{Deserialize, Serialize};

use crate::adjoint::{AdjointSolution, TrackingData};
use crate::assembly::{assemble_load, trilinear, ControlField};
use crate::elements::{build_space, ElementPair, FeFunction, MixedSpace};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::nse_state::{FlowOperators, NewtonOptions, StateSolution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Piecewise constant controls.
    #[serde(rename = "fully")]
    FullyDiscrete,
    /// Undiscretized controls, represented through the projection formula.
    #[serde(rename = "semi")]
    Semidiscrete,
}

impl Scheme {
    pub fn short_name(self) -> &'static str {
        match self {
            Scheme::FullyDiscrete => "fully",
            Scheme::Semidiscrete => "semi",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    ProjectedGradientArmijo,
    DampedFixedPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlProblem {
    pub nu: f64,
    pub alpha: f64,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub tracking: TrackingData,
    pub scheme: Scheme,
    pub pair: ElementPair,
}

impl ControlProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Input(format!("viscosity must be positive, got {}", self.nu)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Input(format!("regularization alpha must be positive, got {}", self.alpha)));
        }
        if !(self.lower[0] < self.upper[0] && self.lower[1] < self.upper[1]) {
            return Err(Error::Input(format!("bounds must satisfy a < b componentwise, got {:?} and {:?}", self.lower, self.upper)));
        }
        Ok(())
    }

    pub fn project(&self, v: [f64; 2]) -> [f64; 2] {
        project_box(v, self.lower, self.upper)
    }

    pub fn is_feasible(&self, v: [f64; 2]) -> bool {
        (0..2).all(|i| self.lower[i] <= v[i] && v[i] <= self.upper[i])
    }
}

/// `Π_[a,b](v) = min{b, max{v, a}}` componentwise.
pub fn project_box(v: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [v[0].max(a[0]).min(b[0]), v[1].max(a[1]).min(b[1])]
}

/// Per-cell means `|T|⁻¹ ∫_T f`.
pub fn project_l2_piecewise_constant(space: &MixedSpace, f: &dyn ControlField) -> Vec<[f64; 2]> {
    let tab = space.tabulation();
    (0..space.mesh().num_cells())
        .map(|c| {
            let mut acc = [0.0; 2];
            for q in 0..tab.num_points() {
                let w = space.quad_weight(tab, c, q);
                let v = f.value(c, q, space.quad_point(tab, c, q));
                acc[0] += w * v[0];
                acc[1] += w * v[1];
            }
            let a = space.mesh().cell_area(c);
            [acc[0] / a, acc[1] / a]
        })
        .collect()
}

/// A control in its scheme-dependent representation.
#[derive(Clone, Debug)]
pub enum ControlIterate {
    /// One value per cell.
    Cellwise(Vec<[f64; 2]>),
    /// `u = Π_[a,b](−z/α)`, cached at the assembly quadrature points.
    Closure { z: FeFunction, values: Vec<[f64; 2]>, points_per_cell: usize },
    /// Values at the assembly quadrature points, cell-major.
    Sampled { values: Vec<[f64; 2]>, points_per_cell: usize },
}

impl ControlIterate {
    pub fn values(&self) -> &[[f64; 2]] {
        match self {
            ControlIterate::Cellwise(v) => v,
            ControlIterate::Closure { values, .. } | ControlIterate::Sampled { values, .. } => values,
        }
    }

    /// Closure generator, if any.
    pub fn generator(&self) -> Option<&FeFunction> {
        match self {
            ControlIterate::Closure { z, .. } => Some(z),
            _ => None,
        }
    }

    /// Value at an arbitrary point of the domain. Sampled controls have no
    /// pointwise representation away from their quadrature points.
    pub fn evaluate_at(&self, space: &MixedSpace, problem: &ControlProblem, x: Point) -> Result<[f64; 2]> {
        match self {
            ControlIterate::Cellwise(v) => Ok(v[space.mesh().locate_point(x)?.cell_index]),
            ControlIterate::Closure { z, .. } => {
                let zx = space.evaluate_velocity(z, x)?;
                Ok(problem.project([-zx[0] / problem.alpha, -zx[1] / problem.alpha]))
            }
            ControlIterate::Sampled { .. } => {
                Err(Error::Input("sampled controls can only be evaluated at their quadrature points".into()))
            }
        }
    }
}

impl ControlField for ControlIterate {
    fn value(&self, cell: usize, q: usize, _: Point) -> [f64; 2] {
        match self {
            ControlIterate::Cellwise(v) => v[cell],
            ControlIterate::Closure { values, points_per_cell, .. }
            | ControlIterate::Sampled { values, points_per_cell } => values[cell * points_per_cell + q],
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub control: ControlIterate,
    pub state: StateSolution,
    pub adjoint: AdjointSolution,
    /// Cost of the start and of every accepted step. The last entry belongs
    /// to the closing projection step, which is not line-searched.
    pub cost_history: Vec<f64>,
    /// Stationarity measure `‖u − Π(u − d)‖` at the returned control.
    pub vi_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizeOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub strategy: Strategy,
    pub newton: NewtonOptions,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            tol: 1e-11,
            max_iter: 200,
            strategy: Strategy::ProjectedGradientArmijo,
            newton: NewtonOptions { tol: 1e-12, ..NewtonOptions::default() },
        }
    }
}

const ARMIJO_SIGMA: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

/// The reduced problem `j_h(u) = J(y_h(u), u)` on a fixed mesh.
pub struct ReducedProblem<'a> {
    problem: &'a ControlProblem,
    ops: FlowOperators<'a>,
    /// L² weight of every control entry.
    weights: Vec<f64>,
    pub newton: NewtonOptions,
}

impl<'a> ReducedProblem<'a> {
    pub fn new(problem: &'a ControlProblem, space: &'a MixedSpace) -> Result<Self> {
        problem.validate()?;
        if space.pair() != problem.pair {
            return Err(Error::Input(format!(
                "space uses {:?} but the problem asks for {:?}",
                space.pair(),
                problem.pair
            )));
        }
        problem.tracking.check_interior(space)?;
        let mesh = space.mesh();
        let weights = match problem.scheme {
            Scheme::FullyDiscrete => (0..mesh.num_cells()).map(|c| mesh.cell_area(c)).collect(),
            Scheme::Semidiscrete => {
                let tab = space.tabulation();
                (0..mesh.num_cells())
                    .flat_map(|c| (0..tab.num_points()).map(move |q| space.quad_weight(tab, c, q)))
                    .collect()
            }
        };
        Ok(ReducedProblem {
            problem,
            ops: FlowOperators::new(space, problem.nu)?,
            weights,
            newton: OptimizeOptions::default().newton,
        })
    }

    pub fn space(&self) -> &'a MixedSpace {
        self.ops.space()
    }

    pub fn problem(&self) -> &ControlProblem {
        self.problem
    }

    pub fn operators(&self) -> &FlowOperators<'a> {
        &self.ops
    }

    /// Number of values in the control representation.
    pub fn control_len(&self) -> usize {
        self.weights.len()
    }

    pub fn points_per_cell(&self) -> usize {
        self.space().tabulation().num_points()
    }

    /// L² inner product in the control representation.
    pub fn inner(&self, a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
        self.weights.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * (x[0] * y[0] + x[1] * y[1])).sum()
    }

    pub fn norm(&self, a: &[[f64; 2]]) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// Wraps raw values in the scheme's representation.
    pub fn control_from_values(&self, values: Vec<[f64; 2]>) -> Result<ControlIterate> {
        if values.len() != self.control_len() {
            return Err(Error::Input(format!("control has {} values, expected {}", values.len(), self.control_len())));
        }
        Ok(match self.problem.scheme {
            Scheme::FullyDiscrete => ControlIterate::Cellwise(values),
            Scheme::Semidiscrete => ControlIterate::Sampled { values, points_per_cell: self.points_per_cell() },
        })
    }

    /// `Π_[a,b](0)`, the default initial control.
    pub fn initial_control(&self) -> ControlIterate {
        let v = self.problem.project([0.0, 0.0]);
        self.control_from_values(vec![v; self.control_len()]).unwrap()
    }

    /// Values of the velocity `z` matching the control representation: cell
    /// means for piecewise constants, quadrature-point values otherwise.
    pub fn represent(&self, z: &FeFunction) -> Vec<[f64; 2]> {
        let space = self.space();
        let tab = space.tabulation();
        let at_points = (0..space.mesh().num_cells()).flat_map(|c| {
            (0..tab.num_points()).map(move |q| space.combine_velocity(&z.coefficients, c, &tab.vel[q], &tab.vel_dbary[q]).0)
        });
        match self.problem.scheme {
            Scheme::Semidiscrete => at_points.collect(),
            Scheme::FullyDiscrete => {
                let sampled = ControlIterate::Sampled { values: at_points.collect(), points_per_cell: tab.num_points() };
                project_l2_piecewise_constant(space, &sampled)
            }
        }
    }

    /// The control produced by the projection formula from the adjoint `z`.
    pub fn closure(&self, z: &FeFunction) -> ControlIterate {
        let a = self.problem.alpha;
        let values: Vec<[f64; 2]> = self.represent(z).iter().map(|v| self.problem.project([-v[0] / a, -v[1] / a])).collect();
        match self.problem.scheme {
            Scheme::FullyDiscrete => ControlIterate::Cellwise(values),
            Scheme::Semidiscrete => {
                ControlIterate::Closure { z: z.clone(), values, points_per_cell: self.points_per_cell() }
            }
        }
    }

    pub fn solve_state(&self, u: &ControlIterate, warm: Option<&StateSolution>) -> Result<StateSolution> {
        self.ops.solve_state_load(&assemble_load(self.space(), u), &self.newton, warm)
    }

    pub fn solve_adjoint(&self, y: &FeFunction) -> Result<AdjointSolution> {
        self.ops.solve_adjoint(y, &self.problem.tracking)
    }

    /// `J(y, u) = ½ Σ |y(t) − y_t|² + (α/2) ‖u‖²`.
    pub fn cost(&self, y: &FeFunction, u: &ControlIterate) -> Result<f64> {
        let mis = self.problem.tracking.mismatch(self.space(), y)?;
        let track: f64 = mis.iter().map(|m| m[0] * m[0] + m[1] * m[1]).sum();
        let un = self.norm(u.values());
        Ok(0.5 * track + 0.5 * self.problem.alpha * un * un)
    }

    /// `j_h(u)` together with the state it was computed from.
    pub fn evaluate(&self, u: &ControlIterate, warm: Option<&StateSolution>) -> Result<(f64, StateSolution)> {
        let state = self.solve_state(u, warm)?;
        Ok((self.cost(&state.y, u)?, state))
    }

    /// Riesz representative `d = z + αu` of `j_h'(u)` in the control representation.
    pub fn gradient_from_adjoint(&self, u: &ControlIterate, adjoint: &AdjointSolution) -> Vec<[f64; 2]> {
        let a = self.problem.alpha;
        self.represent(&adjoint.z).iter().zip(u.values()).map(|(z, u)| [z[0] + a * u[0], z[1] + a * u[1]]).collect()
    }

    /// `‖u − Π(u − d)‖`.
    pub fn stationarity(&self, u: &ControlIterate, d: &[[f64; 2]]) -> f64 {
        let r: Vec<[f64; 2]> = u
            .values()
            .iter()
            .zip(d)
            .map(|(u, d)| {
                let p = self.problem.project([u[0] - d[0], u[1] - d[1]]);
                [u[0] - p[0], u[1] - p[1]]
            })
            .collect();
        self.norm(&r)
    }

    /// `j''(u) g² = α‖g‖² − 2 b(φ; φ, z) + Σ_t |φ(t)|²` with `φ = S'(u) g`.
    pub fn second_order_value(
        &self,
        state: &StateSolution,
        adjoint: &AdjointSolution,
        g: &ControlIterate,
    ) -> Result<f64> {
        let space = self.space();
        let (phi, _) = self.ops.solve_linearized(&state.y, &assemble_load(space, g))?;
        let gn = self.norm(g.values());
        let point_sum: f64 = self
            .problem
            .tracking
            .points
            .iter()
            .map(|&t| {
                let v = space.evaluate_velocity(&phi, t)?;
                Ok(v[0] * v[0] + v[1] * v[1])
            })
            .sum::<Result<f64>>()?;
        Ok(self.problem.alpha * gn * gn - 2.0 * trilinear(space, &phi, &phi, &adjoint.z) + point_sum)
    }

    /// Largest pointwise gap between `u` and the projection formula. Fully
    /// discrete controls are compared with `Π(−α⁻¹ |T|⁻¹∫_T z)` cell by cell;
    /// closures are re-evaluated from their generator at every quadrature point.
    pub fn projection_identity_gap(&self, u: &ControlIterate, adjoint: &AdjointSolution) -> f64 {
        let z = match u {
            ControlIterate::Closure { z, .. } => z,
            _ => &adjoint.z,
        };
        let a = self.problem.alpha;
        u.values()
            .iter()
            .zip(self.represent(z))
            .map(|(u, z)| {
                let p = self.problem.project([-z[0] / a, -z[1] / a]);
                (u[0] - p[0]).abs().max((u[1] - p[1]).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Smallest `(z + αu, v − u) / scale` over `samples` random feasible `v`,
    /// with `scale = 1 + ‖d‖‖v − u‖`.
    pub fn sampled_variational_inequality(
        &self,
        u: &ControlIterate,
        adjoint: &AdjointSolution,
        samples: usize,
        seed: u64,
    ) -> f64 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = self.gradient_from_adjoint(u, adjoint);
        let dn = self.norm(&d);
        let (lo, hi) = (self.problem.lower, self.problem.upper);
        (0..samples)
            .map(|_| {
                let dv: Vec<[f64; 2]> = u
                    .values()
                    .iter()
                    .map(|u| [rng.gen_range(lo[0]..=hi[0]) - u[0], rng.gen_range(lo[1]..=hi[1]) - u[1]])
                    .collect();
                self.inner(&d, &dv) / (1.0 + dn * self.norm(&dv))
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn assert_feasible(&self, u: &ControlIterate) -> Result<()> {
        match u.values().iter().find(|v| !self.problem.is_feasible(**v)) {
            Some(v) => Err(Error::Opt(format!("iterate left the admissible box: {v:?}"))),
            None => Ok(()),
        }
    }

    /// Runs the optimization loop from `start` (default `Π_[a,b](0)`).
    pub fn optimize(&self, opts: &OptimizeOptions, start: Option<ControlIterate>) -> Result<OptimizationResult> {
        if !(opts.tol > 0.0) {
            return Err(Error::Input(format!("optimization tolerance must be positive, got {}", opts.tol)));
        }
        let mut u = start.unwrap_or_else(|| self.initial_control());
        self.assert_feasible(&u)?;
        let (mut j, mut state) = self.evaluate(&u, None)?;
        let mut cost_history = vec![j];
        let mut theta = 1.0;
        let mut iterations = 0;
        loop {
            let adjoint = self.solve_adjoint(&state.y)?;
            let d = self.gradient_from_adjoint(&u, &adjoint);
            let measure = self.stationarity(&u, &d);
            if measure <= opts.tol {
                return self.finish(state, adjoint, cost_history, iterations);
            }
            if iterations >= opts.max_iter {
                return Ok(OptimizationResult {
                    control: u,
                    state,
                    adjoint,
                    cost_history,
                    vi_residual: measure,
                    iterations,
                    converged: false,
                });
            }
            let closure = self.closure(&adjoint.z);
            let (next, j_next, state_next) = match opts.strategy {
                Strategy::ProjectedGradientArmijo => self.armijo(&u, j, &d, closure, &state)?,
                Strategy::DampedFixedPoint => {
                    let mut step = None;
                    while theta >= MIN_STEP {
                        let trial = if theta == 1.0 {
                            closure.clone()
                        } else {
                            let v = u
                                .values()
                                .iter()
                                .zip(closure.values())
                                .map(|(a, b)| [(1.0 - theta) * a[0] + theta * b[0], (1.0 - theta) * a[1] + theta * b[1]])
                                .collect();
                            self.control_from_values(v)?
                        };
                        let (jt, st) = self.evaluate(&trial, Some(&state))?;
                        if jt <= j + roundoff(j, jt) {
                            step = Some((trial, jt, st));
                            break;
                        }
                        theta /= 2.0;
                    }
                    step.ok_or_else(|| Error::Opt(format!("fixed-point damping fell below {MIN_STEP} at iteration {iterations}")))?
                }
            };
            self.assert_feasible(&next)?;
            u = next;
            j = j_next;
            state = state_next;
            cost_history.push(j);
            iterations += 1;
        }
    }

    fn armijo(
        &self,
        u: &ControlIterate,
        j: f64,
        d: &[[f64; 2]],
        closure: ControlIterate,
        state: &StateSolution,
    ) -> Result<(ControlIterate, f64, StateSolution)> {
        // With s = 1/α the projected step u − s d is exactly the projection
        // formula applied to the adjoint.
        let mut s = 1.0 / self.problem.alpha;
        let mut trial = closure;
        while s >= MIN_STEP {
            let du: Vec<[f64; 2]> = trial.values().iter().zip(u.values()).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
            let slope = self.inner(d, &du);
            let (jt, st) = self.evaluate(&trial, Some(state))?;
            if jt <= j + ARMIJO_SIGMA * slope + roundoff(j, jt) {
                return Ok((trial, jt, st));
            }
            s /= 2.0;
            let v = u
                .values()
                .iter()
                .zip(d)
                .map(|(u, d)| self.problem.project([u[0] - s * d[0], u[1] - s * d[1]]))
                .collect();
            trial = self.control_from_values(v)?;
        }
        Err(Error::Opt(format!("Armijo line search stagnated (step below {MIN_STEP}, cost {j:e})")))
    }

    /// Final projection-formula step so the returned control is generated by
    /// an adjoint, then state and adjoint at that control.
    fn finish(
        &self,
        state: StateSolution,
        adjoint: AdjointSolution,
        mut cost_history: Vec<f64>,
        iterations: usize,
    ) -> Result<OptimizationResult> {
        let control = self.closure(&adjoint.z);
        self.assert_feasible(&control)?;
        let (j, state) = self.evaluate(&control, Some(&state))?;
        let adjoint = self.solve_adjoint(&state.y)?;
        let d = self.gradient_from_adjoint(&control, &adjoint);
        let vi_residual = self.stationarity(&control, &d);
        cost_history.push(j);
        Ok(OptimizationResult { control, state, adjoint, cost_history, vi_residual, iterations, converged: true })
    }
}

/// Slack for cost comparisons that are below the rounding level of `j`.
fn roundoff(a: f64, b: f64) -> f64 {
    16.0 * f64::EPSILON * a.abs().max(b.abs())
}

/// `J(y, u)` for a problem on `space`.
pub fn cost(problem: &ControlProblem, space: &MixedSpace, y: &FeFunction, u: &ControlIterate) -> Result<f64> {
    ReducedProblem::new(problem, space)?.cost(y, u)
}

/// Solves state and adjoint at `u` and returns `d = z + αu` with both solutions.
pub fn reduced_gradient(
    problem: &ControlProblem,
    space: &MixedSpace,
    u: &ControlIterate,
) -> Result<(Vec<[f64; 2]>, StateSolution, AdjointSolution)> {
    let rp = ReducedProblem::new(problem, space)?;
    let state = rp.solve_state(u, None)?;
    let adjoint = rp.solve_adjoint(&state.y)?;
    Ok((rp.gradient_from_adjoint(u, &adjoint), state, adjoint))
}

/// Builds the problem's space on `mesh` and optimizes.
pub fn optimize(problem: &ControlProblem, mesh: &Mesh, opts: &OptimizeOptions) -> Result<(MixedSpace, OptimizationResult)> {
    let space = build_space(mesh, problem.pair);
    let result = {
        let mut rp = ReducedProblem::new(problem, &space)?;
        rp.newton = opts.newton;
        rp.optimize(opts, None)?
    };
    Ok((space, result))
}

/// `j''(u) g²` at `u`.
pub fn second_order_value(problem: &ControlProblem, space: &MixedSpace, u: &ControlIterate, g: &ControlIterate) -> Result<f64> {
    let rp = ReducedProblem::new(problem, space)?;
    let state = rp.solve_state(u, None)?;
    let adjoint = rp.solve_adjoint(&state.y)?;
    rp.second_order_value(&state, &adjoint, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{Analytic, Constant};
    use crate::mesh::Rect;
    use proptest::prelude::*;
    use super::Strategy;

    fn problem(scheme: Scheme, pair: ElementPair, tracking: TrackingData) -> ControlProblem {
        ControlProblem { nu: 1.0, alpha: 0.1, lower: [-0.75; 2], upper: [0.75; 2], tracking, scheme, pair }
    }

    fn space(n: usize, pair: ElementPair) -> MixedSpace {
        build_space(&Mesh::build_structured(n, n, Rect::UNIT).unwrap(), pair)
    }

    fn benchmark_tracking() -> TrackingData {
        TrackingData::new(vec![[0.25, 0.25], [0.75, 0.375], [0.375, 0.75]], vec![[1.0, 1.0], [-1.0, 0.5], [0.5, -1.0]])
            .unwrap()
    }

    proptest! {
        #[test]
        fn projection_properties(v0 in -5.0..5.0f64, v1 in -5.0..5.0f64, lo in -2.0..0.0f64, w in 0.1..3.0f64) {
            let a = [lo, lo - 0.5];
            let b = [lo + w, lo + w];
            let p = project_box([v0, v1], a, b);
            prop_assert_eq!(project_box(p, a, b), p);
            prop_assert!(a[0] <= p[0] && p[0] <= b[0] && a[1] <= p[1] && p[1] <= b[1]);
            if a[0] <= v0 && v0 <= b[0] { prop_assert_eq!(p[0], v0); }
        }
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_box([2.5, -3.0], [-1.0; 2], [1.0; 2]), [1.0, -1.0]);
        assert_eq!(project_box([0.2, -0.3], [-1.0; 2], [1.0; 2]), [0.2, -0.3]);
    }

    #[test]
    fn piecewise_constant_projection() {
        let s = space(4, ElementPair::Mini);
        let c = project_l2_piecewise_constant(&s, &Constant([0.3, -2.0]));
        assert!(c.iter().all(|v| (v[0] - 0.3).abs() < 1e-14 && (v[1] + 2.0).abs() < 1e-14));
        let aff = project_l2_piecewise_constant(&s, &Analytic(|p: Point| [2.0 * p[0] - p[1], 1.0 + p[1]]));
        for (cell, v) in aff.iter().enumerate() {
            let m = s.mesh().centroid(cell);
            assert!((v[0] - (2.0 * m[0] - m[1])).abs() < 1e-14 && (v[1] - 1.0 - m[1]).abs() < 1e-14);
        }
        let bounded = project_l2_piecewise_constant(&s, &Analytic(|p: Point| [(9.0 * p[0]).sin(), (7.0 * p[1]).cos()]));
        assert!(bounded.iter().all(|v| v[0].abs() <= 1.0 && v[1].abs() <= 1.0));
    }

    #[test]
    fn cost_examples() {
        let s = space(4, ElementPair::TaylorHood);
        let zero_y = FeFunction::zeros(&s, crate::elements::Field::Velocity);
        let one = TrackingData::new(vec![[0.5, 0.5]], vec![[1.0, 0.0]]).unwrap();
        let mut p = problem(Scheme::FullyDiscrete, ElementPair::TaylorHood, one);
        let rp = ReducedProblem::new(&p, &s).unwrap();
        let zero_u = rp.control_from_values(vec![[0.0; 2]; rp.control_len()]).unwrap();
        assert_eq!(rp.cost(&zero_y, &zero_u).unwrap(), 0.5);
        p.tracking = TrackingData::new(vec![[0.5, 0.5]], vec![[0.0, 0.0]]).unwrap();
        assert_eq!(cost(&p, &s, &zero_y, &zero_u).unwrap(), 0.0);
        p.tracking = TrackingData::empty();
        p.alpha = 2.0;
        for scheme in [Scheme::FullyDiscrete, Scheme::Semidiscrete] {
            p.scheme = scheme;
            p.upper = [2.0; 2];
            let rp = ReducedProblem::new(&p, &s).unwrap();
            let u = rp.control_from_values(vec![[1.0, 0.0]; rp.control_len()]).unwrap();
            assert!((rp.cost(&zero_y, &u).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_problems() {
        let s = space(2, ElementPair::TaylorHood);
        let mut p = problem(Scheme::FullyDiscrete, ElementPair::TaylorHood, TrackingData::empty());
        p.alpha = 0.0;
        assert!(matches!(ReducedProblem::new(&p, &s), Err(Error::Input(_))));
        p.alpha = 1.0;
        p.upper = [-0.75, 1.0];
        assert!(matches!(ReducedProblem::new(&p, &s), Err(Error::Input(_))));
        p.upper = [1.0; 2];
        p.pair = ElementPair::Mini;
        assert!(ReducedProblem::new(&p, &s).is_err());
    }

    #[test]
    fn zero_mismatch_gradient_is_alpha_u() {
        let s = space(4, ElementPair::Mini);
        let pts = vec![[0.3, 0.6]];
        let mut p = problem(Scheme::Semidiscrete, ElementPair::Mini, TrackingData::new(pts.clone(), vec![[0.0; 2]]).unwrap());
        let rp = ReducedProblem::new(&p, &s).unwrap();
        let u = rp.control_from_values(vec![[0.4, -0.2]; rp.control_len()]).unwrap();
        let st = rp.solve_state(&u, None).unwrap();
        p.tracking = TrackingData::new(pts, vec![s.evaluate_velocity(&st.y, [0.3, 0.6]).unwrap()]).unwrap();
        let (d, _, adj) = reduced_gradient(&p, &s, &u).unwrap();
        assert_eq!(adj.z.max_abs(), 0.0);
        assert!(d.iter().all(|v| (v[0] - 0.04).abs() < 1e-15 && (v[1] + 0.02).abs() < 1e-15));
    }

    #[test]
    fn zero_mismatch_problem_optimum_is_zero() {
        let s = space(4, ElementPair::TaylorHood);
        let tracking = TrackingData::new(vec![[0.5, 0.5]], vec![[0.0; 2]]).unwrap();
        for scheme in [Scheme::FullyDiscrete, Scheme::Semidiscrete] {
            for strategy in [Strategy::ProjectedGradientArmijo, Strategy::DampedFixedPoint] {
                let p = problem(scheme, ElementPair::TaylorHood, tracking.clone());
                let opts = OptimizeOptions { strategy, ..OptimizeOptions::default() };
                let (_, r) = optimize(&p, s.mesh(), &opts).unwrap();
                assert!(r.converged);
                assert!(r.control.values().iter().all(|v| *v == [0.0, 0.0]));
                assert_eq!(*r.cost_history.last().unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn both_strategies_agree_and_decrease() {
        let s = space(16, ElementPair::TaylorHood);
        for scheme in [Scheme::FullyDiscrete, Scheme::Semidiscrete] {
            let p = problem(scheme, ElementPair::TaylorHood, benchmark_tracking());
            let (_, a) = optimize(&p, s.mesh(), &OptimizeOptions::default()).unwrap();
            let fp = OptimizeOptions { strategy: Strategy::DampedFixedPoint, ..OptimizeOptions::default() };
            let (_, b) = optimize(&p, s.mesh(), &fp).unwrap();
            assert!(a.converged && b.converged);
            assert!(a.vi_residual < 1e-9 && b.vi_residual < 1e-9);
            for h in [&a.cost_history, &b.cost_history] {
                let (last, accepted) = h.split_last().unwrap();
                for w in accepted.windows(2) {
                    assert!(w[1] <= w[0] + 1e-14 * w[0].abs(), "{scheme:?} {h:?}");
                }
                assert!((last - accepted.last().unwrap()).abs() <= 1e-11 * last.abs());
            }
            let diff: Vec<[f64; 2]> =
                a.control.values().iter().zip(b.control.values()).map(|(x, y)| [x[0] - y[0], x[1] - y[1]]).collect();
            let rp = ReducedProblem::new(&p, &s).unwrap();
            assert!(rp.norm(&diff) < 1e-8);
            // Both bounds are active somewhere.
            let vals = a.control.values();
            assert!(vals.iter().any(|v| v[0] == 0.75 || v[1] == 0.75));
            assert!(vals.iter().any(|v| v[0] == -0.75 || v[1] == -0.75));
        }
    }

    #[test]
    fn large_alpha_collapses_control() {
        let s = space(6, ElementPair::Mini);
        let mut p = problem(Scheme::FullyDiscrete, ElementPair::Mini, benchmark_tracking());
        p.alpha = 1e6;
        let (_, r) = optimize(&p, s.mesh(), &OptimizeOptions::default()).unwrap();
        let rp = ReducedProblem::new(&p, &s).unwrap();
        let un = rp.norm(r.control.values());
        let zn = rp.norm(&rp.represent(&r.adjoint.z));
        assert!(un <= zn / p.alpha * (1.0 + 1e-9) + 1e-15);
        assert!(un <= 1e-4);
    }

    #[test]
    fn second_order_trivial_cases() {
        let s = space(4, ElementPair::TaylorHood);
        let tracking = TrackingData::new(vec![[0.3, 0.6]], vec![[0.0; 2]]).unwrap();
        let p = problem(Scheme::FullyDiscrete, ElementPair::TaylorHood, tracking);
        let rp = ReducedProblem::new(&p, &s).unwrap();
        let u = rp.initial_control();
        let zero = rp.control_from_values(vec![[0.0; 2]; rp.control_len()]).unwrap();
        assert_eq!(second_order_value(&p, &s, &u, &zero).unwrap(), 0.0);
        // A constant load is a gradient and moves nothing; use a rotation.
        let swirl = (0..rp.control_len())
            .map(|c| {
                let [x, y] = s.mesh().centroid(c);
                [0.5 - y, x - 0.5]
            })
            .collect();
        let g = rp.control_from_values(swirl).unwrap();
        let v = second_order_value(&p, &s, &u, &g).unwrap();
        let gn = rp.norm(g.values());
        assert!(v > p.alpha * gn * gn * (1.0 + 1e-6), "{v}");
    }
}
