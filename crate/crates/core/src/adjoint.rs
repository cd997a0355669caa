//! Discrete adjoint equations driven by point masses at the tracking points.

use serde::{Deserialize, Serialize};

use crate::assembly::{adjoint_matrix, assemble_dirac_rhs, check_velocity};
use crate::elements::{FeFunction, MixedSpace};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::nse_state::FlowOperators;

/// Tracking points and the desired velocities at them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingData {
    pub points: Vec<Point>,
    pub targets: Vec<[f64; 2]>,
}

impl TrackingData {
    pub fn new(points: Vec<Point>, targets: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() != targets.len() {
            return Err(Error::Input(format!("{} tracking points but {} targets", points.len(), targets.len())));
        }
        for (i, p) in points.iter().enumerate() {
            if points[..i].contains(p) {
                return Err(Error::Input(format!("duplicate tracking point ({}, {})", p[0], p[1])));
            }
        }
        Ok(TrackingData { points, targets })
    }

    pub fn empty() -> Self {
        TrackingData { points: vec![], targets: vec![] }
    }

    pub fn check_interior(&self, space: &MixedSpace) -> Result<()> {
        match self.points.iter().find(|&&p| !space.mesh().is_interior(p)) {
            Some(p) => Err(Error::Input(format!("tracking point ({}, {}) is not interior", p[0], p[1]))),
            None => Ok(()),
        }
    }

    /// `y(t) − y_t` for every tracking point.
    pub fn mismatch(&self, space: &MixedSpace, y: &FeFunction) -> Result<Vec<[f64; 2]>> {
        self.check_interior(space)?;
        self.points
            .iter()
            .zip(&self.targets)
            .map(|(&t, yt)| {
                let v = space.evaluate_velocity(y, t)?;
                Ok([v[0] - yt[0], v[1] - yt[1]])
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct AdjointSolution {
    pub z: FeFunction,
    pub r: FeFunction,
}

impl FlowOperators<'_> {
    /// Adjoint state at the velocity `y`: for all discrete `w`,
    /// `ν(∇w, ∇z) + b(y; w, z) + b(w; y, z) − (r, div w) = Σ_t (y(t) − y_t)·w(t)`.
    pub fn solve_adjoint(&self, y: &FeFunction, data: &TrackingData) -> Result<AdjointSolution> {
        let space = self.space();
        check_velocity(space, y)?;
        let mismatch = data.mismatch(space, y)?;
        let rhs = assemble_dirac_rhs(space, &data.points, &mismatch)?;
        let (z, r) = self.solve_with_block(adjoint_matrix(space, self.nu(), y), &rhs)?;
        Ok(AdjointSolution { z, r })
    }
}

/// Solves the discrete adjoint equation for the state velocity `y`.
pub fn solve_adjoint(space: &MixedSpace, nu: f64, y: &FeFunction, data: &TrackingData) -> Result<AdjointSolution> {
    FlowOperators::new(space, nu)?.solve_adjoint(y, data)
}
