use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adjoint::TrackingData;
use crate::elements::ElementPair;
use crate::error::{Error, Result};
use crate::mesh::Rect;
use crate::nse_state::NewtonOptions;
use crate::optimize::{ControlProblem, OptimizeOptions, Scheme, Strategy};

use super::report::Format;

/// Settings shared by all experiments. Every key is optional; the defaults
/// describe the benchmark control problem on the unit square.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: Rect,
    /// Mesh levels `n` (an `n × n` grid of split squares). Each study has its
    /// own default when unset.
    pub levels: Option<Vec<usize>>,
    pub pair: ElementPair,
    pub scheme: Scheme,
    pub nu: f64,
    pub alpha: f64,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub tracking: TrackingConfig,
    pub solver: SolverConfig,
    /// The reference mesh is `2^offset` times finer than the finest level.
    pub reference_level_offset: u32,
    pub seed: u64,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingConfig {
    pub points: Vec<[f64; 2]>,
    pub targets: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub opt_tol: f64,
    pub opt_max_iter: usize,
    pub strategy: StrategyName,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    ProjectedGradient,
    FixedPoint,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        TrackingConfig {
            points: vec![[0.25, 0.25], [0.75, 0.375], [0.375, 0.75]],
            targets: vec![[1.0, 1.0], [-1.0, 0.5], [0.5, -1.0]],
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-12,
            newton_max_iter: 20,
            opt_tol: 1e-11,
            opt_max_iter: 200,
            strategy: StrategyName::ProjectedGradient,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: Rect::UNIT,
            levels: None,
            pair: ElementPair::TaylorHood,
            scheme: Scheme::FullyDiscrete,
            nu: 1.0,
            alpha: 0.1,
            lower: [-0.75, -0.75],
            upper: [0.75, 0.75],
            tracking: TrackingConfig::default(),
            solver: SolverConfig::default(),
            reference_level_offset: 2,
            seed: 20_240_917,
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.domain;
        if !(r.x1 > r.x0 && r.y1 > r.y0) {
            return Err(Error::Config(format!("empty domain {r:?}")));
        }
        if let Some(levels) = &self.levels {
            check_levels(levels)?;
        }
        if !(2..=8).contains(&self.reference_level_offset) {
            return Err(Error::Config("reference_level_offset must lie in 2..=8".into()));
        }
        let s = &self.solver;
        if !(s.newton_tol > 0.0 && s.opt_tol > 0.0) || s.newton_max_iter == 0 {
            return Err(Error::Config("solver tolerances and iteration limits must be positive".into()));
        }
        let data = self.tracking_data()?;
        if let Some(p) = data.points.iter().find(|p| !(p[0] > r.x0 && p[0] < r.x1 && p[1] > r.y0 && p[1] < r.y1)) {
            return Err(Error::Config(format!("tracking point ({}, {}) is not inside the domain", p[0], p[1])));
        }
        self.problem().validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Levels to run, falling back to `default` when none are configured.
    pub fn levels_or(&self, default: &[usize]) -> Vec<usize> {
        self.levels.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn tracking_data(&self) -> Result<TrackingData> {
        TrackingData::new(self.tracking.points.clone(), self.tracking.targets.clone())
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn problem(&self) -> ControlProblem {
        ControlProblem {
            nu: self.nu,
            alpha: self.alpha,
            lower: self.lower,
            upper: self.upper,
            tracking: TrackingData { points: self.tracking.points.clone(), targets: self.tracking.targets.clone() },
            scheme: self.scheme,
            pair: self.pair,
        }
    }

    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions { tol: self.solver.newton_tol, max_iter: self.solver.newton_max_iter, ..NewtonOptions::default() }
    }

    pub fn optimize_options(&self) -> OptimizeOptions {
        OptimizeOptions {
            tol: self.solver.opt_tol,
            max_iter: self.solver.opt_max_iter,
            strategy: match self.solver.strategy {
                StrategyName::ProjectedGradient => Strategy::ProjectedGradientArmijo,
                StrategyName::FixedPoint => Strategy::DampedFixedPoint,
            },
            newton: self.newton_options(),
        }
    }
}

pub(crate) fn check_levels(levels: &[usize]) -> Result<()> {
    if levels.is_empty() || levels[0] == 0 {
        return Err(Error::Config("levels must be a nonempty list of positive integers".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("levels must be strictly increasing, got {levels:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        let c = ExperimentConfig::from_toml_str(
            "levels = [4, 8]\npair = \"mini\"\nscheme = \"semi\"\nalpha = 0.5\n\n[solver]\nstrategy = \"fixed-point\"\n\n[tracking]\npoints = [[0.5, 0.5]]\ntargets = [[1.0, 0.0]]\n",
        )
        .unwrap();
        assert_eq!(c.levels, Some(vec![4, 8]));
        assert_eq!(c.pair, ElementPair::Mini);
        assert_eq!(c.scheme, Scheme::Semidiscrete);
        assert_eq!(c.optimize_options().strategy, Strategy::DampedFixedPoint);
        assert_eq!(c.tracking.points.len(), 1);
    }

    #[test]
    fn dotted_keys() {
        let c = ExperimentConfig::from_toml_str("solver.opt_tol = 1e-9\ndomain.x1 = 2.0\n").unwrap();
        assert_eq!(c.solver.opt_tol, 1e-9);
        assert_eq!(c.domain.x1, 2.0);
    }

    #[test]
    fn rejected_configs() {
        for bad in [
            "levels = [8, 4]",
            "[tracking]\npoints = [[0.5, 1.0]]\ntargets = [[0.0, 0.0]]",
            "levels = []",
            "alpha = 0.0",
            "lower = [1.0, 1.0]",
            "unknown_key = 1",
            "reference_level_offset = 1",
            "reference_level_offset = 70",
            "domain.x1 = -1.0",
            "pair = \"p3\"",
        ] {
            assert!(matches!(ExperimentConfig::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
