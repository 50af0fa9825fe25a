//! Shared decode, check, simulate and score configuration.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{
    check_feasible, march_decode, BoundaryAnchors, DeploymentParam, FeasibilityConfig, GridShape, Layout,
    RatioField,
};
use crate::metrics::{build_result, siou_prepared, AlignConfig, EvalResult, PreparedMask, RewardConfig};
use crate::raster::SilhouetteMask;
use crate::sim::{simulate, RasterConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub shape: GridShape,
    pub phi: DeploymentParam,
    pub anchors: BoundaryAnchors,
    pub feasibility: FeasibilityConfig,
    pub raster: RasterConfig,
    pub align: AlignConfig,
    pub reward: RewardConfig,
}

/// Default deployment angle for experiments.
pub const DEFAULT_PHI: f64 = std::f64::consts::FRAC_PI_2;

impl Problem {
    pub fn new(shape: GridShape, phi: f64) -> Result<Self> {
        Ok(Self {
            shape,
            phi: DeploymentParam::new(phi)?,
            anchors: BoundaryAnchors::default_for(shape),
            feasibility: FeasibilityConfig::default(),
            raster: RasterConfig::default(),
            align: AlignConfig::default(),
            reward: RewardConfig::default(),
        })
    }

    pub fn decode(&self, x: &RatioField) -> Result<Layout> {
        march_decode(x, self.phi, &self.anchors, &self.feasibility)
    }

    pub fn feasible(&self, layout: &Layout) -> bool {
        check_feasible(&layout.feasibility, self.reward.tau_ov)
    }

    /// Decode and simulate; `None` when the decode is infeasible.
    pub fn render(&self, x: &RatioField) -> Result<Option<SilhouetteMask>> {
        let layout = self.decode(x)?;
        if !self.feasible(&layout) {
            return Ok(None);
        }
        Ok(Some(simulate(&layout, &self.raster)?))
    }

    /// Full environment call. The simulator runs whenever the decode produced geometry;
    /// feasibility violations then enter through the reward penalties.
    pub fn evaluate(&self, x: &RatioField, target: &PreparedMask) -> Result<(EvalResult, bool)> {
        let layout = self.decode(x)?;
        let feas = layout.feasibility.clone();
        if feas.decode_failed {
            return Ok((build_result(x, feas, None, &self.reward)?, false));
        }
        let mask = simulate(&layout, &self.raster)?;
        let s = match PreparedMask::light(&mask) {
            Ok(p) => siou_prepared(&p, target, &self.align).0,
            Err(_) => 0.0,
        };
        Ok((build_result(x, feas, Some(s), &self.reward)?, true))
    }
}
