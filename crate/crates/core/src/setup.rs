use crate::forcefield::{Experiment, FieldError, PhysicsParams, SlitLayout};
use crate::integrator::StepController;
use crate::trajectory::Limits;

/// Everything needed to fly a particle in any of the three experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulation {
    pub params: PhysicsParams,
    pub ctrl: StepController,
    pub limits: Limits,
    /// Half the distance between the slits, `l`.
    pub slit_offset: f64,
    /// Half the slit height, `R`.
    pub slit_half_height: f64,
}

impl Simulation {
    /// Controller and limits derived from `params` with their default rules.
    pub fn with_defaults(params: PhysicsParams, slit_offset: f64, slit_half_height: f64) -> Self {
        Self {
            params,
            ctrl: StepController::for_geometry(params.time_scale(), slit_half_height),
            limits: Limits::for_params(&params),
            slit_offset,
            slit_half_height,
        }
    }

    /// `D = 10, L = 20, l = 1, R = 0.5, v0 = 1, d = 0.1, κ = 0.005`.
    pub fn paper_like() -> Self {
        Self::with_defaults(PhysicsParams::default(), 1.0, 0.5)
    }

    pub fn layout(&self, experiment: Experiment) -> Result<SlitLayout, FieldError> {
        SlitLayout::material_intervals(experiment, self.slit_offset, self.slit_half_height)
    }
}
