//! Single-particle flight from the emitter to a terminal event.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::forcefield::{PhysicsParams, SlitLayout};
use crate::integrator::{
    advance, locate_plane_crossing, IntegratorError, IntegratorState, ParticleState, ScreenField, StepController,
};

/// Tolerance on `|x − plane|` for located screen crossings.
pub const EVENT_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("integration aborted: {0}")]
    Integrator(#[from] IntegratorError),
    #[error("emission angle {0} outside [0, 2π)")]
    InvalidAngle(f64),
    #[error("invalid limits: x_escape = {x_escape}, t_max = {t_max}")]
    InvalidLimits { x_escape: f64, t_max: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct EmissionSpec<'a> {
    pub alpha: f64,
    pub params: &'a PhysicsParams,
    pub layout: &'a SlitLayout,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub x_escape: f64,
    pub t_max: f64,
}

impl Limits {
    pub fn for_params(params: &PhysicsParams) -> Self {
        Self {
            x_escape: 3.0 * params.emitter_distance,
            t_max: 100.0 * (params.emitter_distance + params.detector_distance) / params.v0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeKind {
    HitS2,
    BlockedS1,
    Escaped,
    MaxTimeExceeded,
}

impl OutcomeKind {
    pub fn name(self) -> &'static str {
        match self {
            OutcomeKind::HitS2 => "hit",
            OutcomeKind::BlockedS1 => "blocked",
            OutcomeKind::Escaped => "escaped",
            OutcomeKind::MaxTimeExceeded => "timeout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOutcome {
    pub kind: OutcomeKind,
    /// `y` at the terminating screen crossing (S₂ for hits, S₁ for blocks).
    pub y_final: Option<f64>,
    pub t_final: f64,
    pub steps: usize,
    /// State at termination; for screen events, the located crossing.
    pub final_state: ParticleState,
}

impl TrajectoryOutcome {
    pub fn is_hit(&self) -> bool {
        self.kind == OutcomeKind::HitS2
    }

    /// Outcome of the `y ↦ −y` reflected flight.
    pub fn mirrored(&self) -> Self {
        let s = self.final_state;
        Self {
            y_final: self.y_final.map(|y| -y),
            final_state: ParticleState::new(s.t, s.x, -s.y, s.vx, -s.vy),
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub outcome: TrajectoryOutcome,
    /// Accepted integrator states, starting with the emission state.
    pub path: Option<Vec<ParticleState>>,
}

/// Emission state at `(−D, 0)` moving with speed `v0` at angle `alpha`.
pub fn initial_state(alpha: f64, params: &PhysicsParams) -> ParticleState {
    // Reduce to (−π, π] so that α and 2π − α produce mirrored velocities.
    let beta = if alpha > PI { alpha - TAU } else { alpha };
    let (sin, cos) = beta.sin_cos();
    ParticleState::new(0.0, -params.emitter_distance, 0.0, params.v0 * cos, params.v0 * sin)
}

/// Integrates one particle until it hits S₂, is absorbed by S₁, escapes
/// behind the emitter or runs out of time.
pub fn simulate(
    spec: &EmissionSpec<'_>,
    ctrl: &StepController,
    limits: &Limits,
    trace: bool,
) -> Result<Trajectory, TrajectoryError> {
    if !(0.0..TAU).contains(&spec.alpha) {
        return Err(TrajectoryError::InvalidAngle(spec.alpha));
    }
    if !(limits.x_escape > spec.params.emitter_distance && limits.t_max > 0.0) {
        return Err(TrajectoryError::InvalidLimits {
            x_escape: limits.x_escape,
            t_max: limits.t_max,
        });
    }
    let field = ScreenField {
        layout: spec.layout,
        kappa: spec.params.kappa,
    };
    let detector = spec.params.detector_distance;
    let mut state = initial_state(spec.alpha, spec.params);
    let mut integ = IntegratorState::new();
    let mut path = trace.then(|| vec![state]);
    let mut steps = 0;

    let finish = |kind, y_final, final_state: ParticleState, steps, path| Trajectory {
        outcome: TrajectoryOutcome {
            kind,
            y_final,
            t_final: final_state.t,
            steps,
            final_state,
        },
        path,
    };

    loop {
        if state.t > limits.t_max {
            return Ok(finish(OutcomeKind::MaxTimeExceeded, None, state, steps, path));
        }
        let (next, next_integ) = advance(&state, &integ, ctrl, &field)?;
        steps += 1;
        if let Some(p) = path.as_mut() {
            p.push(next);
        }

        if (state.x < 0.0) != (next.x < 0.0) {
            let c = locate_plane_crossing(&state, &next, 0.0, EVENT_TOLERANCE, &field)?;
            if spec.layout.blocks(c.y) {
                return Ok(finish(OutcomeKind::BlockedS1, Some(c.y), c, steps, path));
            }
        }
        if state.x < detector && next.x >= detector {
            let c = locate_plane_crossing(&state, &next, detector, EVENT_TOLERANCE, &field)?;
            return Ok(finish(OutcomeKind::HitS2, Some(c.y), c, steps, path));
        }
        if next.x < -limits.x_escape && next.vx < 0.0 {
            return Ok(finish(OutcomeKind::Escaped, None, next, steps, path));
        }
        state = next;
        integ = next_integ;
    }
}
