//! RK4 bootstrapped Adams–Bashforth–Moulton integration of planar motion.
//!
//! A trajectory runs with a constant step `h0` in 4th-order ABM (PECE) mode
//! while far from the screen. Close to the screen plane, or when a step would
//! move the particle too far, the step shrinks; every change of step restarts
//! the multistep history from classical RK4 steps.

use thiserror::Error;

use crate::forcefield::{force_closed_form, Acceleration, FieldError, SlitLayout, GUARD_BAND};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("step underflow at t = {t}: displacement {displacement:e} > {limit:e} with h = h_min")]
    StepUnderflow { t: f64, displacement: f64, limit: f64 },
    #[error("could not leave the screen guard band at t = {t}, x = {x:e}")]
    GuardBandStuck { t: f64, x: f64 },
    #[error("Adams step needs 4 history entries, have {0}")]
    HistoryNotReady(usize),
    #[error("states do not bracket the plane x = {plane}")]
    NotBracketed { plane: f64 },
    #[error("plane crossing search did not converge within {0} iterations")]
    CrossingNotConverged(usize),
    #[error("invalid step controller: {0}")]
    InvalidController(String),
}

/// Source of acceleration for the integrator.
pub trait ForceField {
    fn acceleration(&self, x: f64, y: f64) -> Result<Acceleration, FieldError>;
}

/// The slitted screen at `x = 0`.
#[derive(Debug, Clone)]
pub struct ScreenField<'a> {
    pub layout: &'a SlitLayout,
    pub kappa: f64,
}

impl ForceField for ScreenField<'_> {
    fn acceleration(&self, x: f64, y: f64) -> Result<Acceleration, FieldError> {
        force_closed_form(x, y, self.layout, self.kappa)
    }
}

/// Spatially constant field, handy for exactness checks.
#[derive(Debug, Clone, Copy)]
pub struct UniformField(pub Acceleration);

impl ForceField for UniformField {
    fn acceleration(&self, _x: f64, _y: f64) -> Result<Acceleration, FieldError> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl ParticleState {
    pub fn new(t: f64, x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self { t, x, y, vx, vy }
    }

    pub fn is_finite(&self) -> bool {
        [self.t, self.x, self.y, self.vx, self.vy].iter().all(|v| v.is_finite())
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * (self.vx * self.vx + self.vy * self.vy)
    }

    fn phase(&self) -> [f64; 4] {
        [self.x, self.y, self.vx, self.vy]
    }

    fn from_phase(t: f64, p: [f64; 4]) -> Self {
        Self::new(t, p[0], p[1], p[2], p[3])
    }
}

type Phase = [f64; 4];

fn derivative<F: ForceField + ?Sized>(field: &F, p: &Phase) -> Result<Phase, FieldError> {
    let a = field.acceleration(p[0], p[1])?;
    Ok([p[2], p[3], a.ax, a.ay])
}

#[inline]
fn axpy(base: &Phase, h: f64, d: &Phase) -> Phase {
    [
        base[0] + h * d[0],
        base[1] + h * d[1],
        base[2] + h * d[2],
        base[3] + h * d[3],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepController {
    pub h0: f64,
    pub h_min: f64,
    /// Distance to the screen plane below which steps shrink linearly.
    pub shrink_near: f64,
    /// Largest coordinate change allowed in one step.
    pub delta_max: f64,
    /// Scale applied to the displacement estimate before comparing to `delta_max`.
    pub safety: f64,
}

impl StepController {
    /// Defaults tied to the emitter time scale `D/v0` and slit half-height `R`.
    pub fn for_geometry(time_scale: f64, slit_half_height: f64) -> Self {
        Self {
            h0: 1e-3 * time_scale,
            h_min: 1e-8 * time_scale,
            shrink_near: 0.1 * slit_half_height,
            delta_max: 0.05 * slit_half_height,
            safety: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        let ok = self.h_min > 0.0
            && self.h_min <= self.h0
            && self.h0.is_finite()
            && self.shrink_near > 0.0
            && self.delta_max > 0.0
            && self.safety > 0.0;
        if ok {
            Ok(())
        } else {
            Err(IntegratorError::InvalidController(format!("{self:?}")))
        }
    }

    /// Step proposed purely from the distance to the screen plane.
    pub fn proximity_step(&self, x: f64) -> f64 {
        let d = x.abs();
        if d >= self.shrink_near {
            self.h0
        } else {
            (self.h0 * d / self.shrink_near).clamp(self.h_min, self.h0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Bootstrap,
    Adams,
}

/// Multistep history: up to four `(state, derivative)` pairs, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorState {
    history: Vec<(ParticleState, Phase)>,
    pub mode: Mode,
    pub h: f64,
}

impl Default for IntegratorState {
    fn default() -> Self {
        Self::new()
    }
}

impl IntegratorState {
    pub fn new() -> Self {
        Self {
            history: Vec::with_capacity(4),
            mode: Mode::Bootstrap,
            h: 0.0,
        }
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    fn reset(&mut self, h: f64) {
        self.history.clear();
        self.mode = Mode::Bootstrap;
        self.h = h;
    }

    /// Derivative at `state` if it is the newest history entry.
    fn cached_derivative(&self, state: &ParticleState) -> Option<Phase> {
        self.history.last().filter(|(s, _)| s == state).map(|(_, d)| *d)
    }

    fn push(&mut self, state: ParticleState, d: Phase) {
        if self.history.len() == 4 {
            self.history.remove(0);
        }
        self.history.push((state, d));
        if self.history.len() == 4 {
            self.mode = Mode::Adams;
        }
    }
}

fn rk4_phase<F: ForceField + ?Sized>(p: &Phase, k1: Phase, h: f64, field: &F) -> Result<Phase, FieldError> {
    let k2 = derivative(field, &axpy(p, 0.5 * h, &k1))?;
    let k3 = derivative(field, &axpy(p, 0.5 * h, &k2))?;
    let k4 = derivative(field, &axpy(p, h, &k3))?;
    let mut out = *p;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// One classical fourth-order Runge–Kutta step of length `h`.
pub fn rk4_step<F: ForceField + ?Sized>(state: &ParticleState, h: f64, field: &F) -> Result<ParticleState, FieldError> {
    let p = state.phase();
    let k1 = derivative(field, &p)?;
    Ok(ParticleState::from_phase(state.t + h, rk4_phase(&p, k1, h, field)?))
}

/// One ABM4 predictor–corrector step (PECE) from a full history.
pub fn abm4_step<F: ForceField + ?Sized>(
    integ: &IntegratorState,
    field: &F,
) -> Result<(IntegratorState, ParticleState), IntegratorError> {
    if integ.mode != Mode::Adams || integ.history.len() != 4 {
        return Err(IntegratorError::HistoryNotReady(integ.history.len()));
    }
    let h = integ.h;
    let f = |i: usize| &integ.history[i].1;
    let (current, f0) = integ.history[3];
    let (f1, f2, f3) = (f(2), f(1), f(0));
    let p = current.phase();
    let mut predicted = p;
    for i in 0..4 {
        predicted[i] += h / 24.0 * (55.0 * f0[i] - 59.0 * f1[i] + 37.0 * f2[i] - 9.0 * f3[i]);
    }
    let fp = derivative(field, &predicted)?;
    let mut corrected = p;
    for i in 0..4 {
        corrected[i] += h / 24.0 * (9.0 * fp[i] + 19.0 * f0[i] - 5.0 * f1[i] + f2[i]);
    }
    let fc = derivative(field, &corrected)?;
    let next = ParticleState::from_phase(current.t + h, corrected);
    let mut out = integ.clone();
    out.push(next, fc);
    Ok((out, next))
}

/// Golden-ratio shrink used to step around the guard band; irrational so
/// retried stage points never repeat.
const GUARD_SHRINK: f64 = 0.618_033_988_749_894_9;
const GUARD_RETRIES: usize = 60;

/// Takes one accepted step.
///
/// The step is `h0`, reduced linearly within `shrink_near` of the screen
/// plane, then halved (not below `h_min`) while the predicted displacement
/// exceeds `delta_max`. A change of step restarts the history. If a stage
/// point or the end point falls in the guard band, the step is shrunk further
/// by an irrational factor and retried.
pub fn advance<F: ForceField + ?Sized>(
    state: &ParticleState,
    integ: &IntegratorState,
    ctrl: &StepController,
    field: &F,
) -> Result<(ParticleState, IntegratorState), IntegratorError> {
    let d0 = match integ.cached_derivative(state) {
        Some(d) => d,
        None => derivative(field, &state.phase())?,
    };
    let speed = d0[0].hypot(d0[1]);
    let accel = d0[2].hypot(d0[3]);
    let displacement = |h: f64| ctrl.safety * (speed * h + 0.5 * accel * h * h);

    let mut h = ctrl.proximity_step(state.x);
    while displacement(h) > ctrl.delta_max {
        if h <= ctrl.h_min {
            return Err(IntegratorError::StepUnderflow {
                t: state.t,
                displacement: displacement(h),
                limit: ctrl.delta_max,
            });
        }
        h = (0.5 * h).max(ctrl.h_min);
    }

    let mut next_integ = integ.clone();
    let fresh = next_integ.cached_derivative(state).is_none();
    if h != next_integ.h || fresh {
        next_integ.reset(h);
        next_integ.push(*state, d0);
    }

    if next_integ.mode == Mode::Adams {
        match abm4_step(&next_integ, field) {
            Ok((out, next)) if next.x.abs() > GUARD_BAND => return Ok((next, out)),
            Ok(_) | Err(IntegratorError::Field(FieldError::GuardBand { .. })) => {
                next_integ.reset(h);
                next_integ.push(*state, d0);
            }
            Err(e) => return Err(e),
        }
    }

    let p = state.phase();
    let mut trial = h;
    let mut restarted = false;
    for _ in 0..GUARD_RETRIES {
        let attempt = rk4_phase(&p, d0, trial, field).and_then(|q| {
            let end = ParticleState::from_phase(state.t + trial, q);
            derivative(field, &q).map(|d| (end, d))
        });
        match attempt {
            Ok((end, d_end)) => {
                if restarted {
                    next_integ.reset(trial);
                    next_integ.push(*state, d0);
                }
                next_integ.push(end, d_end);
                return Ok((end, next_integ));
            }
            Err(FieldError::GuardBand { .. }) => {
                trial *= GUARD_SHRINK;
                restarted = true;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Err(IntegratorError::GuardBandStuck { t: state.t, x: state.x })
}

const CROSSING_ITERATIONS: usize = 200;

/// Evaluates stage points that fall inside the guard band at the band edge
/// on the side the particle comes from.
struct SideClamped<'a, F: ?Sized> {
    inner: &'a F,
    side: f64,
}

impl<F: ForceField + ?Sized> ForceField for SideClamped<'_, F> {
    fn acceleration(&self, x: f64, y: f64) -> Result<Acceleration, FieldError> {
        let x = if x.abs() <= 2.0 * GUARD_BAND {
            self.side * 2.0 * GUARD_BAND
        } else {
            x
        };
        self.inner.acceleration(x, y)
    }
}

/// State where the step `prev → cur` meets the plane `x = plane_x`.
///
/// Bisects the step length, re-integrating from `prev` with a single RK4
/// substep each time, until `|x − plane_x| ≤ tol`.
pub fn locate_plane_crossing<F: ForceField + ?Sized>(
    prev: &ParticleState,
    cur: &ParticleState,
    plane_x: f64,
    tol: f64,
    field: &F,
) -> Result<ParticleState, IntegratorError> {
    let side0 = prev.x - plane_x;
    let side1 = cur.x - plane_x;
    if side0 == 0.0 {
        return Ok(*prev);
    }
    if side1 == 0.0 {
        return Ok(*cur);
    }
    if (side0 < 0.0) == (side1 < 0.0) {
        return Err(IntegratorError::NotBracketed { plane: plane_x });
    }
    if side1.abs() <= tol {
        return Ok(*cur);
    }
    let clamped = SideClamped {
        inner: field,
        side: prev.x.signum(),
    };
    let p = prev.phase();
    let k1 = derivative(&clamped, &p)?;
    let (mut lo, mut hi) = (0.0, cur.t - prev.t);
    for _ in 0..CROSSING_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let q = rk4_phase(&p, k1, mid, &clamped)?;
        let off = q[0] - plane_x;
        if off.abs() <= tol {
            return Ok(ParticleState::from_phase(prev.t + mid, q));
        }
        if (off < 0.0) == (side0 < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(IntegratorError::CrossingNotConverged(CROSSING_ITERATIONS))
}
