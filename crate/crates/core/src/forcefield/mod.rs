//! Electrostatic field of a uniformly charged plane with rectangular slits.
//!
//! The screen S₁ occupies the plane `x = 0` and extends to infinity in `z`.
//! Integrating Coulomb's law over `z` analytically leaves a one-dimensional
//! integral over the material intervals along `y`, which itself has a closed
//! form in terms of `atan` and `ln`. Everything here is expressed per unit
//! mass, so the single coupling constant is `kappa = q·sigma/m`.

mod oracle;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use thiserror::Error;

use crate::integrator::ParticleState;

pub use oracle::{adaptive_gauss_kronrod, force_quadrature_oracle};

/// Half-width of the band around `x = 0` where the field is never evaluated.
pub const GUARD_BAND: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("slit geometry needs l > 0 and R > 0, got l = {l}, R = {r}")]
    InvalidGeometry { l: f64, r: f64 },
    #[error("invalid material layout: {0}")]
    InvalidLayout(String),
    #[error("field evaluated inside the guard band of the screen plane (x = {x:e})")]
    GuardBand { x: f64 },
    #[error("path segment {segment} crosses screen material at y = {y}")]
    CrossesMaterial { segment: usize, y: f64 },
    #[error("path needs at least two states, got {0}")]
    ShortPath(usize),
    #[error("adaptive quadrature exhausted its budget (error estimate {estimate:e}, target {target:e})")]
    QuadratureBudget { estimate: f64, target: f64 },
    #[error("invalid physics parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

/// Which slits are open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    UpperOnly = 1,
    LowerOnly = 2,
    Both = 3,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::UpperOnly, Experiment::LowerOnly, Experiment::Both];

    pub fn from_index(index: u8) -> Option<Self> {
        match index {
            1 => Some(Experiment::UpperOnly),
            2 => Some(Experiment::LowerOnly),
            3 => Some(Experiment::Both),
            _ => None,
        }
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    /// The experiment obtained by reflecting `y ↦ −y`.
    pub fn mirror(self) -> Self {
        match self {
            Experiment::UpperOnly => Experiment::LowerOnly,
            Experiment::LowerOnly => Experiment::UpperOnly,
            Experiment::Both => Experiment::Both,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// An open interval of the extended real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ExtendedInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, FieldError> {
        if lo.is_nan() || hi.is_nan() || lo >= hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(FieldError::InvalidLayout(format!("interval ({lo}, {hi}) is empty")));
        }
        Ok(Self { lo, hi })
    }

    /// Membership in the closure `[lo, hi]`.
    pub fn closure_contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }
}

/// Screen material along `y`; the gaps between intervals are the open slits.
#[derive(Debug, Clone, PartialEq)]
pub struct SlitLayout {
    experiment: Option<Experiment>,
    material: Vec<ExtendedInterval>,
    slit_offset: f64,
    slit_half_height: f64,
}

impl SlitLayout {
    /// The material region for one of the three experiments.
    ///
    /// `l` is half the distance between the slits and `r` half the slit height,
    /// so the upper slit spans `(l, l + 2r)` and the lower one `(−l − 2r, −l)`.
    pub fn material_intervals(experiment: Experiment, l: f64, r: f64) -> Result<Self, FieldError> {
        if !(l > 0.0 && r > 0.0 && l.is_finite() && r.is_finite()) {
            return Err(FieldError::InvalidGeometry { l, r });
        }
        let inf = f64::INFINITY;
        let upper_edge = l + 2.0 * r;
        let lower_edge = -l - 2.0 * r;
        let material = match experiment {
            Experiment::UpperOnly => vec![
                ExtendedInterval { lo: -inf, hi: l },
                ExtendedInterval {
                    lo: upper_edge,
                    hi: inf,
                },
            ],
            Experiment::LowerOnly => vec![
                ExtendedInterval {
                    lo: -inf,
                    hi: lower_edge,
                },
                ExtendedInterval { lo: -l, hi: inf },
            ],
            Experiment::Both => vec![
                ExtendedInterval {
                    lo: -inf,
                    hi: lower_edge,
                },
                ExtendedInterval { lo: -l, hi: l },
                ExtendedInterval {
                    lo: upper_edge,
                    hi: inf,
                },
            ],
        };
        Ok(Self {
            experiment: Some(experiment),
            material,
            slit_offset: l,
            slit_half_height: r,
        })
    }

    /// A screen with no slits at all.
    pub fn full_plane() -> Self {
        Self {
            experiment: None,
            material: vec![ExtendedInterval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            }],
            slit_offset: 0.0,
            slit_half_height: 0.0,
        }
    }

    /// Arbitrary material layout. Intervals must be sorted, disjoint and
    /// non-adjacent, and together carry exactly one `−∞` and one `+∞` endpoint.
    pub fn from_intervals(intervals: Vec<ExtendedInterval>) -> Result<Self, FieldError> {
        if intervals.is_empty() {
            return Err(FieldError::InvalidLayout("no material".into()));
        }
        for iv in &intervals {
            ExtendedInterval::new(iv.lo, iv.hi)?;
        }
        for pair in intervals.windows(2) {
            if pair[0].hi >= pair[1].lo {
                return Err(FieldError::InvalidLayout(format!(
                    "intervals ({}, {}) and ({}, {}) overlap or touch",
                    pair[0].lo, pair[0].hi, pair[1].lo, pair[1].hi
                )));
            }
        }
        let neg = intervals.iter().filter(|iv| iv.lo == f64::NEG_INFINITY).count();
        let pos = intervals.iter().filter(|iv| iv.hi == f64::INFINITY).count();
        if neg != 1 || pos != 1 {
            return Err(FieldError::InvalidLayout(
                "material must extend to both −∞ and +∞".into(),
            ));
        }
        Ok(Self {
            experiment: None,
            material: intervals,
            slit_offset: 0.0,
            slit_half_height: 0.0,
        })
    }

    /// Closes the gap `(lo, hi)` with material, merging touching intervals.
    pub fn with_filled(&self, lo: f64, hi: f64) -> Result<Self, FieldError> {
        let extra = ExtendedInterval::new(lo, hi)?;
        let mut all = self.material.clone();
        all.push(extra);
        all.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        let mut merged: Vec<ExtendedInterval> = Vec::with_capacity(all.len());
        for iv in all {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => last.hi = last.hi.max(iv.hi),
                _ => merged.push(iv),
            }
        }
        let mut out = Self::from_intervals(merged)?;
        out.slit_offset = self.slit_offset;
        out.slit_half_height = self.slit_half_height;
        Ok(out)
    }

    pub fn experiment(&self) -> Option<Experiment> {
        self.experiment
    }

    pub fn material(&self) -> &[ExtendedInterval] {
        &self.material
    }

    pub fn slit_offset(&self) -> f64 {
        self.slit_offset
    }

    pub fn slit_half_height(&self) -> f64 {
        self.slit_half_height
    }

    /// Whether `y` on the screen plane lies in the (closed) material.
    pub fn blocks(&self, y: f64) -> bool {
        self.material.iter().any(|iv| iv.closure_contains(y))
    }

    /// The open slits, bottom to top.
    pub fn slits(&self) -> Vec<(f64, f64)> {
        self.material.windows(2).map(|w| (w[0].hi, w[1].lo)).collect()
    }

    /// Finite interval endpoints, sorted.
    pub fn edges(&self) -> Vec<f64> {
        self.material
            .iter()
            .flat_map(|iv| [iv.lo, iv.hi])
            .filter(|e| e.is_finite())
            .collect()
    }
}

/// Physical constants of one run, in dimensionless units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsParams {
    /// `q·sigma/m`; non-negative means the screen repels the particle.
    pub kappa: f64,
    /// Initial speed.
    pub v0: f64,
    /// Emitter to S₁ distance `D`.
    pub emitter_distance: f64,
    /// S₁ to S₂ distance `L`.
    pub detector_distance: f64,
    /// Particle diameter, also the S₂ cell size.
    pub particle_diameter: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self {
            kappa: 0.005,
            v0: 1.0,
            emitter_distance: 10.0,
            detector_distance: 20.0,
            particle_diameter: 0.1,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<(), FieldError> {
        let checks = [
            ("kappa", self.kappa, self.kappa.is_finite()),
            ("v0", self.v0, self.v0 > 0.0 && self.v0.is_finite()),
            (
                "emitter_distance",
                self.emitter_distance,
                self.emitter_distance > 0.0 && self.emitter_distance.is_finite(),
            ),
            (
                "detector_distance",
                self.detector_distance,
                self.detector_distance > 0.0 && self.detector_distance.is_finite(),
            ),
            (
                "particle_diameter",
                self.particle_diameter,
                self.particle_diameter > 0.0 && self.particle_diameter.is_finite(),
            ),
        ];
        for (name, value, ok) in checks {
            if !ok {
                return Err(FieldError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Time for the unperturbed particle to cover the emitter distance.
    pub fn time_scale(&self) -> f64 {
        self.emitter_distance / self.v0
    }
}

/// Acceleration `(ax, ay)` per unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Acceleration {
    pub ax: f64,
    pub ay: f64,
}

/// `atan((e − y)/x)` with the infinite endpoints taken as limits.
#[inline]
fn endpoint_angle(e: f64, y: f64, x: f64, limit: f64) -> f64 {
    if e == f64::INFINITY {
        limit
    } else if e == f64::NEG_INFINITY {
        -limit
    } else {
        ((e - y) / x).atan()
    }
}

/// Closed-form acceleration of a point charge at `(x, y)`.
///
/// `ax = κ Σ 2·(atan((b−y)/x) − atan((a−y)/x))` and
/// `ay = κ Σ ln((x²+(a−y)²)/(x²+(b−y)²))` over the material intervals `(a, b)`,
/// with `atan(±∞/x) = ±sign(x)·π/2` and the infinite logarithms cancelling in pairs.
pub fn force_closed_form(x: f64, y: f64, layout: &SlitLayout, kappa: f64) -> Result<Acceleration, FieldError> {
    if x.abs() <= GUARD_BAND || x.is_nan() {
        return Err(FieldError::GuardBand { x });
    }
    let limit = x.signum() * FRAC_PI_2;
    let x2 = x * x;
    let mut ax = 0.0;
    // Lower-edge and upper-edge logarithms are summed apart so that mirrored
    // inputs produce exactly negated results.
    let mut log_lower = 0.0;
    let mut log_upper = 0.0;
    for iv in &layout.material {
        let upper = endpoint_angle(iv.hi, y, x, limit);
        let lower = endpoint_angle(iv.lo, y, x, limit);
        ax += 2.0 * (upper - lower);
        if iv.hi.is_finite() {
            let dy = iv.hi - y;
            log_upper += (x2 + dy * dy).ln();
        }
        if iv.lo.is_finite() {
            let dy = iv.lo - y;
            log_lower += (x2 + dy * dy).ln();
        }
    }
    Ok(Acceleration {
        ax: kappa * ax,
        ay: kappa * (log_lower - log_upper),
    })
}

/// Field magnitude of the unslitted plane, `2πκ`.
pub fn full_plane_magnitude(kappa: f64) -> f64 {
    2.0 * PI * kappa
}

/// Work per unit mass `∫ a·dr` along the polyline through `path`.
///
/// Each segment is integrated with the midpoint rule on 1, 2, 4, … panels and
/// Richardson-extrapolated until the table settles. Segments may cross the
/// screen plane only through an open slit.
pub fn work_along_path(path: &[ParticleState], layout: &SlitLayout, kappa: f64) -> Result<f64, FieldError> {
    if path.len() < 2 {
        return Err(FieldError::ShortPath(path.len()));
    }
    if kappa == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (i, seg) in path.windows(2).enumerate() {
        let (p, q) = (&seg[0], &seg[1]);
        if (p.x < 0.0) != (q.x < 0.0) {
            // Split at the plane so no quadrature node lands on it.
            let s = p.x / (p.x - q.x);
            let y = p.y + s * (q.y - p.y);
            if layout.blocks(y) {
                return Err(FieldError::CrossesMaterial { segment: i, y });
            }
            total += segment_work(p.x, p.y, 0.0, y, layout, kappa)?;
            total += segment_work(0.0, y, q.x, q.y, layout, kappa)?;
        } else {
            total += segment_work(p.x, p.y, q.x, q.y, layout, kappa)?;
        }
    }
    Ok(total)
}

fn segment_work(x0: f64, y0: f64, x1: f64, y1: f64, layout: &SlitLayout, kappa: f64) -> Result<f64, FieldError> {
    let (dx, dy) = (x1 - x0, y1 - y0);
    if dx == 0.0 && dy == 0.0 {
        return Ok(0.0);
    }
    // Pieces lie on one side of the plane; nodes inside the guard band are
    // moved just outside it on that side.
    let side = (x0 + x1).signum();
    let midpoint = |n: usize| -> Result<f64, FieldError> {
        let mut sum = 0.0;
        for k in 0..n {
            let s = (k as f64 + 0.5) / n as f64;
            let mut x = x0 + s * dx;
            if x.abs() <= GUARD_BAND {
                x = side * 2.0 * GUARD_BAND;
            }
            let a = force_closed_form(x, y0 + s * dy, layout, kappa)?;
            sum += a.ax * dx + a.ay * dy;
        }
        Ok(sum / n as f64)
    };
    // Romberg table on the midpoint sequence; errors expand in even powers.
    let mut prev_row: Vec<f64> = vec![midpoint(1)?];
    let mut n = 1;
    for level in 1..=12 {
        n *= 2;
        let mut row = vec![midpoint(n)?];
        let mut factor = 1.0;
        for j in 0..level {
            factor *= 4.0;
            let r = row[j] + (row[j] - prev_row[j]) / (factor - 1.0);
            row.push(r);
        }
        let best = row[level];
        let delta = (best - prev_row[level - 1]).abs();
        if delta <= 1e-15 + 1e-13 * best.abs() {
            return Ok(best);
        }
        prev_row = row;
    }
    Ok(prev_row[prev_row.len() - 1])
}
