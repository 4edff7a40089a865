//! Emission-angle windows that lead to S₂.
//!
//! A uniform grid over `[0, 2π)` is flown first; runs of consecutive hits
//! become windows whose edges are then bisected down to `refine_tol`. Each
//! edge is reported at the outer (non-hitting) end of its final bracket, so
//! a window over-covers its true hit set by at most `refine_tol` per side.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::forcefield::{Experiment, FieldError, SlitLayout};
use crate::parallel::{map_range, Execution};
use crate::setup::Simulation;
use crate::trajectory::{simulate, EmissionSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("no emission angle out of {coarse_n} reaches the detector in experiment {experiment}")]
    NoHits { experiment: Experiment, coarse_n: usize },
    #[error("calibration needs coarse_n >= 360 and refine_tol > 0 (got {coarse_n}, {refine_tol})")]
    InvalidSettings { coarse_n: usize, refine_tol: f64 },
    #[error("invalid angle windows: {0}")]
    InvalidWindows(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSettings {
    pub coarse_n: usize,
    pub refine_tol: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            coarse_n: 7200,
            refine_tol: 1e-6,
        }
    }
}

/// Disjoint, sorted sub-ranges of `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleWindows {
    experiment: Experiment,
    windows: Vec<(f64, f64)>,
    total_measure: f64,
}

impl AngleWindows {
    pub fn new(experiment: Experiment, windows: Vec<(f64, f64)>) -> Result<Self, CalibrationError> {
        if windows.is_empty() {
            return Err(CalibrationError::InvalidWindows("no windows".into()));
        }
        for &(lo, hi) in &windows {
            if !(0.0 <= lo && lo < hi && hi <= TAU) {
                return Err(CalibrationError::InvalidWindows(format!("({lo}, {hi})")));
            }
        }
        if windows.windows(2).any(|w| w[0].1 > w[1].0) {
            return Err(CalibrationError::InvalidWindows(
                "windows overlap or are unsorted".into(),
            ));
        }
        let total_measure = windows.iter().map(|(lo, hi)| hi - lo).sum();
        Ok(Self {
            experiment,
            windows,
            total_measure,
        })
    }

    /// The whole circle.
    pub fn full(experiment: Experiment) -> Self {
        Self {
            experiment,
            windows: vec![(0.0, TAU)],
            total_measure: TAU,
        }
    }

    pub fn experiment(&self) -> Experiment {
        self.experiment
    }

    pub fn windows(&self) -> &[(f64, f64)] {
        &self.windows
    }

    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    pub fn contains(&self, alpha: f64) -> bool {
        self.windows.iter().any(|&(lo, hi)| lo <= alpha && alpha < hi)
    }

    /// Windows of the `y ↦ −y` mirrored experiment, `α ↦ 2π − α`.
    pub fn mirrored(&self) -> Self {
        let mut windows: Vec<(f64, f64)> = self
            .windows
            .iter()
            .map(|&(lo, hi)| ((TAU - hi).max(0.0), TAU - lo))
            .collect();
        windows.reverse();
        let total_measure = windows.iter().map(|(lo, hi)| hi - lo).sum();
        Self {
            experiment: self.experiment.mirror(),
            windows,
            total_measure,
        }
    }
}

fn reaches_detector(sim: &Simulation, layout: &SlitLayout, alpha: f64) -> bool {
    let spec = EmissionSpec {
        alpha,
        params: &sim.params,
        layout,
    };
    matches!(simulate(&spec, &sim.ctrl, &sim.limits, false), Ok(t) if t.outcome.is_hit())
}

/// Bisects between a missing angle and a hitting one; returns the final
/// missing end.
fn refine_edge(sim: &Simulation, layout: &SlitLayout, mut miss: f64, mut hit: f64, tol: f64) -> f64 {
    while (hit - miss).abs() > tol {
        let mid = 0.5 * (hit + miss);
        if mid == hit || mid == miss {
            break;
        }
        if reaches_detector(sim, layout, mid) {
            hit = mid;
        } else {
            miss = mid;
        }
    }
    miss
}

/// Finds the angle windows whose trajectories hit S₂ in `experiment`.
pub fn calibrate(
    sim: &Simulation,
    experiment: Experiment,
    settings: &CalibrationSettings,
    exec: Execution,
) -> Result<AngleWindows, CalibrationError> {
    let CalibrationSettings { coarse_n, refine_tol } = *settings;
    if coarse_n < 360 || refine_tol.is_nan() || refine_tol <= 0.0 {
        return Err(CalibrationError::InvalidSettings { coarse_n, refine_tol });
    }
    let layout = sim.layout(experiment)?;
    let angle = |k: usize| TAU * k as f64 / coarse_n as f64;
    let hits = map_range(exec, coarse_n, |k| reaches_detector(sim, &layout, angle(k)));

    // Maximal runs of hits as (first, last) grid indices.
    let mut runs = Vec::new();
    let mut k = 0;
    while k < coarse_n {
        if hits[k] {
            let start = k;
            while k + 1 < coarse_n && hits[k + 1] {
                k += 1;
            }
            runs.push((start, k));
        }
        k += 1;
    }
    if runs.is_empty() {
        return Err(CalibrationError::NoHits { experiment, coarse_n });
    }

    let edges = map_range(exec, runs.len(), |r| {
        let (first, last) = runs[r];
        let lo = if first == 0 {
            0.0
        } else {
            refine_edge(sim, &layout, angle(first - 1), angle(first), refine_tol)
        };
        let hi = if last + 1 == coarse_n {
            TAU
        } else {
            refine_edge(sim, &layout, angle(last + 1), angle(last), refine_tol)
        };
        (lo, hi)
    });

    let mut windows: Vec<(f64, f64)> = Vec::with_capacity(edges.len());
    for (lo, hi) in edges {
        match windows.last_mut() {
            Some(prev) if lo <= prev.1 => prev.1 = prev.1.max(hi),
            _ => windows.push((lo, hi)),
        }
    }
    AngleWindows::new(experiment, windows)
}
