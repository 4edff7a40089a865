//! Seeded Monte Carlo over emission angles and S₂ histogramming.
//!
//! Draw `i` of a run depends only on `(seed, i)`: a ChaCha8 generator keyed by
//! `seed` is switched to stream `i` and its first 64-bit word becomes the
//! uniform variate. Partitioning the index range across workers therefore
//! cannot change any sample, and histogram merging is exact integer addition.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::calibration::AngleWindows;
use crate::forcefield::{Experiment, FieldError};
use crate::parallel::{fold_range, Execution};
use crate::setup::Simulation;
use crate::trajectory::{simulate, EmissionSpec, OutcomeKind, TrajectoryError, TrajectoryOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("n_samples must be positive")]
    NoSamples,
    #[error("invalid binning: y_min = {y_min}, y_max = {y_max}, cell = {cell}")]
    InvalidBinning { y_min: f64, y_max: f64, cell: f64 },
    #[error("histogram grids differ")]
    GridMismatch,
    #[error("histogram grid is not symmetric about y = 0")]
    AsymmetricGrid,
    #[error("histogram has no hits")]
    NoHits,
    #[error("{aborted} of {n_samples} trajectories aborted (budget 0.1%)")]
    AbortBudget {
        aborted: u64,
        n_samples: u64,
        histogram: Box<ScreenHistogram>,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Uniform variate in `[0, 1)` for sample `index` of stream `seed`.
pub fn unit_draw(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Maps `u ∈ [0, 1)` through the inverse of the piecewise-linear window CDF.
pub fn angle_from_unit(u: f64, windows: &AngleWindows) -> f64 {
    let target = u * windows.total_measure();
    let mut cumulative = 0.0;
    let ws = windows.windows();
    for &(lo, hi) in ws {
        let width = hi - lo;
        if target < cumulative + width {
            let alpha = lo + (target - cumulative);
            return alpha.min(f64::from_bits(hi.to_bits() - 1)).max(lo);
        }
        cumulative += width;
    }
    let (lo, hi) = ws[ws.len() - 1];
    f64::from_bits(hi.to_bits() - 1).max(lo)
}

/// Emission angle of sample `index`.
pub fn sample_angle(seed: u64, index: u64, windows: &AngleWindows) -> f64 {
    angle_from_unit(unit_draw(seed, index), windows)
}

/// Equal cells of width `cell` starting at `y_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binning {
    pub y_min: f64,
    pub y_max: f64,
    pub cell: f64,
}

impl Binning {
    pub fn new(y_min: f64, y_max: f64, cell: f64) -> Result<Self, RunError> {
        if !(y_min < y_max && cell > 0.0 && y_min.is_finite() && y_max.is_finite() && cell.is_finite()) {
            return Err(RunError::InvalidBinning { y_min, y_max, cell });
        }
        Ok(Self { y_min, y_max, cell })
    }

    /// `[−(l + 10R), l + 10R]` in cells of one particle diameter.
    pub fn default_for(sim: &Simulation) -> Self {
        let reach = sim.slit_offset + 10.0 * sim.slit_half_height;
        Self {
            y_min: -reach,
            y_max: reach,
            cell: sim.params.particle_diameter,
        }
    }

    pub fn n_cells(&self) -> usize {
        // Guard against span/cell landing a hair above an integer.
        ((self.y_max - self.y_min) / self.cell - 1e-9).ceil().max(1.0) as usize
    }

    pub fn cell_of(&self, y: f64) -> Option<usize> {
        if !(y >= self.y_min && y < self.y_max) {
            return None;
        }
        let k = ((y - self.y_min) / self.cell).floor() as usize;
        Some(k.min(self.n_cells() - 1))
    }

    pub fn cell_bounds(&self, k: usize) -> (f64, f64) {
        let lo = self.y_min + k as f64 * self.cell;
        (lo, lo + self.cell)
    }

    pub fn cell_mid(&self, k: usize) -> f64 {
        self.y_min + (k as f64 + 0.5) * self.cell
    }

    fn is_symmetric(&self) -> bool {
        let top = self.y_min + self.n_cells() as f64 * self.cell;
        (self.y_min + top).abs() <= 1e-12 * (top - self.y_min)
            && (self.y_min + self.y_max).abs() <= 1e-12 * (self.y_max - self.y_min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenHistogram {
    pub experiment: Experiment,
    pub seed: u64,
    pub binning: Binning,
    pub counts: Vec<u64>,
    /// Hits inside the binned span; equals the sum of `counts`.
    pub n_hit: u64,
    /// Hits outside the binned span.
    pub n_overflow: u64,
    pub n_blocked: u64,
    pub n_escaped: u64,
    pub n_timeout: u64,
    pub n_aborted: u64,
}

impl ScreenHistogram {
    pub fn empty(experiment: Experiment, seed: u64, binning: Binning) -> Self {
        Self {
            experiment,
            seed,
            binning,
            counts: vec![0; binning.n_cells()],
            n_hit: 0,
            n_overflow: 0,
            n_blocked: 0,
            n_escaped: 0,
            n_timeout: 0,
            n_aborted: 0,
        }
    }

    pub fn record(&mut self, result: &Result<TrajectoryOutcome, TrajectoryError>) {
        match result {
            Err(_) => self.n_aborted += 1,
            Ok(o) => match o.kind {
                OutcomeKind::HitS2 => match o.y_final.and_then(|y| self.binning.cell_of(y)) {
                    Some(k) => {
                        self.counts[k] += 1;
                        self.n_hit += 1;
                    }
                    None => self.n_overflow += 1,
                },
                OutcomeKind::BlockedS1 => self.n_blocked += 1,
                OutcomeKind::Escaped => self.n_escaped += 1,
                OutcomeKind::MaxTimeExceeded => self.n_timeout += 1,
            },
        }
    }

    pub fn merge(mut self, other: &ScreenHistogram) -> Result<Self, RunError> {
        if self.binning != other.binning || self.counts.len() != other.counts.len() {
            return Err(RunError::GridMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_hit += other.n_hit;
        self.n_overflow += other.n_overflow;
        self.n_blocked += other.n_blocked;
        self.n_escaped += other.n_escaped;
        self.n_timeout += other.n_timeout;
        self.n_aborted += other.n_aborted;
        Ok(self)
    }

    /// All samples accounted for.
    pub fn n_samples(&self) -> u64 {
        self.n_hit + self.n_overflow + self.n_blocked + self.n_escaped + self.n_timeout + self.n_aborted
    }

    /// Histogram of the `y ↦ −y` reflected experiment.
    pub fn mirrored(&self) -> Result<Self, RunError> {
        if !self.binning.is_symmetric() {
            return Err(RunError::AsymmetricGrid);
        }
        let mut out = self.clone();
        out.experiment = self.experiment.mirror();
        out.counts.reverse();
        Ok(out)
    }

    pub fn normalize(&self) -> Result<ProbabilityDistribution, RunError> {
        if self.n_hit == 0 {
            return Err(RunError::NoHits);
        }
        let total = self.n_hit as f64;
        Ok(ProbabilityDistribution {
            binning: self.binning,
            y_mid: (0..self.counts.len()).map(|k| self.binning.cell_mid(k)).collect(),
            p: self.counts.iter().map(|&c| c as f64 / total).collect(),
        })
    }
}

/// Cell probabilities on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityDistribution {
    pub binning: Binning,
    pub y_mid: Vec<f64>,
    pub p: Vec<f64>,
}

impl ProbabilityDistribution {
    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }
}

/// Flies `n_samples` seeded particles through `experiment` and bins the hits.
pub fn run_experiment(
    sim: &Simulation,
    experiment: Experiment,
    windows: &AngleWindows,
    n_samples: u64,
    seed: u64,
    binning: Binning,
    exec: Execution,
) -> Result<ScreenHistogram, RunError> {
    if n_samples == 0 {
        return Err(RunError::NoSamples);
    }
    Binning::new(binning.y_min, binning.y_max, binning.cell)?;
    let layout = sim.layout(experiment)?;
    let histogram = fold_range(
        exec,
        n_samples as usize,
        || ScreenHistogram::empty(experiment, seed, binning),
        |mut h, i| {
            let spec = EmissionSpec {
                alpha: sample_angle(seed, i as u64, windows),
                params: &sim.params,
                layout: &layout,
            };
            h.record(&simulate(&spec, &sim.ctrl, &sim.limits, false).map(|t| t.outcome));
            h
        },
        |a, b| a.merge(&b).expect("worker histograms share one grid"),
    );
    if histogram.n_aborted * 1000 > n_samples {
        return Err(RunError::AbortBudget {
            aborted: histogram.n_aborted,
            n_samples,
            histogram: Box::new(histogram),
        });
    }
    Ok(histogram)
}

/// Experiment 2 obtained by reflecting a run of experiment 1 (or vice versa).
pub fn run_mirrored(
    sim: &Simulation,
    target: Experiment,
    source_windows: &AngleWindows,
    n_samples: u64,
    seed: u64,
    binning: Binning,
    exec: Execution,
) -> Result<ScreenHistogram, RunError> {
    let source = run_experiment(sim, target.mirror(), source_windows, n_samples, seed, binning, exec)?;
    source.mirrored()
}
