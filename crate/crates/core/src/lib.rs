//! Classical two-slit experiment with charged particles.
//!
//! Particles leave an emitter at `(−D, 0)` with fixed speed and a uniformly
//! random direction, are repelled (or attracted) by a uniformly charged plane
//! `S₁` at `x = 0` that has one or two slits, and are collected on a detector
//! plane `S₂` at `x = L`. Running the upper-slit, lower-slit and two-slit
//! configurations gives three detector distributions `P₁`, `P₂`, `P₁₂`; the
//! [`analysis`] module measures how far `P₁₂` departs from `(P₁ + P₂)/2`.

pub mod analysis;
pub mod calibration;
pub mod config;
pub mod forcefield;
pub mod integrator;
pub mod io;
pub mod montecarlo;
pub mod parallel;
pub mod setup;
pub mod trajectory;

pub use analysis::{classical_mixture, deviation_stats, interference_cos_theta, InterferenceProfile};
pub use calibration::{calibrate, AngleWindows, CalibrationSettings};
pub use config::{RawConfig, RunConfig};
pub use forcefield::{force_closed_form, Experiment, PhysicsParams, SlitLayout};
pub use montecarlo::{run_experiment, run_mirrored, Binning, ProbabilityDistribution, ScreenHistogram};
pub use parallel::Execution;
pub use setup::Simulation;
pub use trajectory::{simulate, EmissionSpec, OutcomeKind, TrajectoryOutcome};
