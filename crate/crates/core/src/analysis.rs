//! Comparison of the two-slit distribution with the classical mixture.
//!
//! With `P₁`, `P₂` the single-slit distributions and `P₁₂` the two-slit one,
//! the classical mixture is `(P₁ + P₂)/2` and the interference profile is
//! `cos θ = (2P₁₂ − (P₁ + P₂)) / √(P₁P₂)`, left undefined where `P₁P₂ = 0`.
//! No clamping to `[−1, 1]` is applied.

use thiserror::Error;

use crate::montecarlo::ProbabilityDistribution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("cell grids differ: {0}")]
    GridMismatch(String),
    #[error("sample counts must be positive")]
    NoCounts,
    #[error("mixture weights must be non-negative with a positive sum")]
    InvalidWeights,
}

/// Describes the first difference between two cell grids, if any.
pub fn grid_difference(a: &ProbabilityDistribution, b: &ProbabilityDistribution) -> Option<String> {
    if a.y_mid.len() != b.y_mid.len() {
        return Some(format!("{} cells vs {} cells", a.y_mid.len(), b.y_mid.len()));
    }
    let scale = a.binning.cell.abs().max(f64::MIN_POSITIVE);
    a.y_mid
        .iter()
        .zip(&b.y_mid)
        .enumerate()
        .find(|(_, (x, y))| (*x - *y).abs() > 1e-9 * scale)
        .map(|(k, (x, y))| format!("cell {k}: y_mid {x} vs {y}"))
}

fn check_grid(a: &ProbabilityDistribution, b: &ProbabilityDistribution) -> Result<(), AnalysisError> {
    match grid_difference(a, b) {
        Some(d) => Err(AnalysisError::GridMismatch(d)),
        None => Ok(()),
    }
}

/// `(P₁ + P₂)/2`.
pub fn classical_mixture(
    p1: &ProbabilityDistribution,
    p2: &ProbabilityDistribution,
) -> Result<ProbabilityDistribution, AnalysisError> {
    check_grid(p1, p2)?;
    Ok(ProbabilityDistribution {
        binning: p1.binning,
        y_mid: p1.y_mid.clone(),
        p: p1.p.iter().zip(&p2.p).map(|(a, b)| (a + b) / 2.0).collect(),
    })
}

/// `w₁P₁ + w₂P₂` with the weights normalized to sum to one, e.g. the
/// calibrated window measures for a flux-proportional mixture.
pub fn weighted_mixture(
    p1: &ProbabilityDistribution,
    p2: &ProbabilityDistribution,
    w1: f64,
    w2: f64,
) -> Result<ProbabilityDistribution, AnalysisError> {
    check_grid(p1, p2)?;
    if !(w1 >= 0.0 && w2 >= 0.0 && w1 + w2 > 0.0) {
        return Err(AnalysisError::InvalidWeights);
    }
    let (a, b) = (w1 / (w1 + w2), w2 / (w1 + w2));
    Ok(ProbabilityDistribution {
        binning: p1.binning,
        y_mid: p1.y_mid.clone(),
        p: p1.p.iter().zip(&p2.p).map(|(x, y)| a * x + b * y).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceProfile {
    pub y_mid: Vec<f64>,
    /// NaN where undefined.
    pub cos_theta: Vec<f64>,
    pub defined: Vec<bool>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub p12: Vec<f64>,
    pub mixture: Vec<f64>,
}

impl InterferenceProfile {
    pub fn len(&self) -> usize {
        self.y_mid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_mid.is_empty()
    }

    /// `P₁₂` rebuilt from the mixture and `cos θ`; `None` on undefined cells.
    ///
    /// Since `cos θ` carries the factor 2 of `2P₁₂ − (P₁ + P₂)`, the term added
    /// back is `½·√(P₁P₂)·cos θ`.
    pub fn reconstruct(&self, k: usize) -> Option<f64> {
        self.defined[k].then(|| self.mixture[k] + 0.5 * (self.p1[k] * self.p2[k]).sqrt() * self.cos_theta[k])
    }
}

/// Per-cell `cos θ = (2P₁₂ − (P₁ + P₂)) / √(P₁P₂)`.
pub fn interference_cos_theta(
    p1: &ProbabilityDistribution,
    p2: &ProbabilityDistribution,
    p12: &ProbabilityDistribution,
) -> Result<InterferenceProfile, AnalysisError> {
    check_grid(p1, p2)?;
    check_grid(p1, p12)?;
    let mixture = classical_mixture(p1, p2)?.p;
    let n = p1.p.len();
    let mut cos_theta = Vec::with_capacity(n);
    let mut defined = Vec::with_capacity(n);
    for k in 0..n {
        let (a, b, c) = (p1.p[k], p2.p[k], p12.p[k]);
        if a > 0.0 && b > 0.0 {
            cos_theta.push((2.0 * c - (a + b)) / (a * b).sqrt());
            defined.push(true);
        } else {
            cos_theta.push(f64::NAN);
            defined.push(false);
        }
    }
    Ok(InterferenceProfile {
        y_mid: p1.y_mid.clone(),
        cos_theta,
        defined,
        p1: p1.p.clone(),
        p2: p2.p.clone(),
        p12: p12.p.clone(),
        mixture,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationStats {
    pub max_abs_deviation: f64,
    pub max_deviation_cell: usize,
    pub total_variation: f64,
    /// Binomial standard error of `p12 − mixture` per cell.
    pub standard_errors: Vec<f64>,
    /// Cells with `|p12 − mixture| > 5·SE`.
    pub cells_above_5se: usize,
    /// Largest `|p12 − mixture| / SE` over cells with nonzero SE.
    pub max_z: f64,
}

/// How far `P₁₂` sits from the mixture, in absolute and statistical terms.
///
/// The mixture variance uses `m(1−m)·(1/n₁ + 1/n₂)/4`, which matches
/// `(p₁(1−p₁)/n₁ + p₂(1−p₂)/n₂)/4` to first order in the cell probabilities.
pub fn deviation_stats(
    p12: &ProbabilityDistribution,
    mixture: &ProbabilityDistribution,
    n12: u64,
    n1: u64,
    n2: u64,
) -> Result<DeviationStats, AnalysisError> {
    check_grid(p12, mixture)?;
    if n12 == 0 || n1 == 0 || n2 == 0 {
        return Err(AnalysisError::NoCounts);
    }
    let (n12, n1, n2) = (n12 as f64, n1 as f64, n2 as f64);
    let mut out = DeviationStats {
        max_abs_deviation: 0.0,
        max_deviation_cell: 0,
        total_variation: 0.0,
        standard_errors: Vec::with_capacity(p12.p.len()),
        cells_above_5se: 0,
        max_z: 0.0,
    };
    for (k, (&a, &m)) in p12.p.iter().zip(&mixture.p).enumerate() {
        let dev = (a - m).abs();
        out.total_variation += dev;
        if dev > out.max_abs_deviation {
            out.max_abs_deviation = dev;
            out.max_deviation_cell = k;
        }
        let var = a * (1.0 - a) / n12 + m * (1.0 - m) * (1.0 / n1 + 1.0 / n2) / 4.0;
        let se = var.max(0.0).sqrt();
        out.standard_errors.push(se);
        if se > 0.0 {
            out.max_z = out.max_z.max(dev / se);
            if dev > 5.0 * se {
                out.cells_above_5se += 1;
            }
        }
    }
    out.total_variation *= 0.5;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceSummary {
    pub deviation: DeviationStats,
    pub n_cells: usize,
    pub n_defined: usize,
    /// Defined cells with `|cos θ| > 1`.
    pub n_out_of_range: usize,
    /// Cells where `P₁P₂ = 0` but `P₁₂ > 0`.
    pub n_slit_exclusive: usize,
    /// Sign changes of `cos θ` between consecutive defined cells.
    pub sign_changes: usize,
    pub cos_min: f64,
    pub cos_max: f64,
}

pub fn summarize(profile: &InterferenceProfile, deviation: DeviationStats) -> InterferenceSummary {
    let defined: Vec<f64> = (0..profile.len())
        .filter(|&k| profile.defined[k])
        .map(|k| profile.cos_theta[k])
        .collect();
    let nonzero: Vec<f64> = defined.iter().copied().filter(|c| *c != 0.0).collect();
    let sign_changes = nonzero.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
    InterferenceSummary {
        deviation,
        n_cells: profile.len(),
        n_defined: defined.len(),
        n_out_of_range: defined.iter().filter(|c| c.abs() > 1.0).count(),
        n_slit_exclusive: (0..profile.len())
            .filter(|&k| !profile.defined[k] && profile.p12[k] > 0.0)
            .count(),
        sign_changes,
        cos_min: defined.iter().copied().fold(f64::INFINITY, f64::min),
        cos_max: defined.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

impl std::fmt::Display for InterferenceSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let d = &self.deviation;
        writeln!(f, "cells = {}", self.n_cells)?;
        writeln!(f, "defined_cells = {}", self.n_defined)?;
        writeln!(f, "max_abs_deviation = {}", d.max_abs_deviation)?;
        writeln!(f, "max_deviation_cell = {}", d.max_deviation_cell)?;
        writeln!(f, "total_variation = {}", d.total_variation)?;
        writeln!(f, "max_z = {}", d.max_z)?;
        writeln!(f, "cells_above_5se = {}", d.cells_above_5se)?;
        writeln!(f, "cos_theta_out_of_range_cells = {}", self.n_out_of_range)?;
        writeln!(f, "slit_exclusive_cells = {}", self.n_slit_exclusive)?;
        writeln!(f, "cos_theta_sign_changes = {}", self.sign_changes)?;
        if self.n_defined > 0 {
            writeln!(f, "cos_theta_min = {}", self.cos_min)?;
            writeln!(f, "cos_theta_max = {}", self.cos_max)?;
        }
        Ok(())
    }
}
