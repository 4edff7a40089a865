//! CSV and manifest files.
//!
//! Every file starts with a `#` line carrying the config hash and seed.
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! read back is bit-identical to the one written.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::analysis::InterferenceProfile;
use crate::calibration::AngleWindows;
use crate::forcefield::Experiment;
use crate::integrator::ParticleState;
use crate::montecarlo::{Binning, ProbabilityDistribution, ScreenHistogram};

pub const HISTOGRAM_HEADER: &str = "cell_index,y_lo,y_hi,count,probability";
pub const INTERFERENCE_HEADER: &str = "cell_index,y_mid,p1,p2,p12,mixture,cos_theta,defined";
pub const WINDOWS_HEADER: &str = "experiment,alpha_lo,alpha_hi";
pub const TRACE_HEADER: &str = "t,x,y,vx,vy";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing column header `{0}`")]
    MissingHeader(&'static str),
    #[error("no data rows")]
    Empty,
}

/// Identification written into the `#` header of every output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    fn header(&self, kind: &str, extra: &str) -> String {
        format!(
            "# slitsim {kind}{extra} config_hash={} seed={}\n",
            self.config_hash, self.seed
        )
    }

    /// Recovers `config_hash=` and `seed=` tokens from a comment line.
    pub fn from_comment(line: &str) -> Option<Self> {
        let mut hash = None;
        let mut seed = None;
        for tok in line.trim_start_matches('#').split_whitespace() {
            if let Some(v) = tok.strip_prefix("config_hash=") {
                hash = Some(v.to_string());
            } else if let Some(v) = tok.strip_prefix("seed=") {
                seed = v.parse().ok();
            }
        }
        Some(Self {
            config_hash: hash?,
            seed: seed?,
        })
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_file(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn histogram_csv(h: &ScreenHistogram, prov: &Provenance) -> String {
    let mut s = prov.header("histogram", &format!(" experiment={}", h.experiment.index()));
    s.push_str(HISTOGRAM_HEADER);
    s.push('\n');
    let total = h.n_hit as f64;
    for (k, &c) in h.counts.iter().enumerate() {
        let (lo, hi) = h.binning.cell_bounds(k);
        let p = if h.n_hit == 0 { 0.0 } else { c as f64 / total };
        writeln!(s, "{k},{lo},{hi},{c},{p}").unwrap();
    }
    s
}

/// Data rows of a histogram CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramTable {
    pub provenance: Option<Provenance>,
    pub y_lo: Vec<f64>,
    pub y_hi: Vec<f64>,
    pub counts: Vec<u64>,
    pub probability: Vec<f64>,
}

impl HistogramTable {
    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Probabilities as written, on the grid described by the rows.
    pub fn distribution(&self) -> ProbabilityDistribution {
        let cell = self.y_hi[0] - self.y_lo[0];
        ProbabilityDistribution {
            binning: Binning {
                y_min: self.y_lo[0],
                y_max: *self.y_hi.last().unwrap(),
                cell,
            },
            y_mid: self.y_lo.iter().zip(&self.y_hi).map(|(a, b)| 0.5 * (a + b)).collect(),
            p: self.probability.clone(),
        }
    }
}

struct Rows<'a> {
    provenance: Option<Provenance>,
    rows: Vec<(usize, Vec<&'a str>)>,
}

fn split_rows<'a>(text: &'a str, header: &'static str) -> Result<Rows<'a>, IoError> {
    let mut provenance = None;
    let mut seen_header = false;
    let mut rows = Vec::new();
    let width = header.split(',').count();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.starts_with('#') {
            if provenance.is_none() {
                provenance = Provenance::from_comment(line);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line.trim() != header {
                return Err(IoError::MissingHeader(header));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(IoError::Parse {
                line: line_no,
                msg: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        rows.push((line_no, fields));
    }
    if !seen_header {
        return Err(IoError::MissingHeader(header));
    }
    if rows.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(Rows { provenance, rows })
}

fn field<T: std::str::FromStr>(line: usize, name: &str, s: &str) -> Result<T, IoError> {
    s.trim().parse().map_err(|_| IoError::Parse {
        line,
        msg: format!("bad {name} `{s}`"),
    })
}

pub fn parse_histogram_csv(text: &str) -> Result<HistogramTable, IoError> {
    let Rows { provenance, rows } = split_rows(text, HISTOGRAM_HEADER)?;
    let mut t = HistogramTable {
        provenance,
        y_lo: Vec::new(),
        y_hi: Vec::new(),
        counts: Vec::new(),
        probability: Vec::new(),
    };
    for (expected, (line, f)) in rows.iter().enumerate() {
        let k: usize = field(*line, "cell_index", f[0])?;
        if k != expected {
            return Err(IoError::Parse {
                line: *line,
                msg: format!("cell_index {k}, expected {expected}"),
            });
        }
        t.y_lo.push(field(*line, "y_lo", f[1])?);
        t.y_hi.push(field(*line, "y_hi", f[2])?);
        t.counts.push(field(*line, "count", f[3])?);
        t.probability.push(field(*line, "probability", f[4])?);
    }
    Ok(t)
}

pub fn read_histogram_csv(path: &Path) -> Result<HistogramTable, IoError> {
    parse_histogram_csv(&read_file(path)?)
}

pub fn windows_csv(windows: &[AngleWindows], prov: &Provenance) -> String {
    let mut s = prov.header("windows", "");
    s.push_str(WINDOWS_HEADER);
    s.push('\n');
    for w in windows {
        for (lo, hi) in w.windows() {
            writeln!(s, "{},{lo},{hi}", w.experiment().index()).unwrap();
        }
    }
    s
}

/// Rows grouped per experiment, in file order.
pub fn parse_windows_csv(text: &str) -> Result<Vec<AngleWindows>, IoError> {
    let Rows { rows, .. } = split_rows(text, WINDOWS_HEADER)?;
    let mut grouped: Vec<(Experiment, Vec<(f64, f64)>)> = Vec::new();
    for (line, f) in &rows {
        let idx: u8 = field(*line, "experiment", f[0])?;
        let exp = Experiment::from_index(idx).ok_or_else(|| IoError::Parse {
            line: *line,
            msg: format!("unknown experiment {idx}"),
        })?;
        let w = (field(*line, "alpha_lo", f[1])?, field(*line, "alpha_hi", f[2])?);
        match grouped.iter_mut().find(|(e, _)| *e == exp) {
            Some((_, ws)) => ws.push(w),
            None => grouped.push((exp, vec![w])),
        }
    }
    grouped
        .into_iter()
        .map(|(e, ws)| {
            AngleWindows::new(e, ws).map_err(|err| IoError::Parse {
                line: 0,
                msg: err.to_string(),
            })
        })
        .collect()
}

pub fn read_windows_csv(path: &Path) -> Result<Vec<AngleWindows>, IoError> {
    parse_windows_csv(&read_file(path)?)
}

pub fn interference_csv(profile: &InterferenceProfile, prov: &Provenance) -> String {
    let mut s = prov.header("interference", "");
    s.push_str(INTERFERENCE_HEADER);
    s.push('\n');
    for k in 0..profile.len() {
        let cos = if profile.defined[k] {
            profile.cos_theta[k].to_string()
        } else {
            String::new()
        };
        writeln!(
            s,
            "{k},{},{},{},{},{},{cos},{}",
            profile.y_mid[k], profile.p1[k], profile.p2[k], profile.p12[k], profile.mixture[k], profile.defined[k]
        )
        .unwrap();
    }
    s
}

pub fn parse_interference_csv(text: &str) -> Result<InterferenceProfile, IoError> {
    let Rows { rows, .. } = split_rows(text, INTERFERENCE_HEADER)?;
    let n = rows.len();
    let mut p = InterferenceProfile {
        y_mid: Vec::with_capacity(n),
        cos_theta: Vec::with_capacity(n),
        defined: Vec::with_capacity(n),
        p1: Vec::with_capacity(n),
        p2: Vec::with_capacity(n),
        p12: Vec::with_capacity(n),
        mixture: Vec::with_capacity(n),
    };
    for (line, f) in &rows {
        p.y_mid.push(field(*line, "y_mid", f[1])?);
        p.p1.push(field(*line, "p1", f[2])?);
        p.p2.push(field(*line, "p2", f[3])?);
        p.p12.push(field(*line, "p12", f[4])?);
        p.mixture.push(field(*line, "mixture", f[5])?);
        let defined: bool = field(*line, "defined", f[7])?;
        p.cos_theta.push(if defined {
            field(*line, "cos_theta", f[6])?
        } else {
            f64::NAN
        });
        p.defined.push(defined);
    }
    Ok(p)
}

pub fn trace_csv(path: &[ParticleState], prov: &Provenance, alpha: f64) -> String {
    let mut s = prov.header("trace", &format!(" alpha={alpha}"));
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for p in path {
        writeln!(s, "{},{},{},{},{}", p.t, p.x, p.y, p.vx, p.vy).unwrap();
    }
    s
}

/// Flat `key=value` text with a provenance comment on top.
pub fn manifest_text(entries: &[(String, String)], prov: &Provenance) -> String {
    let mut s = prov.header("manifest", "");
    for (k, v) in entries {
        writeln!(s, "{k}={v}").unwrap();
    }
    s
}

pub fn histogram_tallies(prefix: &str, h: &ScreenHistogram) -> Vec<(String, String)> {
    [
        ("n_samples", h.n_samples()),
        ("n_hit", h.n_hit),
        ("n_overflow", h.n_overflow),
        ("n_blocked", h.n_blocked),
        ("n_escaped", h.n_escaped),
        ("n_timeout", h.n_timeout),
        ("n_aborted", h.n_aborted),
    ]
    .into_iter()
    .map(|(k, v)| (format!("{prefix}.{k}"), v.to_string()))
    .collect()
}
