//! `slitsim` command line: calibrate, run, analyze, trace.
//!
//! Exit codes: 0 success, 1 usage/config/IO error, 2 calibration failure,
//! 3 grid mismatch between histograms, 4 abort budget exceeded.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use slitsim::analysis::{classical_mixture, deviation_stats, grid_difference, interference_cos_theta, summarize};
use slitsim::calibration::{calibrate, AngleWindows};
use slitsim::config::{RawConfig, RunConfig};
use slitsim::forcefield::Experiment;
use slitsim::io::{self, Provenance};
use slitsim::montecarlo::{run_experiment, RunError, ScreenHistogram};
use slitsim::parallel::Execution;
use slitsim::trajectory::{simulate, EmissionSpec};

#[derive(Parser)]
#[command(
    name = "slitsim",
    version,
    about = "Monte Carlo two-slit simulator for charged particles"
)]
struct Cli {
    /// Worker threads (1 runs sequentially; default uses all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` config file; SLITSIM_<KEY> variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Find the emission-angle windows that reach the detector.
    Calibrate {
        #[command(flatten)]
        config: ConfigArgs,
        /// 1 (upper slit), 2 (lower slit), 3 (both) or all.
        #[arg(long)]
        experiment: String,
        /// Windows CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample trajectories and write histograms plus a manifest.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        experiment: String,
        /// Windows CSV from `calibrate`; calibrates when omitted.
        #[arg(long)]
        windows: Option<PathBuf>,
        /// Simulate experiment 2 instead of mirroring experiment 1.
        #[arg(long)]
        independent_lower: bool,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare P12 with the classical mixture of P1 and P2.
    Analyze {
        p1: PathBuf,
        p2: PathBuf,
        p12: PathBuf,
        /// Interference CSV to write; the summary goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the path of a single trajectory.
    Trace {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        experiment: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> Failure {
    Failure {
        code,
        msg: msg.to_string(),
    }
}

type Outcome = Result<(), Failure>;

fn load_config(args: &ConfigArgs) -> Result<RunConfig, Failure> {
    let mut raw = match &args.config {
        Some(path) => RawConfig::parse(&io::read_file(path).map_err(|e| fail(1, e))?).map_err(|e| fail(1, e))?,
        None => RawConfig::default(),
    };
    raw.apply_env(std::env::vars()).map_err(|e| fail(1, e))?;
    if let Some(seed) = args.seed {
        raw.set("seed", &seed.to_string()).map_err(|e| fail(1, e))?;
    }
    if let Some(n) = args.samples {
        raw.set("n_samples", &n.to_string()).map_err(|e| fail(1, e))?;
    }
    raw.resolve().map_err(|e| fail(1, e))
}

fn parse_experiments(s: &str) -> Result<Vec<Experiment>, Failure> {
    let usage = || fail(1, format!("invalid experiment `{s}`; expected 1, 2, 3 or all"));
    if s == "all" {
        return Ok(Experiment::ALL.to_vec());
    }
    let idx: u8 = s.parse().map_err(|_| usage())?;
    Experiment::from_index(idx).map(|e| vec![e]).ok_or_else(usage)
}

fn provenance(cfg: &RunConfig) -> Provenance {
    Provenance {
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
    }
}

fn write(path: &Path, text: &str) -> Outcome {
    io::write_file(path, text).map_err(|e| fail(1, e))
}

/// Windows per experiment, calibrating lazily when no file provides them.
struct WindowSource<'a> {
    cfg: &'a RunConfig,
    exec: Execution,
    known: Vec<AngleWindows>,
    calibrated: Vec<AngleWindows>,
}

impl WindowSource<'_> {
    fn get(&mut self, e: Experiment) -> Result<AngleWindows, Failure> {
        if let Some(w) = self.known.iter().chain(&self.calibrated).find(|w| w.experiment() == e) {
            return Ok(w.clone());
        }
        if let Some(w) = self
            .known
            .iter()
            .find(|w| w.experiment() == e.mirror() && e != Experiment::Both)
        {
            return Ok(w.mirrored());
        }
        let w = calibrate(&self.cfg.sim, e, &self.cfg.calibration, self.exec).map_err(|err| fail(2, err))?;
        eprintln!(
            "calibrated experiment {e}: {} window(s), measure {}",
            w.windows().len(),
            w.total_measure()
        );
        self.calibrated.push(w.clone());
        Ok(w)
    }
}

fn cmd_calibrate(config: &ConfigArgs, experiment: &str, out: &Path, exec: Execution) -> Outcome {
    let exps = parse_experiments(experiment)?;
    let cfg = load_config(config)?;
    let mut all = Vec::new();
    for e in exps {
        let w = calibrate(&cfg.sim, e, &cfg.calibration, exec).map_err(|err| fail(2, err))?;
        println!(
            "experiment {e}: {} window(s), total_measure = {}",
            w.windows().len(),
            w.total_measure()
        );
        all.push(w);
    }
    write(out, &io::windows_csv(&all, &provenance(&cfg)))
}

fn run_error(e: RunError) -> Failure {
    match e {
        RunError::AbortBudget { .. } => fail(4, e),
        other => fail(1, other),
    }
}

fn cmd_run(
    config: &ConfigArgs,
    experiment: &str,
    windows: Option<&Path>,
    independent_lower: bool,
    out: &Path,
    exec: Execution,
) -> Outcome {
    let start = Instant::now();
    let exps = parse_experiments(experiment)?;
    let cfg = load_config(config)?;
    let binning = cfg.binning().map_err(|e| fail(1, e))?;
    let known = match windows {
        Some(p) => io::read_windows_csv(p).map_err(|e| fail(1, e))?,
        None => Vec::new(),
    };
    let mut source = WindowSource {
        cfg: &cfg,
        exec,
        known,
        calibrated: Vec::new(),
    };
    std::fs::create_dir_all(out).map_err(|e| fail(1, format!("{}: {e}", out.display())))?;
    let prov = provenance(&cfg);
    let mirror_lower = cfg.mirror_lower && !independent_lower;

    let mut entries = cfg.entries();
    entries.push(("config_hash".into(), prov.config_hash.clone()));
    let mut done: Vec<ScreenHistogram> = Vec::new();
    for &e in &exps {
        let prefix = format!("p{}", e.index());
        let mirrored_from = (mirror_lower && e == Experiment::LowerOnly).then(|| e.mirror());
        let windows = source.get(mirrored_from.unwrap_or(e))?;
        let h = match mirrored_from {
            Some(src) => match done.iter().find(|h| h.experiment == src) {
                Some(h) => h.mirrored().map_err(run_error)?,
                None => run_experiment(&cfg.sim, src, &windows, cfg.n_samples, cfg.seed, binning, exec)
                    .and_then(|h| h.mirrored())
                    .map_err(run_error)?,
            },
            None => run_experiment(&cfg.sim, e, &windows, cfg.n_samples, cfg.seed, binning, exec).map_err(run_error)?,
        };
        let sampled = match mirrored_from {
            Some(src) => format!("mirrored from experiment {}", src.index()),
            None => "simulated".into(),
        };
        println!(
            "experiment {e}: {} hits, {} overflow, {} blocked, {} escaped, {} timeout, {} aborted ({sampled})",
            h.n_hit, h.n_overflow, h.n_blocked, h.n_escaped, h.n_timeout, h.n_aborted
        );
        entries.push((format!("{prefix}.source"), sampled));
        entries.push((format!("{prefix}.window_count"), windows.windows().len().to_string()));
        entries.push((format!("{prefix}.window_measure"), windows.total_measure().to_string()));
        entries.extend(io::histogram_tallies(&prefix, &h));
        write(
            &out.join(format!("histogram_{}.csv", e.index())),
            &io::histogram_csv(&h, &prov),
        )?;
        done.push(h);
    }
    if !source.calibrated.is_empty() {
        write(&out.join("windows.csv"), &io::windows_csv(&source.calibrated, &prov))?;
    }
    entries.push(("wall_time_s".into(), format!("{:.3}", start.elapsed().as_secs_f64())));
    write(&out.join("manifest.txt"), &io::manifest_text(&entries, &prov))
}

fn cmd_analyze(p1: &Path, p2: &Path, p12: &Path, out: &Path) -> Outcome {
    let read = |p: &Path| io::read_histogram_csv(p).map_err(|e| fail(1, format!("{}: {e}", p.display())));
    let (t1, t2, t12) = (read(p1)?, read(p2)?, read(p12)?);
    let (d1, d2, d12) = (t1.distribution(), t2.distribution(), t12.distribution());
    for (name, other) in [("p2", &d2), ("p12", &d12)] {
        if let Some(diff) = grid_difference(&d1, other) {
            return Err(fail(3, format!("grid mismatch between p1 and {name}: {diff}")));
        }
    }
    let provs: Vec<_> = [&t1, &t2, &t12].iter().map(|t| t.provenance.clone()).collect();
    if provs.iter().any(|p| p != &provs[2]) {
        eprintln!("warning: inputs carry different config hashes or seeds");
    }
    let prov = provs[2].clone().unwrap_or(Provenance {
        config_hash: "unknown".into(),
        seed: 0,
    });
    let analysis = |e: slitsim::analysis::AnalysisError| fail(3, e);
    let profile = interference_cos_theta(&d1, &d2, &d12).map_err(analysis)?;
    let mixture = classical_mixture(&d1, &d2).map_err(analysis)?;
    let (n1, n2, n12) = (t1.total_count(), t2.total_count(), t12.total_count());
    let dev = deviation_stats(&d12, &mixture, n12, n1, n2).map_err(|e| fail(1, e))?;
    let summary = summarize(&profile, dev);
    write(out, &io::interference_csv(&profile, &prov))?;
    let text = format!(
        "# slitsim summary config_hash={} seed={}\nn1 = {n1}\nn2 = {n2}\nn12 = {n12}\n{summary}",
        prov.config_hash, prov.seed
    );
    write(&out.with_extension("summary.txt"), &text)?;
    print!("{summary}");
    Ok(())
}

fn cmd_trace(config: &ConfigArgs, experiment: &str, alpha: f64, out: &Path) -> Outcome {
    let exps = parse_experiments(experiment)?;
    let [e] = exps[..] else {
        return Err(fail(1, "trace needs a single experiment"));
    };
    let cfg = load_config(config)?;
    let layout = cfg.sim.layout(e).map_err(|err| fail(1, err))?;
    let spec = EmissionSpec {
        alpha,
        params: &cfg.sim.params,
        layout: &layout,
    };
    let t = simulate(&spec, &cfg.sim.ctrl, &cfg.sim.limits, true).map_err(|err| fail(1, err))?;
    let o = t.outcome;
    match o.y_final {
        Some(y) => println!("{} at y = {y}, t = {}, {} steps", o.kind.name(), o.t_final, o.steps),
        None => println!("{} at t = {}, {} steps", o.kind.name(), o.t_final, o.steps),
    }
    write(
        out,
        &io::trace_csv(t.path.as_deref().unwrap_or(&[]), &provenance(&cfg), alpha),
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let exec = Execution::with_workers(cli.workers);
    let result = match &cli.command {
        Command::Calibrate {
            config,
            experiment,
            out,
        } => cmd_calibrate(config, experiment, out, exec),
        Command::Run {
            config,
            experiment,
            windows,
            independent_lower,
            out,
        } => cmd_run(config, experiment, windows.as_deref(), *independent_lower, out, exec),
        Command::Analyze { p1, p2, p12, out } => cmd_analyze(p1, p2, p12, out),
        Command::Trace {
            config,
            experiment,
            alpha,
            out,
        } => cmd_trace(config, experiment, *alpha, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
