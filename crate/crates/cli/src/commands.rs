//! Subcommand implementations: each turns a validated config into files
//! under the output directory, then seals the run with a manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kzsim_core::io::{
    atomic_write, raw_points_to_csv, ratio_points_to_csv, samples_to_csv, surface_to_csv,
    write_json,
};
use kzsim_core::noise::{assemble_quench, noisy_instance};
use kzsim_core::observables::{
    correlation_exact_at, correlation_sampled_at, energy, half_chain_entropy,
};
use kzsim_core::rng::CounterRng;
use kzsim_core::scaling::{exponent_scan, extract_xi, fit_scaling_function, fit_xi_tilde, linspace, rescale};
use kzsim_core::schedule::HamiltonianParams;
use kzsim_core::transpile::transpile_native;
use kzsim_core::{
    EnsembleConfig, KzSchedule, NoiseLengthFit, RawPoint, RescalingParams, SampleSet, ScaledPoint,
    ScanConfig, StateVector, XiGrid,
};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{CommandKind, RunConfig};

const SAMPLE_SEED_TAG: u64 = u64::from_be_bytes(*b"runsampl");

pub enum CliError {
    /// Rejected before any compute; lists every violated precondition.
    Config(Vec<String>),
    /// Failed mid-run (fit breakdown, I/O, ...).
    Run(kzsim_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 3,
        }
    }

    pub fn report(&self) -> String {
        match self {
            CliError::Config(problems) => {
                let mut s = String::from("configuration rejected:\n");
                for p in problems {
                    let _ = writeln!(s, "  - {p}");
                }
                s
            }
            CliError::Run(e) => format!("run failed: {e}\n"),
        }
    }
}

impl From<kzsim_core::Error> for CliError {
    fn from(e: kzsim_core::Error) -> Self {
        CliError::Run(e)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: String,
    master_seed: u64,
    wall_time_s: f64,
    versions: BTreeMap<&'a str, &'a str>,
    outputs: Vec<String>,
    config: &'a RunConfig,
}

pub fn dispatch(
    cmd: CommandKind,
    config_path: &Path,
    out_override: Option<PathBuf>,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let raw = fs::read_to_string(config_path).map_err(|e| {
        CliError::Config(vec![format!("cannot read config {}: {e}", config_path.display())])
    })?;
    let mut config: RunConfig =
        toml::from_str(&raw).map_err(|e| CliError::Config(vec![format!("bad config: {e}")]))?;
    if let Some(seed) = seed_override {
        config.master_seed = seed;
    }

    let problems = config.validate(cmd);
    if !problems.is_empty() {
        return Err(CliError::Config(problems));
    }
    let Some(out) = out_override.or_else(|| config.out_dir.clone()) else {
        return Err(CliError::Config(vec![
            "no output directory: pass --out or set out_dir".into(),
        ]));
    };

    let started = Instant::now();
    let outputs = match cmd {
        CommandKind::Build => cmd_build(&config, &out)?,
        CommandKind::Run => cmd_run(&config, &out)?,
        CommandKind::Sweep => cmd_sweep(&config, &out)?,
        CommandKind::Collapse => cmd_collapse(&config, &out)?,
        CommandKind::Scan => cmd_scan(&config, &out)?,
        CommandKind::Xi => cmd_xi(&config, &out)?,
    };

    let manifest = Manifest {
        command: cmd.name(),
        config_sha256: hex_sha256(raw.as_bytes()),
        master_seed: config.master_seed,
        wall_time_s: started.elapsed().as_secs_f64(),
        versions: BTreeMap::from([("kzsim", env!("CARGO_PKG_VERSION"))]),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        config: &config,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(())
}

fn hex_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let d = h.finalize();
    let mut s = String::with_capacity(64);
    for b in d {
        let _ = write!(s, "{b:02x}");
    }
    s
}

// ---- build ---------------------------------------------------------------

fn cmd_build(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut outputs = Vec::new();
    for &t in &config.drive_times {
        let schedule = config.schedule(t)?;
        let (mut circuit, _) = assemble_quench(&schedule, config.pad_depth)?;
        if config.native {
            circuit = transpile_native(&circuit)?;
        }
        let path = out.join(format!("circuit_T{t}.txt"));
        atomic_write(&path, &circuit.to_text())?;
        outputs.push(path);
    }
    Ok(outputs)
}

// ---- run / sweep ----------------------------------------------------------

/// Evolve one noiseless drive and return the final state.
fn noiseless_state(config: &RunConfig, schedule: &KzSchedule) -> Result<StateVector, CliError> {
    let (circuit, _) = assemble_quench(schedule, config.pad_depth)?;
    let mut psi = StateVector::zero_state(schedule.num_qubits)?;
    psi.run_fused(circuit.gates())?;
    Ok(psi)
}

fn exact_points(
    config: &RunConfig,
    schedule: &KzSchedule,
    state: &StateVector,
) -> Result<Vec<RawPoint>, CliError> {
    let r = config.reference();
    let mut points = Vec::new();
    for x in config.distances() {
        let est = correlation_exact_at(state, r, x)?;
        points.push(RawPoint {
            drive_time: schedule.drive_time,
            time: schedule.t_stop,
            x: x as f64,
            value: est.value,
            std_error: 0.0,
        });
    }
    Ok(points)
}

fn sampled_points(
    config: &RunConfig,
    schedule: &KzSchedule,
    samples: &SampleSet,
) -> Result<Vec<RawPoint>, CliError> {
    let r = config.reference();
    let mut points = Vec::new();
    for x in config.distances() {
        let est = correlation_sampled_at(samples, r, x)?;
        points.push(RawPoint {
            drive_time: schedule.drive_time,
            time: schedule.t_stop,
            x: x as f64,
            value: est.value,
            std_error: est.std_error,
        });
    }
    Ok(points)
}

/// Sample the trajectory mixture: shots are spread over the ensemble and
/// drawn from each trajectory's output state, then pooled.
fn sample_mixture(
    config: &RunConfig,
    schedule: &KzSchedule,
    p: f64,
) -> Result<SampleSet, CliError> {
    let spec = config.noise_spec(p);
    spec.validate()?;
    let (circuit, _) = assemble_quench(schedule, config.pad_depth)?;
    let m = config.trajectories;
    let base = config.shots / m;
    let extra = config.shots % m;
    let sets: kzsim_core::Result<Vec<Option<SampleSet>>> = (0..m)
        .into_par_iter()
        .map(|k| {
            let shots_k = base + u64::from(k < extra);
            if shots_k == 0 {
                return Ok(None);
            }
            let instance = noisy_instance(&circuit, &spec, k)?;
            let mut psi = StateVector::zero_state(schedule.num_qubits)?;
            psi.run_fused(instance.gates())?;
            let seed = CounterRng::new(config.master_seed, &[SAMPLE_SEED_TAG, k]).next_u64();
            Ok(Some(psi.sample(shots_k as usize, seed)))
        })
        .collect();
    let mut merged = SampleSet::from_counts(schedule.num_qubits, BTreeMap::new());
    for set in sets?.into_iter().flatten() {
        merged.merge(&set)?;
    }
    Ok(merged)
}

fn point_comment(config: &RunConfig, schedule: &KzSchedule, p: f64, how: &str) -> String {
    format!(
        "central two-point zz correlation vs distance ({how})\n\
         L = {}, T = {}, dt = {}, order = {}, t_stop = {}, pad_depth = {}, p = {p}, seed = {}",
        config.num_qubits,
        schedule.drive_time,
        config.dt,
        config.order,
        schedule.t_stop,
        config.pad_depth,
        config.master_seed,
    )
}

#[derive(Serialize)]
struct RunStats {
    drive_time: f64,
    p: f64,
    energy: Option<f64>,
    entropy: Option<f64>,
}

fn cmd_run(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut outputs = Vec::new();
    for &t in &config.drive_times {
        let schedule = config.schedule(t)?;
        for p in config.error_rates() {
            run_one(config, &schedule, p, out, &mut outputs)?;
        }
    }
    Ok(outputs)
}

fn run_one(
    config: &RunConfig,
    schedule: &KzSchedule,
    p: f64,
    out: &Path,
    outputs: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    let t = schedule.drive_time;
    let tag = format!("T{t}_p{p}");
    if p == 0.0 {
        let state = noiseless_state(config, schedule)?;
        let points = if config.shots > 0 {
            let samples = state.sample(config.shots as usize, config.master_seed);
            let path = out.join(format!("samples_{tag}.csv"));
            atomic_write(&path, &samples_to_csv(&samples, &point_comment(config, schedule, p, "sampled")))?;
            outputs.push(path);
            sampled_points(config, schedule, &samples)?
        } else {
            exact_points(config, schedule, &state)?
        };
        let how = if config.shots > 0 { "sampled" } else { "exact" };
        let path = out.join(format!("run_{tag}.csv"));
        atomic_write(&path, &raw_points_to_csv(&points, &point_comment(config, schedule, p, how)))?;
        outputs.push(path);
        if config.record_energy || config.record_entropy {
            let params = HamiltonianParams { drive_time: t };
            let stats = RunStats {
                drive_time: t,
                p,
                energy: config.record_energy.then(|| energy(&state, &params, schedule.t_stop)),
                entropy: if config.record_entropy {
                    Some(half_chain_entropy(&state)?)
                } else {
                    None
                },
            };
            let path = out.join(format!("stats_{tag}.json"));
            write_json(&path, &stats)?;
            outputs.push(path);
        }
    } else if config.shots > 0 {
        let samples = sample_mixture(config, schedule, p)?;
        let path = out.join(format!("samples_{tag}.csv"));
        atomic_write(&path, &samples_to_csv(&samples, &point_comment(config, schedule, p, "sampled mixture")))?;
        outputs.push(path);
        let points = sampled_points(config, schedule, &samples)?;
        let path = out.join(format!("run_{tag}.csv"));
        atomic_write(&path, &raw_points_to_csv(&points, &point_comment(config, schedule, p, "sampled mixture")))?;
        outputs.push(path);
    } else {
        let ensemble = EnsembleConfig {
            distances: config.distances(),
            pad_depth: config.pad_depth,
            record_energy: config.record_energy,
            record_entropy: config.record_entropy,
        };
        let spec = config.noise_spec(p);
        let stats = kzsim_core::noise::run_ensemble(schedule, &spec, &ensemble)?;
        let points: Vec<RawPoint> = stats
            .distances
            .iter()
            .enumerate()
            .map(|(i, &x)| RawPoint {
                drive_time: t,
                time: schedule.t_stop,
                x: x as f64,
                value: stats.mean[i],
                std_error: stats.std_error[i],
            })
            .collect();
        let how = format!("trajectory mean over M = {}", config.trajectories);
        let path = out.join(format!("run_{tag}.csv"));
        atomic_write(&path, &raw_points_to_csv(&points, &point_comment(config, schedule, p, &how)))?;
        outputs.push(path);
        let path = out.join(format!("stats_{tag}.json"));
        write_json(&path, &stats)?;
        outputs.push(path);
    }
    Ok(())
}

fn cmd_sweep(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut outputs = Vec::new();
    for p in config.error_rates() {
        let mut points = Vec::new();
        for &t in &config.drive_times {
            let schedule = config.schedule(t)?;
            if p == 0.0 {
                let state = noiseless_state(config, &schedule)?;
                if config.shots > 0 {
                    let seed = CounterRng::new(config.master_seed, &[SAMPLE_SEED_TAG, t.to_bits()])
                        .next_u64();
                    let samples = state.sample(config.shots as usize, seed);
                    points.extend(sampled_points(config, &schedule, &samples)?);
                } else {
                    points.extend(exact_points(config, &schedule, &state)?);
                }
            } else {
                let ensemble = EnsembleConfig {
                    distances: config.distances(),
                    pad_depth: config.pad_depth,
                    record_energy: false,
                    record_entropy: false,
                };
                let stats = kzsim_core::noise::run_ensemble(&schedule, &config.noise_spec(p), &ensemble)?;
                points.extend(stats.distances.iter().enumerate().map(|(i, &x)| RawPoint {
                    drive_time: t,
                    time: schedule.t_stop,
                    x: x as f64,
                    value: stats.mean[i],
                    std_error: stats.std_error[i],
                }));
            }
        }
        let comment = format!(
            "collapse input across drive times {:?}\nL = {}, dt = {}, order = {}, p = {p}, seed = {}",
            config.drive_times, config.num_qubits, config.dt, config.order, config.master_seed,
        );
        let path = out.join(format!("sweep_p{p}.csv"));
        atomic_write(&path, &raw_points_to_csv(&points, &comment))?;
        outputs.push(path);
    }
    Ok(outputs)
}

// ---- collapse / scan / xi --------------------------------------------------

fn resolve_input(config: &RunConfig, out: &Path) -> PathBuf {
    let input = config.input.clone().unwrap_or_default();
    if input.is_absolute() {
        input
    } else {
        out.join(input)
    }
}

fn scaled_points_csv(points: &[ScaledPoint], comment: &str) -> String {
    let mut s = String::new();
    for line in comment.lines() {
        let _ = writeln!(s, "# {line}");
    }
    s.push_str("# units: X, Y, dY dimensionless (length and amplitude rescaled)\n");
    s.push_str("X,Y,dY\n");
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.x, p.y, p.dy);
    }
    s
}

#[derive(Serialize)]
struct CollapseReport {
    nu: f64,
    z: f64,
    eta: f64,
    xi_tilde: Option<f64>,
    chi2_per_dof: f64,
    fit: kzsim_core::ScalingFit,
}

fn cmd_collapse(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut outputs = Vec::new();
    let points = kzsim_core::io::read_raw_points(&resolve_input(config, out))?;
    let params = RescalingParams::new(config.nu, config.z, config.eta)?;
    let mode = config.decay_mode_enum().expect("validated");

    let xi_tilde = if config.fit_xi_tilde {
        let fit = fit_xi_tilde(
            &points,
            &params,
            config.taylor_order,
            mode,
            (config.xi_search_lo, config.xi_search_hi),
        )?;
        let path = out.join("xi_tilde_fit.json");
        write_json(&path, &fit)?;
        outputs.push(path);
        Some(fit.xi_tilde)
    } else if config.xi_tilde > 0.0 {
        Some(config.xi_tilde)
    } else {
        None
    };

    let scaled = rescale(&points, &params, xi_tilde)?;
    let comment = format!(
        "collapsed correlation data\nnu = {}, z = {}, eta = {}, xi_tilde = {:?}",
        config.nu, config.z, config.eta, xi_tilde,
    );
    let path = out.join("collapsed.csv");
    atomic_write(&path, &scaled_points_csv(&scaled, &comment))?;
    outputs.push(path);

    let fit = fit_scaling_function(&scaled, config.taylor_order, mode)?;
    let report = CollapseReport {
        nu: config.nu,
        z: config.z,
        eta: config.eta,
        xi_tilde,
        chi2_per_dof: fit.chi2_per_dof(),
        fit,
    };
    let path = out.join("collapse_fit.json");
    write_json(&path, &report)?;
    outputs.push(path);
    Ok(outputs)
}

#[derive(Serialize)]
struct ScanSummary {
    best_nu: f64,
    best_eta: f64,
    best_chi2_per_dof: f64,
    region_factor: f64,
    region_cells: usize,
}

fn cmd_scan(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut outputs = Vec::new();
    let points = kzsim_core::io::read_raw_points(&resolve_input(config, out))?;
    let scan_config = ScanConfig {
        nu_values: linspace(config.nu_min, config.nu_max, config.nu_steps),
        eta_values: linspace(config.eta_min, config.eta_max, config.eta_steps),
        z: config.z,
        order: config.taylor_order,
        mode: config.decay_mode_enum().expect("validated"),
        region_factor: config.region_factor,
    };
    let scan = exponent_scan(&points, &scan_config)?;

    let comment = format!(
        "collapse quality over exponent hypotheses\nz = {}, taylor_order = {}, decay_mode = {}",
        config.z, config.taylor_order, config.decay_mode,
    );
    let path = out.join("scan_surface.csv");
    atomic_write(&path, &surface_to_csv(&scan, &comment))?;
    outputs.push(path);

    let summary = ScanSummary {
        best_nu: scan.best_nu,
        best_eta: scan.best_eta,
        best_chi2_per_dof: scan.best_chi2_per_dof,
        region_factor: scan.region_factor,
        region_cells: scan.region_cells().len(),
    };
    let path = out.join("scan_summary.json");
    write_json(&path, &summary)?;
    outputs.push(path);
    Ok(outputs)
}

#[derive(Serialize)]
struct XiRow {
    p: f64,
    pad_depth: usize,
    mean_error_events: f64,
    fit: NoiseLengthFit,
}

#[derive(Serialize)]
struct XiReport {
    axis: &'static str,
    rows: Vec<XiRow>,
    /// Log-log slope of xi against the scanned axis, when >= 2 rows fit.
    loglog_slope: Option<f64>,
}

fn cmd_xi(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut outputs = Vec::new();
    let t = config.drive_times[0];
    let schedule = config.schedule(t)?;
    let (grid, axis) = if config.pad_depths.is_empty() {
        (XiGrid::NoiseStrength(config.noise_p.clone()), "p")
    } else {
        (XiGrid::PadDepth(config.pad_depths.clone()), "d")
    };
    let spec = config.noise_spec(config.error_rates()[0]);
    let ensemble = EnsembleConfig {
        distances: config.distances(),
        pad_depth: config.pad_depth,
        record_energy: false,
        record_entropy: false,
    };
    let curves = kzsim_core::noise::xi_experiment(&schedule, &spec, &grid, &ensemble)?;

    let mut rows = Vec::new();
    for curve in &curves {
        let comment = format!(
            "correlation ratio vs distance\nL = {}, T = {t}, dt = {}, order = {}, p = {}, pad_depth = {}, M = {}, seed = {}",
            config.num_qubits,
            config.dt,
            config.order,
            curve.p,
            curve.pad_depth,
            config.trajectories,
            config.master_seed,
        );
        let path = out.join(format!("ratios_p{}_d{}.csv", curve.p, curve.pad_depth));
        atomic_write(&path, &ratio_points_to_csv(&curve.points, &comment))?;
        outputs.push(path);

        let fit = extract_xi(&curve.points, config.window(), t)?;
        rows.push(XiRow {
            p: curve.p,
            pad_depth: curve.pad_depth,
            mean_error_events: curve.stats.mean_error_events,
            fit,
        });
    }

    let loglog_slope = (rows.len() >= 2).then(|| {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| {
                let axis_value = if axis == "p" { r.p } else { r.pad_depth as f64 };
                (axis_value.ln(), r.fit.xi.ln())
            })
            .collect();
        slope(&pts)
    });

    let report = XiReport { axis, rows, loglog_slope };
    let path = out.join("xi_report.json");
    write_json(&path, &report)?;
    outputs.push(path);
    Ok(outputs)
}

/// Unweighted least-squares slope of y against x.
fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}
