//! Depolarizing noise and trajectory ensembles.
//!
//! After every gate a Pauli error fires with probability `p`: one of
//! {X, Y, Z} (each p/3) on the target of a one-qubit gate, one of the 15
//! non-identity Pauli pairs (each p/15) on the targets of a two-qubit gate.
//! Each (master seed, trajectory, gate index) triple addresses its own
//! counter-based random stream, so a single trajectory can be replayed in
//! isolation and is unaffected by how many draws other gates made.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gates::Gate;
use crate::observables::{correlations_exact, energy, half_chain_entropy};
use crate::rng::CounterRng;
use crate::scaling::RatioPoint;
use crate::schedule::{build_drive, pad_depth, KzSchedule};
use crate::state::StateVector;

const NOISE_TAG: u64 = u64::from_be_bytes(*b"depolstr");

/// Circuit metadata key holding the length of the preparation prefix.
pub const PREP_GATES_KEY: &str = "prep_gates";

/// Noiseless reference values below this magnitude are excluded from decay
/// ratios: the ratio of two tiny numbers carries no signal.
pub const RATIO_INTENSITY_CUTOFF: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Error probability per gate (same rate for 1- and 2-qubit gates).
    pub p: f64,
    pub master_seed: u64,
    /// Ensemble size M.
    pub trajectories: u64,
    /// Whether errors also follow the state-preparation layer.
    pub noisy_prep: bool,
}

impl NoiseSpec {
    pub fn new(p: f64, master_seed: u64, trajectories: u64) -> Result<Self> {
        let spec = NoiseSpec { p, master_seed, trajectories, noisy_prep: true };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidArgument(format!(
                "error probability must lie in [0, 1], got {}",
                self.p
            )));
        }
        if self.trajectories == 0 {
            return Err(Error::InvalidArgument("ensemble needs at least one trajectory".into()));
        }
        Ok(())
    }
}

fn gate_stream(master_seed: u64, trajectory: u64, gate_index: u64) -> CounterRng {
    CounterRng::new(master_seed, &[NOISE_TAG, trajectory, gate_index])
}

/// Decodes error index `m` in `0..15` into the Pauli pair following a
/// two-qubit gate on `(a, b)`; identity components are omitted.
fn pauli_pair(m: u64, a: usize, b: usize, out: &mut Vec<Gate>) {
    let code = m + 1; // skip II
    for (q, c) in [(a, code / 4), (b, code % 4)] {
        match c {
            0 => {}
            1 => out.push(Gate::PauliX(q)),
            2 => out.push(Gate::PauliY(q)),
            3 => out.push(Gate::PauliZ(q)),
            _ => unreachable!(),
        }
    }
}

/// Expands `gates` into a noisy instance for one trajectory. The first
/// `prep_len` gates are exempt when `noisy_prep` is false. Returns the gate
/// list and the number of error events inserted.
pub fn noisy_gates(
    gates: &[Gate],
    prep_len: usize,
    spec: &NoiseSpec,
    trajectory: u64,
) -> (Vec<Gate>, usize) {
    let mut out = Vec::with_capacity(gates.len() + 16);
    let mut events = 0usize;
    for (k, gate) in gates.iter().enumerate() {
        out.push(gate.clone());
        if spec.p == 0.0 || (k < prep_len && !spec.noisy_prep) {
            continue;
        }
        let mut rng = gate_stream(spec.master_seed, trajectory, k as u64);
        if rng.next_f64() >= spec.p {
            continue;
        }
        events += 1;
        let (a, b) = gate.qubits();
        match b {
            None => match rng.next_below(3) {
                0 => out.push(Gate::PauliX(a)),
                1 => out.push(Gate::PauliY(a)),
                _ => out.push(Gate::PauliZ(a)),
            },
            Some(b) => pauli_pair(rng.next_below(15), a, b, &mut out),
        }
    }
    (out, events)
}

/// One noisy realization of a circuit, tagged with its trajectory id. The
/// preparation prefix declared under [`PREP_GATES_KEY`] is exempt when the
/// spec says so.
pub fn noisy_instance(circuit: &Circuit, spec: &NoiseSpec, trajectory: u64) -> Result<Circuit> {
    let prep_len = prep_prefix(circuit);
    let (gates, events) = noisy_gates(circuit.gates(), prep_len, spec, trajectory);
    let mut out = Circuit::new(circuit.num_qubits())?;
    out.extend(gates)?;
    for (k, v) in circuit.metadata() {
        out.set_metadata(k, v);
    }
    out.set_metadata("noise_p", &format!("{:e}", spec.p));
    out.set_metadata("master_seed", &spec.master_seed.to_string());
    out.set_metadata("trajectory", &trajectory.to_string());
    out.set_metadata("error_events", &events.to_string());
    Ok(out)
}

fn prep_prefix(circuit: &Circuit) -> usize {
    circuit.metadata().get(PREP_GATES_KEY).and_then(|v| v.parse().ok()).unwrap_or(0)
}

/// Counts the error events `noisy_gates` would insert, without building the
/// gate list. Trajectories that come back clean can reuse the noiseless
/// state directly.
pub fn count_error_events(
    n_gates: usize,
    prep_len: usize,
    spec: &NoiseSpec,
    trajectory: u64,
) -> usize {
    if spec.p == 0.0 {
        return 0;
    }
    let start = if spec.noisy_prep { 0 } else { prep_len };
    (start..n_gates)
        .filter(|&k| gate_stream(spec.master_seed, trajectory, k as u64).next_f64() < spec.p)
        .count()
}

/// What each trajectory records besides the two-point function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Distances at which the central two-point function is recorded.
    pub distances: Vec<usize>,
    /// Odd circuit-depth multiplier; 1 leaves the drive unpadded.
    pub pad_depth: usize,
    pub record_energy: bool,
    pub record_entropy: bool,
}

impl EnsembleConfig {
    pub fn correlations(distances: Vec<usize>) -> Self {
        EnsembleConfig { distances, pad_depth: 1, record_energy: false, record_entropy: false }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub master_seed: u64,
    pub trajectory: u64,
    pub error_events: usize,
    pub correlations: Vec<f64>,
    pub energy: Option<f64>,
    pub entropy: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanWithError {
    pub mean: f64,
    pub std_error: f64,
}

fn mean_with_error(values: &[f64]) -> MeanWithError {
    // Identical inputs (every trajectory taking the noiseless shortcut,
    // say) average to the value itself, bit for bit.
    if values.windows(2).all(|w| w[0] == w[1]) {
        return MeanWithError { mean: values.first().copied().unwrap_or(f64::NAN), std_error: 0.0 };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    MeanWithError { mean, std_error: (var / n).sqrt() }
}

/// Trajectory-averaged observables with standard errors of the mean,
/// alongside their noiseless reference values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub distances: Vec<usize>,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub trajectories: u64,
    pub mean_error_events: f64,
    pub noiseless: Vec<f64>,
    pub energy: Option<MeanWithError>,
    pub entropy: Option<MeanWithError>,
    pub noiseless_energy: Option<f64>,
    pub noiseless_entropy: Option<f64>,
}

/// Full quench circuit (prep layer plus Trotter steps, optionally padded);
/// the metadata records where the prep prefix ends.
pub fn assemble_quench(schedule: &KzSchedule, depth_multiplier: usize) -> Result<(Circuit, usize)> {
    let drive = build_drive(schedule)?;
    let mut full =
        if depth_multiplier <= 1 { drive } else { pad_depth(&drive, schedule, depth_multiplier)? };
    let prep_len = schedule.num_qubits;
    full.set_metadata(PREP_GATES_KEY, &prep_len.to_string());
    Ok((full, prep_len))
}

struct NoiselessRef {
    correlations: Vec<f64>,
    energy: Option<f64>,
    entropy: Option<f64>,
}

fn record(
    state: &StateVector,
    schedule: &KzSchedule,
    config: &EnsembleConfig,
) -> Result<(Vec<f64>, Option<f64>, Option<f64>)> {
    let corr = correlations_exact(state, &config.distances)?;
    let e = config
        .record_energy
        .then(|| energy(state, &schedule.params(), schedule.t_stop));
    let s = config.record_entropy.then(|| half_chain_entropy(state)).transpose()?;
    Ok((corr, e, s))
}

fn run_one_trajectory(
    gates: &[Gate],
    prep_len: usize,
    schedule: &KzSchedule,
    spec: &NoiseSpec,
    config: &EnsembleConfig,
    trajectory: u64,
    baseline: &NoiselessRef,
) -> Result<TrajectoryResult> {
    let events = count_error_events(gates.len(), prep_len, spec, trajectory);
    if events == 0 {
        return Ok(TrajectoryResult {
            master_seed: spec.master_seed,
            trajectory,
            error_events: 0,
            correlations: baseline.correlations.clone(),
            energy: baseline.energy,
            entropy: baseline.entropy,
        });
    }
    let (noisy, counted) = noisy_gates(gates, prep_len, spec, trajectory);
    debug_assert_eq!(counted, events);
    let mut state = StateVector::zero_state(schedule.num_qubits)?;
    state.run_fused(&noisy)?;
    let (correlations, energy, entropy) = record(&state, schedule, config)?;
    Ok(TrajectoryResult {
        master_seed: spec.master_seed,
        trajectory,
        error_events: events,
        correlations,
        energy,
        entropy,
    })
}

pub fn run_ensemble(
    schedule: &KzSchedule,
    spec: &NoiseSpec,
    config: &EnsembleConfig,
) -> Result<EnsembleStats> {
    spec.validate()?;
    let (full, prep_len) = assemble_quench(schedule, config.pad_depth)?;
    let gates = full.gates();

    let mut base = StateVector::zero_state(schedule.num_qubits)?;
    base.run_fused(gates)?;
    let (noiseless, base_e, base_s) = record(&base, schedule, config)?;
    let baseline = NoiselessRef { correlations: noiseless, energy: base_e, entropy: base_s };

    let results: Result<Vec<TrajectoryResult>> = (0..spec.trajectories)
        .into_par_iter()
        .map(|t| run_one_trajectory(gates, prep_len, schedule, spec, config, t, &baseline))
        .collect();
    let results = results?;

    Ok(aggregate(&config.distances, &results, &baseline))
}

fn aggregate(distances: &[usize], results: &[TrajectoryResult], base: &NoiselessRef) -> EnsembleStats {
    let n = results.len() as f64;
    let k = distances.len();
    let mut mean = vec![0.0; k];
    let mut std_error = vec![0.0; k];
    let mut col = Vec::with_capacity(results.len());
    for i in 0..k {
        col.clear();
        col.extend(results.iter().map(|r| r.correlations[i]));
        let mw = mean_with_error(&col);
        mean[i] = mw.mean;
        std_error[i] = mw.std_error;
    }
    let events: f64 = results.iter().map(|r| r.error_events as f64).sum();
    let pooled = |get: fn(&TrajectoryResult) -> Option<f64>| -> Option<MeanWithError> {
        let vals: Option<Vec<f64>> = results.iter().map(get).collect();
        vals.map(|v| mean_with_error(&v))
    };
    EnsembleStats {
        distances: distances.to_vec(),
        mean,
        std_error,
        trajectories: results.len() as u64,
        mean_error_events: events / n,
        noiseless: base.correlations.clone(),
        energy: pooled(|r| r.energy),
        entropy: pooled(|r| r.entropy),
        noiseless_energy: base.energy,
        noiseless_entropy: base.entropy,
    }
}

/// Axis of a decay-length experiment: vary the error rate at fixed depth,
/// or the depth multiplier at fixed error rate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum XiGrid {
    NoiseStrength(Vec<f64>),
    PadDepth(Vec<usize>),
}

/// Noisy-over-noiseless correlation ratios for one grid point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioCurve {
    pub p: f64,
    pub pad_depth: usize,
    pub points: Vec<RatioPoint>,
    /// Distances dropped because the noiseless value fell below the
    /// intensity cutoff.
    pub excluded: Vec<usize>,
    pub stats: EnsembleStats,
}

/// Runs an ensemble per grid point and divides each mean correlation curve
/// by the noiseless one, yielding decay-ratio tables.
pub fn xi_experiment(
    schedule: &KzSchedule,
    spec: &NoiseSpec,
    grid: &XiGrid,
    config: &EnsembleConfig,
) -> Result<Vec<RatioCurve>> {
    let rows: Vec<(f64, usize)> = match grid {
        XiGrid::NoiseStrength(ps) => ps.iter().map(|&p| (p, config.pad_depth)).collect(),
        XiGrid::PadDepth(ds) => ds.iter().map(|&d| (spec.p, d)).collect(),
    };
    if rows.is_empty() {
        return Err(Error::InvalidArgument("empty experiment grid".into()));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (p, d) in rows {
        let row_spec = NoiseSpec { p, ..*spec };
        row_spec.validate()?;
        let row_config = EnsembleConfig { pad_depth: d, ..config.clone() };
        let stats = run_ensemble(schedule, &row_spec, &row_config)?;
        let mut points = Vec::new();
        let mut excluded = Vec::new();
        for (i, &x) in stats.distances.iter().enumerate() {
            let c0 = stats.noiseless[i];
            if c0.abs() < RATIO_INTENSITY_CUTOFF {
                excluded.push(x);
                continue;
            }
            points.push(RatioPoint {
                x: x as f64,
                ratio: stats.mean[i] / c0,
                std_error: stats.std_error[i] / c0.abs(),
            });
        }
        out.push(RatioCurve { p, pad_depth: d, points, excluded, stats });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::zz_expectation;
    use crate::oracle::depolarized_expectation;
    use crate::schedule::TrotterOrder;
    use std::collections::BTreeMap;

    fn small_schedule(l: usize, drive_time: f64) -> KzSchedule {
        KzSchedule::new(l, drive_time, 0.1, TrotterOrder::Second).unwrap()
    }

    #[test]
    fn insertion_rate_matches_probability() {
        let sched = small_schedule(5, 1.0);
        let (full, prep_len) = assemble_quench(&sched, 1).unwrap();
        let spec = NoiseSpec::new(0.05, 9, 1).unwrap();
        let n_gates = full.gates().len();
        let trials = 400u64;
        let mut total = 0usize;
        for t in 0..trials {
            let (noisy, events) = noisy_gates(full.gates(), prep_len, &spec, t);
            assert_eq!(
                events,
                count_error_events(n_gates, prep_len, &spec, t),
                "cheap counter disagrees with expansion"
            );
            // Every event inserts one or two Pauli gates.
            let inserted = noisy.len() - n_gates;
            assert!(inserted >= events && inserted <= 2 * events);
            total += events;
        }
        let expected = spec.p * (n_gates as f64) * (trials as f64);
        let sigma = expected.sqrt();
        assert!(
            ((total as f64) - expected).abs() < 5.0 * sigma,
            "total {total} vs expected {expected}"
        );
    }

    #[test]
    fn two_qubit_errors_cover_all_pairs_uniformly() {
        let mut c = Circuit::new(2).unwrap();
        c.push(Gate::Cnot(0, 1)).unwrap();
        let spec = NoiseSpec::new(1.0, 4, 1).unwrap();
        let draws = 100_000u64;
        let mut histogram: BTreeMap<String, u64> = BTreeMap::new();
        for t in 0..draws {
            let inst = noisy_instance(&c, &spec, t).unwrap();
            let suffix: Vec<String> = inst.gates()[1..]
                .iter()
                .map(|g| format!("{}{}", g.kind_token(), g.qubits().0))
                .collect();
            assert!(!suffix.is_empty(), "p=1 must always insert");
            *histogram.entry(suffix.join("+")).or_insert(0) += 1;
        }
        assert_eq!(histogram.len(), 15);
        let expect = draws as f64 / 15.0;
        let sigma = (expect * (1.0 - 1.0 / 15.0)).sqrt();
        for (pair, &count) in &histogram {
            assert!(
                (count as f64 - expect).abs() < 5.0 * sigma,
                "{pair}: {count} vs {expect}"
            );
        }
    }

    #[test]
    fn zero_noise_leaves_circuit_unchanged() {
        let sched = small_schedule(5, 0.5);
        let (full, _) = assemble_quench(&sched, 1).unwrap();
        let spec = NoiseSpec::new(0.0, 1, 1).unwrap();
        let inst = noisy_instance(&full, &spec, 0).unwrap();
        assert_eq!(inst.gates(), full.gates());
        assert_eq!(inst.metadata()["error_events"], "0");
    }

    #[test]
    fn prep_exemption_only_affects_leading_layer() {
        let sched = small_schedule(5, 0.5);
        let (full, prep_len) = assemble_quench(&sched, 1).unwrap();
        let all = NoiseSpec { p: 0.4, master_seed: 3, trajectories: 1, noisy_prep: true };
        let skip = NoiseSpec { noisy_prep: false, ..all };
        for t in 0..50u64 {
            let (_, ea) = noisy_gates(full.gates(), prep_len, &all, t);
            let (_, es) = noisy_gates(full.gates(), prep_len, &skip, t);
            assert!(es <= ea);
            // Streams are per gate index, so drive-layer events agree.
            let drive_events: usize = (prep_len..full.gates().len())
                .filter(|&k| gate_stream(3, t, k as u64).next_f64() < all.p)
                .count();
            assert_eq!(es, drive_events);
        }
    }

    #[test]
    fn trajectories_replay_exactly() {
        let sched = small_schedule(5, 1.0);
        let (full, prep_len) = assemble_quench(&sched, 1).unwrap();
        let spec = NoiseSpec::new(0.02, 77, 1).unwrap();
        let (a, _) = noisy_gates(full.gates(), prep_len, &spec, 12);
        let (b, _) = noisy_gates(full.gates(), prep_len, &spec, 12);
        assert_eq!(a, b);
        let (c, _) = noisy_gates(full.gates(), prep_len, &spec, 13);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_ensemble_reproduces_noiseless_curve() {
        let sched = small_schedule(7, 1.0);
        let spec = NoiseSpec::new(0.0, 5, 4).unwrap();
        let config = EnsembleConfig {
            record_energy: true,
            record_entropy: true,
            ..EnsembleConfig::correlations(vec![1, 2, 3])
        };
        let stats = run_ensemble(&sched, &spec, &config).unwrap();
        for i in 0..3 {
            assert_eq!(stats.mean[i], stats.noiseless[i]);
            assert_eq!(stats.std_error[i], 0.0);
        }
        assert_eq!(stats.mean_error_events, 0.0);
        assert_eq!(stats.energy.unwrap().mean, stats.noiseless_energy.unwrap());
        assert_eq!(stats.entropy.unwrap().mean, stats.noiseless_entropy.unwrap());
    }

    #[test]
    fn ensemble_mean_matches_exhaustive_channel() {
        // Small enough to enumerate every insertion pattern exactly.
        let mut c = Circuit::new(2).unwrap();
        c.push(Gate::Hadamard(0)).unwrap();
        c.push(Gate::Cnot(0, 1)).unwrap();
        c.push(Gate::RotX(1, 0.7)).unwrap();
        let p = 0.2;
        let exact = depolarized_expectation(&c, p, &|amps| {
            let s = StateVector::from_amplitudes(2, amps.to_vec()).unwrap();
            zz_expectation(&s, 0, 1)
        })
        .unwrap();

        let spec = NoiseSpec::new(p, 21, 1).unwrap();
        let m = 40_000u64;
        let mut values = Vec::with_capacity(m as usize);
        for t in 0..m {
            let (gates, _) = noisy_gates(c.gates(), 0, &spec, t);
            let mut s = StateVector::zero_state(2).unwrap();
            s.run_fused(&gates).unwrap();
            values.push(zz_expectation(&s, 0, 1));
        }
        let est = mean_with_error(&values);
        assert!(
            (est.mean - exact).abs() < 5.0 * est.std_error,
            "{} vs {exact} (se {})",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn noise_weakens_correlations() {
        let sched = small_schedule(9, 2.0);
        let spec = NoiseSpec::new(0.01, 11, 200).unwrap();
        let config = EnsembleConfig::correlations(vec![1, 2]);
        let stats = run_ensemble(&sched, &spec, &config).unwrap();
        assert!(stats.mean_error_events > 0.0);
        for i in 0..2 {
            assert!(
                stats.mean[i] < stats.noiseless[i],
                "x={}: noisy {} vs clean {}",
                stats.distances[i],
                stats.mean[i],
                stats.noiseless[i]
            );
            assert!(stats.std_error[i] > 0.0);
        }
    }

    #[test]
    fn padded_noiseless_drive_is_an_identity_rewrite() {
        let sched = small_schedule(5, 0.5);
        let run_at = |d: usize| {
            let (full, _) = assemble_quench(&sched, d).unwrap();
            let mut s = StateVector::zero_state(5).unwrap();
            s.run(&full).unwrap();
            s
        };
        let s1 = run_at(1);
        let s3 = run_at(3);
        for (a, b) in s1.amplitudes().iter().zip(s3.amplitudes()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn ratio_tables_are_clean_at_zero_noise_and_decay_otherwise() {
        let sched = small_schedule(9, 2.0);
        let spec = NoiseSpec::new(0.0, 31, 150).unwrap();
        let config = EnsembleConfig::correlations(vec![1, 2, 3]);
        let grid = XiGrid::NoiseStrength(vec![0.0, 0.015]);
        let curves = xi_experiment(&sched, &spec, &grid, &config).unwrap();
        assert_eq!(curves.len(), 2);
        for pt in &curves[0].points {
            assert_eq!(pt.ratio, 1.0);
        }
        for pt in &curves[1].points {
            assert!(pt.ratio < 1.0 + pt.std_error, "x={} ratio {}", pt.x, pt.ratio);
        }
        // Log-ratio decreases with x for p > 0.
        let r = &curves[1].points;
        assert!(r.first().unwrap().ratio > r.last().unwrap().ratio);
    }
}
