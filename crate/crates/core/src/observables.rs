//! Observable estimation on statevectors and on measurement samples.
//!
//! Spins live in the z basis: basis bit 0 is spin up (+1), bit 1 is spin
//! down (-1). Two-point functions are measured from a reference qubit and
//! averaged over the partners at distance x on both sides; when only one
//! side fits on the open chain the estimate is marked asymmetric.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::schedule::HamiltonianParams;
use crate::state::StateVector;

/// Threshold below which Schmidt weights are treated as exact zeros.
pub const ENTROPY_CUTOFF: f64 = 1e-12;

/// Histogram of computational-basis measurement outcomes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleSet {
    num_qubits: usize,
    shots: u64,
    counts: BTreeMap<u64, u64>,
}

impl SampleSet {
    pub fn from_counts(num_qubits: usize, counts: BTreeMap<u64, u64>) -> Self {
        let shots = counts.values().sum();
        SampleSet { num_qubits, shots, counts }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn count_of(&self, outcome: u64) -> u64 {
        self.counts.get(&outcome).copied().unwrap_or(0)
    }

    /// Empirical probability of each basis outcome, dense over 2^L.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut probs = vec![0.0; 1usize << self.num_qubits];
        let n = self.shots as f64;
        for (&z, &c) in &self.counts {
            probs[z as usize] = c as f64 / n;
        }
        probs
    }

    /// Merges another histogram over the same register into this one.
    pub fn merge(&mut self, other: &SampleSet) -> Result<()> {
        if other.num_qubits != self.num_qubits {
            return Err(Error::InvalidArgument(format!(
                "cannot merge samples over {} qubits into {}",
                other.num_qubits, self.num_qubits
            )));
        }
        for (&z, &c) in &other.counts {
            *self.counts.entry(z).or_insert(0) += c;
        }
        self.shots += other.shots;
        Ok(())
    }
}

/// Sign of qubit `q` in outcome `z`: `+1` for bit 0, `-1` for bit 1.
#[inline]
pub fn spin(z: u64, q: usize) -> f64 {
    1.0 - 2.0 * ((z >> q) & 1) as f64
}

/// A mean with its standard error (zero for exact evaluation). The
/// `asymmetric` flag marks two-point estimates that could only use one side
/// of the reference qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservableEstimate {
    pub value: f64,
    pub std_error: f64,
    pub asymmetric: bool,
}

impl ObservableEstimate {
    pub fn exact(value: f64) -> Self {
        ObservableEstimate { value, std_error: 0.0, asymmetric: false }
    }
}

/// Central site of an odd-length open chain.
pub fn reference_qubit(num_qubits: usize) -> Result<usize> {
    if num_qubits % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "central-site observables need an odd chain length, got {num_qubits}"
        )));
    }
    Ok((num_qubits - 1) / 2)
}

/// The in-range partners of `r` at distance `x` (left, right).
fn partner_sites(l: usize, r: usize, x: usize) -> Result<(Option<usize>, Option<usize>)> {
    if r >= l {
        return Err(Error::QubitOutOfRange { index: r, num_qubits: l });
    }
    let left = (x <= r).then(|| r - x);
    let right = (r + x < l).then(|| r + x);
    if left.is_none() && right.is_none() {
        return Err(Error::InvalidArgument(format!(
            "distance {x} exceeds the chain on both sides of qubit {r} (L={l})"
        )));
    }
    Ok((left, right))
}

pub fn z_expectation(state: &StateVector, q: usize) -> f64 {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(idx, a)| spin(idx as u64, q) * a.norm_sqr())
        .sum()
}

pub fn zz_expectation(state: &StateVector, a: usize, b: usize) -> f64 {
    state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(idx, amp)| spin(idx as u64, a) * spin(idx as u64, b) * amp.norm_sqr())
        .sum()
}

pub fn x_expectation(state: &StateVector, q: usize) -> f64 {
    let stride = 1usize << q;
    let mut acc = 0.0;
    for block in state.amplitudes().chunks_exact(stride << 1) {
        let (lo, hi) = block.split_at(stride);
        for (a, b) in lo.iter().zip(hi.iter()) {
            acc += 2.0 * (a.conj() * b).re;
        }
    }
    acc
}

/// Exact `<Z_r Z_{r+-x}>`, averaged over the sides that fit on the chain.
pub fn correlation_exact_at(state: &StateVector, r: usize, x: usize) -> Result<ObservableEstimate> {
    if x == 0 {
        return Ok(ObservableEstimate::exact(1.0));
    }
    let (left, right) = partner_sites(state.num_qubits(), r, x)?;
    let mut acc = 0.0;
    let mut sides = 0.0;
    for j in [left, right].into_iter().flatten() {
        acc += zz_expectation(state, r, j);
        sides += 1.0;
    }
    Ok(ObservableEstimate {
        value: acc / sides,
        std_error: 0.0,
        asymmetric: left.is_none() || right.is_none(),
    })
}

/// [`correlation_exact_at`] from the central site of an odd chain.
pub fn correlation_exact(state: &StateVector, x: usize) -> Result<f64> {
    let r = reference_qubit(state.num_qubits())?;
    Ok(correlation_exact_at(state, r, x)?.value)
}

pub fn correlations_exact(state: &StateVector, distances: &[usize]) -> Result<Vec<f64>> {
    distances.iter().map(|&x| correlation_exact(state, x)).collect()
}

/// Same two-point function estimated from measurement samples; the error
/// bar is the standard error of the per-shot mean.
pub fn correlation_sampled_at(
    samples: &SampleSet,
    r: usize,
    x: usize,
) -> Result<ObservableEstimate> {
    if samples.shots() < 2 {
        return Err(Error::InvalidArgument("need at least 2 shots".into()));
    }
    if x == 0 {
        return Ok(ObservableEstimate::exact(1.0));
    }
    let (left, right) = partner_sites(samples.num_qubits(), r, x)?;
    let sides: Vec<usize> = [left, right].into_iter().flatten().collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (&z, &c) in samples.counts() {
        let zr = spin(z, r);
        let v: f64 =
            sides.iter().map(|&j| zr * spin(z, j)).sum::<f64>() / sides.len() as f64;
        sum += c as f64 * v;
        sum_sq += c as f64 * v * v;
    }
    let n = samples.shots() as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(ObservableEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        asymmetric: left.is_none() || right.is_none(),
    })
}

/// [`correlation_sampled_at`] from the central site of an odd chain.
pub fn correlation_sampled(samples: &SampleSet, x: usize) -> Result<ObservableEstimate> {
    let r = reference_qubit(samples.num_qubits())?;
    correlation_sampled_at(samples, r, x)
}

/// `<H>` for explicit couplings `-gx * sum X_n - gzz * sum Z_n Z_{n+1}`
/// on the open chain.
pub fn energy_with_couplings(state: &StateVector, gx: f64, gzz: f64) -> f64 {
    let l = state.num_qubits();
    let mut e = 0.0;
    for q in 0..l {
        e -= gx * x_expectation(state, q);
    }
    for q in 0..l.saturating_sub(1) {
        e -= gzz * zz_expectation(state, q, q + 1);
    }
    e
}

/// `<H(t)>` along the drive: couplings are evaluated at ramp time `t`.
pub fn energy(state: &StateVector, params: &HamiltonianParams, t: f64) -> f64 {
    energy_with_couplings(state, params.gx(t), params.gzz(t))
}

/// Von Neumann entropy (natural log) of the reduced state of qubits
/// `0..cut`, from the Schmidt decomposition across that cut.
pub fn bipartite_entropy(state: &StateVector, cut: usize) -> Result<f64> {
    let l = state.num_qubits();
    if cut == 0 || cut >= l {
        return Err(Error::InvalidArgument(format!(
            "cut must split the chain: got {cut} of {l} qubits"
        )));
    }
    let rows = 1usize << cut;
    let cols = 1usize << (l - cut);
    let amps = state.amplitudes();
    let m = DMatrix::from_fn(rows, cols, |i, j| amps[i + (j << cut)]);
    let singular = m.svd(false, false).singular_values;
    let mut s = 0.0;
    for sigma in singular.iter() {
        let p = sigma * sigma;
        if p > ENTROPY_CUTOFF {
            s -= p * p.ln();
        }
    }
    Ok(s)
}

/// Entropy across the middle cut (`floor(L/2)` qubits on the left).
pub fn half_chain_entropy(state: &StateVector) -> Result<f64> {
    bipartite_entropy(state, state.num_qubits() / 2)
}

/// Bhattacharyya fidelity `sum_z sqrt(p(z) q(z))` of two distributions.
pub fn distribution_fidelity(p_exact: &[f64], p_sampled: &[f64]) -> f64 {
    p_exact.iter().zip(p_sampled.iter()).map(|(&a, &b)| (a * b).sqrt()).sum()
}

/// `sum_z p_sampled(z) ln(p_sampled(z)/p_exact(z))`, over outcomes with
/// `p_sampled > 0`; infinite when the sampled distribution has support that
/// the exact one lacks.
pub fn kl_divergence(p_sampled: &[f64], p_exact: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&ps, &pe) in p_sampled.iter().zip(p_exact.iter()) {
        if ps <= 0.0 {
            continue;
        }
        if pe <= 0.0 {
            return f64::INFINITY;
        }
        d += ps * (ps / pe).ln();
    }
    d
}

/// Fidelity between the exact outcome distribution of `state` and the
/// empirical distribution of `samples`.
pub fn sampled_fidelity(state: &StateVector, samples: &SampleSet) -> f64 {
    let exact = state.probabilities();
    let n = samples.shots() as f64;
    samples
        .counts()
        .iter()
        .map(|(&z, &c)| (exact[z as usize] * c as f64 / n).sqrt())
        .sum()
}

/// KL divergence of the empirical distribution from the exact one;
/// infinite if any observed outcome has zero amplitude, which flags a
/// sampler or circuit mismatch.
pub fn sampled_kl(state: &StateVector, samples: &SampleSet) -> f64 {
    let exact = state.probabilities();
    let n = samples.shots() as f64;
    let mut d = 0.0;
    for (&z, &c) in samples.counts() {
        let ps = c as f64 / n;
        let pe = exact[z as usize];
        if pe <= 0.0 {
            return f64::INFINITY;
        }
        d += ps * (ps / pe).ln();
    }
    d
}
