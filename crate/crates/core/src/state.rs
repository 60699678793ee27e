//! Dense statevector simulation.
//!
//! Amplitudes are stored little-endian: qubit 0 is the least significant bit
//! of the basis index. Gates are applied in place through specialized kernels
//! (the drive circuits only ever need x-axis mixing, diagonal phases, and a
//! few permutations). Besides the plain in-order executor there is a fusing
//! executor for trajectory ensembles: it merges gap-free same-qubit x-axis
//! rotations and batches commuting ZZ phases into a single popcount-indexed
//! pass. Both produce the same state up to floating-point rounding; the
//! fusing one is ~3x faster on quench circuits, which is what makes
//! O(10^4)-trajectory ensembles tractable.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gates::{Gate, GateMatrix};
use crate::observables::SampleSet;
use crate::rng::CounterRng;

/// Default hard cap: 2^26 amplitudes = 1 GiB, the edge of desk-scale.
pub const DEFAULT_QUBIT_CAP: usize = 26;

#[derive(Clone, Debug)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` with the default size cap.
    pub fn zero_state(num_qubits: usize) -> Result<Self> {
        Self::zero_state_with_cap(num_qubits, DEFAULT_QUBIT_CAP)
    }

    pub fn zero_state_with_cap(num_qubits: usize, cap: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > cap {
            return Err(Error::QubitCapExceeded(num_qubits, cap));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amps })
    }

    pub fn from_amplitudes(num_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if num_qubits == 0 || num_qubits > DEFAULT_QUBIT_CAP {
            return Err(Error::QubitCapExceeded(num_qubits, DEFAULT_QUBIT_CAP));
        }
        if amps.len() != 1usize << num_qubits {
            return Err(Error::InvalidArgument(format!(
                "amplitude vector has length {}, expected {}",
                amps.len(),
                1usize << num_qubits
            )));
        }
        Ok(StateVector { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    /// Applies every gate in listed order.
    pub fn run(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.num_qubits() != self.num_qubits {
            return Err(Error::InvalidArgument(format!(
                "circuit acts on {} qubits, state has {}",
                circuit.num_qubits(),
                self.num_qubits
            )));
        }
        for gate in circuit.gates() {
            self.apply_unchecked(gate);
        }
        Ok(())
    }

    /// Fusing executor: equivalent to [`run`](Self::run) on the same gate
    /// list (exact commutation and angle-addition identities only, so the
    /// result differs from the plain executor by rounding, not by phase).
    pub fn run_fused(&mut self, gates: &[Gate]) -> Result<()> {
        let l = self.num_qubits;
        for g in gates {
            g.validate(l)?;
        }
        let mut pend_x = vec![0.0f64; l];
        // Accumulated Uzz angle per nearest-neighbor bond (q, q+1).
        let mut pend_zz = vec![0.0f64; l.saturating_sub(1)];
        let mut zz_active = false;

        for gate in gates {
            match *gate {
                Gate::Ux(q, a) => {
                    if zz_active && self.zz_touches(&pend_zz, q) {
                        self.flush_zz(&mut pend_zz, &mut zz_active);
                    }
                    pend_x[q] += a;
                }
                Gate::RotX(q, th) => {
                    if zz_active && self.zz_touches(&pend_zz, q) {
                        self.flush_zz(&mut pend_zz, &mut zz_active);
                    }
                    pend_x[q] += -th / 2.0;
                }
                Gate::Uzz(a, b, phi) if b == a + 1 => {
                    self.flush_x(&mut pend_x, a);
                    self.flush_x(&mut pend_x, b);
                    pend_zz[a] += phi;
                    zz_active = true;
                }
                Gate::Uzz(a, b, phi) if a == b + 1 => {
                    self.flush_x(&mut pend_x, a);
                    self.flush_x(&mut pend_x, b);
                    pend_zz[b] += phi;
                    zz_active = true;
                }
                // Diagonal one-qubit gates commute with the ZZ batch.
                Gate::RotZ(q, th) => {
                    self.flush_x(&mut pend_x, q);
                    self.phase1(q, Complex64::cis(-th / 2.0), Complex64::cis(th / 2.0));
                }
                Gate::PauliZ(q) => {
                    self.flush_x(&mut pend_x, q);
                    self.phase1(q, Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0));
                }
                Gate::Identity(_) => {}
                // X commutes with pending x-rotations but not with the batch.
                Gate::PauliX(q) => {
                    if zz_active {
                        self.flush_zz(&mut pend_zz, &mut zz_active);
                    }
                    self.pauli_x(q);
                }
                Gate::PauliY(q) => {
                    if zz_active {
                        self.flush_zz(&mut pend_zz, &mut zz_active);
                    }
                    self.flush_x(&mut pend_x, q);
                    self.pauli_y(q);
                }
                Gate::Cz(a, b) => {
                    self.flush_x(&mut pend_x, a);
                    self.flush_x(&mut pend_x, b);
                    self.controlled_phase(a, b, Complex64::new(-1.0, 0.0));
                }
                Gate::CPhase(a, b, phi) => {
                    self.flush_x(&mut pend_x, a);
                    self.flush_x(&mut pend_x, b);
                    self.controlled_phase(a, b, Complex64::cis(phi));
                }
                // Everything else breaks both kinds of pending work.
                ref g => {
                    let (a, b) = g.qubits();
                    self.flush_x(&mut pend_x, a);
                    if let Some(b) = b {
                        self.flush_x(&mut pend_x, b);
                    }
                    if zz_active {
                        self.flush_zz(&mut pend_zz, &mut zz_active);
                    }
                    self.apply_unchecked(g);
                }
            }
        }
        for q in 0..l {
            self.flush_x(&mut pend_x, q);
        }
        if zz_active {
            self.flush_zz(&mut pend_zz, &mut zz_active);
        }
        Ok(())
    }

    /// `shots` independent computational-basis draws from `|amp|^2`.
    pub fn sample(&self, shots: usize, seed: u64) -> SampleSet {
        let mut cumulative = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0f64;
        for a in &self.amps {
            acc += a.norm_sqr();
            cumulative.push(acc);
        }
        let total = acc;
        let mut rng = CounterRng::new(seed, &[u64::from_be_bytes(*b"smplsmpl")]);
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for _ in 0..shots {
            let u = rng.next_f64() * total;
            let idx = cumulative.partition_point(|&c| c <= u).min(self.amps.len() - 1);
            *counts.entry(idx as u64).or_insert(0) += 1;
        }
        SampleSet::from_counts(self.num_qubits, counts)
    }

    // ---- kernels ----------------------------------------------------------

    fn apply_unchecked(&mut self, gate: &Gate) {
        match *gate {
            Gate::Hadamard(q) => match gate.matrix() {
                GateMatrix::One(m) => self.apply_1q(q, &m),
                _ => unreachable!(),
            },
            Gate::RotX(q, th) => self.x_mix(q, (th / 2.0).cos(), -(th / 2.0).sin()),
            Gate::Ux(q, phi) => self.x_mix(q, phi.cos(), phi.sin()),
            Gate::RotZ(q, th) => {
                self.phase1(q, Complex64::cis(-th / 2.0), Complex64::cis(th / 2.0))
            }
            Gate::PauliX(q) => self.pauli_x(q),
            Gate::PauliY(q) => self.pauli_y(q),
            Gate::PauliZ(q) => self.phase1(q, Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)),
            Gate::Identity(_) => {}
            Gate::Cnot(c, t) => self.cnot(c, t),
            Gate::Cz(a, b) => self.controlled_phase(a, b, Complex64::new(-1.0, 0.0)),
            Gate::CPhase(a, b, phi) => self.controlled_phase(a, b, Complex64::cis(phi)),
            Gate::Uzz(a, b, phi) => self.zz_phase(a, b, phi),
        }
    }

    /// `[[c, i s], [i s, c]]` on qubit `q`: covers both `Ux` and `RotX`.
    fn x_mix(&mut self, q: usize, c: f64, s: f64) {
        if s == 0.0 && c == 1.0 {
            return;
        }
        let stride = 1usize << q;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (ar, ai, br, bi) = (a.re, a.im, b.re, b.im);
                a.re = c * ar - s * bi;
                a.im = c * ai + s * br;
                b.re = c * br - s * ai;
                b.im = c * bi + s * ar;
            }
        }
    }

    fn apply_1q(&mut self, q: usize, m: &[[Complex64; 2]; 2]) {
        let stride = 1usize << q;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (va, vb) = (*a, *b);
                *a = m[0][0] * va + m[0][1] * vb;
                *b = m[1][0] * va + m[1][1] * vb;
            }
        }
    }

    fn phase1(&mut self, q: usize, d0: Complex64, d1: Complex64) {
        let stride = 1usize << q;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for a in lo.iter_mut() {
                *a *= d0;
            }
            for b in hi.iter_mut() {
                *b *= d1;
            }
        }
    }

    fn pauli_x(&mut self, q: usize) {
        let stride = 1usize << q;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            lo.swap_with_slice(hi);
        }
    }

    fn pauli_y(&mut self, q: usize) {
        let stride = 1usize << q;
        let (mi, pi) = (Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0));
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (va, vb) = (*a, *b);
                *a = mi * vb;
                *b = pi * va;
            }
        }
    }

    fn cnot(&mut self, c: usize, t: usize) {
        let (cbit, tbit) = (1usize << c, 1usize << t);
        for idx in 0..self.amps.len() {
            if idx & cbit != 0 && idx & tbit == 0 {
                self.amps.swap(idx, idx | tbit);
            }
        }
    }

    fn controlled_phase(&mut self, a: usize, b: usize, factor: Complex64) {
        let mask = (1usize << a) | (1usize << b);
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            if idx & mask == mask {
                *amp *= factor;
            }
        }
    }

    fn zz_phase(&mut self, a: usize, b: usize, phi: f64) {
        let table = [Complex64::cis(phi), Complex64::cis(-phi)];
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            *amp *= table[((idx >> a) ^ (idx >> b)) & 1];
        }
    }

    // ---- fusing support ---------------------------------------------------

    fn zz_touches(&self, pend_zz: &[f64], q: usize) -> bool {
        (q < pend_zz.len() && pend_zz[q] != 0.0) || (q > 0 && pend_zz[q - 1] != 0.0)
    }

    fn flush_x(&mut self, pend_x: &mut [f64], q: usize) {
        let a = pend_x[q];
        if a != 0.0 {
            self.x_mix(q, a.cos(), a.sin());
            pend_x[q] = 0.0;
        }
    }

    fn flush_zz(&mut self, pend_zz: &mut [f64], active: &mut bool) {
        *active = false;
        let theta = uniform_nonzero_angle(pend_zz);
        match theta {
            Some(theta) => {
                let mut bond_mask = 0usize;
                for (bond, &a) in pend_zz.iter().enumerate() {
                    if a != 0.0 {
                        bond_mask |= 1 << bond;
                    }
                }
                self.zz_layer(bond_mask, theta);
            }
            None => {
                // Mixed angles (only happens around mid-step noise): apply
                // bond by bond. All these phases commute, so order is free.
                for bond in 0..pend_zz.len() {
                    if pend_zz[bond] != 0.0 {
                        self.zz_phase(bond, bond + 1, pend_zz[bond]);
                    }
                }
            }
        }
        pend_zz.iter_mut().for_each(|a| *a = 0.0);
    }

    /// One pass applying `Uzz(theta)` on every bond in `bond_mask`: the
    /// total phase only depends on how many selected bonds are anti-aligned,
    /// which is a masked popcount of `idx ^ (idx >> 1)`.
    fn zz_layer(&mut self, bond_mask: usize, theta: f64) {
        let n_sel = bond_mask.count_ones() as i32;
        let table: Vec<Complex64> =
            (0..=n_sel).map(|k| Complex64::cis(theta * f64::from(n_sel - 2 * k))).collect();
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            let k = ((idx ^ (idx >> 1)) & bond_mask).count_ones() as usize;
            *amp *= table[k];
        }
    }
}

fn uniform_nonzero_angle(angles: &[f64]) -> Option<f64> {
    let mut theta = None;
    for &a in angles {
        if a == 0.0 {
            continue;
        }
        match theta {
            None => theta = Some(a),
            Some(t) if t == a => {}
            _ => return None,
        }
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    fn random_state(l: usize, seed: u64) -> StateVector {
        let mut rng = CounterRng::new(seed, &[11]);
        let mut amps: Vec<Complex64> = (0..1usize << l)
            .map(|_| Complex64::new(rng.next_f64() - 0.5, rng.next_f64() - 0.5))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        StateVector::from_amplitudes(l, amps).unwrap()
    }

    fn random_gate(l: usize, rng: &mut CounterRng) -> Gate {
        let q = rng.next_below(l as u64) as usize;
        let mut q2 = rng.next_below(l as u64) as usize;
        if q2 == q {
            q2 = (q + 1) % l;
        }
        let angle = 4.0 * std::f64::consts::PI * (rng.next_f64() - 0.5);
        match rng.next_below(12) {
            0 => Gate::Hadamard(q),
            1 => Gate::RotX(q, angle),
            2 => Gate::RotZ(q, angle),
            3 => Gate::PauliX(q),
            4 => Gate::PauliY(q),
            5 => Gate::PauliZ(q),
            6 => Gate::Identity(q),
            7 => Gate::Ux(q, angle),
            8 => Gate::Cnot(q, q2),
            9 => Gate::Cz(q, q2),
            10 => Gate::CPhase(q, q2, angle),
            _ => {
                // Bias Uzz toward nearest neighbors like the drive circuits.
                if q + 1 < l {
                    Gate::Uzz(q, q + 1, angle)
                } else {
                    Gate::Uzz(q, q2, angle)
                }
            }
        }
    }

    #[test]
    fn bell_state_via_kernels() {
        let mut s = StateVector::zero_state(2).unwrap();
        s.apply(&Gate::Hadamard(0)).unwrap();
        s.apply(&Gate::Cnot(0, 1)).unwrap();
        let amps = s.amplitudes();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((amps[0].re - r).abs() < 1e-15);
        assert!((amps[3].re - r).abs() < 1e-15);
        assert!(amps[1].norm() < 1e-15 && amps[2].norm() < 1e-15);
    }

    #[test]
    fn kernels_match_dense_embedding() {
        let l = 3;
        let gates = [
            Gate::Hadamard(1),
            Gate::RotX(2, 0.77),
            Gate::RotZ(0, -1.21),
            Gate::PauliX(1),
            Gate::PauliY(2),
            Gate::PauliZ(0),
            Gate::Ux(1, 0.39),
            Gate::Cnot(2, 0),
            Gate::Cnot(0, 2),
            Gate::Cz(1, 2),
            Gate::CPhase(2, 1, 0.63),
            Gate::Uzz(0, 1, -0.4),
            Gate::Uzz(1, 0, 0.9),
        ];
        for (k, gate) in gates.iter().enumerate() {
            let mut s = random_state(l, 100 + k as u64);
            let dense = oracle::embed_gate(gate, l).unwrap();
            let want = &dense * nalgebra::DVector::from_column_slice(s.amplitudes());
            s.apply(gate).unwrap();
            for (a, b) in s.amplitudes().iter().zip(want.iter()) {
                assert!((a - b).norm() < 1e-13, "gate {gate:?}");
            }
        }
    }

    #[test]
    fn fused_executor_matches_plain() {
        let l = 5;
        for trial in 0..20 {
            let mut rng = CounterRng::new(7000 + trial, &[1]);
            let gates: Vec<Gate> = (0..60).map(|_| random_gate(l, &mut rng)).collect();
            let mut plain = random_state(l, 555 + trial);
            let mut fused = plain.clone();
            for g in &gates {
                plain.apply(g).unwrap();
            }
            fused.run_fused(&gates).unwrap();
            for (a, b) in plain.amplitudes().iter().zip(fused.amplitudes()) {
                assert!((a - b).norm() < 1e-12, "trial {trial}");
            }
        }
    }

    #[test]
    fn fused_executor_handles_quench_layers() {
        use crate::schedule::{build_drive, KzSchedule, TrotterOrder};
        let s = KzSchedule::new(6, 1.0, 0.125, TrotterOrder::Second).unwrap();
        let c = build_drive(&s).unwrap();
        let mut plain = StateVector::zero_state(6).unwrap();
        plain.run(&c).unwrap();
        let mut fused = StateVector::zero_state(6).unwrap();
        fused.run_fused(c.gates()).unwrap();
        for (a, b) in plain.amplitudes().iter().zip(fused.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!((fused.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_is_preserved() {
        let mut rng = CounterRng::new(31, &[2]);
        let gates: Vec<Gate> = (0..200).map(|_| random_gate(4, &mut rng)).collect();
        let mut s = StateVector::zero_state(4).unwrap();
        s.apply(&Gate::Hadamard(0)).unwrap();
        for g in &gates {
            s.apply(g).unwrap();
        }
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_converges() {
        let mut s = StateVector::zero_state(3).unwrap();
        s.apply(&Gate::Hadamard(0)).unwrap();
        s.apply(&Gate::Cnot(0, 1)).unwrap();
        s.apply(&Gate::RotX(2, 0.9)).unwrap();
        let a = s.sample(4096, 99);
        let b = s.sample(4096, 99);
        assert_eq!(a.counts(), b.counts());
        let c = s.sample(4096, 100);
        assert_ne!(a.counts(), c.counts());

        let probs = s.probabilities();
        let n = 200_000;
        let big = s.sample(n, 1);
        for (idx, &p) in probs.iter().enumerate() {
            let observed = big.count_of(idx as u64) as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (observed - p).abs() < 5.0 * sigma + 1e-4,
                "idx {idx}: observed {observed} want {p}"
            );
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(StateVector::zero_state_with_cap(11, 10).is_err());
        assert!(StateVector::zero_state_with_cap(10, 10).is_ok());
    }
}
