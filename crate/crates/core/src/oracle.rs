//! Reference implementations used to verify the fast paths.
//!
//! Everything here favors transparency over speed: circuits become dense
//! unitaries by embedding each gate matrix and multiplying; exact quench
//! propagation applies `exp(-i H dt)` to the state through a truncated
//! Taylor series of the Hamiltonian matvec; depolarizing noise is averaged
//! by exhaustively enumerating every insertion pattern. None of it shares
//! kernels with [`crate::state`], which is the point: these are the oracles
//! the simulator is tested against. Keep register sizes small.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gates::{Gate, GateMatrix};
use crate::schedule::KzSchedule;

/// Dense-unitary construction is quadratic in the state size; refuse sizes
/// where a single gate embedding would not fit comfortably in memory.
pub const MAX_DENSE_QUBITS: usize = 10;

fn check_dense(num_qubits: usize) -> Result<()> {
    if num_qubits > MAX_DENSE_QUBITS {
        return Err(Error::QubitCapExceeded(num_qubits, MAX_DENSE_QUBITS));
    }
    Ok(())
}

/// Gate matrix embedded into the full `2^L x 2^L` register space.
/// Qubit 0 is the least significant bit of the basis index; for two-qubit
/// gates the first listed qubit supplies the high bit of the 4-dim index.
pub fn embed_gate(gate: &Gate, num_qubits: usize) -> Result<DMatrix<Complex64>> {
    check_dense(num_qubits)?;
    gate.validate(num_qubits)?;
    let dim = 1usize << num_qubits;
    let zero = Complex64::new(0.0, 0.0);
    let mut out = DMatrix::from_element(dim, dim, zero);
    match gate.matrix() {
        GateMatrix::One(m) => {
            let (q, _) = gate.qubits();
            let bit = 1usize << q;
            for b_in in 0..dim {
                let i_in = (b_in >> q) & 1;
                let base = b_in & !bit;
                for i_out in 0..2 {
                    let b_out = base | (i_out << q);
                    out[(b_out, b_in)] = m[i_out][i_in];
                }
            }
        }
        GateMatrix::Two(m) => {
            let (a, b) = gate.qubits();
            let b = b.unwrap();
            let (bit_a, bit_b) = (1usize << a, 1usize << b);
            for b_in in 0..dim {
                let i_in = (((b_in >> a) & 1) << 1) | ((b_in >> b) & 1);
                let base = b_in & !(bit_a | bit_b);
                for i_out in 0..4 {
                    let b_out = base | ((i_out >> 1) << a) | ((i_out & 1) << b);
                    out[(b_out, b_in)] = m[i_out][i_in];
                }
            }
        }
    }
    Ok(out)
}

/// Full circuit unitary: the product of embedded gate matrices in
/// application order.
pub fn circuit_unitary(circuit: &Circuit) -> Result<DMatrix<Complex64>> {
    check_dense(circuit.num_qubits())?;
    let dim = 1usize << circuit.num_qubits();
    let mut u = DMatrix::identity(dim, dim);
    for gate in circuit.gates() {
        u = embed_gate(gate, circuit.num_qubits())? * u;
    }
    Ok(u)
}

/// Matrix exponential by scaling-and-squaring with a Taylor core.
pub fn matrix_exp(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert_eq!(a.nrows(), a.ncols(), "matrix_exp needs a square matrix");
    let norm = a.iter().map(|z| z.norm()).fold(0.0f64, f64::max) * a.nrows() as f64;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = a.map(|z| z / 2f64.powi(squarings as i32));

    let dim = a.nrows();
    let mut result = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    for k in 1..200 {
        term = (&term * &scaled).map(|z| z / k as f64);
        result += &term;
        let tail: f64 = term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if tail < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Dense transverse-field Ising Hamiltonian on the open chain:
/// `H = -gx sum_n X_n - gzz sum_n Z_n Z_{n+1}`.
pub fn ising_hamiltonian(num_qubits: usize, gx: f64, gzz: f64) -> Result<DMatrix<Complex64>> {
    check_dense(num_qubits)?;
    let dim = 1usize << num_qubits;
    let mut h = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for b in 0..dim {
        h[(b, b)] = Complex64::new(-gzz * bond_alignment(b, num_qubits) as f64, 0.0);
        for q in 0..num_qubits {
            h[(b ^ (1 << q), b)] += Complex64::new(-gx, 0.0);
        }
    }
    Ok(h)
}

/// `sum over bonds of z_n z_{n+1}` for a basis state.
fn bond_alignment(b: usize, num_qubits: usize) -> i64 {
    let mask = (1usize << (num_qubits - 1)) - 1;
    let flips = ((b ^ (b >> 1)) & mask).count_ones() as i64;
    (num_qubits as i64 - 1) - 2 * flips
}

/// `H(t) |v>` without materializing the dense matrix; fine up to the
/// statevector cap.
pub fn ising_matvec(num_qubits: usize, gx: f64, gzz: f64, v: &[Complex64]) -> Vec<Complex64> {
    let dim = 1usize << num_qubits;
    assert_eq!(v.len(), dim);
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    for b in 0..dim {
        let mut acc = v[b] * (-gzz * bond_alignment(b, num_qubits) as f64);
        for q in 0..num_qubits {
            acc -= v[b ^ (1 << q)] * gx;
        }
        w[b] = acc;
    }
    w
}

/// Applies `exp(-i H dt)` to the state by Taylor expansion of the matvec,
/// with step-halving so the series always converges quickly.
pub fn evolve_exact_step(
    num_qubits: usize,
    gx: f64,
    gzz: f64,
    dt: f64,
    state: &mut Vec<Complex64>,
) {
    // Crude norm bound |H| <= |gx| L + |gzz| (L-1); halve until |H dt| <= 1.
    let bound = gx.abs() * num_qubits as f64 + gzz.abs() * (num_qubits as f64 - 1.0);
    let mut halvings = 0u32;
    while bound * dt.abs() / 2f64.powi(halvings as i32) > 1.0 {
        halvings += 1;
    }
    let sub_dt = dt / 2f64.powi(halvings as i32);
    for _ in 0..(1u64 << halvings) {
        let mut term = state.clone();
        for k in 1..200u32 {
            let hv = ising_matvec(num_qubits, gx, gzz, &term);
            let coeff = Complex64::new(0.0, -sub_dt / k as f64);
            for (t, h) in term.iter_mut().zip(hv) {
                *t = h * coeff;
            }
            let mut tail = 0.0;
            for (s, t) in state.iter_mut().zip(term.iter()) {
                *s += t;
                tail += t.norm_sqr();
            }
            if tail.sqrt() < 1e-16 {
                break;
            }
        }
    }
}

/// Piecewise-constant quench propagation: the exact `exp(-i H(t_k) dt)` at
/// every step time the schedule would use, composed in order. This is the
/// oracle that isolates Trotter splitting error.
pub fn evolve_drive_exact(schedule: &KzSchedule, state: &mut Vec<Complex64>) {
    for t_k in schedule.step_times() {
        evolve_exact_step(
            schedule.num_qubits,
            schedule.gx(t_k),
            schedule.gzz(t_k),
            schedule.dt,
            state,
        );
    }
}

/// Max entrywise deviation after aligning global phase on the largest entry
/// of `b`.
pub fn unitary_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let mut idx = 0;
    let mut best = 0.0f64;
    for (i, z) in b.iter().enumerate() {
        if z.norm() > best {
            best = z.norm();
            idx = i;
        }
    }
    let phase = a.as_slice()[idx] / b.as_slice()[idx];
    let phase = if phase.norm() > 0.0 { phase / phase.norm() } else { Complex64::new(1.0, 0.0) };
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - phase * y).norm())
        .fold(0.0, f64::max)
}

/// Same alignment rule for state vectors.
pub fn state_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut idx = 0;
    let mut best = 0.0f64;
    for (i, z) in b.iter().enumerate() {
        if z.norm() > best {
            best = z.norm();
            idx = i;
        }
    }
    let phase = a[idx] / b[idx];
    let phase = if phase.norm() > 0.0 { phase / phase.norm() } else { Complex64::new(1.0, 0.0) };
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - phase * y).norm())
        .fold(0.0, f64::max)
}

pub fn overlap(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Exhaustive depolarizing-channel average of an observable: every insertion
/// pattern is enumerated with its exact probability. After each one-qubit
/// gate one of {X, Y, Z} is inserted with probability p/3 each; after each
/// two-qubit gate one of the 15 non-identity Pauli pairs with p/15 each.
/// Exponential in gate count -- for tiny circuits only.
pub fn depolarized_expectation<F>(circuit: &Circuit, p: f64, observable: &F) -> Result<f64>
where
    F: Fn(&[Complex64]) -> f64,
{
    check_dense(circuit.num_qubits())?;
    if circuit.gate_count() > 12 {
        return Err(Error::InvalidArgument(
            "exhaustive channel enumeration is limited to 12 gates".into(),
        ));
    }
    let dim = 1usize << circuit.num_qubits();
    let mut state = vec![Complex64::new(0.0, 0.0); dim];
    state[0] = Complex64::new(1.0, 0.0);
    let mut acc = 0.0;
    branch(circuit, 0, p, state, 1.0, observable, &mut acc)?;
    Ok(acc)
}

fn apply_dense(gate: &Gate, num_qubits: usize, state: &[Complex64]) -> Result<Vec<Complex64>> {
    let u = embed_gate(gate, num_qubits)?;
    let v = nalgebra::DVector::from_column_slice(state);
    Ok((u * v).as_slice().to_vec())
}

fn branch<F>(
    circuit: &Circuit,
    gate_idx: usize,
    p: f64,
    state: Vec<Complex64>,
    prob: f64,
    observable: &F,
    acc: &mut f64,
) -> Result<()>
where
    F: Fn(&[Complex64]) -> f64,
{
    if gate_idx == circuit.gate_count() {
        *acc += prob * observable(&state);
        return Ok(());
    }
    let l = circuit.num_qubits();
    let gate = &circuit.gates()[gate_idx];
    let after = apply_dense(gate, l, &state)?;
    let (qa, qb) = gate.qubits();

    // No insertion.
    branch(circuit, gate_idx + 1, p, after.clone(), prob * (1.0 - p), observable, acc)?;

    let paulis = |q: usize| [Gate::PauliX(q), Gate::PauliY(q), Gate::PauliZ(q)];
    match qb {
        None => {
            for ins in paulis(qa) {
                let s = apply_dense(&ins, l, &after)?;
                branch(circuit, gate_idx + 1, p, s, prob * p / 3.0, observable, acc)?;
            }
        }
        Some(qb) => {
            // 15 = 4x4 single-qubit Pauli pairs minus the identity pair.
            for ia in 0..4 {
                for ib in 0..4 {
                    if ia == 0 && ib == 0 {
                        continue;
                    }
                    let mut s = after.clone();
                    if ia > 0 {
                        s = apply_dense(&paulis(qa)[ia - 1], l, &s)?;
                    }
                    if ib > 0 {
                        s = apply_dense(&paulis(qb)[ib - 1], l, &s)?;
                    }
                    branch(circuit, gate_idx + 1, p, s, prob * p / 15.0, observable, acc)?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::decompose_uzz;

    #[test]
    fn uzz_composite_equals_matrix_exponential() {
        for &phi in &[0.05, -0.4, 1.3] {
            // exp(i phi ZZ) on two qubits == Uzz gate matrix.
            let mut zz = DMatrix::from_element(4, 4, Complex64::new(0.0, 0.0));
            for (b, sign) in [(0usize, 1.0), (1, -1.0), (2, -1.0), (3, 1.0)] {
                zz[(b, b)] = Complex64::new(0.0, phi * sign);
            }
            let want = matrix_exp(&zz);
            let mut c = Circuit::new(2).unwrap();
            c.push(Gate::Uzz(0, 1, phi)).unwrap();
            let got = circuit_unitary(&c).unwrap();
            assert!(unitary_distance(&got, &want) < 1e-13, "phi={phi}");
        }
    }

    #[test]
    fn uzz_decomposition_is_exact_in_the_full_register() {
        let mut composite = Circuit::new(3).unwrap();
        composite.push(Gate::Uzz(1, 2, 0.37)).unwrap();
        let mut lowered = Circuit::new(3).unwrap();
        lowered.extend(decompose_uzz(1, 2, 0.37)).unwrap();
        let a = circuit_unitary(&composite).unwrap();
        let b = circuit_unitary(&lowered).unwrap();
        assert!(unitary_distance(&a, &b) < 1e-13);
    }

    #[test]
    fn hamiltonian_matches_matvec() {
        let (l, gx, gzz) = (4usize, 1.3, 0.6);
        let h = ising_hamiltonian(l, gx, gzz).unwrap();
        let dim = 1 << l;
        let v: Vec<Complex64> =
            (0..dim).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
        let direct = &h * nalgebra::DVector::from_column_slice(&v);
        let fast = ising_matvec(l, gx, gzz, &v);
        for (a, b) in direct.iter().zip(fast.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_step_agrees_with_dense_exponential() {
        let (l, gx, gzz, dt) = (3usize, 0.8, 1.4, 0.3);
        let h = ising_hamiltonian(l, gx, gzz).unwrap();
        let u = matrix_exp(&h.map(|z| z * Complex64::new(0.0, -dt)));
        let dim = 1 << l;
        let mut v: Vec<Complex64> =
            (0..dim).map(|i| Complex64::new(1.0 / (1.0 + i as f64), 0.2 * i as f64)).collect();
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        let want = &u * nalgebra::DVector::from_column_slice(&v);
        evolve_exact_step(l, gx, gzz, dt, &mut v);
        for (a, b) in want.iter().zip(v.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn depolarized_expectation_sums_probability_one() {
        // With an all-ones observable the channel average is exactly 1.
        let mut c = Circuit::new(2).unwrap();
        c.push(Gate::Hadamard(0)).unwrap();
        c.push(Gate::Cnot(0, 1)).unwrap();
        let norm = depolarized_expectation(&c, 0.23, &|s: &[Complex64]| {
            s.iter().map(|z| z.norm_sqr()).sum()
        })
        .unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn depolarizing_damps_bell_correlation() {
        let mut c = Circuit::new(2).unwrap();
        c.push(Gate::Hadamard(0)).unwrap();
        c.push(Gate::Cnot(0, 1)).unwrap();
        let zz = |s: &[Complex64]| {
            s.iter()
                .enumerate()
                .map(|(b, z)| {
                    let sign = if (b.count_ones() & 1) == 0 { 1.0 } else { -1.0 };
                    sign * z.norm_sqr()
                })
                .sum()
        };
        let clean = depolarized_expectation(&c, 0.0, &zz).unwrap();
        assert!((clean - 1.0).abs() < 1e-12);
        let noisy = depolarized_expectation(&c, 0.2, &zz).unwrap();
        assert!(noisy < clean && noisy > 0.0, "noisy={noisy}");
    }
}
