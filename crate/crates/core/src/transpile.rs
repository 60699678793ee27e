//! Lowering to a hardware-like native gate set with peephole cleanup.
//!
//! Native set: `RotZ` at any angle, `RotX` restricted to quarter turns
//! (multiples of pi/2), and `CZ`. Everything the drive builder emits lowers
//! onto it; the output unitary equals the input up to one global phase.
//!
//! The pipeline is: cancel Hadamard pairs on the abstract circuit (adjacent
//! on a qubit's wire, not merely adjacent in the list), lower gate by gate,
//! then merge same-axis rotations and CZ pairs on the native form until
//! nothing changes. Rewrites use exact identities only, so the result is
//! deterministic and transpiling twice is a no-op.

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gates::{decompose_uzz, normalize_angle, Gate};

const ANGLE_EPS: f64 = 1e-12;

/// Angles indistinguishable from a full turn (or none) act as the identity
/// up to global phase.
fn is_trivial_angle(theta: f64) -> bool {
    let t = normalize_angle(theta);
    t.abs() <= ANGLE_EPS || (t.abs() - 2.0 * std::f64::consts::PI).abs() <= ANGLE_EPS
}

fn is_quarter_turn(theta: f64) -> bool {
    let steps = theta / std::f64::consts::FRAC_PI_2;
    (steps - steps.round()).abs() <= ANGLE_EPS
}

pub fn is_native_gate(gate: &Gate) -> bool {
    match *gate {
        Gate::RotZ(..) | Gate::Cz(..) => true,
        Gate::RotX(_, theta) => is_quarter_turn(theta),
        _ => false,
    }
}

/// `H = RotZ(pi/2) RotX(pi/2) RotZ(pi/2)` up to a global phase of -i.
fn push_native_h(q: usize, out: &mut Vec<Gate>) {
    let half = std::f64::consts::FRAC_PI_2;
    out.push(Gate::RotZ(q, half));
    out.push(Gate::RotX(q, half));
    out.push(Gate::RotZ(q, half));
}

fn push_native_rx(q: usize, theta: f64, out: &mut Vec<Gate>) {
    if is_quarter_turn(theta) {
        out.push(Gate::RotX(q, theta));
    } else {
        // RotX(theta) = H RotZ(theta) H, exactly.
        push_native_h(q, out);
        out.push(Gate::RotZ(q, theta));
        push_native_h(q, out);
    }
}

fn lower(gate: &Gate, out: &mut Vec<Gate>) -> Result<()> {
    match *gate {
        Gate::RotZ(..) | Gate::Cz(..) => out.push(*gate),
        Gate::RotX(q, theta) => push_native_rx(q, theta, out),
        Gate::Hadamard(q) => push_native_h(q, out),
        Gate::Identity(_) => {}
        Gate::PauliZ(q) => out.push(Gate::RotZ(q, std::f64::consts::PI)),
        Gate::PauliX(q) => out.push(Gate::RotX(q, std::f64::consts::PI)),
        Gate::PauliY(q) => {
            out.push(Gate::RotZ(q, std::f64::consts::PI));
            out.push(Gate::RotX(q, std::f64::consts::PI));
        }
        Gate::Ux(q, phi) => push_native_rx(q, normalize_angle(-2.0 * phi), out),
        Gate::Cnot(c, t) => {
            push_native_h(t, out);
            out.push(Gate::Cz(c, t));
            push_native_h(t, out);
        }
        Gate::CPhase(a, b, phi) => {
            let n = normalize_angle(phi);
            if (n.abs() - std::f64::consts::PI).abs() <= ANGLE_EPS {
                out.push(Gate::Cz(a, b));
            } else {
                return Err(Error::UnsupportedGate(format!(
                    "controlled phase of {phi} rad has no native decomposition"
                )));
            }
        }
        Gate::Uzz(a, b, phi) => {
            for g in decompose_uzz(a, b, phi) {
                lower(&g, out)?;
            }
        }
    }
    Ok(())
}

/// What the last gate on a qubit's wire was, for wire-adjacent rewrites.
#[derive(Clone, Copy, PartialEq)]
enum WireMark {
    Start,
    /// Index into the working list.
    At(usize),
}

/// Removes wire-adjacent `H H` pairs in one scan; surviving gates keep
/// their order.
fn cancel_hadamard_pairs(gates: &[Gate]) -> Vec<Gate> {
    let num_qubits = gates
        .iter()
        .map(|g| {
            let (a, b) = g.qubits();
            b.map_or(a, |b| a.max(b)) + 1
        })
        .max()
        .unwrap_or(0);
    let mut kept: Vec<Option<Gate>> = Vec::with_capacity(gates.len());
    let mut last_h: Vec<Option<usize>> = vec![None; num_qubits];
    for gate in gates {
        match *gate {
            Gate::Hadamard(q) => {
                if let Some(i) = last_h[q].take() {
                    kept[i] = None; // annihilate the pair
                } else {
                    last_h[q] = Some(kept.len());
                    kept.push(Some(*gate));
                }
            }
            ref g => {
                let (a, b) = g.qubits();
                last_h[a] = None;
                if let Some(b) = b {
                    last_h[b] = None;
                }
                kept.push(Some(*g));
            }
        }
    }
    kept.into_iter().flatten().collect()
}

/// One simplification sweep over a native gate list: merges wire-adjacent
/// same-axis rotations, drops full/zero turns, and cancels CZ pairs.
fn native_sweep(gates: &[Gate], num_qubits: usize) -> (Vec<Gate>, bool) {
    let mut kept: Vec<Option<Gate>> = Vec::with_capacity(gates.len());
    let mut wire: Vec<WireMark> = vec![WireMark::Start; num_qubits];
    let mut changed = false;

    let touch = |wire: &mut Vec<WireMark>, q: usize, at: usize| {
        wire[q] = WireMark::At(at);
    };

    for gate in gates {
        match *gate {
            Gate::RotZ(q, theta) | Gate::RotX(q, theta) => {
                let axis_z = matches!(gate, Gate::RotZ(..));
                if is_trivial_angle(theta) {
                    changed = true;
                    continue;
                }
                if let WireMark::At(i) = wire[q] {
                    let merged = match (kept[i], axis_z) {
                        (Some(Gate::RotZ(p, prev)), true) if p == q => {
                            Some(Gate::RotZ(q, normalize_angle(prev + theta)))
                        }
                        (Some(Gate::RotX(p, prev)), false) if p == q => {
                            Some(Gate::RotX(q, normalize_angle(prev + theta)))
                        }
                        _ => None,
                    };
                    if let Some(m) = merged {
                        changed = true;
                        if is_trivial_angle(m.angle().unwrap()) {
                            kept[i] = None;
                            wire[q] = WireMark::Start;
                        } else {
                            kept[i] = Some(m);
                        }
                        continue;
                    }
                }
                touch(&mut wire, q, kept.len());
                kept.push(Some(*gate));
            }
            Gate::Cz(a, b) => {
                let (lo, hi) = (a.min(b), a.max(b));
                if let (WireMark::At(i), WireMark::At(j)) = (wire[lo], wire[hi]) {
                    if i == j {
                        if let Some(Gate::Cz(pa, pb)) = kept[i] {
                            if (pa.min(pb), pa.max(pb)) == (lo, hi) {
                                // CZ is self-inverse.
                                kept[i] = None;
                                wire[lo] = WireMark::Start;
                                wire[hi] = WireMark::Start;
                                changed = true;
                                continue;
                            }
                        }
                    }
                }
                let at = kept.len();
                touch(&mut wire, lo, at);
                touch(&mut wire, hi, at);
                kept.push(Some(*gate));
            }
            ref g => {
                let (a, b) = g.qubits();
                let at = kept.len();
                touch(&mut wire, a, at);
                if let Some(b) = b {
                    touch(&mut wire, b, at);
                }
                kept.push(Some(*g));
            }
        }
    }
    (kept.into_iter().flatten().collect(), changed)
}

/// Lowers a circuit onto {RotZ(any), RotX(quarter turns), CZ} and
/// simplifies to a fixpoint. The result's unitary equals the input's up to
/// a single global phase.
pub fn transpile_native(circuit: &Circuit) -> Result<Circuit> {
    let reduced = cancel_hadamard_pairs(circuit.gates());
    let mut lowered = Vec::with_capacity(reduced.len() * 3);
    for gate in &reduced {
        lower(gate, &mut lowered)?;
    }
    loop {
        let (next, changed) = native_sweep(&lowered, circuit.num_qubits());
        lowered = next;
        if !changed {
            break;
        }
    }
    let mut out = Circuit::new(circuit.num_qubits())?;
    out.extend(lowered)?;
    for (k, v) in circuit.metadata() {
        out.set_metadata(k, v);
    }
    out.set_metadata("gate_set", "native");
    Ok(out)
}
