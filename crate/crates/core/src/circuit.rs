//! Immutable-once-built gate sequences with provenance metadata.
//!
//! Circuits serialize to a line-oriented text format: one gate per line as
//! `KIND q0 [q1] [angle]`, with `#`-prefixed `key=value` comment lines
//! carrying metadata. Angles are written with 17 significant digits so a
//! round trip reproduces every f64 bit-exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gates::Gate;

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    gates: Vec<Gate>,
    metadata: BTreeMap<String, String>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::InvalidArgument("circuit needs at least one qubit".into()));
        }
        Ok(Circuit { num_qubits, gates: Vec::new(), metadata: BTreeMap::new() })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    /// Validates targets and folds the angle before storing.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        self.gates.push(gate.normalized());
        Ok(())
    }

    pub fn extend<I: IntoIterator<Item = Gate>>(&mut self, gates: I) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: &str, value: &str) {
        self.metadata.insert(key.to_string(), value.to_string());
    }

    /// Greedy layering depth: a gate starts in the earliest layer where all
    /// its qubits are free.
    pub fn depth(&self) -> usize {
        let mut busy_until = vec![0usize; self.num_qubits];
        let mut depth = 0;
        for g in &self.gates {
            let (a, b) = g.qubits();
            let mut layer = busy_until[a];
            if let Some(b) = b {
                layer = layer.max(busy_until[b]);
            }
            let end = layer + 1;
            busy_until[a] = end;
            if let Some(b) = b {
                busy_until[b] = end;
            }
            depth = depth.max(end);
        }
        depth
    }

    /// Reversed gate order with every gate inverted; metadata is carried over.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            num_qubits: self.num_qubits,
            gates: self.gates.iter().rev().map(|g| g.inverse().normalized()).collect(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# qubits={}", self.num_qubits);
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        for g in &self.gates {
            let (a, b) = g.qubits();
            let _ = match (b, g.angle()) {
                (None, None) => writeln!(out, "{} {}", g.kind_token(), a),
                (None, Some(x)) => writeln!(out, "{} {} {:.16e}", g.kind_token(), a, x),
                (Some(b), None) => writeln!(out, "{} {} {}", g.kind_token(), a, b),
                (Some(b), Some(x)) => writeln!(out, "{} {} {} {:.16e}", g.kind_token(), a, b, x),
            };
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut num_qubits: Option<usize> = None;
        let mut metadata = BTreeMap::new();
        let mut gates = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((k, v)) = comment.trim().split_once('=') {
                    let (k, v) = (k.trim(), v.trim());
                    if k == "qubits" {
                        num_qubits = Some(v.parse().map_err(|_| Error::Parse {
                            line: line_no,
                            msg: format!("bad qubit count {v:?}"),
                        })?);
                    } else {
                        metadata.insert(k.to_string(), v.to_string());
                    }
                }
                continue;
            }

            let mut tok = line.split_whitespace();
            let kind = tok.next().unwrap();
            let rest: Vec<&str> = tok.collect();
            let parse_q = |s: &str| -> Result<usize> {
                s.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad qubit index {s:?}"),
                })
            };
            let parse_a = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad angle {s:?}"),
                })
            };
            let arity_err = |want: &str| Error::Parse {
                line: line_no,
                msg: format!("{kind} expects {want}, got {} fields", rest.len()),
            };

            let gate = match kind {
                "H" | "X" | "Y" | "Z" | "I" => {
                    if rest.len() != 1 {
                        return Err(arity_err("1 qubit"));
                    }
                    let q = parse_q(rest[0])?;
                    match kind {
                        "H" => Gate::Hadamard(q),
                        "X" => Gate::PauliX(q),
                        "Y" => Gate::PauliY(q),
                        "Z" => Gate::PauliZ(q),
                        _ => Gate::Identity(q),
                    }
                }
                "RX" | "RZ" | "UX" => {
                    if rest.len() != 2 {
                        return Err(arity_err("1 qubit + angle"));
                    }
                    let q = parse_q(rest[0])?;
                    let a = parse_a(rest[1])?;
                    match kind {
                        "RX" => Gate::RotX(q, a),
                        "RZ" => Gate::RotZ(q, a),
                        _ => Gate::Ux(q, a),
                    }
                }
                "CNOT" | "CZ" => {
                    if rest.len() != 2 {
                        return Err(arity_err("2 qubits"));
                    }
                    let a = parse_q(rest[0])?;
                    let b = parse_q(rest[1])?;
                    if kind == "CNOT" { Gate::Cnot(a, b) } else { Gate::Cz(a, b) }
                }
                "CPHASE" | "UZZ" => {
                    if rest.len() != 3 {
                        return Err(arity_err("2 qubits + angle"));
                    }
                    let a = parse_q(rest[0])?;
                    let b = parse_q(rest[1])?;
                    let x = parse_a(rest[2])?;
                    if kind == "CPHASE" { Gate::CPhase(a, b, x) } else { Gate::Uzz(a, b, x) }
                }
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unknown gate kind {other:?}"),
                    })
                }
            };
            gates.push(gate);
        }

        let num_qubits = num_qubits.ok_or(Error::Parse {
            line: 0,
            msg: "missing '# qubits=N' header".into(),
        })?;
        let mut circuit = Circuit::new(num_qubits)?;
        circuit.metadata = metadata;
        circuit.extend(gates)?;
        Ok(circuit)
    }

    /// SHA-256 of the canonical text form; used in trajectory manifests.
    pub fn sha256_hex(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_text().as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for byte in digest {
            let _ = write!(out, "{byte:02x}");
        }
        out
    }
}
