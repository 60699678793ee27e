//! Gate set for Kibble-Zurek drive circuits.
//!
//! Two families live here: plain hardware-style gates (Hadamard, rotations,
//! Paulis, CNOT/CZ/CPHASE) and the drive composites `Ux(phi) = exp(i phi X)`
//! and `Uzz(phi) = exp(i phi Z Z)` that make up a Trotterized quench step.
//! All matrices are written in the computational z-basis. For two-qubit gates
//! the first listed qubit is the high bit of the 4-dim matrix index (and the
//! control, where that distinction matters).

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Rotation angles live in `(-2pi, 2pi]`. Rotations have period `4pi` in
/// their angle, so folding by `4pi` preserves the matrix exactly (up to the
/// rounding of the fold itself).
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * TAU);
    if a <= -TAU {
        a += 2.0 * TAU;
    } else if a > TAU {
        a -= 2.0 * TAU;
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Hadamard(usize),
    RotX(usize, f64),
    RotZ(usize, f64),
    PauliX(usize),
    PauliY(usize),
    PauliZ(usize),
    Identity(usize),
    /// `exp(i phi X)`, the transverse-field half of a Trotter step.
    Ux(usize, f64),
    /// Control, target.
    Cnot(usize, usize),
    Cz(usize, usize),
    CPhase(usize, usize, f64),
    /// `exp(i phi Z Z)`, the Ising-coupling half of a Trotter step.
    Uzz(usize, usize, f64),
}

/// Dense matrix of a single gate, sized by its arity.
pub enum GateMatrix {
    One([[Complex64; 2]; 2]),
    Two([[Complex64; 4]; 4]),
}

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl Gate {
    /// Targets as (first, second). The first qubit is the control for
    /// controlled gates and the high bit of the matrix basis index.
    pub fn qubits(&self) -> (usize, Option<usize>) {
        use Gate::*;
        match *self {
            Hadamard(q) | RotX(q, _) | RotZ(q, _) | PauliX(q) | PauliY(q) | PauliZ(q)
            | Identity(q) | Ux(q, _) => (q, None),
            Cnot(a, b) | Cz(a, b) | CPhase(a, b, _) | Uzz(a, b, _) => (a, Some(b)),
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cnot(..) | Gate::Cz(..) | Gate::CPhase(..) | Gate::Uzz(..))
    }

    /// Diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        matches!(
            self,
            Gate::RotZ(..)
                | Gate::PauliZ(_)
                | Gate::Identity(_)
                | Gate::Cz(..)
                | Gate::CPhase(..)
                | Gate::Uzz(..)
        )
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::RotX(_, a) | Gate::RotZ(_, a) | Gate::Ux(_, a) | Gate::CPhase(_, _, a)
            | Gate::Uzz(_, _, a) => Some(a),
            _ => None,
        }
    }

    /// Same gate with its angle folded into `(-2pi, 2pi]`.
    pub fn normalized(self) -> Gate {
        use Gate::*;
        match self {
            RotX(q, a) => RotX(q, normalize_angle(a)),
            RotZ(q, a) => RotZ(q, normalize_angle(a)),
            Ux(q, a) => Ux(q, normalize_angle(a)),
            CPhase(a, b, x) => CPhase(a, b, normalize_angle(x)),
            Uzz(a, b, x) => Uzz(a, b, normalize_angle(x)),
            g => g,
        }
    }

    pub fn inverse(self) -> Gate {
        use Gate::*;
        match self {
            RotX(q, a) => RotX(q, -a),
            RotZ(q, a) => RotZ(q, -a),
            Ux(q, a) => Ux(q, -a),
            CPhase(a, b, x) => CPhase(a, b, -x),
            Uzz(a, b, x) => Uzz(a, b, -x),
            // Hadamard, Paulis, identity, CNOT and CZ are involutions.
            g => g,
        }
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let (a, b) = self.qubits();
        if a >= num_qubits {
            return Err(Error::QubitOutOfRange { index: a, num_qubits });
        }
        if let Some(b) = b {
            if b >= num_qubits {
                return Err(Error::QubitOutOfRange { index: b, num_qubits });
            }
            if a == b {
                return Err(Error::DuplicateTargets(a));
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> GateMatrix {
        use Gate::*;
        match *self {
            Hadamard(_) => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                GateMatrix::One([[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]])
            }
            RotX(_, a) => {
                let (hc, hs) = ((a / 2.0).cos(), (a / 2.0).sin());
                GateMatrix::One([[c(hc, 0.0), c(0.0, -hs)], [c(0.0, -hs), c(hc, 0.0)]])
            }
            RotZ(_, a) => GateMatrix::One([
                [Complex64::cis(-a / 2.0), c(0.0, 0.0)],
                [c(0.0, 0.0), Complex64::cis(a / 2.0)],
            ]),
            PauliX(_) => GateMatrix::One([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]),
            PauliY(_) => GateMatrix::One([[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]),
            PauliZ(_) => GateMatrix::One([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]),
            Identity(_) => GateMatrix::One([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]),
            // exp(i a X) = cos(a) I + i sin(a) X
            Ux(_, a) => {
                let (ca, sa) = (a.cos(), a.sin());
                GateMatrix::One([[c(ca, 0.0), c(0.0, sa)], [c(0.0, sa), c(ca, 0.0)]])
            }
            Cnot(..) => {
                let (o, l) = (c(1.0, 0.0), c(0.0, 0.0));
                GateMatrix::Two([
                    [o, l, l, l],
                    [l, o, l, l],
                    [l, l, l, o],
                    [l, l, o, l],
                ])
            }
            Cz(..) => diag4([c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]),
            CPhase(_, _, a) => {
                diag4([c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), Complex64::cis(a)])
            }
            // exp(i a ZZ): phase e^{+ia} on aligned bits, e^{-ia} otherwise.
            Uzz(_, _, a) => {
                let (p, m) = (Complex64::cis(a), Complex64::cis(-a));
                diag4([p, m, m, p])
            }
        }
    }

    /// Token used by the line-oriented circuit text format.
    pub fn kind_token(&self) -> &'static str {
        use Gate::*;
        match self {
            Hadamard(_) => "H",
            RotX(..) => "RX",
            RotZ(..) => "RZ",
            PauliX(_) => "X",
            PauliY(_) => "Y",
            PauliZ(_) => "Z",
            Identity(_) => "I",
            Ux(..) => "UX",
            Cnot(..) => "CNOT",
            Cz(..) => "CZ",
            CPhase(..) => "CPHASE",
            Uzz(..) => "UZZ",
        }
    }
}

fn diag4(d: [Complex64; 4]) -> GateMatrix {
    let l = c(0.0, 0.0);
    GateMatrix::Two([
        [d[0], l, l, l],
        [l, d[1], l, l],
        [l, l, d[2], l],
        [l, l, l, d[3]],
    ])
}

/// CNOT-conjugation identity for the Ising composite:
/// `Uzz(phi) = CNOT . RotZ(-2 phi on target) . CNOT`.
pub fn decompose_uzz(control: usize, target: usize, phi: f64) -> [Gate; 3] {
    [
        Gate::Cnot(control, target),
        Gate::RotZ(target, normalize_angle(-2.0 * phi)),
        Gate::Cnot(control, target),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat2(g: &Gate) -> [[Complex64; 2]; 2] {
        match g.matrix() {
            GateMatrix::One(m) => m,
            _ => panic!("expected one-qubit gate"),
        }
    }

    fn mat4(g: &Gate) -> [[Complex64; 4]; 4] {
        match g.matrix() {
            GateMatrix::Two(m) => m,
            _ => panic!("expected two-qubit gate"),
        }
    }

    fn mul4(a: &[[Complex64; 4]; 4], b: &[[Complex64; 4]; 4]) -> [[Complex64; 4]; 4] {
        let mut out = [[c(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    out[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        out
    }

    fn assert_unitary2(m: [[Complex64; 2]; 2]) {
        for i in 0..2 {
            for j in 0..2 {
                let mut dot = c(0.0, 0.0);
                for k in 0..2 {
                    dot += m[k][i].conj() * m[k][j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - c(want, 0.0)).norm() < 1e-12, "not unitary: {dot}");
            }
        }
    }

    #[test]
    fn all_matrices_unitary() {
        let gates = [
            Gate::Hadamard(0),
            Gate::RotX(0, 0.731),
            Gate::RotZ(0, -2.19),
            Gate::PauliX(0),
            Gate::PauliY(0),
            Gate::PauliZ(0),
            Gate::Identity(0),
            Gate::Ux(0, 1.37),
        ];
        for g in gates {
            assert_unitary2(mat2(&g));
        }
        for g in [
            Gate::Cnot(0, 1),
            Gate::Cz(0, 1),
            Gate::CPhase(0, 1, 0.4),
            Gate::Uzz(0, 1, -0.9),
        ] {
            let m = mat4(&g);
            for i in 0..4 {
                for j in 0..4 {
                    let mut dot = c(0.0, 0.0);
                    for k in 0..4 {
                        dot += m[k][i].conj() * m[k][j];
                    }
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - c(want, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cnot_swaps_one_zero_and_one_one() {
        let m = mat4(&Gate::Cnot(0, 1));
        // Basis order |control target>: 00, 01, 10, 11.
        assert_eq!(m[2][3], c(1.0, 0.0));
        assert_eq!(m[3][2], c(1.0, 0.0));
        assert_eq!(m[0][0], c(1.0, 0.0));
        assert_eq!(m[1][1], c(1.0, 0.0));
        assert_eq!(m[2][2], c(0.0, 0.0));
    }

    #[test]
    fn cz_is_cphase_pi() {
        let a = mat4(&Gate::Cz(0, 1));
        let b = mat4(&Gate::CPhase(0, 1, std::f64::consts::PI));
        for i in 0..4 {
            for j in 0..4 {
                assert!((a[i][j] - b[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn uzz_decomposition_matches_composite() {
        for &phi in &[0.0, 0.125, -0.7, 1.9, std::f64::consts::PI] {
            let want = mat4(&Gate::Uzz(0, 1, phi));
            let [c1, rz, c2] = decompose_uzz(0, 1, phi);
            // RotZ on the target = low bit: I (x) Rz.
            let rzm = mat2(&rz);
            let mut emb = [[c(0.0, 0.0); 4]; 4];
            for hi in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        emb[2 * hi + i][2 * hi + j] = rzm[i][j];
                    }
                }
            }
            let got = mul4(&mat4(&c2), &mul4(&emb, &mat4(&c1)));
            for i in 0..4 {
                for j in 0..4 {
                    assert!(
                        (want[i][j] - got[i][j]).norm() < 1e-12,
                        "phi={phi}: mismatch at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn ux_equals_rotx_with_doubled_negated_angle() {
        for &phi in &[0.3, -1.2, 2.8] {
            let a = mat2(&Gate::Ux(0, phi));
            let b = mat2(&Gate::RotX(0, -2.0 * phi));
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a[i][j] - b[i][j]).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn inverse_is_conjugate_transpose() {
        for g in [
            Gate::Hadamard(0),
            Gate::RotX(0, 0.77),
            Gate::RotZ(0, -1.3),
            Gate::Ux(0, 0.4),
            Gate::PauliY(0),
        ] {
            let m = mat2(&g);
            let inv = mat2(&g.inverse());
            for i in 0..2 {
                for j in 0..2 {
                    assert!((inv[i][j] - m[j][i].conj()).norm() < 1e-14);
                }
            }
        }
        for g in [Gate::Cnot(0, 1), Gate::Uzz(0, 1, 0.6), Gate::CPhase(0, 1, 1.1)] {
            let m = mat4(&g);
            let inv = mat4(&g.inverse());
            for i in 0..4 {
                for j in 0..4 {
                    assert!((inv[i][j] - m[j][i].conj()).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn angle_normalization_range_and_matrix() {
        for &a in &[0.0, 7.0, -13.0, 4.0 * TAU + 0.1, -4.0 * TAU - 0.1, TAU, -TAU] {
            let n = normalize_angle(a);
            assert!(n > -TAU && n <= TAU, "angle {a} normalized to {n}");
            let before = mat2(&Gate::RotZ(0, a));
            let after = mat2(&Gate::RotZ(0, n));
            for i in 0..2 {
                for j in 0..2 {
                    assert!((before[i][j] - after[i][j]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn validate_rejects_bad_targets() {
        assert!(Gate::Hadamard(3).validate(3).is_err());
        assert!(Gate::Cnot(0, 0).validate(2).is_err());
        assert!(Gate::Cnot(0, 2).validate(2).is_err());
        assert!(Gate::Uzz(1, 2, 0.1).validate(3).is_ok());
    }
}
