//! Linear quench schedules across the Ising critical point, discretized as
//! Trotter circuits.
//!
//! The chain starts in the ground state of the pure transverse-field term
//! (all qubits along +x, prepared by a Hadamard layer) and is driven by
//! `H(t) = -(1 - t/T) sum X_n - (1 + t/T) sum Z_n Z_{n+1}` from `t = -T`
//! toward the critical point at `t = 0`. Each step applies the composites
//! `Ux(dt * gx)` and `Uzz(dt * gzz)` with couplings evaluated at a single
//! time per step (midpoint by default, which keeps the second-order product
//! genuinely second order in `dt`).

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gates::Gate;

/// Suzuki-Trotter product order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrotterOrder {
    First,
    Second,
}

impl TrotterOrder {
    pub fn as_u8(self) -> u8 {
        match self {
            TrotterOrder::First => 1,
            TrotterOrder::Second => 2,
        }
    }
}

/// Where inside `[t_k, t_k + dt)` the couplings are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StepTime {
    #[default]
    Midpoint,
    LeftEndpoint,
}

/// Time-dependent couplings of the quench Hamiltonian.
#[derive(Clone, Copy, Debug)]
pub struct HamiltonianParams {
    pub drive_time: f64,
}

impl HamiltonianParams {
    /// Transverse-field coupling `1 - t/T`.
    pub fn gx(&self, t: f64) -> f64 {
        1.0 - t / self.drive_time
    }

    /// Ising coupling `1 + t/T`.
    pub fn gzz(&self, t: f64) -> f64 {
        1.0 + t / self.drive_time
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KzSchedule {
    pub num_qubits: usize,
    /// Quench duration scale `T`; the ramp runs `t` from `-T` to `t_stop`.
    pub drive_time: f64,
    pub dt: f64,
    pub order: TrotterOrder,
    pub t_start: f64,
    pub t_stop: f64,
    /// 0 = no padding; otherwise an odd repetition factor `d` where every
    /// step `U` becomes `(U^dagger U)^((d-1)/2) U`.
    pub pad_depth: usize,
    pub step_time: StepTime,
}

impl KzSchedule {
    /// Standard ramp from `-T` to the critical point `t = 0`.
    pub fn new(num_qubits: usize, drive_time: f64, dt: f64, order: TrotterOrder) -> Result<Self> {
        let s = KzSchedule {
            num_qubits,
            drive_time,
            dt,
            order,
            t_start: -drive_time,
            t_stop: 0.0,
            pad_depth: 0,
            step_time: StepTime::Midpoint,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_qubits < 2 {
            return Err(Error::Schedule("need at least 2 qubits".into()));
        }
        if !(self.drive_time > 0.0) {
            return Err(Error::Schedule(format!("drive time must be > 0, got {}", self.drive_time)));
        }
        if !(self.dt > 0.0 && self.dt <= self.drive_time) {
            return Err(Error::Schedule(format!(
                "dt must satisfy 0 < dt <= T, got dt={} T={}",
                self.dt, self.drive_time
            )));
        }
        if self.t_stop > self.drive_time || self.t_start < -self.drive_time {
            return Err(Error::Schedule(format!(
                "window [{}, {}] outside [-T, T]",
                self.t_start, self.t_stop
            )));
        }
        let span = self.t_stop - self.t_start;
        if span < -1e-12 {
            return Err(Error::Schedule("t_stop before t_start".into()));
        }
        let steps = span / self.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::Schedule(format!(
                "(t_stop - t_start)/dt = {steps} is not an integer number of steps"
            )));
        }
        if self.pad_depth > 1 && self.pad_depth % 2 == 0 {
            return Err(Error::Schedule(format!(
                "pad depth must be odd (or 0 for none), got {}",
                self.pad_depth
            )));
        }
        Ok(())
    }

    pub fn params(&self) -> HamiltonianParams {
        HamiltonianParams { drive_time: self.drive_time }
    }

    pub fn gx(&self, t: f64) -> f64 {
        self.params().gx(t)
    }

    pub fn gzz(&self, t: f64) -> f64 {
        self.params().gzz(t)
    }

    pub fn num_steps(&self) -> usize {
        ((self.t_stop - self.t_start) / self.dt).round() as usize
    }

    /// Coupling evaluation time for each step, per the configured convention.
    pub fn step_times(&self) -> Vec<f64> {
        let offset = match self.step_time {
            StepTime::Midpoint => 0.5,
            StepTime::LeftEndpoint => 0.0,
        };
        (0..self.num_steps())
            .map(|k| self.t_start + (k as f64 + offset) * self.dt)
            .collect()
    }

    /// Gates in one Trotter step with couplings frozen at `t_k`.
    pub fn step_gates(&self, t_k: f64) -> Vec<Gate> {
        trotter_step(self, t_k)
    }

    fn gates_per_step(&self) -> usize {
        let l = self.num_qubits;
        let all_bonds = l - 1;
        let even_site_bonds = all_bonds / 2; // bonds (2,3), (4,5), ... 1-indexed
        match self.order {
            TrotterOrder::First => l + all_bonds,
            TrotterOrder::Second => 2 * l + all_bonds + even_site_bonds,
        }
    }

    fn write_metadata(&self, circuit: &mut Circuit) {
        circuit.set_metadata("kind", "kz_drive");
        circuit.set_metadata("drive_time", &format!("{:.16e}", self.drive_time));
        circuit.set_metadata("dt", &format!("{:.16e}", self.dt));
        circuit.set_metadata("order", &self.order.as_u8().to_string());
        circuit.set_metadata("t_start", &format!("{:.16e}", self.t_start));
        circuit.set_metadata("t_stop", &format!("{:.16e}", self.t_stop));
        circuit.set_metadata("pad_depth", &self.pad_depth.to_string());
        circuit.set_metadata(
            "step_time",
            match self.step_time {
                StepTime::Midpoint => "midpoint",
                StepTime::LeftEndpoint => "left",
            },
        );
    }
}

/// Bonds whose left site is odd in 1-indexed chain terms: (1,2), (3,4), ...
/// i.e. qubit pairs (0,1), (2,3), ... These commute with each other.
pub fn odd_site_bonds(num_qubits: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..num_qubits.saturating_sub(1)).step_by(2).map(|n| (n, n + 1))
}

/// Bonds whose left site is even in 1-indexed chain terms: (2,3), (4,5), ...
pub fn even_site_bonds(num_qubits: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..num_qubits.saturating_sub(1)).step_by(2).map(|n| (n, n + 1))
}

/// Hadamard layer preparing the paramagnetic ground state `|+...+>`.
pub fn initial_state_circuit(num_qubits: usize) -> Result<Circuit> {
    if num_qubits < 2 {
        return Err(Error::InvalidArgument("need at least 2 qubits".into()));
    }
    let mut c = Circuit::new(num_qubits)?;
    for q in 0..num_qubits {
        c.push(Gate::Hadamard(q))?;
    }
    Ok(c)
}

/// One Trotter step at frozen couplings. First order applies the transverse
/// layer, then odd-site bonds, then even-site bonds; second order symmetrizes
/// with half-angle transverse and even-site layers on the outside.
pub fn trotter_step(schedule: &KzSchedule, t_k: f64) -> Vec<Gate> {
    let l = schedule.num_qubits;
    let theta_x = schedule.dt * schedule.gx(t_k);
    let theta_zz = schedule.dt * schedule.gzz(t_k);
    let mut gates = Vec::with_capacity(schedule.gates_per_step());
    match schedule.order {
        TrotterOrder::First => {
            gates.extend((0..l).map(|q| Gate::Ux(q, theta_x)));
            gates.extend(odd_site_bonds(l).map(|(a, b)| Gate::Uzz(a, b, theta_zz)));
            gates.extend(even_site_bonds(l).map(|(a, b)| Gate::Uzz(a, b, theta_zz)));
        }
        TrotterOrder::Second => {
            gates.extend((0..l).map(|q| Gate::Ux(q, theta_x / 2.0)));
            gates.extend(even_site_bonds(l).map(|(a, b)| Gate::Uzz(a, b, theta_zz / 2.0)));
            gates.extend(odd_site_bonds(l).map(|(a, b)| Gate::Uzz(a, b, theta_zz)));
            gates.extend(even_site_bonds(l).map(|(a, b)| Gate::Uzz(a, b, theta_zz / 2.0)));
            gates.extend((0..l).map(|q| Gate::Ux(q, theta_x / 2.0)));
        }
    }
    gates
}

/// Full drive circuit: preparation layer plus every Trotter step. Padding is
/// not applied here; see [`pad_depth`].
pub fn build_drive(schedule: &KzSchedule) -> Result<Circuit> {
    schedule.validate()?;
    let mut circuit = initial_state_circuit(schedule.num_qubits)?;
    for t_k in schedule.step_times() {
        circuit.extend(trotter_step(schedule, t_k))?;
    }
    schedule.write_metadata(&mut circuit);
    Ok(circuit)
}

/// Echo padding: each constant-time step `U` becomes `(U^dagger U)^((d-1)/2) U`,
/// leaving the noiseless state untouched while the gate count scales by `d`.
/// The preparation layer is not padded.
pub fn pad_depth(circuit: &Circuit, schedule: &KzSchedule, d: usize) -> Result<Circuit> {
    if d == 0 || d % 2 == 0 {
        return Err(Error::InvalidArgument(format!("pad depth must be odd, got {d}")));
    }
    if d == 1 {
        return Ok(circuit.clone());
    }
    schedule.validate()?;
    let l = schedule.num_qubits;
    if circuit.num_qubits() != l {
        return Err(Error::InvalidArgument("circuit/schedule qubit count mismatch".into()));
    }
    let per_step = schedule.gates_per_step();
    let expected = l + schedule.num_steps() * per_step;
    if circuit.gate_count() != expected {
        return Err(Error::InvalidArgument(format!(
            "circuit shape does not match schedule: {} gates, expected {expected}",
            circuit.gate_count()
        )));
    }

    let mut out = Circuit::new(l)?;
    for (k, v) in circuit.metadata() {
        out.set_metadata(k, v);
    }
    let gates = circuit.gates();
    out.extend(gates[..l].iter().copied())?; // preparation layer
    for step in gates[l..].chunks(per_step) {
        out.extend(step.iter().copied())?;
        for _ in 0..(d - 1) / 2 {
            out.extend(step.iter().rev().map(|g| g.inverse()))?;
            out.extend(step.iter().copied())?;
        }
    }
    out.set_metadata("pad_depth", &d.to_string());
    Ok(out)
}
