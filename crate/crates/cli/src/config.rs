//! Flat TOML run configuration shared by every subcommand.
//!
//! All keys live at the top level with explicit names so a sweep can be
//! audited by reading the file. Every field has a default; validation is
//! per-command and reports the complete list of violations at once.

use std::path::PathBuf;

use kzsim_core::{KzSchedule, NoiseSpec, RescalingParams, StepTime, TrotterOrder};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Build,
    Run,
    Sweep,
    Collapse,
    Scan,
    Xi,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Build => "build",
            CommandKind::Run => "run",
            CommandKind::Sweep => "sweep",
            CommandKind::Collapse => "collapse",
            CommandKind::Scan => "scan",
            CommandKind::Xi => "xi",
        }
    }

    /// Commands that simulate circuits (as opposed to reading point tables).
    pub fn needs_schedule(self) -> bool {
        !matches!(self, CommandKind::Collapse | CommandKind::Scan)
    }
}

fn one() -> usize {
    1
}

fn one_u64() -> u64 {
    1
}

fn two() -> u8 {
    2
}

fn yes() -> bool {
    true
}

fn midpoint() -> String {
    "midpoint".into()
}

fn free() -> String {
    "free".into()
}

fn taylor() -> usize {
    4
}

fn six() -> usize {
    6
}

macro_rules! default_fns {
    ($($name:ident = $value:expr;)*) => {
        $(fn $name() -> f64 { $value })*
    };
}

default_fns! {
    d_nu = 1.0;
    d_z = 1.0;
    d_eta = 0.25;
    d_xi_lo = 1.0;
    d_xi_hi = 1e4;
    d_nu_min = 0.5;
    d_nu_max = 1.5;
    d_eta_max = 0.5;
    d_region = 1.2;
    d_window_lo = 1.0;
}

fn grid_steps() -> usize {
    101
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    // Chain and drive.
    #[serde(default)]
    pub num_qubits: usize,
    /// Quench durations T; one sweep point per entry.
    #[serde(default)]
    pub drive_times: Vec<f64>,
    #[serde(default)]
    pub dt: f64,
    /// Splitting order: 1 or 2.
    #[serde(default = "two")]
    pub order: u8,
    /// Ramp endpoint; 0 stops at the critical point.
    #[serde(default)]
    pub t_stop: f64,
    /// Odd circuit-depth multiplier; 1 leaves the drive unpadded.
    #[serde(default = "one")]
    pub pad_depth: usize,
    /// Coupling evaluation time within a step: "midpoint" or "left".
    #[serde(default = "midpoint")]
    pub step_time: String,
    /// Lower circuits to the native gate set when emitting them.
    #[serde(default)]
    pub native: bool,

    // Noise ensemble.
    /// Per-gate error rates; empty or [0.0] means noiseless.
    #[serde(default)]
    pub noise_p: Vec<f64>,
    #[serde(default = "one_u64")]
    pub trajectories: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "yes")]
    pub noisy_prep: bool,

    // Measurement.
    /// 0 draws no samples and records exact expectation values.
    #[serde(default)]
    pub shots: u64,
    /// Defaults to the central site of an odd chain.
    #[serde(default)]
    pub reference_qubit: Option<usize>,
    /// Correlations are recorded at distances 1..=x_max.
    #[serde(default = "six")]
    pub x_max: usize,
    #[serde(default)]
    pub record_energy: bool,
    #[serde(default)]
    pub record_entropy: bool,

    // Analysis.
    /// Points table consumed by collapse/scan; relative paths resolve
    /// against the output directory.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default = "taylor")]
    pub taylor_order: usize,
    /// "free" or "fixed" (pin the envelope rate to `decay_fixed`).
    #[serde(default = "free")]
    pub decay_mode: String,
    #[serde(default)]
    pub decay_fixed: f64,
    #[serde(default = "d_nu")]
    pub nu: f64,
    #[serde(default = "d_z")]
    pub z: f64,
    #[serde(default = "d_eta")]
    pub eta: f64,
    /// Fixed noise-length correction for collapse; 0 disables it.
    #[serde(default)]
    pub xi_tilde: f64,
    /// Profile the noise length instead of fixing it.
    #[serde(default)]
    pub fit_xi_tilde: bool,
    #[serde(default = "d_xi_lo")]
    pub xi_search_lo: f64,
    #[serde(default = "d_xi_hi")]
    pub xi_search_hi: f64,
    #[serde(default = "d_nu_min")]
    pub nu_min: f64,
    #[serde(default = "d_nu_max")]
    pub nu_max: f64,
    #[serde(default = "grid_steps")]
    pub nu_steps: usize,
    #[serde(default)]
    pub eta_min: f64,
    #[serde(default = "d_eta_max")]
    pub eta_max: f64,
    #[serde(default = "grid_steps")]
    pub eta_steps: usize,
    #[serde(default = "d_region")]
    pub region_factor: f64,
    /// Distance window for decay-length fits; window_hi of 0 tracks x_max.
    #[serde(default = "d_window_lo")]
    pub window_lo: f64,
    #[serde(default)]
    pub window_hi: f64,
    /// Depth multipliers for the xi command; empty scans noise_p instead.
    #[serde(default)]
    pub pad_depths: Vec<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn order_enum(&self) -> Option<TrotterOrder> {
        match self.order {
            1 => Some(TrotterOrder::First),
            2 => Some(TrotterOrder::Second),
            _ => None,
        }
    }

    pub fn step_time_enum(&self) -> Option<StepTime> {
        match self.step_time.as_str() {
            "midpoint" => Some(StepTime::Midpoint),
            "left" => Some(StepTime::LeftEndpoint),
            _ => None,
        }
    }

    pub fn decay_mode_enum(&self) -> Option<kzsim_core::DecayMode> {
        match self.decay_mode.as_str() {
            "free" => Some(kzsim_core::DecayMode::Free),
            "fixed" => Some(kzsim_core::DecayMode::Fixed(self.decay_fixed)),
            _ => None,
        }
    }

    pub fn schedule(&self, drive_time: f64) -> kzsim_core::Result<KzSchedule> {
        let order = self
            .order_enum()
            .ok_or_else(|| kzsim_core::Error::Schedule(format!("order must be 1 or 2, got {}", self.order)))?;
        let mut s = KzSchedule::new(self.num_qubits, drive_time, self.dt, order)?;
        s.t_stop = self.t_stop;
        s.step_time = self.step_time_enum().unwrap_or_default();
        s.pad_depth = if self.pad_depth > 1 { self.pad_depth } else { 0 };
        s.validate()?;
        Ok(s)
    }

    /// Error rates to iterate; an empty list means one noiseless pass.
    pub fn error_rates(&self) -> Vec<f64> {
        if self.noise_p.is_empty() {
            vec![0.0]
        } else {
            self.noise_p.clone()
        }
    }

    pub fn noise_spec(&self, p: f64) -> NoiseSpec {
        NoiseSpec {
            p,
            master_seed: self.master_seed,
            trajectories: self.trajectories,
            noisy_prep: self.noisy_prep,
        }
    }

    pub fn distances(&self) -> Vec<usize> {
        (1..=self.x_max).collect()
    }

    pub fn reference(&self) -> usize {
        self.reference_qubit.unwrap_or(self.num_qubits.saturating_sub(1) / 2)
    }

    pub fn window(&self) -> (f64, f64) {
        let hi = if self.window_hi > 0.0 { self.window_hi } else { self.x_max as f64 };
        (self.window_lo, hi)
    }

    /// Every violated precondition for `cmd`, empty when runnable.
    pub fn validate(&self, cmd: CommandKind) -> Vec<String> {
        let mut bad = Vec::new();
        if cmd.needs_schedule() {
            self.validate_schedule(&mut bad);
        }
        if matches!(cmd, CommandKind::Run | CommandKind::Sweep | CommandKind::Xi) {
            self.validate_noise(&mut bad);
            self.validate_measurement(&mut bad);
        }
        match cmd {
            CommandKind::Collapse => {
                self.validate_input(&mut bad);
                self.validate_exponents(&mut bad);
                self.validate_fit(&mut bad);
                if self.fit_xi_tilde && !(self.xi_search_lo > 0.0 && self.xi_search_hi > self.xi_search_lo) {
                    bad.push(format!(
                        "noise-length search range must satisfy 0 < lo < hi, got [{}, {}]",
                        self.xi_search_lo, self.xi_search_hi
                    ));
                }
                if self.xi_tilde < 0.0 {
                    bad.push(format!("xi_tilde must be >= 0, got {}", self.xi_tilde));
                }
            }
            CommandKind::Scan => {
                self.validate_input(&mut bad);
                self.validate_fit(&mut bad);
                if !(self.z > 0.0) {
                    bad.push(format!("z must be > 0, got {}", self.z));
                }
                for (name, lo, hi, n) in [
                    ("nu", self.nu_min, self.nu_max, self.nu_steps),
                    ("eta", self.eta_min, self.eta_max, self.eta_steps),
                ] {
                    if n == 0 {
                        bad.push(format!("{name}_steps must be >= 1"));
                    }
                    if !(lo <= hi) {
                        bad.push(format!("{name} grid needs {name}_min <= {name}_max, got [{lo}, {hi}]"));
                    }
                }
                if !(self.nu_min > 0.0) {
                    bad.push(format!("nu grid must stay positive, got nu_min = {}", self.nu_min));
                }
                if !(self.region_factor >= 1.0) {
                    bad.push(format!("region_factor must be >= 1, got {}", self.region_factor));
                }
            }
            CommandKind::Xi => {
                if self.drive_times.len() != 1 {
                    bad.push(format!(
                        "xi needs exactly one drive time, got {}",
                        self.drive_times.len()
                    ));
                }
                let (lo, hi) = self.window();
                if !(lo < hi) {
                    bad.push(format!("decay window must satisfy lo < hi, got [{lo}, {hi}]"));
                }
                if self.pad_depths.is_empty() {
                    if self.noise_p.is_empty() {
                        bad.push("xi needs noise_p values or pad_depths to scan".into());
                    }
                } else {
                    if self.noise_p.len() != 1 {
                        bad.push(format!(
                            "a pad_depths scan holds the error rate fixed: give exactly one noise_p, got {}",
                            self.noise_p.len()
                        ));
                    }
                    for &d in &self.pad_depths {
                        if d == 0 || d % 2 == 0 {
                            bad.push(format!("pad_depths entries must be odd, got {d}"));
                        }
                    }
                }
                self.validate_fit(&mut bad);
            }
            _ => {}
        }
        bad
    }

    fn validate_schedule(&self, bad: &mut Vec<String>) {
        if self.num_qubits < 2 {
            bad.push(format!("num_qubits must be >= 2, got {}", self.num_qubits));
        }
        if self.drive_times.is_empty() {
            bad.push("drive_times must list at least one quench duration T".into());
        }
        if self.order_enum().is_none() {
            bad.push(format!("order must be 1 or 2, got {}", self.order));
        }
        if self.step_time_enum().is_none() {
            bad.push(format!("step_time must be \"midpoint\" or \"left\", got \"{}\"", self.step_time));
        }
        if self.pad_depth == 0 || self.pad_depth % 2 == 0 {
            bad.push(format!("pad_depth must be an odd multiplier, got {}", self.pad_depth));
        }
        if self.num_qubits >= 2
            && self.order_enum().is_some()
            && self.step_time_enum().is_some()
            && self.pad_depth % 2 == 1
        {
            for &t in &self.drive_times {
                if let Err(e) = self.schedule(t) {
                    bad.push(format!("drive T={t}: {e}"));
                }
            }
        }
    }

    fn validate_noise(&self, bad: &mut Vec<String>) {
        for &p in &self.noise_p {
            if !(0.0..=1.0).contains(&p) {
                bad.push(format!("noise_p entries must lie in [0, 1], got {p}"));
            }
        }
        if self.noise_p.iter().any(|&p| p > 0.0) && self.trajectories == 0 {
            bad.push("trajectories must be >= 1 when any noise_p is positive".into());
        }
    }

    fn validate_measurement(&self, bad: &mut Vec<String>) {
        let l = self.num_qubits;
        if self.x_max == 0 {
            bad.push("x_max must be >= 1".into());
        } else if l >= 2 && self.x_max > l - 1 {
            bad.push(format!("x_max must be < num_qubits, got {} for {l} qubits", self.x_max));
        }
        match self.reference_qubit {
            Some(r) if l >= 2 && r >= l => {
                bad.push(format!("reference_qubit {r} is outside the {l}-qubit chain"));
            }
            None if l >= 2 && l % 2 == 0 => {
                bad.push(format!(
                    "an even chain (num_qubits = {l}) has no central site: set reference_qubit"
                ));
            }
            _ => {}
        }
    }

    fn validate_input(&self, bad: &mut Vec<String>) {
        if self.input.is_none() {
            bad.push("input must name the points table to analyze".into());
        }
    }

    fn validate_exponents(&self, bad: &mut Vec<String>) {
        if let Err(e) = RescalingParams::new(self.nu, self.z, self.eta) {
            bad.push(e.to_string());
        }
    }

    fn validate_fit(&self, bad: &mut Vec<String>) {
        if self.decay_mode_enum().is_none() {
            bad.push(format!("decay_mode must be \"free\" or \"fixed\", got \"{}\"", self.decay_mode));
        }
        if self.decay_mode == "fixed" && self.decay_fixed < 0.0 {
            bad.push(format!("decay_fixed must be >= 0, got {}", self.decay_fixed));
        }
    }
}
