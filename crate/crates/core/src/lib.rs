//! Desk-scale simulator for Kibble-Zurek quenches of the 1D quantum Ising
//! chain, with depolarizing-noise trajectory ensembles and finite-size
//! scaling analysis.
//!
//! The crate is organized around the pipeline: build a discretized quench
//! circuit ([`schedule`]), evolve it on a dense statevector ([`state`]),
//! optionally under stochastic Pauli noise ([`noise`]), estimate correlators
//! and other observables ([`observables`]), and collapse the results onto a
//! universal scaling function to read off critical exponents and noise
//! lengths ([`scaling`]). [`oracle`] holds slow reference implementations
//! used by the test suites.

pub mod circuit;
pub mod error;
pub mod gates;
pub mod io;
pub mod noise;
pub mod observables;
pub mod oracle;
pub mod rng;
pub mod scaling;
pub mod schedule;
pub mod state;
pub mod transpile;

pub use circuit::Circuit;
pub use error::{Error, Result};
pub use gates::{Gate, GateMatrix};
pub use noise::{EnsembleConfig, EnsembleStats, NoiseSpec, RatioCurve, TrajectoryResult, XiGrid};
pub use observables::{ObservableEstimate, SampleSet};
pub use scaling::{
    DecayMode, NoiseLengthFit, RatioPoint, RawPoint, RescalingParams, ScaledPoint, ScalingFit,
    ScanConfig, ScanResult, XiTildeFit,
};
pub use schedule::{HamiltonianParams, KzSchedule, StepTime, TrotterOrder};
pub use state::StateVector;
