//! Simulation of photon-heralded teleportation between two remote matter
//! qubits, with state and process tomography of the result and a rate model
//! for the heralding success probability.

pub mod cli;
pub mod error;
pub mod noise;
pub mod protocol;
pub mod qmath;
pub mod ratebudget;
pub mod stats;
pub mod tomography;

pub use error::{Error, Result};
pub use noise::NoiseBudget;
pub use protocol::{run_teleport, InputQubit, MubState, TeleportMode, TeleportOutcome, TeleportSettings};
pub use qmath::{DensityMatrix, Label, Operator, PureState};
pub use ratebudget::RateParams;
pub use tomography::{Basis, FidelityReport, ProcessMatrix, TomographyCounts};
