//! Quantum-battery ergotropy toolkit.
//!
//! The crate is organized around five building blocks:
//! - [`state`]: validated density matrices, battery Hamiltonians in spectral
//!   form, and the primitives every other module consumes (dephasing,
//!   passive states, partial trace, unitary evolution);
//! - [`metrics`]: the figures of merit (stored energy, the ergotropy
//!   decomposition, efficiency, coherence, entropies, participation ratio,
//!   purity) and the population-inversion stage classifier;
//! - [`sampling`]: seeded, substream-reproducible generators for random
//!   states (HSRS, FERS, FPRS), GUE Hamiltonians, and Haar unitaries;
//! - [`bounds`]: entropy-constrained envelopes for the coherent ergotropy
//!   and the classifier for how diagonal-entropy changes move the
//!   incoherent ergotropy;
//! - [`dynamics`]: Jaynes-Cummings, Tavis-Cummings, and lossy Dicke battery
//!   charging, with a closed-form Jaynes-Cummings oracle built in.
//!
//! Units: hbar = 1 throughout; entropies are in nats.

pub mod bounds;
pub mod dynamics;
pub mod linalg;
pub mod metrics;
pub mod sampling;
pub mod state;

pub use metrics::{ErgotropyReport, StageLabel};
pub use state::{BatteryHamiltonian, PopulationVector, QuantumState, Spectrum};
