//! Ideal-pulse simulation of DEER, DEER(y), Ramsey/echo and the two-P1
//! entangling sequence.

pub mod deer;
pub mod entangle;
pub mod levels;
pub mod rotation;
pub mod sequence;
pub mod signals;
pub mod state;

pub use deer::{deer_sequence, deer_y_sequence, determine_coupling_sign, CouplingSign, DeerOutcome, ReadoutPhase};
pub use entangle::{
    entanglement_sequence, fidelity_witness, fit_xz_coupling, tomography, tomography_sampled, xz_trace, TwoQubitTomogram,
};
pub use levels::{evolve_free, Levels};
pub use rotation::{apply_rotation, Projector, RotationTarget};
pub use sequence::{run_sequence, SequenceRun, SequenceStep};
pub use signals::{gate_dephasing_bound, ramsey_echo_signal, DecayEnvelope, SignalKind};
pub use state::{QuantumState, StateSpace};
