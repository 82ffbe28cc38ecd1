//! Predicted spectra, dip extraction and Hamiltonian/field fits.

pub mod decay;
pub mod dips;
pub mod fit;
pub mod gyro;
pub mod transitions;

pub use dips::{extract_dip_centers, DipCenter, SpectrumData};
pub use fit::{
    bruteforce_field_estimate, estimate_field_from_p1, fit_hamiltonian, parse_dips, AssignedDip, BruteForceResult,
    FieldGrid, FitOptions, FitResult,
};
pub use transitions::{transition_frequencies, transition_table, Transition, TransitionLabel, TransitionTable};
