//! Spin Hamiltonians, diagonalization and effective couplings.

pub mod coupling;
pub mod eigen;
pub mod geometry;
pub mod hamiltonian;
pub mod operators;

pub use coupling::effective_coupling;
pub use eigen::{diagonalize, EigenSystem, Electron, LevelLabel};
pub use geometry::{build_tensor, rotation_matrix, Component, DefectGeometry, FieldVector, JtAxis};
pub use hamiltonian::{
    coupled_hamiltonian, dipolar_hamiltonian, nv_hamiltonian, p1_hamiltonian, HermitianMatrix, P1Params, FITTED_FIELD,
};
