//! Level energies in the labeled eigenbasis and free evolution.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::state::{QuantumState, StateSpace};
use crate::error::{Error, Result};
use crate::spin::eigen::{EigenSystem, LevelLabel};
use crate::spin::operators::C64;

/// Energies (rad/s) indexed like the product basis of the state space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    space: StateSpace,
    energies: Vec<f64>,
}

impl Levels {
    pub fn new(space: StateSpace, energies: Vec<f64>) -> Result<Self> {
        if energies.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: energies.len() });
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidInput("level energies must be finite".into()));
        }
        Ok(Self { space, energies })
    }

    /// Reorders eigenvalues so that entry i belongs to the eigenvector
    /// labeled with basis state i.
    pub fn from_eigensystem(eig: &EigenSystem) -> Result<Self> {
        let space = StateSpace::from_dim(eig.dim())?;
        if space == StateSpace::TwoQubit {
            return Err(Error::DimensionMismatch { expected: 12, found: 4 });
        }
        let basis = LevelLabel::basis(eig.dim())?;
        let energies = basis.iter().map(|l| eig.energy(l)).collect::<Result<Vec<_>>>()?;
        Self::new(space, energies)
    }

    /// Secular NV–P1 toy levels with effective coupling ν for every m_I:
    /// E(−1, e) = −(ν/2)·sign(e), all others 0.
    pub fn ideal_coupled(nu: f64) -> Result<Self> {
        let mut e = vec![0.0; 12];
        for (k, v) in e.iter_mut().enumerate().skip(6) {
            let up = (k - 6) / 3 == 0;
            *v = if up { -nu / 2.0 } else { nu / 2.0 };
        }
        Self::new(StateSpace::NvP1, e)
    }

    /// J·S_z⊗S_z for two spin-1/2: diag(J/4, −J/4, −J/4, J/4).
    pub fn two_qubit_zz(j: f64) -> Result<Self> {
        Self::new(StateSpace::TwoQubit, vec![j / 4.0, -j / 4.0, -j / 4.0, j / 4.0])
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Rotating frame of resonant NV and P1 drives for the coupled space:
    /// subtracts λ(0, e, m) from both NV blocks and the mean NV splitting from
    /// the m_s = −1 block. Only kHz-scale coupling terms remain.
    pub fn rotating_frame(&self) -> Result<Self> {
        if self.space != StateSpace::NvP1 {
            return Err(Error::DimensionMismatch { expected: 12, found: self.space.dim() });
        }
        let e = &self.energies;
        let split: Vec<f64> = (0..6).map(|k| e[6 + k] - e[k]).collect();
        let mean = split.iter().sum::<f64>() / 6.0;
        let mut out = vec![0.0; 12];
        for k in 0..6 {
            out[6 + k] = split[k] - mean;
        }
        Self::new(StateSpace::NvP1, out)
    }

    /// ν(m_I) = [E(−1,↓) − E(0,↓)] − [E(−1,↑) − E(0,↑)] from these levels.
    pub fn effective_coupling(&self, m_i: i8) -> Result<f64> {
        if self.space != StateSpace::NvP1 {
            return Err(Error::DimensionMismatch { expected: 12, found: self.space.dim() });
        }
        let n = nuclear_index(m_i)?;
        let e = &self.energies;
        Ok((e[9 + n] - e[3 + n]) - (e[6 + n] - e[n]))
    }

    pub fn propagator(&self, t: f64) -> DMatrix<C64> {
        let d = self.energies.len();
        let mut u = DMatrix::zeros(d, d);
        for (i, &l) in self.energies.iter().enumerate() {
            u[(i, i)] = C64::from_polar(1.0, -l * t);
        }
        u
    }
}

pub(crate) fn nuclear_index(m_i: i8) -> Result<usize> {
    match m_i {
        1 => Ok(0),
        0 => Ok(1),
        -1 => Ok(2),
        _ => Err(Error::UnknownLabel(format!("m_I = {m_i}"))),
    }
}

/// ρ → U ρ U† with U = diag(e^{−iλt}) in the labeled eigenbasis.
pub fn evolve_free(state: &QuantumState, levels: &Levels, t: f64) -> Result<QuantumState> {
    if state.space() != levels.space() {
        return Err(Error::DimensionMismatch { expected: levels.space().dim(), found: state.dim() });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("evolution time must be finite and ≥ 0, got {t}")));
    }
    let d = state.dim();
    let ph: Vec<C64> = levels.energies().iter().map(|&l| C64::from_polar(1.0, -l * t)).collect();
    let rho = state.matrix();
    QuantumState::unchecked(state.space(), DMatrix::from_fn(d, d, |r, c| ph[r] * rho[(r, c)] * ph[c].conj()))
}
