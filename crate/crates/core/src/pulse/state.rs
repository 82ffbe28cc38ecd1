//! Density matrices over labeled bases.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::operators::C64;

pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Which labeled basis a state lives in.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpace {
    /// NV {0, −1} ⊗ P1 electron ⊗ ¹⁴N, index nv·6 + e·3 + n.
    NvP1,
    /// P1 electron ⊗ ¹⁴N, index e·3 + n.
    P1,
    /// Two P1 electrons, index 2·q1 + q2 with ↑ = 0.
    TwoQubit,
}

impl StateSpace {
    pub fn dim(self) -> usize {
        match self {
            StateSpace::NvP1 => 12,
            StateSpace::P1 => 6,
            StateSpace::TwoQubit => 4,
        }
    }

    pub fn from_dim(dim: usize) -> Result<Self> {
        match dim {
            12 => Ok(StateSpace::NvP1),
            6 => Ok(StateSpace::P1),
            4 => Ok(StateSpace::TwoQubit),
            _ => Err(Error::DimensionMismatch { expected: 12, found: dim }),
        }
    }
}

/// Density matrix. The basis is the labeled eigenbasis of the system
/// Hamiltonian, indexed like the product basis of the same labels.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    space: StateSpace,
    rho: DMatrix<C64>,
}

impl QuantumState {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(space: StateSpace, rho: DMatrix<C64>) -> Result<Self> {
        let s = Self::unchecked(space, rho)?;
        s.validate()?;
        Ok(s)
    }

    pub(crate) fn unchecked(space: StateSpace, rho: DMatrix<C64>) -> Result<Self> {
        let d = space.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: rho.nrows() });
        }
        Ok(Self { space, rho })
    }

    pub fn pure(space: StateSpace, psi: &DVector<C64>) -> Result<Self> {
        let n = psi.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidInput("zero state vector".into()));
        }
        let v = psi / C64::new(n, 0.0);
        Self::new(space, &v * v.adjoint())
    }

    pub fn basis_state(space: StateSpace, index: usize) -> Result<Self> {
        let d = space.dim();
        if index >= d {
            return Err(Error::DimensionMismatch { expected: d, found: index });
        }
        let mut v = DVector::zeros(d);
        v[index] = C64::new(1.0, 0.0);
        Self::pure(space, &v)
    }

    /// Equal-weight mixture of the listed basis states.
    pub fn mixture(space: StateSpace, indices: &[usize]) -> Result<Self> {
        let d = space.dim();
        if indices.is_empty() || indices.iter().any(|&i| i >= d) {
            return Err(Error::InvalidInput(format!("mixture indices {indices:?} outside dimension {d}")));
        }
        let mut rho = DMatrix::zeros(d, d);
        let w = 1.0 / indices.len() as f64;
        for &i in indices {
            rho[(i, i)] += C64::new(w, 0.0);
        }
        Self::new(space, rho)
    }

    pub fn maximally_mixed(space: StateSpace) -> Self {
        let d = space.dim();
        Self { space, rho: DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0) }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.space.dim();
        let scale = self.rho.norm().max(1.0);
        if (&self.rho - self.rho.adjoint()).norm() > 1e-12 * scale {
            return Err(Error::InvalidInput("density matrix is not Hermitian".into()));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidInput(format!("trace {tr} differs from 1")));
        }
        let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidInput(format!("negative eigenvalue {min:.3e} in a {d}-dim state")));
        }
        Ok(())
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigen().eigenvalues.iter().copied().collect()
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).collect()
    }

    pub fn population(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.rho[(i, i)].re).sum()
    }

    /// tr(ρ·O).
    pub fn expectation(&self, op: &DMatrix<C64>) -> Result<f64> {
        if op.nrows() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: op.nrows() });
        }
        Ok((&self.rho * op).trace().re)
    }

    /// U ρ U†.
    pub fn conjugate(&self, u: &DMatrix<C64>) -> Result<Self> {
        if u.nrows() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: u.nrows() });
        }
        Ok(Self { space: self.space, rho: u * &self.rho * u.adjoint() })
    }

    /// ⟨ψ|ρ|ψ⟩ for a normalized target.
    pub fn fidelity_pure(&self, psi: &DVector<C64>) -> Result<f64> {
        if psi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: psi.len() });
        }
        let v = psi / C64::new(psi.norm(), 0.0);
        Ok((v.adjoint() * &self.rho * &v)[(0, 0)].re)
    }

    /// ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &QuantumState) -> Result<f64> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let d = &self.rho - &other.rho;
        let h = (&d + d.adjoint()) * C64::new(0.5, 0.0);
        Ok(0.5 * h.symmetric_eigen().eigenvalues.iter().map(|x| x.abs()).sum::<f64>())
    }

    /// Probability of the projector onto `indices` and the renormalized
    /// post-measurement state (None if the probability vanishes).
    pub fn project(&self, indices: &[usize]) -> Result<(f64, Option<QuantumState>)> {
        let d = self.dim();
        if indices.iter().any(|&i| i >= d) {
            return Err(Error::UnknownLabel(format!("projector index outside dimension {d}")));
        }
        let mut keep = vec![false; d];
        for &i in indices {
            keep[i] = true;
        }
        let p: f64 = indices.iter().map(|&i| self.rho[(i, i)].re).sum::<f64>().clamp(0.0, 1.0);
        if p <= 1e-15 {
            return Ok((0.0, None));
        }
        let rho = DMatrix::from_fn(d, d, |r, c| if keep[r] && keep[c] { self.rho[(r, c)] / p } else { C64::new(0.0, 0.0) });
        Ok((p, Some(Self { space: self.space, rho })))
    }

    /// Σ_k w_k ρ_k for states in the same space.
    pub fn weighted_sum(parts: &[(f64, &QuantumState)]) -> Result<DMatrix<C64>> {
        let first = parts.first().ok_or_else(|| Error::InvalidInput("empty sum".into()))?.1;
        let mut acc = DMatrix::zeros(first.dim(), first.dim());
        for (w, s) in parts {
            if s.dim() != first.dim() {
                return Err(Error::DimensionMismatch { expected: first.dim(), found: s.dim() });
            }
            acc += s.matrix() * C64::new(*w, 0.0);
        }
        Ok(acc)
    }
}
