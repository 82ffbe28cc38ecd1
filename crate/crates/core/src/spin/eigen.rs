//! Hermitian diagonalization with product-basis labels.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::hamiltonian::HermitianMatrix;
use super::operators::C64;
use crate::error::{Error, Result};

/// Minimum |⟨basis|v⟩|² accepted for a label.
pub const MIN_LABEL_OVERLAP: f64 = 0.34;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Electron {
    Up,
    Down,
}

impl Electron {
    /// m_s = ±1/2 as ±1.
    pub fn sign(self) -> f64 {
        match self {
            Electron::Up => 1.0,
            Electron::Down => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Electron::Up => Electron::Down,
            Electron::Down => Electron::Up,
        }
    }

    fn index(self) -> usize {
        match self {
            Electron::Up => 0,
            Electron::Down => 1,
        }
    }
}

/// Product-basis label. Fields that do not apply to a basis are `None`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LevelLabel {
    pub nv: Option<i8>,
    pub electron: Option<Electron>,
    pub m_i: Option<i8>,
}

impl LevelLabel {
    pub const fn p1(electron: Electron, m_i: i8) -> Self {
        Self { nv: None, electron: Some(electron), m_i: Some(m_i) }
    }

    pub const fn coupled(nv: i8, electron: Electron, m_i: i8) -> Self {
        Self { nv: Some(nv), electron: Some(electron), m_i: Some(m_i) }
    }

    pub const fn nv(ms: i8) -> Self {
        Self { nv: Some(ms), electron: None, m_i: None }
    }

    /// Index of this label in the canonical basis of the given dimension.
    pub fn basis_index(&self, dim: usize) -> Result<usize> {
        let n_index = |m: i8| -> Result<usize> {
            match m {
                1 => Ok(0),
                0 => Ok(1),
                -1 => Ok(2),
                _ => Err(Error::UnknownLabel(format!("m_I = {m}"))),
            }
        };
        match (dim, self.nv, self.electron, self.m_i) {
            (3, Some(ms), None, None) => n_index(ms),
            (6, None, Some(e), Some(m)) => Ok(e.index() * 3 + n_index(m)?),
            (12, Some(ms), Some(e), Some(m)) => {
                let nv = match ms {
                    0 => 0,
                    -1 => 1,
                    _ => return Err(Error::UnknownLabel(format!("NV m_s = {ms} outside the {{0, -1}} subspace"))),
                };
                Ok(nv * 6 + e.index() * 3 + n_index(m)?)
            }
            _ => Err(Error::UnknownLabel(format!("{self} in a {dim}-dimensional basis"))),
        }
    }

    /// Canonical labels for a 3-, 6- or 12-dimensional basis.
    pub fn basis(dim: usize) -> Result<Vec<LevelLabel>> {
        const M: [i8; 3] = [1, 0, -1];
        const E: [Electron; 2] = [Electron::Up, Electron::Down];
        match dim {
            3 => Ok(M.iter().map(|&m| LevelLabel::nv(m)).collect()),
            6 => Ok(E.iter().flat_map(|&e| M.iter().map(move |&m| LevelLabel::p1(e, m))).collect()),
            12 => Ok([0i8, -1]
                .iter()
                .flat_map(|&nv| E.iter().flat_map(move |&e| M.iter().map(move |&m| LevelLabel::coupled(nv, e, m))))
                .collect()),
            _ => Err(Error::DimensionMismatch { expected: 12, found: dim }),
        }
    }
}

impl fmt::Display for LevelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(ms) = self.nv {
            parts.push(format!("{ms}"));
        }
        if let Some(e) = self.electron {
            parts.push(match e {
                Electron::Up => "u".to_string(),
                Electron::Down => "d".to_string(),
            });
        }
        if let Some(m) = self.m_i {
            parts.push(format!("{m:+}").replace("+0", "0"));
        }
        write!(f, "|{}>", parts.join(","))
    }
}

/// Ascending eigenvalues (rad/s) with labeled orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
    labels: Vec<LevelLabel>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are eigenvectors in the product basis.
    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    pub fn labels(&self) -> &[LevelLabel] {
        &self.labels
    }

    pub fn index_of(&self, label: &LevelLabel) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn energy(&self, label: &LevelLabel) -> Result<f64> {
        Ok(self.eigenvalues[self.index_of(label)?])
    }

    pub fn vector(&self, label: &LevelLabel) -> Result<DVector<C64>> {
        Ok(self.eigenvectors.column(self.index_of(label)?).into_owned())
    }

    /// |⟨label basis state|eigenvector(label)⟩|².
    pub fn label_overlap(&self, label: &LevelLabel) -> Result<f64> {
        let k = self.index_of(label)?;
        let b = label.basis_index(self.dim())?;
        Ok(self.eigenvectors[(b, k)].norm_sqr())
    }
}

/// Diagonalize and label against the canonical basis of the matrix dimension.
pub fn diagonalize(h: &HermitianMatrix) -> Result<EigenSystem> {
    let basis = LevelLabel::basis(h.dim())?;
    diagonalize_with_basis(h, &basis)
}

/// Diagonalize and label each eigenvector greedily by maximal overlap with
/// `basis[i]` = i-th unit vector. Ties go to the lower eigenvalue.
pub fn diagonalize_with_basis(h: &HermitianMatrix, basis: &[LevelLabel]) -> Result<EigenSystem> {
    let n = h.dim();
    if basis.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: basis.len() });
    }
    let eig = h.matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

    let scale = h.matrix().norm().max(f64::MIN_POSITIVE);
    for (c, &lam) in eigenvalues.iter().enumerate() {
        let v = eigenvectors.column(c);
        let res = (h.matrix() * v - v * C64::new(lam, 0.0)).norm();
        if res > 1e-10 * scale {
            return Err(Error::NonConvergence { iterations: 0, reason: format!("eigen residual {res:.3e}") });
        }
    }

    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for c in 0..n {
        for b in 0..n {
            pairs.push((eigenvectors[(b, c)].norm_sqr(), c, b));
        }
    }
    // descending overlap, then ascending eigenvalue index, then basis index
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut label_of: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; n];
    let mut assigned = 0;
    for &(ov, c, b) in &pairs {
        if label_of[c].is_some() || used[b] {
            continue;
        }
        if ov < MIN_LABEL_OVERLAP {
            return Err(Error::AmbiguousLabel { index: c, overlap: ov });
        }
        label_of[c] = Some(b);
        used[b] = true;
        assigned += 1;
        if assigned == n {
            break;
        }
    }
    let labels = label_of.into_iter().map(|b| basis[b.expect("all assigned")]).collect();
    Ok(EigenSystem { eigenvalues, eigenvectors, labels })
}
