//! P1, NV and coupled NV–P1 Hamiltonians in rad/s.

use std::ops::{Add, Deref};

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use super::geometry::{build_tensor, DefectGeometry, FieldVector, JtAxis};
use super::operators::{identity, kron, spin_half, spin_one, C64};
use crate::constants::{mhz_to_rad, PhysicalConstants};
use crate::error::{Error, Result};

/// Relative Hermiticity tolerance.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Dense complex matrix checked to be Hermitian on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(DMatrix<C64>);

impl HermitianMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let scale = m.norm().max(f64::MIN_POSITIVE);
        let dev = (&m - m.adjoint()).norm();
        if dev > HERMITIAN_TOL * scale {
            return Err(Error::InvalidInput(format!("matrix not Hermitian (relative deviation {:.3e})", dev / scale)));
        }
        // symmetrize to remove rounding noise
        let h = (&m + m.adjoint()).scale(0.5);
        Ok(Self(h))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }
}

impl Deref for HermitianMatrix {
    type Target = DMatrix<C64>;
    fn deref(&self) -> &DMatrix<C64> {
        &self.0
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &rhs.0)
    }
}

/// Hyperfine and quadrupole constants in MHz.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct P1Params {
    pub a_par: f64,
    pub a_perp: f64,
    pub p_par: f64,
}

impl P1Params {
    pub const fn new(a_par: f64, a_perp: f64, p_par: f64) -> Self {
        Self { a_par, a_perp, p_par }
    }

    /// Values obtained from the DEER spectrum fit at the operating field.
    pub const FITTED: P1Params = P1Params::new(114.0264, 81.312, -3.9770);

    pub fn validate(&self) -> Result<()> {
        if [self.a_par, self.a_perp, self.p_par].iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("non-finite P1 parameters {self:?}")))
        }
    }

    /// diag[A⊥, A⊥, A∥] in MHz.
    pub fn hyperfine_diag(&self) -> [f64; 3] {
        [self.a_perp, self.a_perp, self.a_par]
    }

    /// Traceless axial quadrupole diag[−P∥/3, −P∥/3, 2P∥/3] in MHz, so that
    /// I·P·I = P∥(I_z'² − 2/3) in the principal frame.
    pub fn quadrupole_diag(&self) -> [f64; 3] {
        let t = self.p_par / 3.0;
        [-t, -t, 2.0 * t]
    }
}

/// Operating field of the spectrum fit.
pub const FITTED_FIELD: FieldVector = FieldVector::new(2.437, 1.703, 45.5553);

fn vec_dot_ops(v: [f64; 3], ops: &[DMatrix<C64>; 3]) -> DMatrix<C64> {
    ops[0].scale(v[0]) + ops[1].scale(v[1]) + ops[2].scale(v[2])
}

fn bilinear(t: &Matrix3<f64>, left: &[DMatrix<C64>; 3], right: &[DMatrix<C64>; 3], product: impl Fn(&DMatrix<C64>, &DMatrix<C64>) -> DMatrix<C64>) -> DMatrix<C64> {
    let n = product(&left[0], &right[0]).nrows();
    let mut acc = DMatrix::<C64>::zeros(n, n);
    for j in 0..3 {
        for k in 0..3 {
            let c = t[(j, k)];
            if c != 0.0 {
                acc += product(&left[j], &right[k]).scale(c);
            }
        }
    }
    acc
}

/// Lone P1 over electron ⊗ nitrogen (index = e·3 + n, e: ↑,↓; n: +1,0,−1):
/// γe B·S + γn B·I + I·P·I + S·A·I.
pub fn p1_hamiltonian(consts: &PhysicalConstants, params: &P1Params, field: &FieldVector, axis: JtAxis) -> Result<HermitianMatrix> {
    params.validate()?;
    field.validate()?;
    let a = build_tensor(params.hyperfine_diag(), axis)?.map(mhz_to_rad);
    let p = build_tensor(params.quadrupole_diag(), axis)?.map(mhz_to_rad);
    let s = spin_half();
    let i = spin_one();
    let id2 = identity(2);
    let id3 = identity(3);
    let b = [field.bx, field.by, field.bz];

    let s_full: [DMatrix<C64>; 3] = std::array::from_fn(|k| kron(&s[k], &id3));
    let i_full: [DMatrix<C64>; 3] = std::array::from_fn(|k| kron(&id2, &i[k]));

    let zeeman_e = vec_dot_ops(b, &s_full).scale(consts.gamma_e());
    let zeeman_n = vec_dot_ops(b, &i_full).scale(consts.gamma_n());
    let quad = kron(&id2, &bilinear(&p, &i, &i, |x, y| x * y));
    let hyper = bilinear(&a, &s_full, &i_full, |x, y| x * y);
    HermitianMatrix::new(zeeman_e + zeeman_n + quad + hyper)
}

/// NV spin-1 (basis +1, 0, −1): Δ Jz² + γe B·J.
pub fn nv_hamiltonian(consts: &PhysicalConstants, field: &FieldVector) -> Result<HermitianMatrix> {
    field.validate()?;
    let j = spin_one();
    let b = [field.bx, field.by, field.bz];
    let h = (&j[2] * &j[2]).scale(consts.delta_nv()) + vec_dot_ops(b, &j).scale(consts.gamma_e());
    HermitianMatrix::new(h)
}

/// Electron–electron point-dipole term on NV(3) ⊗ P1 electron(2):
/// ν_dip [3(S·r̂)(J·r̂) − S·J].
pub fn dipolar_hamiltonian(consts: &PhysicalConstants, geom: &DefectGeometry) -> Result<HermitianMatrix> {
    geom.validate()?;
    let nu = consts.nu_dip(geom.r_nm);
    let u = geom.unit();
    let t = (u * u.transpose()).scale(3.0) - Matrix3::identity();
    let j = spin_one();
    let s = spin_half();
    let h = bilinear(&t, &j, &s, kron).scale(nu);
    HermitianMatrix::new(h)
}

/// Projector rows selecting NV m_s = 0 and m_s = −1 from the spin-1 basis.
const NV_SUBSPACE: [usize; 2] = [1, 2];

/// Compress an operator on NV(3) ⊗ X into NV{0, −1} ⊗ X.
fn project_nv(m: &DMatrix<C64>, inner: usize) -> DMatrix<C64> {
    let n = 2 * inner;
    DMatrix::from_fn(n, n, |r, c| {
        let (nr, ir) = (NV_SUBSPACE[r / inner], r % inner);
        let (nc, ic) = (NV_SUBSPACE[c / inner], c % inner);
        m[(nr * inner + ir, nc * inner + ic)]
    })
}

/// Coupled 12-dim Hamiltonian on NV{0, −1} ⊗ P1 electron ⊗ nitrogen
/// (index = nv·6 + e·3 + n, nv: 0 ↦ m_s = 0, 1 ↦ m_s = −1).
pub fn coupled_hamiltonian(
    consts: &PhysicalConstants,
    params: &P1Params,
    field: &FieldVector,
    axis: JtAxis,
    geom: &DefectGeometry,
) -> Result<HermitianMatrix> {
    let nv = project_nv(nv_hamiltonian(consts, field)?.matrix(), 1);
    let p1 = p1_hamiltonian(consts, params, field, axis)?;
    let dip = project_nv(dipolar_hamiltonian(consts, geom)?.matrix(), 2);
    let h = kron(&nv, &identity(6)) + kron(&identity(2), p1.matrix()) + kron(&dip, &identity(3));
    HermitianMatrix::new(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::rad_to_mhz;

    fn real_eigs(h: &HermitianMatrix) -> Vec<f64> {
        let mut v: Vec<f64> = h.matrix().clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn pure_zeeman_p1() {
        let c = PhysicalConstants::default();
        let f = FieldVector::new(0.0, 0.0, 45.0);
        let h = p1_hamiltonian(&c, &P1Params::new(0.0, 0.0, 0.0), &f, JtAxis::B).unwrap();
        let mut expect = Vec::new();
        for ms in [0.5, -0.5] {
            for mi in [1.0, 0.0, -1.0] {
                expect.push(c.gamma_e() * 45.0 * ms + c.gamma_n() * 45.0 * mi);
            }
        }
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in real_eigs(&h).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn nv_zero_field() {
        let c = PhysicalConstants::default();
        let e = real_eigs(&nv_hamiltonian(&c, &FieldVector::new(0.0, 0.0, 0.0)).unwrap());
        assert!(e[0].abs() < 1e-3);
        assert!((e[1] - c.delta_nv()).abs() < 1e-3);
        assert!((e[2] - c.delta_nv()).abs() < 1e-3);
    }

    #[test]
    fn nv_axial_field_transition() {
        let c = PhysicalConstants::default();
        let h = nv_hamiltonian(&c, &FieldVector::new(0.0, 0.0, 45.0)).unwrap();
        let d = h.matrix();
        let f = (d[(2, 2)] - d[(1, 1)]).re;
        assert!((f - (c.delta_nv() - c.gamma_e() * 45.0)).abs() < 1e-3);
    }

    #[test]
    fn nv_tilted_field_transition_near_target() {
        let c = PhysicalConstants::default();
        let e = real_eigs(&nv_hamiltonian(&c, &FITTED_FIELD).unwrap());
        let ghz = rad_to_mhz(e[1] - e[0]) / 1e3;
        assert!((ghz - 2.7493).abs() < 5e-4, "{ghz}");
    }

    #[test]
    fn dipolar_traceless_and_scales() {
        let c = PhysicalConstants::default();
        let g1 = DefectGeometry::new(10.0, 30.0, 40.0).unwrap();
        let g2 = DefectGeometry::new(20.0, 30.0, 40.0).unwrap();
        let h1 = dipolar_hamiltonian(&c, &g1).unwrap();
        let h2 = dipolar_hamiltonian(&c, &g2).unwrap();
        assert!(h1.matrix().trace().norm() < 1e-9);
        assert!((h1.matrix().scale(1.0 / 8.0) - h2.matrix()).norm() < 1e-12 * h1.matrix().norm());
    }

    #[test]
    fn magic_angle_kills_secular_term() {
        let c = PhysicalConstants::default();
        let theta = (1.0_f64 / 3.0).sqrt().acos().to_degrees();
        let h = dipolar_hamiltonian(&c, &DefectGeometry::new(10.0, theta, 0.0).unwrap()).unwrap();
        // |+1,↑⟩ diagonal element carries the SzJz coefficient
        assert!(h.matrix()[(0, 0)].norm() < 1e-9 * h.matrix().norm());
    }

    #[test]
    fn coupled_is_direct_sum_when_far_apart() {
        let c = PhysicalConstants::default();
        let far = DefectGeometry::new(1e7, 10.0, 0.0).unwrap();
        let h = coupled_hamiltonian(&c, &P1Params::FITTED, &FITTED_FIELD, JtAxis::A, &far).unwrap();
        assert_eq!(h.dim(), 12);
        let nv = real_eigs(&nv_hamiltonian(&c, &FITTED_FIELD).unwrap());
        let p1 = real_eigs(&p1_hamiltonian(&c, &P1Params::FITTED, &FITTED_FIELD, JtAxis::A).unwrap());
        let nvd = nv_hamiltonian(&c, &FITTED_FIELD).unwrap();
        let sub = project_nv(nvd.matrix(), 1);
        let nv_sub = real_eigs(&HermitianMatrix::new(sub).unwrap());
        let mut expect: Vec<f64> = nv_sub.iter().flat_map(|a| p1.iter().map(move |b| a + b)).collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in real_eigs(&h).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-6 * b.abs(), "{a} {b}");
        }
        assert_eq!(nv.len(), 3);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = DMatrix::<C64>::zeros(2, 2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(HermitianMatrix::new(m).is_err());
    }
}
