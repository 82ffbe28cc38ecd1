//! Effective NV–P1 coupling from the coupled spectrum.

use super::eigen::{diagonalize, EigenSystem, Electron, LevelLabel};
use super::geometry::{DefectGeometry, FieldVector, JtAxis};
use super::hamiltonian::{coupled_hamiltonian, P1Params};
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// ν = λ(−1,↓,m_I) − λ(0,↓,m_I) − (λ(−1,↑,m_I) − λ(0,↑,m_I)), rad/s.
pub fn effective_coupling(eig: &EigenSystem, m_i: i8) -> Result<f64> {
    if eig.dim() != 12 {
        return Err(Error::DimensionMismatch { expected: 12, found: eig.dim() });
    }
    let e = |nv: i8, el: Electron| eig.energy(&LevelLabel::coupled(nv, el, m_i));
    let down = e(-1, Electron::Down)? - e(0, Electron::Down)?;
    let up = e(-1, Electron::Up)? - e(0, Electron::Up)?;
    Ok(down - up)
}

/// Build, diagonalize and extract ν for one configuration.
pub fn coupling_for(
    consts: &PhysicalConstants,
    params: &P1Params,
    field: &FieldVector,
    axis: JtAxis,
    geom: &DefectGeometry,
    m_i: i8,
) -> Result<f64> {
    let h = coupled_hamiltonian(consts, params, field, axis, geom)?;
    effective_coupling(&diagonalize(&h)?, m_i)
}

/// Secular closed form ν_dip(3cos²θ − 1), rad/s.
pub fn secular_coupling(consts: &PhysicalConstants, geom: &DefectGeometry) -> f64 {
    let c = geom.theta_deg.to_radians().cos();
    consts.nu_dip(geom.r_nm) * (3.0 * c * c - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::hamiltonian::FITTED_FIELD;

    const BARE: P1Params = P1Params::new(0.0, 0.0, 0.0);

    #[test]
    fn secular_limit_on_axis() {
        let c = PhysicalConstants::default();
        let g = DefectGeometry::new(20.0, 0.0, 0.0).unwrap();
        let nu = coupling_for(&c, &BARE, &FieldVector::new(0.0, 0.0, 45.0), JtAxis::D, &g, 1).unwrap();
        let expect = 2.0 * c.nu_dip(20.0);
        assert!((nu - expect).abs() < 0.01 * expect.abs(), "{nu} {expect}");
    }

    #[test]
    fn magic_angle_vanishes() {
        let c = PhysicalConstants::default();
        let theta = (1.0_f64 / 3.0).sqrt().acos().to_degrees();
        let g = DefectGeometry::new(20.0, theta, 30.0).unwrap();
        let nu = coupling_for(&c, &BARE, &FieldVector::new(0.0, 0.0, 45.0), JtAxis::D, &g, 0).unwrap();
        assert!(nu.abs() < 1e-3 * c.nu_dip(20.0).abs(), "{nu}");
    }

    #[test]
    fn wrong_dimension_rejected() {
        let c = PhysicalConstants::default();
        let h = crate::spin::p1_hamiltonian(&c, &P1Params::FITTED, &FITTED_FIELD, JtAxis::D).unwrap();
        assert!(effective_coupling(&diagonalize(&h).unwrap(), 1).is_err());
    }

    #[test]
    fn kilohertz_coupling_against_megahertz_splittings() {
        let c = PhysicalConstants::default();
        let g = DefectGeometry::new(35.0, 45.0, 0.0).unwrap();
        let nu = coupling_for(&c, &P1Params::FITTED, &FITTED_FIELD, JtAxis::A, &g, 1).unwrap();
        let khz = crate::constants::rad_to_khz(nu).abs();
        assert!(khz > 0.05 && khz < 10.0, "{khz}");
    }
}
