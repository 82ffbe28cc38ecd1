//! Physical constants and unit conversions.
//!
//! Energies are carried internally as angular frequencies in rad/s. Public
//! interfaces take MHz and gauss; the conversions below are the only place
//! where the two systems meet.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Vacuum permeability over 4π, in T·m/A.
const MU0_OVER_4PI: f64 = 1e-7;
/// Reduced Planck constant, J·s.
const HBAR: f64 = 1.054_571_817e-34;
/// Gauss per tesla.
const GAUSS_PER_TESLA: f64 = 1e4;
/// Cubic nanometres per cubic metre.
const NM3_PER_M3: f64 = 1e27;

/// MHz to rad/s.
#[inline]
pub fn mhz_to_rad(f_mhz: f64) -> f64 {
    2.0 * PI * 1e6 * f_mhz
}

/// rad/s to MHz.
#[inline]
pub fn rad_to_mhz(w: f64) -> f64 {
    w / (2.0 * PI * 1e6)
}

/// kHz to rad/s.
#[inline]
pub fn khz_to_rad(f_khz: f64) -> f64 {
    2.0 * PI * 1e3 * f_khz
}

/// rad/s to kHz.
#[inline]
pub fn rad_to_khz(w: f64) -> f64 {
    w / (2.0 * PI * 1e3)
}

/// Gyromagnetic ratios, NV zero-field splitting and lattice data.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalConstants {
    gamma_e: f64,
    gamma_n: f64,
    delta_nv: f64,
    lattice_constant_nm: f64,
    dipolar_prefactor: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::new(
            2.0 * PI * 2.802_495e6,
            -2.0 * PI * 307.8,
            2.0 * PI * 2.877e9,
            0.3567,
        )
        .expect("default constants are valid")
    }
}

impl PhysicalConstants {
    /// `gamma_e` and `gamma_n` in rad/s/G, `delta_nv` in rad/s, lattice
    /// constant in nm. The dipolar prefactor (μ0/4π)·γe²·ħ is derived from
    /// `gamma_e`.
    pub fn new(gamma_e: f64, gamma_n: f64, delta_nv: f64, lattice_constant_nm: f64) -> Result<Self> {
        if !(gamma_e > 0.0) {
            return Err(Error::InvalidInput(format!("gamma_e must be positive, got {gamma_e}")));
        }
        if !(gamma_n < 0.0) {
            return Err(Error::InvalidInput(format!("gamma_n must be negative, got {gamma_n}")));
        }
        if !(delta_nv.is_finite() && lattice_constant_nm > 0.0) {
            return Err(Error::InvalidInput("delta_nv and lattice constant must be finite and positive".into()));
        }
        let gamma_e_si = gamma_e * GAUSS_PER_TESLA;
        let dipolar_prefactor = MU0_OVER_4PI * gamma_e_si * gamma_e_si * HBAR * NM3_PER_M3;
        Ok(Self { gamma_e, gamma_n, delta_nv, lattice_constant_nm, dipolar_prefactor })
    }

    /// Electron gyromagnetic ratio, rad/s per gauss.
    pub fn gamma_e(&self) -> f64 {
        self.gamma_e
    }

    /// ¹⁴N gyromagnetic ratio, rad/s per gauss (negative).
    pub fn gamma_n(&self) -> f64 {
        self.gamma_n
    }

    /// NV zero-field splitting, rad/s.
    pub fn delta_nv(&self) -> f64 {
        self.delta_nv
    }

    /// Diamond cubic lattice constant, nm.
    pub fn lattice_constant_nm(&self) -> f64 {
        self.lattice_constant_nm
    }

    /// (μ0/4π)·γe²·ħ in rad/s·nm³ (≈ 2π · 52.0414 MHz·nm³).
    pub fn dipolar_prefactor(&self) -> f64 {
        self.dipolar_prefactor
    }

    /// Point-dipole coupling ν_dip = −(μ0/4π)γe²ħ / r³ in rad/s.
    pub fn nu_dip(&self, r_nm: f64) -> f64 {
        -self.dipolar_prefactor / (r_nm * r_nm * r_nm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dipolar_prefactor_in_mhz_nm3() {
        let c = PhysicalConstants::default();
        let mhz_nm3 = rad_to_mhz(c.dipolar_prefactor());
        assert!((mhz_nm3 - 52.0414).abs() < 5e-4, "{mhz_nm3}");
    }

    #[test]
    fn nu_dip_at_35_nm_is_about_1_2_khz() {
        let c = PhysicalConstants::default();
        let khz = rad_to_khz(c.nu_dip(35.0));
        // 52.0414 MHz nm^3 / 35^3 nm^3
        assert!((khz + 52.0414e3 / 42875.0).abs() < 1e-3, "{khz}");
        assert!(khz < 0.0);
    }

    #[test]
    fn rejects_wrong_signs() {
        assert!(PhysicalConstants::new(-1.0, -1.0, 1.0, 0.3).is_err());
        assert!(PhysicalConstants::new(1.0, 1.0, 1.0, 0.3).is_err());
    }
}
