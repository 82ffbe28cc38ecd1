//! Jahn-Teller axes, principal-frame rotations and interaction tensors.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four N–C bond directions that can carry the P1 distortion.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JtAxis {
    A,
    B,
    C,
    D,
}

/// Polar angle of the three off-axis bonds, degrees.
pub const OFF_AXIS_BETA_DEG: f64 = 109.5;

impl JtAxis {
    pub const ALL: [JtAxis; 4] = [JtAxis::A, JtAxis::B, JtAxis::C, JtAxis::D];

    /// (β, α) in degrees.
    pub fn angles_deg(self) -> (f64, f64) {
        match self {
            JtAxis::A => (OFF_AXIS_BETA_DEG, 240.0),
            JtAxis::B => (OFF_AXIS_BETA_DEG, 120.0),
            JtAxis::C => (OFF_AXIS_BETA_DEG, 0.0),
            JtAxis::D => (0.0, 0.0),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for JtAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            JtAxis::A => "A",
            JtAxis::B => "B",
            JtAxis::C => "C",
            JtAxis::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for JtAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(JtAxis::A),
            "B" | "b" => Ok(JtAxis::B),
            "C" | "c" => Ok(JtAxis::C),
            "D" | "d" => Ok(JtAxis::D),
            other => Err(Error::Parse(format!("unknown JT axis {other:?}"))),
        }
    }
}

/// Rotation from the P1 principal frame to the NV frame for an axially
/// symmetric tensor (the third Euler angle drops out).
pub fn rotation_matrix(beta_deg: f64, alpha_deg: f64) -> Matrix3<f64> {
    let (sb, cb) = beta_deg.to_radians().sin_cos();
    let (sa, ca) = alpha_deg.to_radians().sin_cos();
    Matrix3::new(
        cb * ca, cb * sa, -sb, //
        -sa, ca, 0.0, //
        sb * ca, sb * sa, cb,
    )
}

/// Rᵀ · diag · R for the axis angles. `diag` must be axially symmetric
/// (first two entries equal); otherwise the reduced rotation is not valid.
pub fn build_tensor(diag: [f64; 3], axis: JtAxis) -> Result<Matrix3<f64>> {
    let (beta, alpha) = axis.angles_deg();
    build_tensor_with_angles(diag, beta, alpha)
}

pub fn build_tensor_with_angles(diag: [f64; 3], beta_deg: f64, alpha_deg: f64) -> Result<Matrix3<f64>> {
    let scale = diag.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if (diag[0] - diag[1]).abs() > 1e-12 * scale {
        return Err(Error::InvalidInput(format!(
            "tensor diagonal {diag:?} is not axially symmetric"
        )));
    }
    let r = rotation_matrix(beta_deg, alpha_deg);
    let d = Matrix3::from_diagonal(&Vector3::from(diag));
    Ok(r.transpose() * d * r)
}

/// Static magnetic field in gauss, NV frame.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldVector {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl FieldVector {
    pub const fn new(bx: f64, by: f64, bz: f64) -> Self {
        Self { bx, by, bz }
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.bx, self.by, self.bz)
    }

    pub fn magnitude(&self) -> f64 {
        self.as_vector().norm()
    }

    pub fn component(&self, c: Component) -> f64 {
        match c {
            Component::X => self.bx,
            Component::Y => self.by,
            Component::Z => self.bz,
        }
    }

    pub fn with_component(mut self, c: Component, value: f64) -> Self {
        match c {
            Component::X => self.bx = value,
            Component::Y => self.by = value,
            Component::Z => self.bz = value,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.bx, self.by, self.bz].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite field {self:?}")));
        }
        Ok(())
    }
}

/// Cartesian component selector.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
    Z,
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "x" | "X" => Ok(Component::X),
            "y" | "Y" => Ok(Component::Y),
            "z" | "Z" => Ok(Component::Z),
            other => Err(Error::Parse(format!("unknown component {other:?}"))),
        }
    }
}

/// Position of a P1 relative to the NV: distance in nm, polar and azimuthal
/// angles in degrees (NV frame).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectGeometry {
    pub r_nm: f64,
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl DefectGeometry {
    pub fn new(r_nm: f64, theta_deg: f64, phi_deg: f64) -> Result<Self> {
        let g = Self { r_nm, theta_deg, phi_deg };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_nm > 0.0 && self.r_nm.is_finite()) {
            return Err(Error::InvalidInput(format!("separation must be positive, got {} nm", self.r_nm)));
        }
        if !(self.theta_deg.is_finite() && self.phi_deg.is_finite()) {
            return Err(Error::InvalidInput("non-finite angle".into()));
        }
        Ok(())
    }

    /// Unit vector r̂.
    pub fn unit(&self) -> Vector3<f64> {
        let (st, ct) = self.theta_deg.to_radians().sin_cos();
        let (sp, cp) = self.phi_deg.to_radians().sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }
}
