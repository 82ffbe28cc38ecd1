//! Effective gyromagnetic ratios of mixed P1 transitions.

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::spin::eigen::{diagonalize, LevelLabel};
use crate::spin::geometry::{Component, FieldVector, JtAxis};
use crate::spin::hamiltonian::{p1_hamiltonian, P1Params};

/// Default central-difference step, gauss.
pub const DEFAULT_STEP_GAUSS: f64 = 0.01;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GyroEstimate {
    /// d(λ_to − λ_from)/dB_component at step h, rad/s per gauss.
    pub value: f64,
    /// Same at step h/2.
    pub half_step_value: f64,
    /// |value(h/2) − value(h)| / |value(h/2)|.
    pub richardson_change: f64,
}

/// Central difference of the signed level splitting λ_to − λ_from with
/// respect to one field component.
#[allow(clippy::too_many_arguments)]
pub fn effective_gyromagnetic(
    consts: &PhysicalConstants,
    params: &P1Params,
    field: &FieldVector,
    axis: JtAxis,
    from: LevelLabel,
    to: LevelLabel,
    component: Component,
    step: f64,
) -> Result<GyroEstimate> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!("derivative step must be positive, got {step}")));
    }
    let b0 = field.component(component);
    let split = |b: f64| -> Result<(f64, f64)> {
        let h = p1_hamiltonian(consts, params, &field.with_component(component, b), axis)?;
        let scale = h.matrix().norm();
        let es = diagonalize(&h)?;
        Ok((es.energy(&to)? - es.energy(&from)?, scale))
    };
    let deriv = |h: f64| -> Result<(f64, f64)> {
        let (up, s1) = split(b0 + h)?;
        let (dn, s2) = split(b0 - h)?;
        // eigenvalue rounding noise carried into the difference quotient
        let noise = 8.0 * f64::EPSILON * s1.max(s2) / h;
        Ok(((up - dn) / (2.0 * h), noise))
    };
    let (value, noise) = deriv(step)?;
    let (half_step_value, _) = deriv(step / 2.0)?;
    if noise > 1e-3 * value.abs().max(consts.gamma_n().abs()) {
        return Err(Error::InvalidInput(format!(
            "step {step} G too small: eigensolver noise {noise:.3e} rad/s/G against derivative {value:.3e}"
        )));
    }
    let richardson_change = (half_step_value - value).abs() / half_step_value.abs().max(f64::MIN_POSITIVE);
    Ok(GyroEstimate { value, half_step_value, richardson_change })
}
