//! DEER and DEER(y) sequences with projective NV readout, and the
//! coupling-sign protocol.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::levels::{evolve_free, Levels};
use super::rotation::{apply_rotation, Projector, RotationTarget, PHASE_MINUS_X, PHASE_MINUS_Y, PHASE_X, PHASE_Y};
use super::state::{QuantumState, StateSpace};
use crate::error::{Error, Result};
use crate::spin::eigen::Electron;

/// Phase of the final NV π/2 pulse in DEER(y).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReadoutPhase {
    #[serde(rename = "+y")]
    PlusY,
    #[serde(rename = "-y")]
    MinusY,
}

impl ReadoutPhase {
    pub fn radians(self) -> f64 {
        match self {
            ReadoutPhase::PlusY => PHASE_Y,
            ReadoutPhase::MinusY => PHASE_MINUS_Y,
        }
    }
}

impl std::str::FromStr for ReadoutPhase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+y" | "y" => Ok(ReadoutPhase::PlusY),
            "-y" => Ok(ReadoutPhase::MinusY),
            other => Err(Error::Parse(format!("readout phase {other:?}, expected +y or -y"))),
        }
    }
}

/// NV outcome probabilities and branch states of one sequence.
#[derive(Clone, Debug)]
pub struct DeerOutcome {
    pub p_ms0: f64,
    /// State just before the NV measurement.
    pub final_state: QuantumState,
    pub post_ms0: Option<QuantumState>,
    pub post_ms1: Option<QuantumState>,
}

fn require_coupled(state: &QuantumState, levels: &Levels) -> Result<()> {
    if state.space() != StateSpace::NvP1 || levels.space() != StateSpace::NvP1 {
        return Err(Error::DimensionMismatch { expected: 12, found: state.dim() });
    }
    Ok(())
}

fn echo_core(state: &QuantumState, levels: &Levels, tau: f64, m_i: i8) -> Result<QuantumState> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("τ must be finite and ≥ 0, got {tau}")));
    }
    let s = apply_rotation(state, RotationTarget::Nv, PI / 2.0, PHASE_X)?;
    let s = evolve_free(&s, levels, tau)?;
    let s = apply_rotation(&s, RotationTarget::Nv, PI, PHASE_X)?;
    let s = apply_rotation(&s, RotationTarget::P1Electron(m_i), PI, PHASE_X)?;
    evolve_free(&s, levels, tau)
}

fn measure_nv(final_state: QuantumState) -> Result<DeerOutcome> {
    let (p0, post_ms0) = final_state.project(&Projector::NvZero.indices(StateSpace::NvP1)?)?;
    let (_, post_ms1) = final_state.project(&Projector::NvMinusOne.indices(StateSpace::NvP1)?)?;
    Ok(DeerOutcome { p_ms0: p0, final_state, post_ms0, post_ms1 })
}

/// R_x(π/2) – τ – [R_x(π) on the NV, R_x(π) on the P1 electron at m_I] – τ –
/// R_{−x}(π/2), then an NV projective measurement.
pub fn deer_sequence(state: &QuantumState, levels: &Levels, tau: f64, m_i: i8) -> Result<DeerOutcome> {
    require_coupled(state, levels)?;
    let s = echo_core(state, levels, tau, m_i)?;
    measure_nv(apply_rotation(&s, RotationTarget::Nv, PI / 2.0, PHASE_MINUS_X)?)
}

/// DEER with the final NV pulse at ±y. A second P1 π pulse at m_I returns
/// the electron to its pre-sequence labels, so the m_s = 0 branch carries
/// (1 ± sin ντ)/2 on |↑⟩/|↓⟩ for a −y readout.
pub fn deer_y_sequence(state: &QuantumState, levels: &Levels, tau: f64, m_i: i8, phase: ReadoutPhase) -> Result<DeerOutcome> {
    require_coupled(state, levels)?;
    let s = echo_core(state, levels, tau, m_i)?;
    let s = apply_rotation(&s, RotationTarget::Nv, PI / 2.0, phase.radians())?;
    let s = apply_rotation(&s, RotationTarget::P1Electron(m_i), PI, PHASE_X)?;
    measure_nv(s)
}

/// Fraction of the state with nitrogen outside m_I; DEER(y) assumes it is 0.
pub fn nitrogen_leakage(state: &QuantumState, m_i: i8) -> Result<f64> {
    Ok(1.0 - state.population(&Projector::Nitrogen(m_i).indices(state.space())?))
}

/// NV in |0⟩, P1 fully mixed: ρ = |0⟩⟨0| ⊗ 1/6.
pub fn nv_zero_p1_mixed() -> QuantumState {
    QuantumState::mixture(StateSpace::NvP1, &[0, 1, 2, 3, 4, 5]).expect("valid mixture")
}

/// NV in |0⟩, nitrogen in m_I, electron mixed.
pub fn nv_zero_nitrogen(m_i: i8) -> Result<QuantumState> {
    let n = super::levels::nuclear_index(m_i)?;
    QuantumState::mixture(StateSpace::NvP1, &[n, 3 + n])
}

/// Closed-form DEER m_s = 0 probability for the fully mixed P1 input.
pub fn deer_p_ms0_closed_form(nu: f64, tau: f64) -> f64 {
    (1.0 - (nu * tau).cos()) / 6.0
}

/// Closed-form m_s = 0 branch populations (↑, ↓) of DEER(y) on a nitrogen-
/// polarized input.
pub fn deer_y_populations_closed_form(nu: f64, tau: f64, phase: ReadoutPhase) -> (f64, f64) {
    let s = match phase {
        ReadoutPhase::MinusY => (nu * tau).sin(),
        ReadoutPhase::PlusY => -(nu * tau).sin(),
    };
    ((1.0 + s) / 2.0, (1.0 - s) / 2.0)
}

/// Nitrogen readout probabilities and R for the two initialization phases.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSign {
    pub p_plus_y: f64,
    pub p_minus_y: f64,
    pub r: f64,
}

/// DEER(y) initialization of the electron at τ = π/(2|ν|) (m_s = 0 branch),
/// a CNOT flipping the nitrogen |+1⟩ → |0⟩ when the electron is ↑, and a
/// readout of P(m_I = +1). R = (P₊ − P₋)/(P₊ + P₋).
pub fn determine_coupling_sign(nu: f64) -> Result<CouplingSign> {
    if nu == 0.0 || !nu.is_finite() {
        return Err(Error::Unidentifiable("R is 0/0 for a vanishing coupling".into()));
    }
    let levels = Levels::ideal_coupled(nu)?;
    let tau = PI / (2.0 * nu.abs());
    let input = nv_zero_nitrogen(1)?;
    let mut p = [0.0; 2];
    for (k, phase) in [ReadoutPhase::PlusY, ReadoutPhase::MinusY].into_iter().enumerate() {
        let out = deer_y_sequence(&input, &levels, tau, 1, phase)?;
        let post = out.post_ms0.ok_or_else(|| Error::EmptySample("m_s = 0 branch has zero probability".into()))?;
        let cnot = RotationTarget::Nitrogen { electron: Electron::Up, a: 1, b: 0 };
        let s = apply_rotation(&post, cnot, PI, PHASE_X)?;
        p[k] = s.population(&Projector::Nitrogen(1).indices(StateSpace::NvP1)?);
    }
    let total = p[0] + p[1];
    if total <= 0.0 {
        return Err(Error::Unidentifiable("R is 0/0: nitrogen never read out in +1".into()));
    }
    Ok(CouplingSign { p_plus_y: p[0], p_minus_y: p[1], r: (p[0] - p[1]) / total })
}

/// R from measured probabilities.
pub fn coupling_sign_ratio(p_plus_y: f64, p_minus_y: f64) -> Result<f64> {
    let total = p_plus_y + p_minus_y;
    if !(total > 0.0) {
        return Err(Error::Unidentifiable("R is 0/0".into()));
    }
    Ok((p_plus_y - p_minus_y) / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::operators::C64;
    use nalgebra::DMatrix;

    fn nu() -> f64 {
        2.0 * PI * 1.894e3
    }

    #[test]
    fn deer_matches_closed_form() {
        let lv = Levels::ideal_coupled(nu()).unwrap();
        let rho = nv_zero_p1_mixed();
        for k in 0..50 {
            let tau = k as f64 * 1e-5;
            let out = deer_sequence(&rho, &lv, tau, 1).unwrap();
            assert!((out.p_ms0 - deer_p_ms0_closed_form(nu(), tau)).abs() < 1e-12);
        }
    }

    #[test]
    fn nitrogen_initialized_at_half_period() {
        let lv = Levels::ideal_coupled(nu()).unwrap();
        let out = deer_sequence(&nv_zero_p1_mixed(), &lv, PI / nu(), 1).unwrap();
        assert!((out.p_ms0 - 1.0 / 3.0).abs() < 1e-12);
        let target = nv_zero_nitrogen(1).unwrap();
        assert!(out.post_ms0.unwrap().trace_distance(&target).unwrap() < 1e-12);
    }

    #[test]
    fn uncoupled_is_plain_echo() {
        let lv = Levels::ideal_coupled(0.0).unwrap();
        let out = deer_sequence(&nv_zero_p1_mixed(), &lv, 1e-4, 1).unwrap();
        assert!(out.p_ms0.abs() < 1e-15);
    }

    #[test]
    fn deer_y_branches() {
        let lv = Levels::ideal_coupled(nu()).unwrap();
        let rho = nv_zero_nitrogen(1).unwrap();
        for tau in [0.0, 3e-5, 1.3e-4, PI / (2.0 * nu())] {
            for ph in [ReadoutPhase::MinusY, ReadoutPhase::PlusY] {
                let out = deer_y_sequence(&rho, &lv, tau, 1, ph).unwrap();
                assert!((out.p_ms0 - 0.5).abs() < 1e-12);
                let post = out.post_ms0.unwrap();
                let (up, dn) = deer_y_populations_closed_form(nu(), tau, ph);
                assert!((post.populations()[0] - up).abs() < 1e-12, "{tau} {ph:?}");
                assert!((post.populations()[3] - dn).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn total_probability_law() {
        let lv = Levels::ideal_coupled(nu()).unwrap();
        let out = deer_sequence(&nv_zero_p1_mixed(), &lv, 7e-5, 1).unwrap();
        let sum = QuantumState::weighted_sum(&[
            (out.p_ms0, out.post_ms0.as_ref().unwrap()),
            (1.0 - out.p_ms0, out.post_ms1.as_ref().unwrap()),
        ])
        .unwrap();
        let f = out.final_state.matrix();
        let block = DMatrix::from_fn(12, 12, |r, c| if (r < 6) == (c < 6) { f[(r, c)] } else { C64::new(0.0, 0.0) });
        assert!((sum - block).norm() < 1e-14);
    }

    #[test]
    fn coupling_sign() {
        let pos = determine_coupling_sign(nu()).unwrap();
        let neg = determine_coupling_sign(-nu()).unwrap();
        assert!(pos.r > 0.0 && (pos.r - 1.0).abs() < 1e-12);
        assert_eq!(pos.r, -neg.r);
        assert!(determine_coupling_sign(0.0).is_err());
        assert_eq!(coupling_sign_ratio(1.0, 0.0).unwrap(), 1.0);
    }
}
