//! Ideal two-level rotations and projectors on labeled subspaces.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::levels::nuclear_index;
use super::state::{QuantumState, StateSpace};
use crate::error::{Error, Result};
use crate::spin::eigen::Electron;
use crate::spin::operators::C64;

/// Drive phases, radians.
pub const PHASE_X: f64 = 0.0;
pub const PHASE_Y: f64 = PI / 2.0;
pub const PHASE_MINUS_X: f64 = PI;
pub const PHASE_MINUS_Y: f64 = 3.0 * PI / 2.0;

/// What a pulse drives. In the coupled space P1 targets act in both NV
/// blocks and the NV target acts in every P1 block.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RotationTarget {
    /// NV m_s 0 ↔ −1.
    Nv,
    /// P1 electron ↑ ↔ ↓ conditional on m_I.
    P1Electron(i8),
    /// ¹⁴N m_I pair within one electron manifold.
    Nitrogen { electron: Electron, a: i8, b: i8 },
    /// Qubit 1 or 2 of the two-P1 space.
    Qubit(u8),
}

impl RotationTarget {
    /// Index pairs (first, second) in the given space; the first entry is the
    /// lower basis index.
    pub fn pairs(&self, space: StateSpace) -> Result<Vec<(usize, usize)>> {
        let p1_pairs = |f: &dyn Fn(usize, usize) -> Option<(usize, usize)>| -> Vec<(usize, usize)> {
            let blocks: &[usize] = if space == StateSpace::NvP1 { &[0, 6] } else { &[0] };
            blocks
                .iter()
                .flat_map(|&off| (0..2).flat_map(move |e| (0..3).map(move |n| (off, e, n))))
                .filter_map(|(off, e, n)| f(e, n).map(|(a, b)| (off + a, off + b)))
                .collect()
        };
        let out = match (self, space) {
            (RotationTarget::Nv, StateSpace::NvP1) => (0..6).map(|k| (k, k + 6)).collect(),
            (RotationTarget::P1Electron(m), StateSpace::NvP1 | StateSpace::P1) => {
                let n0 = nuclear_index(*m)?;
                p1_pairs(&|e, n| (e == 0 && n == n0).then_some((n, 3 + n)))
            }
            (RotationTarget::Nitrogen { electron, a, b }, StateSpace::NvP1 | StateSpace::P1) => {
                let (ia, ib) = (nuclear_index(*a)?, nuclear_index(*b)?);
                if ia == ib {
                    return Err(Error::UnknownLabel(format!("nitrogen transition {a} ↔ {b}")));
                }
                let e0 = if *electron == Electron::Up { 0 } else { 1 };
                let (lo, hi) = (ia.min(ib), ia.max(ib));
                p1_pairs(&|e, n| (e == e0 && n == lo).then_some((3 * e + lo, 3 * e + hi)))
            }
            (RotationTarget::Qubit(1), StateSpace::TwoQubit) => vec![(0, 2), (1, 3)],
            (RotationTarget::Qubit(2), StateSpace::TwoQubit) => vec![(0, 1), (2, 3)],
            _ => return Err(Error::UnknownLabel(format!("rotation target {self} in the {space:?} space"))),
        };
        Ok(out)
    }

    /// exp(−iθ/2·(cos φ σx + sin φ σy)) on every pair, identity elsewhere.
    pub fn unitary(&self, space: StateSpace, angle: f64, phase: f64) -> Result<DMatrix<C64>> {
        if !angle.is_finite() || !phase.is_finite() {
            return Err(Error::InvalidInput("rotation angle and phase must be finite".into()));
        }
        let d = space.dim();
        let mut u = DMatrix::<C64>::identity(d, d);
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let off = C64::new(0.0, -s) * C64::from_polar(1.0, -phase);
        let off_t = C64::new(0.0, -s) * C64::from_polar(1.0, phase);
        for (a, b) in self.pairs(space)? {
            u[(a, a)] = C64::new(c, 0.0);
            u[(b, b)] = C64::new(c, 0.0);
            // ⟨a|U|b⟩ pairs σ− with e^{−iφ}
            u[(a, b)] = off;
            u[(b, a)] = off_t;
        }
        Ok(u)
    }
}

impl fmt::Display for RotationTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RotationTarget::Nv => f.write_str("nv"),
            RotationTarget::P1Electron(m) => write!(f, "e{}", signed(*m)),
            RotationTarget::Nitrogen { electron, a, b } => {
                let e = if *electron == Electron::Up { "u" } else { "d" };
                write!(f, "{e}{}~{e}{}", signed(*a), signed(*b))
            }
            RotationTarget::Qubit(q) => write!(f, "q{q}"),
        }
    }
}

fn signed(m: i8) -> String {
    if m == 0 {
        "0".into()
    } else {
        format!("{m:+}")
    }
}

fn parse_m(s: &str) -> Result<i8> {
    match s {
        "+1" | "1" => Ok(1),
        "0" => Ok(0),
        "-1" => Ok(-1),
        _ => Err(Error::UnknownLabel(format!("m_I {s:?}"))),
    }
}

/// `nv`, `q1`, `q2`, `e+1` (electron flip at m_I = +1), `u+1~u0` (nitrogen
/// flip in the ↑ manifold).
impl FromStr for RotationTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "nv" => return Ok(RotationTarget::Nv),
            "q1" => return Ok(RotationTarget::Qubit(1)),
            "q2" => return Ok(RotationTarget::Qubit(2)),
            _ => {}
        }
        if let Some((a, b)) = s.split_once('~') {
            let (ea, ma) = a.split_at(1.min(a.len()));
            let (eb, mb) = b.split_at(1.min(b.len()));
            if ea != eb {
                return Err(Error::UnknownLabel(format!("{s}: nitrogen pulses keep the electron state")));
            }
            let electron = match ea {
                "u" => Electron::Up,
                "d" => Electron::Down,
                _ => return Err(Error::UnknownLabel(s.to_string())),
            };
            return Ok(RotationTarget::Nitrogen { electron, a: parse_m(ma)?, b: parse_m(mb)? });
        }
        if let Some(m) = s.strip_prefix('e') {
            return Ok(RotationTarget::P1Electron(parse_m(m)?));
        }
        Err(Error::UnknownLabel(s.to_string()))
    }
}

/// Ideal rotation of `angle` about the in-plane axis at `phase`.
pub fn apply_rotation(state: &QuantumState, target: RotationTarget, angle: f64, phase: f64) -> Result<QuantumState> {
    let u = target.unitary(state.space(), angle, phase)?;
    state.conjugate(&u)
}

/// Projective-measurement outcomes addressable by name.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Projector {
    NvZero,
    NvMinusOne,
    Electron(Electron),
    Nitrogen(i8),
    Qubit { qubit: u8, electron: Electron },
}

impl Projector {
    pub fn indices(&self, space: StateSpace) -> Result<Vec<usize>> {
        let d = space.dim();
        let all = 0..d;
        let p1 = |k: usize| k % 6;
        let v: Vec<usize> = match (self, space) {
            (Projector::NvZero, StateSpace::NvP1) => (0..6).collect(),
            (Projector::NvMinusOne, StateSpace::NvP1) => (6..12).collect(),
            (Projector::Electron(e), StateSpace::NvP1 | StateSpace::P1) => {
                let e0 = if *e == Electron::Up { 0 } else { 1 };
                all.filter(|&k| p1(k) / 3 == e0).collect()
            }
            (Projector::Nitrogen(m), StateSpace::NvP1 | StateSpace::P1) => {
                let n = nuclear_index(*m)?;
                all.filter(|&k| p1(k) % 3 == n).collect()
            }
            (Projector::Qubit { qubit, electron }, StateSpace::TwoQubit) => {
                let bit = if *electron == Electron::Up { 0 } else { 1 };
                match qubit {
                    1 => all.filter(|&k| k / 2 == bit).collect(),
                    2 => all.filter(|&k| k % 2 == bit).collect(),
                    _ => return Err(Error::UnknownLabel(format!("qubit {qubit}"))),
                }
            }
            _ => return Err(Error::UnknownLabel(format!("projector {self} in the {space:?} space"))),
        };
        Ok(v)
    }
}

impl fmt::Display for Projector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ud = |e: &Electron| if *e == Electron::Up { "up" } else { "down" };
        match self {
            Projector::NvZero => f.write_str("nv0"),
            Projector::NvMinusOne => f.write_str("nv-1"),
            Projector::Electron(e) => f.write_str(ud(e)),
            Projector::Nitrogen(m) => write!(f, "n{}", signed(*m)),
            Projector::Qubit { qubit, electron } => write!(f, "q{qubit}{}", ud(electron)),
        }
    }
}

/// `nv0`, `nv-1`, `up`, `down`, `n+1`, `n0`, `n-1`, `q1up`, `q2down`, ...
impl FromStr for Projector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let ud = |x: &str| match x {
            "up" => Some(Electron::Up),
            "down" => Some(Electron::Down),
            _ => None,
        };
        match s {
            "nv0" => return Ok(Projector::NvZero),
            "nv-1" => return Ok(Projector::NvMinusOne),
            _ => {}
        }
        if let Some(e) = ud(s) {
            return Ok(Projector::Electron(e));
        }
        if let Some(m) = s.strip_prefix('n') {
            return Ok(Projector::Nitrogen(parse_m(m)?));
        }
        for q in [1u8, 2] {
            if let Some(e) = s.strip_prefix(&format!("q{q}")).and_then(ud) {
                return Ok(Projector::Qubit { qubit: q, electron: e });
            }
        }
        Err(Error::UnknownLabel(format!("projector {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_turn_is_identity_on_states() {
        let s = QuantumState::mixture(StateSpace::NvP1, &[0, 4, 7]).unwrap();
        let r = apply_rotation(&s, RotationTarget::Nv, 2.0 * PI, 0.3).unwrap();
        assert!(r.trace_distance(&s).unwrap() < 1e-15);
    }

    #[test]
    fn nv_pi_pulse_transfers_population() {
        let s = QuantumState::basis_state(StateSpace::NvP1, 2).unwrap();
        let r = apply_rotation(&s, RotationTarget::Nv, PI, PHASE_X).unwrap();
        assert!((r.population(&Projector::NvMinusOne.indices(StateSpace::NvP1).unwrap()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conditional_electron_flip() {
        // ρ = 1/6 over the P1 electron and nitrogen
        let s = QuantumState::maximally_mixed(StateSpace::P1);
        let up_plus = QuantumState::mixture(StateSpace::P1, &[0, 1, 2, 4]).unwrap();
        let r = apply_rotation(&up_plus, RotationTarget::P1Electron(1), PI, PHASE_X).unwrap();
        // only the m_I = +1 block changed
        let p = r.populations();
        assert!((p[3] - 0.25).abs() < 1e-15 && p[0].abs() < 1e-15);
        assert!((p[1] - 0.25).abs() < 1e-15 && (p[4] - 0.25).abs() < 1e-15);
        let m = apply_rotation(&s, RotationTarget::P1Electron(1), PI, PHASE_X).unwrap();
        assert!(m.trace_distance(&s).unwrap() < 1e-15);
    }

    #[test]
    fn half_pi_on_two_qubits_matches_closed_form() {
        // R_x(π/2)|↑⟩ = (|↑⟩ − i|↓⟩)/√2
        let u = RotationTarget::Qubit(1).unitary(StateSpace::TwoQubit, PI / 2.0, PHASE_X).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((u[(0, 0)] - C64::new(h, 0.0)).norm() < 1e-15);
        assert!((u[(2, 0)] - C64::new(0.0, -h)).norm() < 1e-15);
        assert!((&u * u.adjoint() - DMatrix::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn labels_round_trip() {
        for s in ["nv", "q1", "q2", "e+1", "e0", "u+1~u0", "d0~d-1"] {
            assert_eq!(s.parse::<RotationTarget>().unwrap().to_string(), s);
        }
        for s in ["nv0", "nv-1", "up", "down", "n+1", "n0", "n-1", "q1up", "q2down"] {
            assert_eq!(s.parse::<Projector>().unwrap().to_string(), s);
        }
        assert!("u+1~d0".parse::<RotationTarget>().is_err());
        assert!("bogus".parse::<Projector>().is_err());
        assert!(RotationTarget::Nv.pairs(StateSpace::P1).is_err());
    }
}
