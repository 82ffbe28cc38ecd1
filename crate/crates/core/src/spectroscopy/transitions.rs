//! Labeled P1 transition frequencies over the four JT axes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constants::{rad_to_mhz, PhysicalConstants};
use crate::error::{Error, Result};
use crate::spin::eigen::{diagonalize, EigenSystem, Electron, LevelLabel};
use crate::spin::geometry::{FieldVector, JtAxis};
use crate::spin::hamiltonian::{p1_hamiltonian, P1Params};
use crate::spin::operators::{identity, kron, spin_half};

/// Default threshold on the normalized intensity 4|⟨f|Sx|i⟩|².
pub const MAIN_INTENSITY_THRESHOLD: f64 = 0.4;

/// A pair of P1 levels on one JT axis, stored in canonical order (↓ before ↑,
/// then m_I descending) so that equal transitions compare equal.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TransitionLabel {
    pub axis: JtAxis,
    pub a: LevelLabel,
    pub b: LevelLabel,
}

impl TransitionLabel {
    pub fn new(axis: JtAxis, a: LevelLabel, b: LevelLabel) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidInput(format!("transition {a} -> {b} connects a level to itself")));
        }
        for l in [a, b] {
            l.basis_index(6)?;
        }
        let (a, b) = if order_key(&a) <= order_key(&b) { (a, b) } else { (b, a) };
        Ok(Self { axis, a, b })
    }

    /// Electron flip |↓,m_I⟩ ↔ |↑,m_I⟩, written |m_I, i⟩.
    pub fn main(m_i: i8, axis: JtAxis) -> Self {
        Self::new(axis, LevelLabel::p1(Electron::Down, m_i), LevelLabel::p1(Electron::Up, m_i))
            .expect("valid main transition")
    }

    /// (m_I) if this is a main electron flip.
    pub fn main_m_i(&self) -> Option<i8> {
        let (ea, eb) = (self.a.electron?, self.b.electron?);
        if ea != eb && self.a.m_i == self.b.m_i {
            self.a.m_i
        } else {
            None
        }
    }

    /// |λ_a − λ_b| in rad/s.
    pub fn angular_frequency(&self, eig: &EigenSystem) -> Result<f64> {
        Ok((eig.energy(&self.a)? - eig.energy(&self.b)?).abs())
    }
}

fn order_key(l: &LevelLabel) -> (u8, i8) {
    let e = match l.electron {
        Some(Electron::Down) => 0,
        _ => 1,
    };
    (e, -l.m_i.unwrap_or(0))
}

fn level_token(l: &LevelLabel) -> String {
    let e = match l.electron {
        Some(Electron::Up) => "u",
        Some(Electron::Down) => "d",
        None => "?",
    };
    match l.m_i {
        Some(0) => format!("{e}0"),
        Some(m) => format!("{e}{m:+}"),
        None => e.to_string(),
    }
}

fn parse_m(s: &str) -> Result<i8> {
    match s {
        "+1" | "1" => Ok(1),
        "0" | "+0" | "-0" => Ok(0),
        "-1" => Ok(-1),
        other => Err(Error::Parse(format!("bad nitrogen projection {other:?}"))),
    }
}

fn parse_level(s: &str) -> Result<LevelLabel> {
    let s = s.trim();
    let (e, rest) = s.split_at(1.min(s.len()));
    let electron = match e {
        "u" | "U" => Electron::Up,
        "d" | "D" => Electron::Down,
        _ => return Err(Error::Parse(format!("bad level {s:?}, expected e.g. u+1 or d0"))),
    };
    Ok(LevelLabel::p1(electron, parse_m(rest)?))
}

impl fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.main_m_i() {
            Some(0) => write!(f, "0{}", self.axis),
            Some(m) => write!(f, "{m:+}{}", self.axis),
            None => write!(f, "{}:{}~{}", self.axis, level_token(&self.a), level_token(&self.b)),
        }
    }
}

/// Accepts `+1D`, `-1A`, `0C` for main transitions and `D:d0~u-1` for any
/// level pair.
impl FromStr for TransitionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((axis, levels)) = s.split_once(':') {
            let axis: JtAxis = axis.parse()?;
            let (a, b) = levels
                .split_once('~')
                .ok_or_else(|| Error::Parse(format!("bad transition {s:?}, expected AXIS:LEVEL~LEVEL")))?;
            return TransitionLabel::new(axis, parse_level(a)?, parse_level(b)?);
        }
        if s.len() < 2 {
            return Err(Error::Parse(format!("bad transition {s:?}")));
        }
        let (m, axis) = s.split_at(s.len() - 1);
        let m = m.trim_end_matches(',');
        Ok(TransitionLabel::main(parse_m(m)?, axis.parse()?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub label: TransitionLabel,
    pub frequency_mhz: f64,
    /// 4|⟨f|Sx|i⟩|², in [0, 1].
    pub intensity: f64,
    pub main: bool,
}

/// All 15 level pairs on each JT axis, sorted by frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionTable {
    pub entries: Vec<Transition>,
}

impl TransitionTable {
    pub fn main(&self) -> impl Iterator<Item = &Transition> {
        self.entries.iter().filter(|t| t.main)
    }

    pub fn find(&self, label: &TransitionLabel) -> Option<&Transition> {
        self.entries.iter().find(|t| &t.label == label)
    }

    /// Entry whose frequency is closest to `f_mhz`.
    pub fn nearest(&self, f_mhz: f64) -> Option<&Transition> {
        self.entries
            .iter()
            .min_by(|a, b| (a.frequency_mhz - f_mhz).abs().total_cmp(&(b.frequency_mhz - f_mhz).abs()))
    }
}

/// Lone-P1 eigensystems for the four axes.
pub fn p1_eigensystems(consts: &PhysicalConstants, params: &P1Params, field: &FieldVector) -> Result<[EigenSystem; 4]> {
    let mut out = Vec::with_capacity(4);
    for axis in JtAxis::ALL {
        out.push(diagonalize(&p1_hamiltonian(consts, params, field, axis)?)?);
    }
    Ok(out.try_into().expect("four axes"))
}

pub fn transition_table(
    consts: &PhysicalConstants,
    params: &P1Params,
    field: &FieldVector,
    main_threshold: f64,
) -> Result<TransitionTable> {
    let sx = kron(&spin_half()[0], &identity(3));
    let systems = p1_eigensystems(consts, params, field)?;
    let mut entries = Vec::with_capacity(60);
    for (axis, es) in JtAxis::ALL.into_iter().zip(systems.iter()) {
        let v = es.eigenvectors();
        for i in 0..6 {
            for j in (i + 1)..6 {
                let label = TransitionLabel::new(axis, es.labels()[i], es.labels()[j])?;
                let me = (v.column(j).adjoint() * &sx * v.column(i))[(0, 0)];
                let intensity = (4.0 * me.norm_sqr()).min(1.0);
                entries.push(Transition {
                    label,
                    frequency_mhz: rad_to_mhz(es.eigenvalues()[j] - es.eigenvalues()[i]),
                    intensity,
                    main: intensity >= main_threshold && label.main_m_i().is_some(),
                });
            }
        }
    }
    entries.sort_by(|a, b| a.frequency_mhz.total_cmp(&b.frequency_mhz).then(a.label.cmp(&b.label)));
    Ok(TransitionTable { entries })
}

/// Frequencies in MHz for the requested labels, diagonalizing each needed
/// axis once.
pub fn transition_frequencies(
    consts: &PhysicalConstants,
    params: &P1Params,
    field: &FieldVector,
    labels: &[TransitionLabel],
) -> Result<Vec<f64>> {
    let mut cache: [Option<EigenSystem>; 4] = Default::default();
    let mut out = Vec::with_capacity(labels.len());
    for l in labels {
        let slot = &mut cache[l.axis.index()];
        if slot.is_none() {
            *slot = Some(diagonalize(&p1_hamiltonian(consts, params, field, l.axis)?)?);
        }
        out.push(rad_to_mhz(l.angular_frequency(slot.as_ref().expect("filled"))?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::hamiltonian::FITTED_FIELD;

    fn table() -> TransitionTable {
        transition_table(&PhysicalConstants::default(), &P1Params::FITTED, &FITTED_FIELD, MAIN_INTENSITY_THRESHOLD)
            .unwrap()
    }

    #[test]
    fn sixty_entries_and_twelve_main() {
        let t = table();
        assert_eq!(t.entries.len(), 60);
        assert_eq!(t.main().count(), 12);
        assert!(t.entries.iter().all(|e| e.frequency_mhz > 0.0 && (0.0..=1.0).contains(&e.intensity)));
    }

    #[test]
    fn fitted_main_lines() {
        let t = table();
        let f = |s: &str| t.find(&s.parse().unwrap()).unwrap().frequency_mhz;
        assert!((f("-1D") - 47.179).abs() < 1e-3);
        assert!((f("+1D") - 258.018).abs() < 1e-3);
        assert!((f("+1B") - 238.965).abs() < 1e-3);
    }

    #[test]
    fn bare_larmor_degenerate() {
        let c = PhysicalConstants::default();
        let t = transition_table(&c, &P1Params::new(0.0, 0.0, 0.0), &FITTED_FIELD, MAIN_INTENSITY_THRESHOLD).unwrap();
        let larmor = rad_to_mhz(c.gamma_e() * FITTED_FIELD.magnitude());
        assert_eq!(t.main().count(), 12);
        for m in t.main() {
            // nuclear Zeeman shifts are below 20 kHz
            assert!((m.frequency_mhz - larmor).abs() < 0.02, "{}", m.frequency_mhz);
        }
        assert!((larmor - 128.0).abs() < 0.5);
    }

    #[test]
    fn label_text_round_trip() {
        for s in ["+1D", "-1A", "0C", "D:d0~u-1", "B:d+1~d0"] {
            let l: TransitionLabel = s.parse().unwrap();
            assert_eq!(l.to_string(), s);
        }
        assert_eq!("+1,D".parse::<TransitionLabel>().unwrap(), TransitionLabel::main(1, JtAxis::D));
        assert_eq!("C:u+1~d+1".parse::<TransitionLabel>().unwrap().to_string(), "+1C");
        assert!("+2D".parse::<TransitionLabel>().is_err());
        assert!("D:u0~u0".parse::<TransitionLabel>().is_err());
    }

    #[test]
    fn axial_field_makes_off_axis_lines_degenerate() {
        let c = PhysicalConstants::default();
        let field = FieldVector::new(0.0, 0.0, 45.5);
        let t = transition_table(&c, &P1Params::FITTED, &field, MAIN_INTENSITY_THRESHOLD).unwrap();
        for m in [1, 0, -1] {
            let f: Vec<f64> = [JtAxis::A, JtAxis::B, JtAxis::C]
                .iter()
                .map(|&a| t.find(&TransitionLabel::main(m, a)).unwrap().frequency_mhz)
                .collect();
            assert!((f[0] - f[1]).abs() < 1e-9 && (f[1] - f[2]).abs() < 1e-9, "{f:?}");
        }
    }
}
