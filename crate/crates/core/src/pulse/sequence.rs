//! Declarative pulse sequences.

use serde::{Deserialize, Serialize};

use super::levels::{evolve_free, Levels};
use super::rotation::{apply_rotation, Projector, RotationTarget};
use super::state::QuantumState;
use crate::error::{Error, Result};

/// One step. Angles in degrees, durations in microseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceStep {
    Rotation {
        target: String,
        angle_deg: f64,
        #[serde(default)]
        phase_deg: f64,
    },
    FreeEvolution {
        duration_us: f64,
    },
    /// Post-selects the named outcome.
    ProjectiveMeasurement {
        projector: String,
    },
}

impl SequenceStep {
    pub fn validate(&self) -> Result<()> {
        match self {
            SequenceStep::Rotation { target, angle_deg, phase_deg } => {
                target.parse::<RotationTarget>()?;
                if !angle_deg.is_finite() || !phase_deg.is_finite() {
                    return Err(Error::InvalidInput("rotation angle and phase must be finite".into()));
                }
            }
            SequenceStep::FreeEvolution { duration_us } => {
                if !(*duration_us >= 0.0 && duration_us.is_finite()) {
                    return Err(Error::InvalidInput(format!("duration must be ≥ 0, got {duration_us}")));
                }
            }
            SequenceStep::ProjectiveMeasurement { projector } => {
                projector.parse::<Projector>()?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SequenceRun {
    pub state: QuantumState,
    /// Probability of each post-selected outcome, in step order.
    pub outcome_probabilities: Vec<f64>,
}

pub fn run_sequence(initial: &QuantumState, levels: &Levels, steps: &[SequenceStep]) -> Result<SequenceRun> {
    let mut state = initial.clone();
    let mut probs = Vec::new();
    for step in steps {
        step.validate()?;
        state = match step {
            SequenceStep::Rotation { target, angle_deg, phase_deg } => {
                apply_rotation(&state, target.parse()?, angle_deg.to_radians(), phase_deg.to_radians())?
            }
            SequenceStep::FreeEvolution { duration_us } => evolve_free(&state, levels, duration_us * 1e-6)?,
            SequenceStep::ProjectiveMeasurement { projector } => {
                let p: Projector = projector.parse()?;
                let (prob, post) = state.project(&p.indices(state.space())?)?;
                probs.push(prob);
                post.ok_or_else(|| Error::EmptySample(format!("outcome {p} has zero probability")))?
            }
        };
    }
    Ok(SequenceRun { state, outcome_probabilities: probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::deer::{deer_sequence, nv_zero_p1_mixed};
    use std::f64::consts::PI;

    #[test]
    fn declarative_deer_matches_builtin() {
        let nu = 2.0 * PI * 1.9e3;
        let lv = Levels::ideal_coupled(nu).unwrap();
        let tau_us = 120.0;
        let rot = |t: &str, a: f64, p: f64| SequenceStep::Rotation { target: t.into(), angle_deg: a, phase_deg: p };
        let steps = vec![
            rot("nv", 90.0, 0.0),
            SequenceStep::FreeEvolution { duration_us: tau_us },
            rot("nv", 180.0, 0.0),
            rot("e+1", 180.0, 0.0),
            SequenceStep::FreeEvolution { duration_us: tau_us },
            rot("nv", 90.0, 180.0),
            SequenceStep::ProjectiveMeasurement { projector: "nv0".into() },
        ];
        let run = run_sequence(&nv_zero_p1_mixed(), &lv, &steps).unwrap();
        let builtin = deer_sequence(&nv_zero_p1_mixed(), &lv, tau_us * 1e-6, 1).unwrap();
        assert!((run.outcome_probabilities[0] - builtin.p_ms0).abs() < 1e-12);
    }

    #[test]
    fn bad_steps_rejected() {
        let lv = Levels::ideal_coupled(1.0).unwrap();
        let s = nv_zero_p1_mixed();
        let bad = [SequenceStep::Rotation { target: "xx".into(), angle_deg: 90.0, phase_deg: 0.0 }];
        assert!(run_sequence(&s, &lv, &bad).is_err());
        let neg = [SequenceStep::FreeEvolution { duration_us: -1.0 }];
        assert!(run_sequence(&s, &lv, &neg).is_err());
        let zero = [SequenceStep::ProjectiveMeasurement { projector: "nv-1".into() }];
        assert!(matches!(run_sequence(&s, &lv, &zero), Err(Error::EmptySample(_))));
    }
}
