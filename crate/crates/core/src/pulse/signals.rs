//! Analytic Ramsey and echo signals and the dephasing bound for the
//! two-qubit gate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// e^{−(t/T)ⁿ}.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayEnvelope {
    t: f64,
    n: f64,
}

impl DecayEnvelope {
    pub fn stretched(t: f64, n: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!("envelope time constant must be > 0, got {t}")));
        }
        if !(n >= 1.0 && n.is_finite()) {
            return Err(Error::InvalidInput(format!("stretch exponent must be ≥ 1, got {n}")));
        }
        Ok(Self { t, n })
    }

    pub fn gaussian(t: f64) -> Result<Self> {
        Self::stretched(t, 2.0)
    }

    pub fn time_constant(&self) -> f64 {
        self.t
    }

    pub fn exponent(&self) -> f64 {
        self.n
    }

    pub fn is_gaussian(&self) -> bool {
        self.n == 2.0
    }

    pub fn eval(&self, t: f64) -> f64 {
        (-(t.abs() / self.t).powf(self.n)).exp()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Ramsey,
    Echo,
}

/// Normalized contrast in [−1, 1]. Ramsey: envelope × cos(δt), or the mean
/// of cos((δ ∓ f_b/2)t) when a beat is given. Echo: the envelope alone.
/// Frequencies are angular.
pub fn ramsey_echo_signal(kind: SignalKind, t: f64, envelope: &DecayEnvelope, detuning: f64, beat: Option<f64>) -> f64 {
    let env = envelope.eval(t);
    match kind {
        SignalKind::Echo => env,
        SignalKind::Ramsey => match beat {
            None => env * (detuning * t).cos(),
            Some(fb) => env * 0.5 * (((detuning - fb / 2.0) * t).cos() + ((detuning + fb / 2.0) * t).cos()),
        },
    }
}

/// Contrast mapped to a population, (1 + s)/2.
pub fn contrast_to_population(s: f64) -> f64 {
    (1.0 + s) / 2.0
}

/// 1 − e^{−(t_gate/T₂')ⁿ}, with T₂' = T₂/√2 when `double_echo`.
pub fn gate_dephasing_bound(t2: f64, n: f64, t_gate: f64, double_echo: bool) -> Result<f64> {
    if !(t_gate >= 0.0 && t_gate.is_finite()) {
        return Err(Error::InvalidInput(format!("gate time must be ≥ 0, got {t_gate}")));
    }
    let t2 = if double_echo { t2 / 2f64.sqrt() } else { t2 };
    let env = DecayEnvelope::stretched(t2, n)?;
    Ok(1.0 - env.eval(t_gate))
}
