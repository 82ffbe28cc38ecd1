//! Decay and oscillation models used for DEER, echo, Ramsey and relaxation
//! data, with a weighted least-squares fitter.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, LmOptions};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// a0 + A0·e^{−(x/T)²}·(1 + B0·cos(ω·x/2)); x = 2τ.
    DeerEnvelope,
    /// A1·e^{−(x/T)²}·cos(ν·x/2) + a1.
    CoupledOscillation,
    /// A2·e^{−(t/T)ⁿ} + a2.
    StretchedEcho,
    /// a3 + e^{−(t/T)²}·Σ_j A_j·cos((f_det + (−1)^j f_b/2)·t + φ_j)/2.
    TwoFrequencyRamsey,
    /// o + A0·e^{−t/T}.
    SimpleExponential,
}

impl DecayModel {
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            DecayModel::DeerEnvelope => &["a0", "A0", "T", "B0", "omega"],
            DecayModel::CoupledOscillation => &["A1", "T", "nu", "a1"],
            DecayModel::StretchedEcho => &["A2", "T", "n", "a2"],
            DecayModel::TwoFrequencyRamsey => &["a3", "T", "f_det", "f_b", "A1", "phi1", "A2", "phi2"],
            DecayModel::SimpleExponential => &["o", "A0", "T"],
        }
    }

    pub fn n_params(self) -> usize {
        self.param_names().len()
    }

    /// Frequencies are angular (rad per unit of x).
    pub fn eval(self, x: f64, p: &[f64]) -> f64 {
        match self {
            DecayModel::DeerEnvelope => p[0] + p[1] * (-(x / p[2]).powi(2)).exp() * (1.0 + p[3] * (p[4] * x / 2.0).cos()),
            DecayModel::CoupledOscillation => p[0] * (-(x / p[1]).powi(2)).exp() * (p[2] * x / 2.0).cos() + p[3],
            DecayModel::StretchedEcho => p[0] * (-(x / p[1]).abs().powf(p[2])).exp() + p[3],
            DecayModel::TwoFrequencyRamsey => {
                let env = (-(x / p[1]).powi(2)).exp();
                let lo = p[4] * ((p[2] - p[3] / 2.0) * x + p[5]).cos();
                let hi = p[6] * ((p[2] + p[3] / 2.0) * x + p[7]).cos();
                p[0] + env * (lo + hi) / 2.0
            }
            DecayModel::SimpleExponential => p[0] + p[1] * (-x / p[2]).exp(),
        }
    }

    /// Index of the amplitude whose vanishing leaves the time constant free.
    fn amplitude_index(self) -> Option<usize> {
        match self {
            DecayModel::SimpleExponential => Some(1),
            DecayModel::StretchedEcho => Some(0),
            _ => None,
        }
    }
}

impl fmt::Display for DecayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DecayModel::DeerEnvelope => "deer_envelope",
            DecayModel::CoupledOscillation => "coupled_oscillation",
            DecayModel::StretchedEcho => "stretched_echo",
            DecayModel::TwoFrequencyRamsey => "two_frequency_ramsey",
            DecayModel::SimpleExponential => "simple_exponential",
        };
        f.write_str(s)
    }
}

impl FromStr for DecayModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "deer_envelope" => Ok(DecayModel::DeerEnvelope),
            "coupled_oscillation" => Ok(DecayModel::CoupledOscillation),
            "stretched_echo" => Ok(DecayModel::StretchedEcho),
            "two_frequency_ramsey" => Ok(DecayModel::TwoFrequencyRamsey),
            "simple_exponential" => Ok(DecayModel::SimpleExponential),
            other => Err(Error::Parse(format!("unknown decay model {other:?}"))),
        }
    }
}

/// (x, y, σ) series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl DecaySeries {
    pub fn new(x: Vec<f64>, y: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
        }
        if let Some(s) = &sigma {
            if s.len() != x.len() {
                return Err(Error::DimensionMismatch { expected: x.len(), found: s.len() });
            }
            if s.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidInput("uncertainties must be positive".into()));
            }
        }
        Ok(Self { x, y, sigma })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub params: Vec<f64>,
    /// Zero for fixed parameters.
    pub std_errors: Vec<f64>,
    pub chi2: f64,
}

impl DecayFit {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.model.param_names().iter().position(|n| *n == name).map(|i| self.params[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.model.param_names().iter().position(|n| *n == name).map(|i| self.std_errors[i])
    }
}

/// Weighted least squares (weights 1/σ² when σ is given). `fixed[i]` holds
/// parameter i at `init[i]`.
pub fn fit_decay_model(data: &DecaySeries, model: DecayModel, init: &[f64], fixed: &[bool]) -> Result<DecayFit> {
    let np = model.n_params();
    if init.len() != np {
        return Err(Error::DimensionMismatch { expected: np, found: init.len() });
    }
    let fixed: Vec<bool> = if fixed.is_empty() { vec![false; np] } else { fixed.to_vec() };
    if fixed.len() != np {
        return Err(Error::DimensionMismatch { expected: np, found: fixed.len() });
    }
    let free: Vec<usize> = (0..np).filter(|&i| !fixed[i]).collect();
    if data.x.len() < free.len() + 2 {
        return Err(Error::Underdetermined { needed: free.len() + 2, got: data.x.len() });
    }
    if let Some(ai) = model.amplitude_index() {
        let mean = data.y.iter().sum::<f64>() / data.y.len() as f64;
        let spread = data.y.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        if !fixed[ai] && spread <= 1e-12 * mean.abs().max(1.0) {
            return Err(Error::Unidentifiable(format!(
                "{model}: data are constant, amplitude {} = 0 and the time constant is undetermined",
                model.param_names()[ai]
            )));
        }
    }
    let full = |q: &[f64]| -> Vec<f64> {
        let mut p = init.to_vec();
        for (k, &i) in free.iter().enumerate() {
            p[i] = q[k];
        }
        p
    };
    let resid = |q: &[f64]| -> Result<Vec<f64>> {
        let p = full(q);
        Ok((0..data.x.len())
            .map(|k| {
                let r = model.eval(data.x[k], &p) - data.y[k];
                match &data.sigma {
                    Some(s) => r / s[k],
                    None => r,
                }
            })
            .collect())
    };
    let q0: Vec<f64> = free.iter().map(|&i| init[i]).collect();
    let opts = LmOptions { scale_covariance: data.sigma.is_none(), ..LmOptions::default() };
    let res = levenberg_marquardt(resid, &q0, &opts)?;
    let params = full(&res.params);
    let se_free = res.std_errors();
    let mut std_errors = vec![0.0; np];
    for (k, &i) in free.iter().enumerate() {
        std_errors[i] = se_free[k];
    }
    if let Some(ai) = model.amplitude_index() {
        if !fixed[ai] && params[ai].abs() <= 2.0 * std_errors[ai] {
            return Err(Error::Unidentifiable(format!(
                "{model}: amplitude {} = {:.3e} ± {:.1e} is consistent with zero, time constant undetermined",
                model.param_names()[ai],
                params[ai],
                std_errors[ai]
            )));
        }
    }
    Ok(DecayFit { model, params, std_errors, chi2: res.chi2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn synth(model: DecayModel, p: &[f64], xs: &[f64], sigma: f64, seed: u64) -> DecaySeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, sigma).unwrap();
        let y = xs.iter().map(|&x| model.eval(x, p) + n.sample(&mut rng)).collect();
        DecaySeries::new(xs.to_vec(), y, Some(vec![sigma; xs.len()])).unwrap()
    }

    #[test]
    fn stretched_echo_roundtrip() {
        let truth = [0.45, 1.0, 3.1, 0.5];
        let xs: Vec<f64> = (0..60).map(|i| 0.03 * i as f64).collect();
        let d = synth(DecayModel::StretchedEcho, &truth, &xs, 0.01, 3);
        let f = fit_decay_model(&d, DecayModel::StretchedEcho, &[0.4, 0.8, 2.0, 0.5], &[]).unwrap();
        assert!((f.get("T").unwrap() - 1.0).abs() < 0.02);
        assert!((f.get("n").unwrap() - 3.1).abs() < 0.02 * 3.1 * 5.0);
    }

    #[test]
    fn two_frequency_beat() {
        // t in ms, angular frequencies in rad/ms
        let w = |khz: f64| 2.0 * PI * khz;
        let truth = [0.5, 0.2, w(40.0), w(21.5), 0.4, 0.3, 0.4, -0.2];
        let xs: Vec<f64> = (0..400).map(|i| 0.0005 * i as f64).collect();
        let d = synth(DecayModel::TwoFrequencyRamsey, &truth, &xs, 0.01, 5);
        let init = [0.5, 0.18, w(39.7), w(21.0), 0.35, 0.2, 0.35, -0.1];
        let f = fit_decay_model(&d, DecayModel::TwoFrequencyRamsey, &init, &[]).unwrap();
        let fb = f.get("f_b").unwrap();
        assert!((fb - w(21.5)).abs() < 0.01 * w(21.5), "{}", fb / (2.0 * PI));
    }

    #[test]
    fn constant_exponential_flagged() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let d = DecaySeries::new(xs, vec![0.3; 20], None).unwrap();
        let r = fit_decay_model(&d, DecayModel::SimpleExponential, &[0.3, 0.1, 5.0], &[]);
        assert!(matches!(r, Err(Error::Unidentifiable(_))), "{r:?}");
    }

    #[test]
    fn too_few_points() {
        let d = DecaySeries::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 0.5, 0.3, 0.2], None).unwrap();
        assert!(matches!(
            fit_decay_model(&d, DecayModel::SimpleExponential, &[0.0, 1.0, 1.0], &[]),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn fixed_offset_respected() {
        let xs: Vec<f64> = (0..80).map(|i| i as f64).collect();
        let d = synth(DecayModel::SimpleExponential, &[0.2, 0.5, 19.0], &xs, 0.005, 9);
        let f = fit_decay_model(&d, DecayModel::SimpleExponential, &[0.2, 0.3, 10.0], &[true, false, false]).unwrap();
        assert_eq!(f.params[0], 0.2);
        assert_eq!(f.std_errors[0], 0.0);
        assert!((f.get("T").unwrap() - 19.0).abs() < 1.9);
    }

    #[test]
    fn deer_envelope_roundtrip() {
        let w = 2.0 * PI * 2.12;
        let truth = [0.5, 0.4, 0.77, 0.1, w];
        let xs: Vec<f64> = (0..120).map(|i| 0.01 * i as f64).collect();
        let d = synth(DecayModel::DeerEnvelope, &truth, &xs, 0.004, 11);
        let f = fit_decay_model(&d, DecayModel::DeerEnvelope, &[0.5, 0.4, 0.7, 0.08, 2.0 * PI * 2.0], &[]).unwrap();
        assert!((f.get("T").unwrap() - 0.77).abs() < 0.02);
    }
}
