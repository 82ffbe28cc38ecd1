//! Relaxation of a heralded state under repeated readout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectroscopy::decay::{fit_decay_model, DecayModel, DecaySeries};

/// Mean outcome per set after heralding, over many heralded runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationData {
    /// Set number, starting at 1 for the first set after heralding.
    pub set: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Shots per set.
    pub bin_size: u32,
}

impl RelaxationData {
    /// From runs of per-set outcomes; binomial error of each set mean.
    pub fn from_runs(runs: &[Vec<u32>], bin_size: u32) -> Result<Self> {
        let n_sets = runs.first().map(Vec::len).unwrap_or(0);
        if runs.is_empty() || n_sets == 0 {
            return Err(Error::EmptySample("no heralded runs".into()));
        }
        if runs.iter().any(|r| r.len() != n_sets) {
            return Err(Error::InvalidInput("runs differ in length".into()));
        }
        let n = runs.len() as f64;
        let k = bin_size as f64;
        let mut mean = Vec::with_capacity(n_sets);
        let mut stderr = Vec::with_capacity(n_sets);
        for s in 0..n_sets {
            let m = runs.iter().map(|r| r[s] as f64).sum::<f64>() / n;
            let p = ((m + 0.5) / (k + 1.0)).clamp(1e-12, 1.0 - 1e-12);
            mean.push(m);
            stderr.push((k * p * (1.0 - p) / n).sqrt());
        }
        Ok(Self { set: (1..=n_sets).map(|s| s as f64).collect(), mean, stderr, bin_size })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationFit {
    /// Fixed offset o.
    pub offset: f64,
    pub amplitude: f64,
    pub amplitude_se: f64,
    /// 1/e time in sets.
    pub t_sets: f64,
    pub t_sets_se: f64,
    /// 1/e time in repetitions (sets × bin size).
    pub t_repetitions: f64,
    pub t_repetitions_se: f64,
}

/// Fits o + A0·e^{−t/T} with o held at `offset` (the uninitialized mean).
pub fn relaxation_under_readout(data: &RelaxationData, offset: f64) -> Result<RelaxationFit> {
    let series = DecaySeries::new(data.set.clone(), data.mean.clone(), Some(data.stderr.clone()))?;
    let a0 = data.mean[0] - offset;
    let target = offset + a0 / std::f64::consts::E;
    let crossing = data
        .mean
        .iter()
        .position(|&m| if a0 >= 0.0 { m <= target } else { m >= target })
        .map(|i| data.set[i])
        .unwrap_or(data.set[data.set.len() - 1]);
    let init = [offset, a0 * (1.0 / crossing.max(1.0)).exp(), crossing.max(1.0)];
    let fit = fit_decay_model(&series, DecayModel::SimpleExponential, &init, &[true, false, false])?;
    let (t, t_se) = (fit.params[2], fit.std_errors[2]);
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonConvergence { iterations: 0, reason: format!("decay time {t}") });
    }
    let k = data.bin_size as f64;
    Ok(RelaxationFit {
        offset,
        amplitude: fit.params[1],
        amplitude_se: fit.std_errors[1],
        t_sets: t,
        t_sets_se: t_se,
        t_repetitions: t * k,
        t_repetitions_se: t_se * k,
    })
}
