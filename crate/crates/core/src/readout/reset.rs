//! Early-abort policy for heralded preparation with optical reset.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{binomial_pmf, ShotMixture};
use crate::bath::substream;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetProblem {
    /// Static per-attempt configuration mixture.
    pub mixture: ShotMixture,
    /// Shots per full attempt (N_total).
    pub k_total: u32,
    /// An attempt succeeds when N1 + N2 > pass_threshold.
    pub pass_threshold: u32,
    /// Duration of one DEER shot (s).
    pub t_deer: f64,
    /// Overhead of a reset after an abort (s).
    pub t_reset: f64,
    /// Successes per Monte Carlo run.
    pub target_successes: usize,
}

impl ResetProblem {
    /// 12% success mass above 180 of 420 shots: S1 and S2 heralded with 6%
    /// each (hit probabilities 510/820 and 445/820), baseline 200/820.
    pub fn calibrated() -> Self {
        let mixture = ShotMixture::new(vec![(0.88, 200.0 / 820.0), (0.06, 510.0 / 820.0), (0.06, 445.0 / 820.0)])
            .expect("valid mixture");
        Self { mixture, k_total: 420, pass_threshold: 180, t_deer: 684e-6, t_reset: 1e-3, target_successes: 1000 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_total == 0 || self.pass_threshold >= self.k_total {
            return Err(Error::InvalidInput("need 0 ≤ pass threshold < N_total".into()));
        }
        if !(self.t_deer > 0.0 && self.t_reset >= 0.0) || self.target_successes == 0 {
            return Err(Error::InvalidInput("timings must be positive and the success target ≥ 1".into()));
        }
        Ok(())
    }

    /// Probability that a full attempt succeeds.
    pub fn success_probability(&self) -> f64 {
        self.mixture
            .components
            .iter()
            .map(|&(w, p)| w * binomial_pmf(self.k_total, p)[self.pass_threshold as usize + 1..].iter().sum::<f64>())
            .sum()
    }

    /// Closed-form mean time per success for (Θ, Λ), infinite when no
    /// attempt can pass.
    pub fn expected_time(&self, theta: u32, lambda: u32) -> f64 {
        let (time, success) = self.per_attempt(theta, lambda);
        if success > 0.0 { time / success } else { f64::INFINITY }
    }

    /// Mean time and success probability of one attempt under (Θ, Λ).
    fn per_attempt(&self, theta: u32, lambda: u32) -> (f64, f64) {
        let mut time = 0.0;
        let mut success = 0.0;
        for &(w, p) in &self.mixture.components {
            let first = binomial_pmf(theta, p);
            let rest = binomial_pmf(self.k_total - theta, p);
            let pass: f64 = first.iter().skip(lambda as usize).sum();
            time += w * ((1.0 - pass) * (theta as f64 * self.t_deer + self.t_reset) + pass * self.k_total as f64 * self.t_deer);
            for (n1, &q1) in first.iter().enumerate().skip(lambda as usize) {
                let need = (self.pass_threshold as usize + 1).saturating_sub(n1);
                success += w * q1 * rest.iter().skip(need).sum::<f64>();
            }
        }
        (time, success)
    }
}

/// Cells expected to need more attempts than this get the closed-form mean
/// instead of a Monte Carlo estimate.
pub const MAX_SIMULATED_ATTEMPTS: f64 = 2e6;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResetCell {
    pub theta: u32,
    pub lambda: u32,
    /// Mean time per successful attempt (s); infinite when infeasible.
    pub t_avg: f64,
    pub attempts: u64,
    pub aborts: u64,
    pub feasible: bool,
    /// False when `t_avg` is the closed-form value.
    pub simulated: bool,
}

/// Monte Carlo: draw an attempt, abort after Θ shots when N1 < Λ (cost
/// Θ·t_deer + t_reset), otherwise finish all N_total shots (cost
/// N_total·t_deer); repeat until the target number of successes.
pub fn reset_cell<R: Rng + ?Sized>(problem: &ResetProblem, theta: u32, lambda: u32, rng: &mut R) -> Result<ResetCell> {
    problem.validate()?;
    if theta > problem.k_total {
        return Err(Error::InvalidInput(format!("Θ = {theta} exceeds N_total = {}", problem.k_total)));
    }
    let (_, success) = problem.per_attempt(theta, lambda);
    let cell = |t_avg: f64| ResetCell { theta, lambda, t_avg, attempts: 0, aborts: 0, feasible: t_avg.is_finite(), simulated: false };
    if lambda > theta || !(success > 0.0) {
        return Ok(cell(f64::INFINITY));
    }
    if problem.target_successes as f64 / success > MAX_SIMULATED_ATTEMPTS {
        return Ok(cell(problem.expected_time(theta, lambda)));
    }
    let cum: Vec<f64> = problem
        .mixture
        .components
        .iter()
        .scan(0.0, |acc, &(w, _)| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let (mut time, mut attempts, mut aborts, mut successes) = (0.0, 0u64, 0u64, 0usize);
    while successes < problem.target_successes {
        attempts += 1;
        let u: f64 = rng.random();
        let c = cum.iter().position(|&x| u < x).unwrap_or(cum.len() - 1);
        let p = problem.mixture.components[c].1;
        let n1 = Binomial::new(theta as u64, p).map_err(|e| Error::InvalidInput(e.to_string()))?.sample(rng);
        if n1 < lambda as u64 {
            aborts += 1;
            time += theta as f64 * problem.t_deer + problem.t_reset;
            continue;
        }
        let n2 = Binomial::new((problem.k_total - theta) as u64, p).map_err(|e| Error::InvalidInput(e.to_string()))?.sample(rng);
        time += problem.k_total as f64 * problem.t_deer;
        if n1 + n2 > problem.pass_threshold as u64 {
            successes += 1;
        }
    }
    Ok(ResetCell { theta, lambda, t_avg: time / successes as f64, attempts, aborts, feasible: true, simulated: true })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResetPolicyMap {
    /// Row-major over (Θ, Λ) in the order given.
    pub cells: Vec<ResetCell>,
    pub best: ResetCell,
    /// N_total·t_deer / P(success).
    pub baseline: f64,
    pub gain: f64,
}

impl ResetPolicyMap {
    pub fn cell(&self, theta: u32, lambda: u32) -> Option<&ResetCell> {
        self.cells.iter().find(|c| c.theta == theta && c.lambda == lambda)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,lambda,t_avg_s,attempts,aborts,feasible,simulated\n");
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{:.9e},{},{},{},{}\n",
                c.theta, c.lambda, c.t_avg, c.attempts, c.aborts, c.feasible, c.simulated
            ));
        }
        s
    }
}

/// Picks the cell with the smallest finite ⟨T_avg⟩ (first in grid order on
/// ties).
pub fn best_cell(cells: &[ResetCell]) -> Option<ResetCell> {
    cells.iter().filter(|c| c.feasible).copied().reduce(|a, b| if b.t_avg < a.t_avg { b } else { a })
}

/// Monte Carlo ⟨T_avg⟩ on every (Θ, Λ) cell, each on substream (seed, cell
/// index), evaluated in parallel.
pub fn optimize_reset_policy(problem: &ResetProblem, thetas: &[u32], lambdas: &[u32], seed: u64) -> Result<ResetPolicyMap> {
    problem.validate()?;
    let grid: Vec<(u32, u32)> = thetas.iter().flat_map(|&t| lambdas.iter().map(move |&l| (t, l))).collect();
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty (Θ, Λ) grid".into()));
    }
    let cells = grid
        .par_iter()
        .enumerate()
        .map(|(i, &(t, l))| reset_cell(problem, t, l, &mut substream(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let best = best_cell(&cells).ok_or_else(|| Error::Infeasible("every (Θ, Λ) cell aborts all attempts".into()))?;
    let ps = problem.success_probability();
    if ps <= 0.0 {
        return Err(Error::Infeasible("no attempt can pass the threshold".into()));
    }
    let baseline = problem.k_total as f64 * problem.t_deer / ps;
    Ok(ResetPolicyMap { gain: baseline / best.t_avg, cells, best, baseline })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ResetProblem {
        ResetProblem { target_successes: 300, ..ResetProblem::calibrated() }
    }

    #[test]
    fn no_abort_baseline() {
        let p = ResetProblem::calibrated();
        assert!((p.success_probability() - 0.12).abs() < 1e-4);
        let closed = 420.0 * 684e-6 / p.success_probability();
        assert!((p.expected_time(5, 0) - closed).abs() < 1e-12 * closed);
        let mc = reset_cell(&p, 5, 0, &mut substream(1, 0)).unwrap();
        assert_eq!(mc.aborts, 0);
        assert!((mc.t_avg / closed - 1.0).abs() < 0.1, "{} vs {closed}", mc.t_avg);
    }

    #[test]
    fn lambda_above_theta_is_infeasible() {
        let c = reset_cell(&small(), 5, 6, &mut substream(1, 0)).unwrap();
        assert!(!c.feasible && c.t_avg.is_infinite());
    }

    #[test]
    fn map_is_reproducible_and_matches_serial_recompute() {
        let p = small();
        let (thetas, lambdas) = ([3, 5], [0, 2, 3, 4]);
        let a = optimize_reset_policy(&p, &thetas, &lambdas, 11).unwrap();
        let mut serial = Vec::new();
        for &t in &thetas {
            for &l in &lambdas {
                serial.push(reset_cell(&p, t, l, &mut substream(11, serial.len() as u64)).unwrap());
            }
        }
        assert_eq!(a.cells, serial);
        assert_eq!(Some(a.best), best_cell(&serial));
        assert!(a.gain > 1.0);
    }

    #[test]
    fn rare_cells_use_closed_form() {
        let p = ResetProblem { mixture: ShotMixture::new(vec![(1.0, 0.3)]).unwrap(), pass_threshold: 130, ..small() };
        let c = reset_cell(&p, 15, 15, &mut substream(1, 0)).unwrap();
        assert!(c.feasible && !c.simulated && c.attempts == 0);
        assert_eq!(c.t_avg, p.expected_time(15, 15));
        assert!(reset_cell(&p, 2, 0, &mut substream(1, 0)).unwrap().simulated);
    }
}
