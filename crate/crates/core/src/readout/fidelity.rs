//! Combined initialisation and readout fidelity of heralded preparation,
//! and the two-stage threshold search.

use serde::{Deserialize, Serialize};

use super::record::OutcomePairs;
use crate::error::{Error, Result};

/// Heralding and readout thresholds. A first outcome N > `init_high`
/// heralds the target (N_S1, M_↑), N ≤ `init_low` heralds its complement
/// (N_notS1, M_↓); a second outcome N > `readout` reads the target (N_RO,
/// M_RO).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdPolicy {
    pub k_init: u32,
    pub k_readout: u32,
    pub init_high: u32,
    pub init_low: u32,
    pub readout: u32,
    /// (Θ, Λ): abort when fewer than Λ bright outcomes in the first Θ shots.
    #[serde(default)]
    pub early_abort: Option<(u32, u32)>,
}

impl ThresholdPolicy {
    pub fn new(k_init: u32, k_readout: u32, init_high: u32, init_low: u32, readout: u32) -> Result<Self> {
        let p = Self { k_init, k_readout, init_high, init_low, readout, early_abort: None };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_init == 0 || self.k_readout == 0 {
            return Err(Error::InvalidInput("bin sizes must be ≥ 1".into()));
        }
        if self.init_high > self.k_init || self.init_low > self.k_init || self.readout > self.k_readout {
            return Err(Error::InvalidInput(format!("thresholds outside the bin-size range: {self:?}")));
        }
        if let Some((theta, lambda)) = self.early_abort {
            if theta > self.k_init || lambda > theta {
                return Err(Error::InvalidInput(format!("early-abort pair ({theta}, {lambda}) out of range")));
            }
        }
        Ok(())
    }

    /// `key = value` lines.
    pub fn to_key_value(&self) -> String {
        let mut s = format!(
            "k_init = {}\nk_readout = {}\ninit_high = {}\ninit_low = {}\nreadout = {}\n",
            self.k_init, self.k_readout, self.init_high, self.init_low, self.readout
        );
        if let Some((t, l)) = self.early_abort {
            s.push_str(&format!("abort_theta = {t}\nabort_lambda = {l}\n"));
        }
        s
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMode {
    /// Nitrogen and JT state of a P1 (F_S1, F_notS1).
    State,
    /// P1 electron spin (F_↑, F_↓).
    Spin,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub mode: FidelityMode,
    /// (F_high + F_low)/2.
    pub f: f64,
    /// P(second > readout | first > init_high).
    pub f_high: f64,
    /// P(second ≤ readout | first ≤ init_low).
    pub f_low: f64,
    /// Fraction of pairs passing the high heralding condition.
    pub success_rate: f64,
    pub n_high: f64,
    pub n_low: f64,
    pub stderr: f64,
}

/// Joint histogram of (first, second) outcomes with tail sums for O(1)
/// conditional probabilities. Weights may be fractional.
#[derive(Clone, Debug)]
pub struct PairCounts {
    k1: usize,
    k2: usize,
    /// tail[a][b] = Σ_{a' ≥ a, b' ≥ b} w, sized (k1+2)×(k2+2).
    tail: Vec<f64>,
    /// head[a][b] = Σ_{a' < a, b' < b} w, same shape.
    head: Vec<f64>,
}

impl PairCounts {
    pub fn from_weights(k1: u32, k2: u32, weight: impl Fn(u32, u32) -> f64) -> Self {
        let (k1, k2) = (k1 as usize, k2 as usize);
        let w2 = k2 + 2;
        let w: Vec<f64> = (0..=k1).flat_map(|a| (0..=k2).map(move |b| (a, b))).map(|(a, b)| weight(a as u32, b as u32)).collect();
        let at = |a: usize, b: usize| w[a * (k2 + 1) + b];
        // Separate head and tail sums avoid inclusion-exclusion cancellation
        // when tails are many orders below the total.
        let mut tail = vec![0.0; (k1 + 2) * w2];
        let mut head = vec![0.0; (k1 + 2) * w2];
        for a in (0..=k1).rev() {
            for b in (0..=k2).rev() {
                tail[a * w2 + b] = at(a, b) + tail[(a + 1) * w2 + b] + tail[a * w2 + b + 1] - tail[(a + 1) * w2 + b + 1];
            }
        }
        for a in 1..=k1 + 1 {
            for b in 1..=k2 + 1 {
                head[a * w2 + b] = at(a - 1, b - 1) + head[(a - 1) * w2 + b] + head[a * w2 + b - 1] - head[(a - 1) * w2 + b - 1];
            }
        }
        Self { k1, k2, tail, head }
    }

    pub fn from_pairs(pairs: &OutcomePairs) -> Self {
        let (k1, k2) = (pairs.k_first as usize, pairs.k_second as usize);
        let mut w = vec![0.0; (k1 + 1) * (k2 + 1)];
        for &(a, b) in &pairs.pairs {
            w[a as usize * (k2 + 1) + b as usize] += 1.0;
        }
        Self::from_weights(pairs.k_first, pairs.k_second, |a, b| w[a as usize * (k2 + 1) + b as usize])
    }

    fn t(&self, a: usize, b: usize) -> f64 {
        self.tail[a.min(self.k1 + 1) * (self.k2 + 2) + b.min(self.k2 + 1)]
    }

    pub fn total(&self) -> f64 {
        self.t(0, 0)
    }

    /// Weight with first > a.
    fn first_above(&self, a: u32) -> f64 {
        self.t(a as usize + 1, 0)
    }

    fn both_above(&self, a: u32, b: u32) -> f64 {
        self.t(a as usize + 1, b as usize + 1)
    }

    fn h(&self, a: usize, b: usize) -> f64 {
        self.head[a.min(self.k1 + 1) * (self.k2 + 2) + b.min(self.k2 + 1)]
    }

    /// Weight with first ≤ a.
    fn first_at_most(&self, a: u32) -> f64 {
        self.h(a as usize + 1, self.k2 + 1)
    }

    /// Weight with first ≤ a and second ≤ b.
    fn both_at_most(&self, a: u32, b: u32) -> f64 {
        self.h(a as usize + 1, b as usize + 1)
    }

    pub fn fidelity(&self, policy: &ThresholdPolicy, mode: FidelityMode) -> Result<FidelityReport> {
        policy.validate()?;
        if policy.k_init as usize != self.k1 || policy.k_readout as usize != self.k2 {
            return Err(Error::DimensionMismatch { expected: self.k1, found: policy.k_init as usize });
        }
        let n_high = self.first_above(policy.init_high);
        let n_low = self.first_at_most(policy.init_low);
        if n_high <= 0.0 || n_low <= 0.0 {
            return Err(Error::EmptySample(format!("heralded samples: {n_high} high, {n_low} low")));
        }
        let f_high = self.both_above(policy.init_high, policy.readout) / n_high;
        let f_low = self.both_at_most(policy.init_low, policy.readout) / n_low;
        let stderr = (f_high * (1.0 - f_high) / n_high + f_low * (1.0 - f_low) / n_low).sqrt() / 2.0;
        Ok(FidelityReport {
            mode,
            f: (f_high + f_low) / 2.0,
            f_high,
            f_low,
            success_rate: n_high / self.total(),
            n_high,
            n_low,
            stderr,
        })
    }
}

/// F = (F_high + F_low)/2 with the conditional probabilities counted over
/// consecutive pairs.
pub fn init_readout_fidelity(pairs: &OutcomePairs, policy: &ThresholdPolicy, mode: FidelityMode) -> Result<FidelityReport> {
    if pairs.k_first != policy.k_init || pairs.k_second != policy.k_readout {
        return Err(Error::InvalidInput(format!(
            "record bin sizes ({}, {}) differ from the policy ({}, {})",
            pairs.k_first, pairs.k_second, policy.k_init, policy.k_readout
        )));
    }
    PairCounts::from_pairs(pairs).fidelity(policy, mode)
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSearch {
    /// Minimum success probability relative to heralding at the joint
    /// optimum.
    pub min_relative_success: f64,
    /// Restricts the joint sweep, e.g. to the valley between two peaks.
    pub joint_window: Option<(u32, u32)>,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitPoint {
    pub init_high: u32,
    pub f: f64,
    pub success_rate: f64,
    pub relative_success: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptimization {
    pub policy: ThresholdPolicy,
    pub report: FidelityReport,
    /// Stage 1: (N_sweep, F) with all three thresholds equal.
    pub joint_curve: Vec<(u32, f64)>,
    pub joint_optimum: u32,
    /// Stage 2: stricter heralding threshold at fixed N_opt.
    pub init_curve: Vec<InitPoint>,
    /// False when the best joint F is within 3 standard errors of 0.5.
    pub informative: bool,
}

impl ThresholdOptimization {
    /// Stage-2 points not dominated in (success rate, F), ordered by
    /// decreasing success rate; F increases along the list.
    pub fn pareto_front(&self) -> Vec<InitPoint> {
        let mut pts = self.init_curve.clone();
        pts.sort_by(|a, b| b.success_rate.total_cmp(&a.success_rate).then(b.f.total_cmp(&a.f)));
        let mut front: Vec<InitPoint> = Vec::new();
        for p in pts {
            if front.last().is_none_or(|q| p.f > q.f) {
                front.push(p);
            }
        }
        front
    }
}

/// Two-stage search: all thresholds equal to N_sweep, then a stricter
/// heralding threshold N_S1 ≥ N_opt maximizing F subject to the relative
/// success constraint. Exhaustive over the integer range.
pub fn optimize_thresholds(pairs: &OutcomePairs, search: &ThresholdSearch) -> Result<ThresholdOptimization> {
    if pairs.len() < 1000 {
        return Err(Error::InvalidInput(format!("threshold search needs ≥ 1000 pairs, got {}", pairs.len())));
    }
    optimize_counts(&PairCounts::from_pairs(pairs), pairs.k_first, pairs.k_second, search)
}

pub fn optimize_counts(counts: &PairCounts, k1: u32, k2: u32, search: &ThresholdSearch) -> Result<ThresholdOptimization> {
    if k1 != k2 {
        return Err(Error::InvalidInput("joint sweep needs equal bin sizes".into()));
    }
    if !(search.min_relative_success >= 0.0) {
        return Err(Error::InvalidInput("success constraint must be ≥ 0".into()));
    }
    let (lo, hi) = search.joint_window.unwrap_or((0, k1));
    if lo > hi || hi > k1 {
        return Err(Error::InvalidInput(format!("joint window ({lo}, {hi}) invalid for K = {k1}")));
    }
    let mode = FidelityMode::State;
    let mut joint_curve = Vec::new();
    let mut best: Option<(u32, FidelityReport)> = None;
    for n in lo..=hi {
        let pol = ThresholdPolicy { k_init: k1, k_readout: k2, init_high: n, init_low: n, readout: n, early_abort: None };
        if let Ok(r) = counts.fidelity(&pol, mode) {
            joint_curve.push((n, r.f));
            if best.as_ref().is_none_or(|(_, b)| r.f > b.f) {
                best = Some((n, r));
            }
        }
    }
    let (n_opt, joint_report) =
        best.ok_or_else(|| Error::EmptySample("no threshold with both heralded samples non-empty".into()))?;
    let informative = joint_report.f - 0.5 > 3.0 * joint_report.stderr;

    let base = counts.first_above(n_opt);
    let mut init_curve = Vec::new();
    let mut chosen: Option<(ThresholdPolicy, FidelityReport)> = None;
    for t in n_opt..k1 {
        let pol = ThresholdPolicy { k_init: k1, k_readout: k2, init_high: t, init_low: n_opt, readout: n_opt, early_abort: None };
        let Ok(r) = counts.fidelity(&pol, mode) else { continue };
        let rel = counts.first_above(t) / base;
        init_curve.push(InitPoint { init_high: t, f: r.f, success_rate: r.success_rate, relative_success: rel });
        if rel >= search.min_relative_success && chosen.as_ref().is_none_or(|(_, c)| r.f > c.f) {
            chosen = Some((pol, r));
        }
    }
    let (policy, report) = chosen.ok_or_else(|| {
        Error::Infeasible(format!("no heralding threshold keeps relative success ≥ {}", search.min_relative_success))
    })?;
    Ok(ThresholdOptimization { policy, report, joint_curve, joint_optimum: n_opt, init_curve, informative })
}
