//! Markov jump models for repeated DEER and DEER(y) outcomes.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::{Bin, MeasurementRecord, OutcomePairs};
use crate::bath::substream;
use crate::error::{Error, Result};

/// Number of |m_I, i⟩ states of one P1 (3 nitrogen × 4 JT axes).
pub const P1_STATES: usize = 12;

/// Label of state index `s`: m_I-major over axes A–D ("+1D", "0A", ...),
/// index 12 is the dark charge state.
pub fn state_label(s: usize) -> Result<String> {
    if s == P1_STATES {
        return Ok("dark".into());
    }
    if s > P1_STATES {
        return Err(Error::InvalidInput(format!("state index {s} out of range")));
    }
    let m = ["+1", "0", "-1"][s / 4];
    let axis = ["A", "B", "C", "D"][s % 4];
    Ok(format!("{m}{axis}"))
}

pub fn state_index(label: &str) -> Result<usize> {
    (0..=P1_STATES)
        .find(|&s| state_label(s).map(|l| l == label.trim()).unwrap_or(false))
        .ok_or_else(|| Error::UnknownLabel(format!("P1 state {label:?}")))
}

/// Linear map from the NV m_s = 0 probability q after one DEER shot to the
/// probability of a bright outcome: floor + (ceiling − floor)·q.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HitCalibration {
    pub floor: f64,
    pub ceiling: f64,
}

impl HitCalibration {
    pub fn validate(&self) -> Result<()> {
        for v in [self.floor, self.ceiling] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("hit probability {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn map(&self, q: f64) -> f64 {
        self.floor + (self.ceiling - self.floor) * q
    }
}

/// A resolved P1 with its effective coupling ν (rad/s) for each targeted
/// state in the model's target cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackedP1 {
    pub label: String,
    pub nu: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceModel {
    /// States per P1: 12, or 13 with a dark charge state.
    pub n_states: usize,
    /// Targeted state for each bin, cycled.
    pub targets: Vec<usize>,
    pub p1s: Vec<TrackedP1>,
    /// DEER free-evolution time τ (s).
    pub tau: f64,
    pub hit: HitCalibration,
    /// Per-shot probability-rate with which a P1 is redrawn from `occupancy`.
    pub refresh_rate: f64,
    /// Stationary state distribution of each P1.
    pub occupancy: Vec<f64>,
    /// Shots per bin (K or L).
    pub bin_size: u32,
    /// Redraw every P1 before each bin whose index is a multiple of this.
    pub reset_every: Option<usize>,
}

/// Per-shot hit probability mixture over static configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotMixture {
    /// (weight, hit probability); weights sum to 1.
    pub components: Vec<(f64, f64)>,
}

impl ShotMixture {
    pub fn new(components: Vec<(f64, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("mixture needs at least one component".into()));
        }
        let mut total = 0.0;
        for &(w, p) in &components {
            if !(w >= 0.0 && (0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidInput(format!("component ({w}, {p}) out of range")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("mixture weights sum to {total}")));
        }
        Ok(Self { components })
    }

    /// Exact P(N = n) for `k` shots.
    pub fn pmf(&self, k: u32) -> Vec<f64> {
        let mut out = vec![0.0; k as usize + 1];
        for &(w, p) in &self.components {
            for (n, v) in binomial_pmf(k, p).into_iter().enumerate() {
                out[n] += w * v;
            }
        }
        out
    }
}

/// Binomial(k, p) probabilities by the multiplicative recurrence in log space.
pub fn binomial_pmf(k: u32, p: f64) -> Vec<f64> {
    let k = k as usize;
    if p <= 0.0 || p >= 1.0 {
        let mut v = vec![0.0; k + 1];
        v[if p <= 0.0 { 0 } else { k }] = 1.0;
        return v;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut lchoose = 0.0;
    let mut out = Vec::with_capacity(k + 1);
    for n in 0..=k {
        if n > 0 {
            lchoose += ((k - n + 1) as f64).ln() - (n as f64).ln();
        }
        out.push((lchoose + n as f64 * lp + (k - n) as f64 * lq).exp());
    }
    out
}

impl TraceModel {
    /// Calibrated to the repeated-DEER histogram on |+1,D⟩ with K = 820:
    /// S1, S2 and S3/S4 at ν/2π = 1.910, 1.563, 1.012 kHz, baseline peak at
    /// 200 counts, S1 at 510 and S2 at 445, and a 1/e survival of the
    /// targeted state of 19 bins.
    pub fn calibrated() -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        let p1 = |label: &str, khz: f64| TrackedP1 { label: label.into(), nu: vec![two_pi * khz * 1e3] };
        Self {
            n_states: P1_STATES,
            targets: vec![3],
            p1s: vec![p1("S1", 1.910), p1("S2", 1.563), p1("S3/S4", 1.012)],
            tau: 196.09e-6,
            hit: HitCalibration { floor: 200.0 / 820.0, ceiling: 0.68736 },
            refresh_rate: 1.0 / (19.0 * 820.0),
            occupancy: vec![1.0 / P1_STATES as f64; P1_STATES],
            bin_size: 820,
            reset_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=P1_STATES + 1).contains(&self.n_states) {
            return Err(Error::InvalidInput(format!("unsupported state count {}", self.n_states)));
        }
        if self.occupancy.len() != self.n_states {
            return Err(Error::DimensionMismatch { expected: self.n_states, found: self.occupancy.len() });
        }
        if self.occupancy.iter().any(|&w| !(w >= 0.0)) || (self.occupancy.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("occupancy must be a probability distribution".into()));
        }
        if self.targets.is_empty() || self.targets.iter().any(|&t| t >= self.n_states) {
            return Err(Error::InvalidInput("targets must be non-empty valid state indices".into()));
        }
        if self.p1s.iter().any(|p| p.nu.len() != self.targets.len()) {
            return Err(Error::InvalidInput("each tracked P1 needs one coupling per target".into()));
        }
        if !(self.refresh_rate >= 0.0 && self.refresh_rate.is_finite()) {
            return Err(Error::InvalidInput("refresh rate must be ≥ 0".into()));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) || self.bin_size == 0 {
            return Err(Error::InvalidInput("τ must be ≥ 0 and the bin size ≥ 1".into()));
        }
        if self.reset_every == Some(0) {
            return Err(Error::InvalidInput("reset period must be ≥ 1".into()));
        }
        self.hit.validate()
    }

    /// Mean residence time (shots) in state `s`.
    pub fn mean_dwell(&self, s: usize) -> f64 {
        let leave = self.refresh_rate * (1.0 - self.occupancy[s]);
        if leave > 0.0 { 1.0 / leave } else { f64::INFINITY }
    }

    /// Hit probability for target slot `slot` when the P1s flagged in
    /// `in_target` sit in the targeted state. Several P1s add their phases
    /// with signs set by their (averaged) electron spins.
    pub fn hit_probability(&self, slot: usize, in_target: &[bool]) -> f64 {
        let phases: Vec<f64> = self
            .p1s
            .iter()
            .zip(in_target)
            .filter(|(_, &on)| on)
            .map(|(p, _)| p.nu[slot] * self.tau)
            .collect();
        let q = if phases.is_empty() {
            0.0
        } else {
            let m = phases.len();
            let patterns = 1usize << (m - 1);
            let mut acc = 0.0;
            for bits in 0..patterns {
                let mut phi = phases[0];
                for (j, ph) in phases.iter().enumerate().skip(1) {
                    phi += if bits >> (j - 1) & 1 == 1 { -ph } else { *ph };
                }
                acc += (1.0 - phi.cos()) / 2.0;
            }
            acc / patterns as f64
        };
        self.hit.map(q)
    }

    /// Stationary configuration mixture seen by target slot `slot`.
    pub fn configuration_mixture(&self, slot: usize) -> Result<ShotMixture> {
        self.validate()?;
        let p = self.occupancy[self.targets[slot]];
        let m = self.p1s.len();
        let mut comps = Vec::with_capacity(1 << m);
        for mask in 0..(1usize << m) {
            let on: Vec<bool> = (0..m).map(|j| mask >> j & 1 == 1).collect();
            let k = on.iter().filter(|&&b| b).count() as i32;
            let w = p.powi(k) * (1.0 - p).powi(m as i32 - k);
            comps.push((w, self.hit_probability(slot, &on)));
        }
        ShotMixture::new(comps)
    }

    fn draw_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (s, &w) in self.occupancy.iter().enumerate() {
            acc += w;
            if u < acc {
                return s;
            }
        }
        self.n_states - 1
    }

    fn draw_wait<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let p = -(-self.refresh_rate).exp_m1();
        if p <= 0.0 {
            return u64::MAX;
        }
        if p >= 1.0 {
            return 1;
        }
        Geometric::new(p).expect("probability in (0, 1)").sample(rng).saturating_add(1)
    }
}

/// Runs the jump process shot by shot (in constant-configuration segments)
/// and bins the bright outcomes by K. Bins cycle through the model targets.
pub fn simulate_timetrace<R: Rng + ?Sized>(model: &TraceModel, n_bins: usize, rng: &mut R) -> Result<MeasurementRecord> {
    simulate_from(model, n_bins, None, rng)
}

/// As `simulate_timetrace`, with every P1 starting in `initial` (state
/// indices per P1) instead of the stationary draw.
pub fn simulate_from<R: Rng + ?Sized>(
    model: &TraceModel,
    n_bins: usize,
    initial: Option<&[usize]>,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    model.validate()?;
    let m = model.p1s.len();
    let mut states: Vec<usize> = match initial {
        Some(s) if s.len() == m && s.iter().all(|&x| x < model.n_states) => s.to_vec(),
        Some(s) => return Err(Error::DimensionMismatch { expected: m, found: s.len() }),
        None => (0..m).map(|_| model.draw_state(rng)).collect(),
    };
    let mut wait: Vec<u64> = (0..m).map(|_| model.draw_wait(rng)).collect();
    let mut bins = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        if let Some(period) = model.reset_every {
            if b % period == 0 && !(b == 0 && initial.is_some()) {
                for j in 0..m {
                    states[j] = model.draw_state(rng);
                    wait[j] = model.draw_wait(rng);
                }
            }
        }
        let slot = b % model.targets.len();
        let target = model.targets[slot];
        let mut left = model.bin_size as u64;
        let mut n = 0u64;
        while left > 0 {
            let seg = wait.iter().copied().min().unwrap_or(u64::MAX).min(left);
            let on: Vec<bool> = states.iter().map(|&s| s == target).collect();
            let p = model.hit_probability(slot, &on);
            n += Binomial::new(seg, p).map_err(|e| Error::InvalidInput(e.to_string()))?.sample(rng);
            left -= seg;
            for j in 0..m {
                if wait[j] != u64::MAX {
                    wait[j] -= seg;
                }
                if wait[j] == 0 {
                    states[j] = model.draw_state(rng);
                    wait[j] = model.draw_wait(rng);
                }
            }
        }
        bins.push(Bin { index: b as u64, n: n as u32, k: model.bin_size });
    }
    MeasurementRecord::new(bins, state_label(model.targets[0]).ok())
}

/// Independent traces on substreams (seed, i), simulated in parallel.
pub fn simulate_traces(model: &TraceModel, n_traces: usize, n_bins: usize, seed: u64) -> Result<Vec<MeasurementRecord>> {
    (0..n_traces)
        .into_par_iter()
        .map(|i| simulate_timetrace(model, n_bins, &mut substream(seed, i as u64)))
        .collect()
}

/// DEER(y) electron readout: bright probabilities for ↑ and ↓, and a
/// per-shot spin flip probability from the measurement back-action.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinReadoutModel {
    pub p_bright_up: f64,
    pub p_bright_down: f64,
    pub flip_per_shot: f64,
    /// Probability of ↑ at the start of each pair.
    pub p_up: f64,
}

impl SpinReadoutModel {
    /// Flip probability whose polarization decays to 1/e after `reps` shots.
    pub fn flip_for_decay(reps: f64) -> f64 {
        -(-1.0 / reps).exp_m1() / 2.0
    }

    /// Calibrated to the S1 electron readout: 1/e polarization lifetime of
    /// 250 repetitions, bright probabilities 0.70 (↑) and 0.20 (↓).
    pub fn calibrated() -> Self {
        Self { p_bright_up: 0.70, p_bright_down: 0.20, flip_per_shot: Self::flip_for_decay(250.0), p_up: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.p_bright_up, self.p_bright_down, self.flip_per_shot, self.p_up] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("probability {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn run<R: Rng + ?Sized>(&self, up: &mut bool, shots: u32, rng: &mut R) -> u32 {
        let mut n = 0;
        for _ in 0..shots {
            let p = if *up { self.p_bright_up } else { self.p_bright_down };
            if rng.random::<f64>() < p {
                n += 1;
            }
            if rng.random::<f64>() < self.flip_per_shot {
                *up = !*up;
            }
        }
        n
    }

    /// Pairs (M(k), M(k+1)) with bin sizes `l_first` and `l_second`, each
    /// pair from a fresh electron state.
    pub fn simulate_pairs<R: Rng + ?Sized>(&self, l_first: u32, l_second: u32, n_pairs: usize, rng: &mut R) -> Result<OutcomePairs> {
        self.validate()?;
        if l_first == 0 || l_second == 0 {
            return Err(Error::InvalidInput("bin sizes must be ≥ 1".into()));
        }
        let pairs = (0..n_pairs)
            .map(|_| {
                let mut up = rng.random::<f64>() < self.p_up;
                let a = self.run(&mut up, l_first, rng);
                let b = self.run(&mut up, l_second, rng);
                (a, b)
            })
            .collect();
        OutcomePairs::new(l_first, l_second, pairs)
    }
}
