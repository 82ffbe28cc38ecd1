//! Cross-correlation of consecutive measurements on two target states and
//! the spin-count relation C = (n−1)/n · 1/(1−p).

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::record::{OutcomePairs, RegionSpec};
use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub c: f64,
    pub stderr: f64,
    pub n_pairs: usize,
    /// Pairs with the first outcome in range.
    pub n_first: usize,
    /// Pairs with the second outcome in range.
    pub n_second: usize,
    pub n_both: usize,
}

/// Binomial standard error with the Jeffreys-smoothed proportion, so that
/// empty and full cells keep a non-zero error.
fn binomial_se(hits: usize, trials: usize) -> f64 {
    let p = (hits as f64 + 0.5) / (trials as f64 + 1.0);
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// C = P(second ∈ B | first ∈ A) / P(second ∈ B), pairs ordered as
/// (first target, second target). Error by propagation of the two
/// binomial proportions.
pub fn correlation_c(pairs: &OutcomePairs, region: &RegionSpec) -> Result<CorrelationEstimate> {
    let n = pairs.len();
    let (mut nf, mut ns, mut nb) = (0, 0, 0);
    for &(a, b) in &pairs.pairs {
        let (fa, sb) = (region.first.contains(a), region.second.contains(b));
        nf += fa as usize;
        ns += sb as usize;
        nb += (fa && sb) as usize;
    }
    if nf == 0 || ns == 0 {
        return Err(Error::EmptySample(format!(
            "region {:?} has no support ({nf} first, {ns} second of {n} pairs)",
            region.index
        )));
    }
    let pc = nb as f64 / nf as f64;
    let pm = ns as f64 / n as f64;
    let (sc, sm) = (binomial_se(nb, nf), binomial_se(ns, n));
    let c = pc / pm;
    let stderr = ((sc / pm).powi(2) + (pc * sm / (pm * pm)).powi(2)).sqrt();
    Ok(CorrelationEstimate { c, stderr, n_pairs: n, n_first: nf, n_second: ns, n_both: nb })
}

/// (n−1)/n · 1/(1−p) for n signal-generating spins with state probability p.
pub fn expected_c(n: u32, p: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("spin count must be ≥ 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!("state probability must lie in (0, 1), got {p}")));
    }
    Ok((n as f64 - 1.0) / n as f64 / (1.0 - p))
}

/// Exact rational form of `expected_c` with p = 1/n_states.
pub fn expected_c_exact(n: u32, n_states: u32) -> Ratio<i128> {
    let p = Ratio::new(1, n_states as i128);
    Ratio::new(n as i128 - 1, n as i128) / (Ratio::from_integer(1) - p)
}

/// How the bath changes between the two measurements of a pair.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKernel {
    /// Same configuration for both measurements.
    Static,
    /// The heralded spin keeps its state, every other spin is redrawn.
    RedrawOthers,
}

/// Exhaustive enumeration over all n_states^k equally likely state
/// assignments of k spins, the first `n` of which generate signal. A
/// region event is "exactly one spin in the state, and it is a signal
/// spin". Returns C exactly.
pub fn enumerate_c(k: u32, n: u32, n_states: u32, kernel: PairKernel) -> Result<Ratio<i128>> {
    if n == 0 || n > k || k > 6 || n_states < 3 {
        return Err(Error::InvalidInput(format!("need 1 ≤ n ≤ k ≤ 6 and ≥ 3 states (k = {k}, n = {n})")));
    }
    const FIRST: u32 = 0;
    const SECOND: u32 = 1;
    let total = (n_states as u64).pow(k);
    let decode = |mut idx: u64| -> Vec<u32> {
        (0..k)
            .map(|_| {
                let s = (idx % n_states as u64) as u32;
                idx /= n_states as u64;
                s
            })
            .collect()
    };
    // Index of the lone spin in `state`, if it is the only one there.
    let lone = |cfg: &[u32], state: u32| -> Option<usize> {
        let mut it = cfg.iter().enumerate().filter(|(_, &s)| s == state);
        let first = it.next()?;
        it.next().is_none().then_some(first.0)
    };
    let signal = |cfg: &[u32], state: u32| lone(cfg, state).is_some_and(|i| (i as u32) < n);

    let mut n_first = 0u64;
    let mut n_second = 0u64;
    let mut n_both = 0u64;
    for idx in 0..total {
        let x = decode(idx);
        n_second += signal(&x, SECOND) as u64;
        if signal(&x, FIRST) {
            n_first += 1;
            if kernel == PairKernel::Static && signal(&x, SECOND) {
                n_both += 1;
            }
        }
    }
    let p_first = Ratio::new(n_first as i128, total as i128);
    let p_second = Ratio::new(n_second as i128, total as i128);
    let p_cond = match kernel {
        PairKernel::Static => Ratio::new(n_both as i128, n_first as i128),
        PairKernel::RedrawOthers => {
            // For each heralded spin h, enumerate the redrawn others.
            let others = (n_states as u64).pow(k - 1);
            let mut acc = Ratio::from_integer(0);
            for h in 0..n as usize {
                let mut hits = 0u64;
                for idx in 0..others {
                    let mut y = decode(idx);
                    y.truncate(k as usize - 1);
                    y.insert(h, FIRST);
                    hits += signal(&y, SECOND) as u64;
                }
                // Each heralded spin is equally likely given the first event.
                acc += Ratio::new(hits as i128, others as i128) / Ratio::from_integer(n as i128);
            }
            acc
        }
    };
    if p_first == Ratio::from_integer(0) || p_second == Ratio::from_integer(0) {
        return Err(Error::EmptySample("region event has zero probability".into()));
    }
    Ok(p_cond / p_second)
}

/// Closed form of the static enumeration:
/// (n−1)/n · (1−2p)^{k−2} / (1−p)^{2k−2}.
pub fn static_c(k: u32, n: u32, p: f64) -> Result<f64> {
    expected_c(n, p)?;
    if k < n || k < 1 {
        return Err(Error::InvalidInput("need k ≥ n".into()));
    }
    if n == 1 {
        return Ok(0.0);
    }
    Ok((n as f64 - 1.0) / n as f64 * (1.0 - 2.0 * p).powi(k as i32 - 2) / (1.0 - p).powi(2 * k as i32 - 2))
}
