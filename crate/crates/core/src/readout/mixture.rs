//! Gaussian-mixture fit of outcome histograms and FWHM outcome ranges.

use serde::{Deserialize, Serialize};

use super::record::OutcomeRange;
use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, LmOptions};

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    pub amplitude_se: f64,
    pub center_se: f64,
    pub sigma_se: f64,
}

impl GaussianComponent {
    pub fn fwhm(&self) -> f64 {
        FWHM_PER_SIGMA * self.sigma
    }

    /// [center − FWHM/2, center + FWHM/2] rounded inward, clamped to [0, K].
    pub fn fwhm_range(&self, k: u32) -> Result<OutcomeRange> {
        let h = self.fwhm() / 2.0;
        let lo = (self.center - h).ceil().clamp(0.0, k as f64) as u32;
        let hi = (self.center + h).floor().clamp(0.0, k as f64) as u32;
        OutcomeRange::new(lo, hi.max(lo), k)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    pub offset: f64,
    pub offset_se: f64,
    /// Sorted by center.
    pub components: Vec<GaussianComponent>,
    pub ranges: Vec<OutcomeRange>,
    /// Component pairs whose FWHM ranges overlap.
    pub overlapping: Vec<(usize, usize)>,
    /// Components whose amplitude is within 2 standard errors of zero.
    pub unsupported: Vec<usize>,
    pub chi2: f64,
}

/// Integer histogram of outcomes 0..=K.
pub fn outcome_histogram(values: &[u32], k: u32) -> Result<Vec<f64>> {
    let mut h = vec![0.0; k as usize + 1];
    for &v in values {
        if v > k {
            return Err(Error::InvalidInput(format!("outcome {v} exceeds K = {k}")));
        }
        h[v as usize] += 1.0;
    }
    Ok(h)
}

fn smooth(h: &[f64], half: usize) -> Vec<f64> {
    (0..h.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(h.len() - 1);
            h[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

fn binomial_width(center: f64, k: u32) -> f64 {
    let k = k as f64;
    let c = center.clamp(0.5, k - 0.5);
    (c * (1.0 - c / k)).sqrt().max(1.0)
}

fn initial_centers(h: &[f64], k: u32, q: usize) -> Vec<f64> {
    let half = ((k as f64).sqrt() / 4.0).round().max(1.0) as usize;
    let s = smooth(h, half);
    let mut maxima: Vec<usize> = (0..s.len())
        .filter(|&i| s[i] > 0.0 && (i == 0 || s[i] >= s[i - 1]) && (i + 1 == s.len() || s[i] > s[i + 1]))
        .collect();
    maxima.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut chosen: Vec<f64> = Vec::new();
    for m in maxima {
        let c = m as f64;
        if chosen.iter().all(|&x| (x - c).abs() >= binomial_width(c, k)) {
            chosen.push(c);
        }
        if chosen.len() == q {
            break;
        }
    }
    // Fall back on quantiles of the data for missing components.
    let total: f64 = h.iter().sum();
    let mut j = 0;
    while chosen.len() < q {
        let target = total * (j as f64 + 0.5) / q as f64;
        let mut acc = 0.0;
        let c = h.iter().position(|&v| {
            acc += v;
            acc >= target
        });
        let c = c.unwrap_or(0) as f64 + 0.25 * j as f64;
        chosen.push(c);
        j += 1;
    }
    chosen.sort_by(f64::total_cmp);
    chosen
}

/// Least-squares fit of f(N) = O + Σ_q A_q·exp(−(N − N_q)²/2σ_q²) to the
/// outcome histogram, Poisson-weighted, with FWHM ranges per component.
pub fn fit_histogram_mixture(values: &[u32], k: u32, q_tot: usize) -> Result<MixtureFit> {
    if q_tot == 0 {
        return Err(Error::InvalidInput("need at least one component".into()));
    }
    if values.is_empty() {
        return Err(Error::EmptySample("no outcomes to histogram".into()));
    }
    let h = outcome_histogram(values, k)?;
    let n_par = 1 + 3 * q_tot;
    if h.len() < n_par + 2 {
        return Err(Error::Underdetermined { needed: n_par + 2, got: h.len() });
    }
    let centers = initial_centers(&h, k, q_tot);
    let half = ((k as f64).sqrt() / 4.0).round().max(1.0) as usize;
    let s = smooth(&h, half);
    let mut p0 = vec![s.iter().copied().fold(f64::INFINITY, f64::min).max(0.0)];
    for &c in &centers {
        p0.extend([s[c.round() as usize].max(1.0), c, binomial_width(c, k)]);
    }
    let weights: Vec<f64> = h.iter().map(|&c| 1.0 / c.max(1.0).sqrt()).collect();
    let model = |p: &[f64], x: f64| {
        let mut y = p[0];
        for q in 0..q_tot {
            let (a, c, w) = (p[1 + 3 * q], p[2 + 3 * q], p[3 + 3 * q]);
            y += a * (-(x - c).powi(2) / (2.0 * w * w)).exp();
        }
        y
    };
    let residuals = |p: &[f64]| -> Result<Vec<f64>> {
        Ok(h.iter().enumerate().map(|(x, &y)| (model(p, x as f64) - y) * weights[x]).collect())
    };
    let opts = LmOptions { scale_covariance: false, ..LmOptions::default() };
    let fit = levenberg_marquardt(residuals, &p0, &opts)?;
    let se = fit.std_errors();
    let mut comps: Vec<GaussianComponent> = (0..q_tot)
        .map(|q| GaussianComponent {
            amplitude: fit.params[1 + 3 * q],
            center: fit.params[2 + 3 * q],
            sigma: fit.params[3 + 3 * q].abs(),
            amplitude_se: se[1 + 3 * q],
            center_se: se[2 + 3 * q],
            sigma_se: se[3 + 3 * q],
        })
        .collect();
    if comps.iter().any(|c| !(c.center.is_finite() && c.sigma > 0.0 && c.sigma.is_finite())) {
        return Err(Error::NonConvergence { iterations: fit.iterations, reason: "degenerate component".into() });
    }
    comps.sort_by(|a, b| a.center.total_cmp(&b.center));
    let ranges = comps.iter().map(|c| c.fwhm_range(k)).collect::<Result<Vec<_>>>()?;
    let mut overlapping = Vec::new();
    for a in 0..q_tot {
        for b in a + 1..q_tot {
            if ranges[a].max >= ranges[b].min && ranges[b].max >= ranges[a].min {
                overlapping.push((a, b));
            }
        }
    }
    let unsupported = (0..q_tot).filter(|&q| comps[q].amplitude.abs() <= 2.0 * comps[q].amplitude_se).collect();
    Ok(MixtureFit { offset: fit.params[0], offset_se: se[0], components: comps, ranges, overlapping, unsupported, chi2: fit.chi2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Binomial, Distribution};

    fn draws(k: u64, p: f64, n: usize, seed: u64) -> Vec<u32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Binomial::new(k, p).unwrap();
        (0..n).map(|_| b.sample(&mut rng) as u32).collect()
    }

    #[test]
    fn single_peak_mean() {
        let v = draws(820, 0.4, 20_000, 1);
        let fit = fit_histogram_mixture(&v, 820, 1).unwrap();
        let mean = v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64;
        let c = &fit.components[0];
        assert!((c.center - mean).abs() < 3.0 * c.center_se.max(0.1), "{} vs {mean}", c.center);
        assert!((c.sigma - (820.0f64 * 0.24).sqrt()).abs() < 1.0);
        assert!(fit.overlapping.is_empty() && fit.unsupported.is_empty());
    }

    #[test]
    fn two_peaks_within_one_count() {
        let mut v = draws(820, 200.0 / 820.0, 30_000, 2);
        v.extend(draws(820, 510.0 / 820.0, 6_000, 3));
        let fit = fit_histogram_mixture(&v, 820, 2).unwrap();
        assert!((fit.components[0].center - 200.0).abs() < 1.0);
        assert!((fit.components[1].center - 510.0).abs() < 1.0);
        let r = fit.ranges[1];
        let half = fit.components[1].fwhm() / 2.0;
        assert!((r.min as f64 - (510.0 - half)).abs() < 1.5 && (r.max as f64 - (510.0 + half)).abs() < 1.5);
    }

    #[test]
    fn overlap_flagged() {
        let mut v = draws(400, 0.50, 10_000, 4);
        v.extend(draws(400, 0.52, 10_000, 5));
        // Unresolved peaks: either the two ranges overlap or one component
        // collapses.
        if let Ok(fit) = fit_histogram_mixture(&v, 400, 2) {
            assert!(!fit.overlapping.is_empty() || !fit.unsupported.is_empty());
        }
    }

    #[test]
    fn zero_components_rejected() {
        assert!(matches!(fit_histogram_mixture(&[1, 2], 10, 0), Err(Error::InvalidInput(_))));
        assert!(fit_histogram_mixture(&[11], 10, 1).is_err());
    }
}
