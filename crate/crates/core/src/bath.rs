//! Monte Carlo P1 bath: random placement, T2*, concentration sweeps,
//! coupling order statistics and JT-dependent coupling maps.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{rad_to_khz, PhysicalConstants};
use crate::error::{Error, Result};
use crate::spin::coupling::coupling_for;
use crate::spin::geometry::{DefectGeometry, FieldVector, JtAxis};
use crate::spin::hamiltonian::P1Params;

/// Default minimum NV–P1 distance; closer draws are resampled.
pub const DEFAULT_CUTOFF_NM: f64 = 1.0;

/// Radius (nm) of the sphere holding `n_d` defects at `concentration_ppb`,
/// from V = N_d·a₀³/(8·C).
pub fn sphere_radius(consts: &PhysicalConstants, n_d: usize, concentration_ppb: f64) -> Result<f64> {
    if n_d == 0 {
        return Err(Error::InvalidInput("need at least one defect".into()));
    }
    if !(concentration_ppb > 0.0 && concentration_ppb.is_finite()) {
        return Err(Error::InvalidInput(format!("concentration must be > 0, got {concentration_ppb}")));
    }
    let v_unit = consts.lattice_constant_nm().powi(3);
    let v_tot = n_d as f64 * v_unit / (concentration_ppb * 1e-9 * 8.0);
    Ok((3.0 * v_tot / (4.0 * PI)).cbrt())
}

/// Defect positions (r nm, θ, φ radians) and secular couplings
/// b_k = ν_dip(r)(1 − 3cos²θ), rad/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathConfiguration {
    pub radius_nm: f64,
    pub positions: Vec<[f64; 3]>,
    pub couplings: Vec<f64>,
}

impl BathConfiguration {
    pub fn from_positions(consts: &PhysicalConstants, radius_nm: f64, positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.iter().any(|p| !(p[0] > 0.0) || !p.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidInput("positions need r > 0 and finite angles".into()));
        }
        let couplings = positions.iter().map(|p| secular_b(consts, p[0], p[1])).collect();
        Ok(Self { radius_nm, positions, couplings })
    }
}

fn secular_b(consts: &PhysicalConstants, r_nm: f64, theta: f64) -> f64 {
    let c = theta.cos();
    consts.nu_dip(r_nm) * (1.0 - 3.0 * c * c)
}

/// Uniform placement in the sphere; draws with r < cutoff are redrawn.
pub fn sample_bath<R: Rng + ?Sized>(
    consts: &PhysicalConstants,
    n_d: usize,
    concentration_ppb: f64,
    cutoff_nm: f64,
    rng: &mut R,
) -> Result<BathConfiguration> {
    let radius = sphere_radius(consts, n_d, concentration_ppb)?;
    if !(cutoff_nm >= 0.0 && cutoff_nm < radius) {
        return Err(Error::InvalidInput(format!("cutoff {cutoff_nm} nm must lie in [0, R = {radius:.3} nm)")));
    }
    let mut positions = Vec::with_capacity(n_d);
    let mut couplings = Vec::with_capacity(n_d);
    while positions.len() < n_d {
        let r = radius * rng.random::<f64>().cbrt();
        let cos_t: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let phi = 2.0 * PI * rng.random::<f64>();
        if r < cutoff_nm || r == 0.0 {
            continue;
        }
        let theta = cos_t.clamp(-1.0, 1.0).acos();
        couplings.push(secular_b(consts, r, theta));
        positions.push([r, theta, phi]);
    }
    Ok(BathConfiguration { radius_nm: radius, positions, couplings })
}

/// T2* = √2 / (½√Σb²), seconds.
pub fn t2_star(couplings: &[f64]) -> Result<f64> {
    let s: f64 = couplings.iter().map(|b| b * b).sum();
    if !(s > 0.0) {
        return Err(Error::InvalidInput("T2* undefined: no nonzero coupling".into()));
    }
    Ok(2f64.sqrt() / (0.5 * s.sqrt()))
}

/// Per-configuration generator: stream `stream`, seeded by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    pub n_d: usize,
    pub samples: usize,
    pub cutoff_nm: f64,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { n_d: 40, samples: 10_000, cutoff_nm: DEFAULT_CUTOFF_NM, seed: 0 }
    }
}

/// 1/⟨T2*⟩ against concentration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSweep {
    pub concentrations_ppb: Vec<f64>,
    pub inv_t2star_khz: Vec<f64>,
    pub stderr_khz: Vec<f64>,
    pub samples: usize,
}

impl ConcentrationSweep {
    /// `concentration_ppb,inv_t2star_khz,stderr_khz` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("concentration_ppb,inv_t2star_khz,stderr_khz\n");
        for i in 0..self.concentrations_ppb.len() {
            s.push_str(&format!(
                "{},{:.9e},{:.9e}\n",
                self.concentrations_ppb[i], self.inv_t2star_khz[i], self.stderr_khz[i]
            ));
        }
        s
    }
}

/// Mean and standard error of T2* (s) over `samples` configurations.
/// Configuration k uses stream (index << 32) | k, so results do not depend
/// on the worker count.
pub fn t2_star_statistics(consts: &PhysicalConstants, concentration_ppb: f64, index: u64, opts: &SweepOptions) -> Result<(f64, f64)> {
    if opts.samples < 2 {
        return Err(Error::Underdetermined { needed: 2, got: opts.samples });
    }
    let values: Vec<f64> = (0..opts.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(opts.seed, (index << 32) | k as u64);
            let b = sample_bath(consts, opts.n_d, concentration_ppb, opts.cutoff_nm, &mut rng)?;
            t2_star(&b.couplings)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

pub fn concentration_sweep(consts: &PhysicalConstants, concentrations_ppb: &[f64], opts: &SweepOptions) -> Result<ConcentrationSweep> {
    if concentrations_ppb.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("concentrations must be strictly ascending".into()));
    }
    let mut inv = Vec::with_capacity(concentrations_ppb.len());
    let mut se = Vec::with_capacity(concentrations_ppb.len());
    for (i, &c) in concentrations_ppb.iter().enumerate() {
        let (mean, err) = t2_star_statistics(consts, c, i as u64, opts)?;
        // 1/⟨T2*⟩ in kHz, error by the delta method
        inv.push(1e-3 / mean);
        se.push(1e-3 * err / (mean * mean));
    }
    Ok(ConcentrationSweep {
        concentrations_ppb: concentrations_ppb.to_vec(),
        inv_t2star_khz: inv,
        stderr_khz: se,
        samples: opts.samples,
    })
}

/// Ordinary least squares y = a + b·x; returns (a, b, R²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
    }
    if x.len() < 3 {
        return Err(Error::Underdetermined { needed: 3, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Unidentifiable("slope: all x equal".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok((a, b, r2))
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    FreedmanDiaconis,
    Fixed(usize),
}

/// Densities integrate to 1 over the bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn build(values: &[f64], binning: Binning) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample("histogram of no values".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (lo, hi) = (v[0], v[v.len() - 1]);
        let bins = match binning {
            Binning::Fixed(0) => return Err(Error::InvalidInput("bin count must be positive".into())),
            Binning::Fixed(n) => n,
            Binning::FreedmanDiaconis => {
                let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
                let iqr = q(0.75) - q(0.25);
                let w = 2.0 * iqr / (v.len() as f64).cbrt();
                if w > 0.0 && hi > lo {
                    (((hi - lo) / w).ceil() as usize).clamp(1, 10_000)
                } else {
                    1
                }
            }
        };
        let span = if hi > lo { hi - lo } else { 1.0 };
        let width = span / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0usize; bins];
        for &x in &v {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let n = v.len() as f64;
        let density = counts.iter().map(|&c| c as f64 / (n * width)).collect();
        Ok(Self { edges, density })
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().zip(self.edges.windows(2)).map(|(d, e)| d * (e[1] - e[0])).sum()
    }

    /// Density of the bin containing `x`, 0 outside.
    pub fn density_at(&self, x: f64) -> f64 {
        self.edges
            .windows(2)
            .zip(&self.density)
            .find(|(e, _)| x >= e[0] && x <= e[1])
            .map_or(0.0, |(_, d)| *d)
    }

    /// `bin_left,bin_right,density` rows with a header; `unit` names the
    /// value axis.
    pub fn to_csv(&self, unit: &str) -> String {
        let mut s = format!("bin_left_{unit},bin_right_{unit},density_per_{unit}\n");
        for (e, d) in self.edges.windows(2).zip(&self.density) {
            s.push_str(&format!("{:.9e},{:.9e},{:.9e}\n", e[0], e[1], d));
        }
        s
    }
}

/// |b_k|/2π (kHz) for the four most strongly coupled spins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingDistributions {
    /// samples[k] holds rank k+1 values for the retained configurations.
    pub samples: Vec<Vec<f64>>,
    pub histograms: Vec<Histogram>,
    pub accepted: usize,
    pub drawn: usize,
}

impl CouplingDistributions {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.drawn as f64
    }
}

/// Draws `opts.samples` configurations and keeps those with 1/T2* (kHz)
/// inside `window`, if given.
pub fn coupling_distributions(
    consts: &PhysicalConstants,
    concentration_ppb: f64,
    ranks: usize,
    window_khz: Option<(f64, f64)>,
    binning: Binning,
    opts: &SweepOptions,
) -> Result<CouplingDistributions> {
    if ranks == 0 || ranks > opts.n_d {
        return Err(Error::InvalidInput(format!("ranks must be in 1..={}", opts.n_d)));
    }
    let rows: Vec<Option<Vec<f64>>> = (0..opts.samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(opts.seed, k as u64);
            let b = sample_bath(consts, opts.n_d, concentration_ppb, opts.cutoff_nm, &mut rng)?;
            let inv_khz = 1e-3 / t2_star(&b.couplings)?;
            if let Some((lo, hi)) = window_khz {
                if !(inv_khz >= lo && inv_khz <= hi) {
                    return Ok(None);
                }
            }
            let mut mags: Vec<f64> = b.couplings.iter().map(|x| rad_to_khz(x.abs())).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            mags.truncate(ranks);
            Ok(Some(mags))
        })
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<Vec<f64>> = rows.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::EmptySample(format!(
            "no configuration out of {} passed the 1/T2* window {window_khz:?} kHz (acceptance rate 0)",
            opts.samples
        )));
    }
    let samples: Vec<Vec<f64>> = (0..ranks).map(|k| kept.iter().map(|row| row[k]).collect()).collect();
    let histograms = samples.iter().map(|s| Histogram::build(s, binning)).collect::<Result<Vec<_>>>()?;
    Ok(CouplingDistributions { samples, histograms, accepted: kept.len(), drawn: opts.samples })
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAngle {
    /// Sweep φ at fixed θ (degrees).
    Phi { theta_deg: f64 },
    /// Sweep θ at fixed φ (degrees).
    Theta { phi_deg: f64 },
}

/// ν(angle)/2π in kHz for each JT axis A–D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JtCouplingMap {
    pub angles_deg: Vec<f64>,
    pub nu_khz: [Vec<f64>; 4],
}

#[allow(clippy::too_many_arguments)]
pub fn jt_coupling_map(
    consts: &PhysicalConstants,
    params: &P1Params,
    field: &FieldVector,
    r_nm: f64,
    sweep: SweepAngle,
    angles_deg: &[f64],
    m_i: i8,
) -> Result<JtCouplingMap> {
    let mut nu: [Vec<f64>; 4] = Default::default();
    for axis in JtAxis::ALL {
        nu[axis.index()] = angles_deg
            .par_iter()
            .map(|&a| {
                let geom = match sweep {
                    SweepAngle::Phi { theta_deg } => DefectGeometry::new(r_nm, theta_deg, a)?,
                    SweepAngle::Theta { phi_deg } => DefectGeometry::new(r_nm, a, phi_deg)?,
                };
                coupling_for(consts, params, field, axis, &geom, m_i).map(rad_to_khz)
            })
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(JtCouplingMap { angles_deg: angles_deg.to_vec(), nu_khz: nu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::hamiltonian::FITTED_FIELD;

    fn c() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn radius_scaling() {
        let r1 = sphere_radius(&c(), 40, 75.0).unwrap();
        let r2 = sphere_radius(&c(), 40, 150.0).unwrap();
        assert!((r1 / r2 - 2f64.cbrt()).abs() < 1e-12);
        // one defect per lattice site: 8 defects fill one unit cell
        let v = 4.0 / 3.0 * PI * sphere_radius(&c(), 8, 1e9).unwrap().powi(3);
        assert!((v - 0.3567f64.powi(3)).abs() < 1e-12);
        // hand evaluation: V = 40·0.3567³/(8·75e−9) nm³, R = (3V/4π)^{1/3}
        let v = 40.0 * 0.045_384_685_263 / (8.0 * 75e-9);
        assert!((r1 - (3.0 * v / (4.0 * PI)).cbrt()).abs() < 1e-6);
        assert!((r1 - 89.724).abs() < 0.001, "{r1}");
    }

    #[test]
    fn radial_cdf_is_cubic() {
        let mut rng = substream(1, 0);
        let mut r: Vec<f64> = Vec::with_capacity(100_000);
        while r.len() < 100_000 {
            let b = sample_bath(&c(), 40, 75.0, 0.0, &mut rng).unwrap();
            r.extend(b.positions.iter().map(|p| p[0] / b.radius_nm));
        }
        r.truncate(100_000);
        r.sort_by(f64::total_cmp);
        let n = r.len() as f64;
        let ks = r
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = x.powi(3);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "{ks}");
    }

    #[test]
    fn t2_star_formula() {
        let b = 2.0 * PI * 10e3;
        let t = t2_star(&[b]).unwrap();
        assert!((t - 2.0 * 2f64.sqrt() / b).abs() < 1e-18);
        assert!((t * 1e6 - 45.016).abs() < 1e-3);
        assert!((t2_star(&[b, b]).unwrap() - t / 2f64.sqrt()).abs() < 1e-18);
        assert!(t2_star(&[]).is_err());
        assert!(t2_star(&[0.0, 0.0]).is_err());
        let s = 3.7;
        assert!((t2_star(&[b * s, -2.0 * b * s]).unwrap() - t2_star(&[b, -2.0 * b]).unwrap() / s).abs() < 1e-18);
    }

    #[test]
    fn deterministic_and_recomputable() {
        let a = sample_bath(&c(), 40, 75.0, 1.0, &mut substream(5, 3)).unwrap();
        let b = sample_bath(&c(), 40, 75.0, 1.0, &mut substream(5, 3)).unwrap();
        assert_eq!(a, b);
        let again = BathConfiguration::from_positions(&c(), a.radius_nm, a.positions.clone()).unwrap();
        assert_eq!(again.couplings, a.couplings);
        assert!(a.positions.iter().all(|p| p[0] >= 1.0 && p[0] <= a.radius_nm));
    }

    #[test]
    fn sweep_is_thread_count_independent() {
        let opts = SweepOptions { samples: 300, seed: 11, ..Default::default() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| concentration_sweep(&c(), &[10.0, 75.0], &opts).unwrap());
        let b = three.install(|| concentration_sweep(&c(), &[10.0, 75.0], &opts).unwrap());
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn standard_error_shrinks_as_root_m() {
        let se = |m: usize| {
            let o = SweepOptions { samples: m, seed: 2, ..Default::default() };
            t2_star_statistics(&c(), 75.0, 0, &o).unwrap().1
        };
        let (a, b, d) = (se(100), se(1000), se(10_000));
        for ratio in [a / b, b / d] {
            assert!((ratio / 10f64.sqrt() - 1.0).abs() < 0.3, "{ratio}");
        }
    }

    #[test]
    fn rank_order_and_window() {
        let opts = SweepOptions { samples: 3000, seed: 4, ..Default::default() };
        let d = coupling_distributions(&c(), 75.0, 4, None, Binning::FreedmanDiaconis, &opts).unwrap();
        let means: Vec<f64> = d.samples.iter().map(|s| s.iter().sum::<f64>() / s.len() as f64).collect();
        assert!(means.windows(2).all(|w| w[0] >= w[1]), "{means:?}");
        for h in &d.histograms {
            assert!((h.integral() - 1.0).abs() < 1e-12);
        }
        assert!(d.histograms[0].density_at(17.8) > 0.0);

        let w = coupling_distributions(&c(), 75.0, 4, Some((4.0, 10.0)), Binning::Fixed(30), &opts).unwrap();
        assert!(w.accepted < w.drawn && w.accepted > 0);
        // the four largest couplings alone cannot exceed the window's Σb²
        let bmax = (10e3 * 2.0 * 2f64.sqrt()).powi(2);
        for k in 0..w.accepted {
            let s: f64 = (0..4).map(|r| (2.0 * PI * 1e3 * w.samples[r][k]).powi(2)).sum();
            assert!(s <= bmax * (1.0 + 1e-12));
        }
        let none = coupling_distributions(&c(), 75.0, 4, Some((1e6, 2e6)), Binning::Fixed(10), &opts);
        assert!(matches!(none, Err(Error::EmptySample(_))));
    }

    fn peak_spacings(field: &FieldVector) -> (Vec<f64>, f64) {
        let phis: Vec<f64> = (0..360).map(|k| k as f64).collect();
        let map = jt_coupling_map(&c(), &P1Params::FITTED, field, 35.0, SweepAngle::Phi { theta_deg: 45.0 }, &phis, 1).unwrap();
        let argmax = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).unwrap().0 as f64;
        let mut peaks: Vec<f64> = (0..3).map(|k| argmax(&map.nu_khz[k])).collect();
        peaks.sort_by(f64::total_cmp);
        let d = vec![peaks[1] - peaks[0], peaks[2] - peaks[1], 360.0 + peaks[0] - peaks[2]];
        let spread = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
        (d, spread(&map.nu_khz[3]) / spread(&map.nu_khz[0]))
    }

    #[test]
    fn jt_map_maxima_follow_threefold_symmetry() {
        let (d, ratio) = peak_spacings(&FieldVector::new(0.0, 0.0, FITTED_FIELD.bz));
        assert!(d.iter().all(|x| (x - 120.0).abs() <= 1.0), "{d:?}");
        assert!(ratio < 1e-6, "{ratio}");
        // the 3 G transverse component distorts the spacing but keeps the pattern
        let (d, ratio) = peak_spacings(&FITTED_FIELD);
        assert!(d.iter().all(|x| (x - 120.0).abs() < 40.0), "{d:?}");
        assert!(ratio < 0.25, "{ratio}");
    }

    #[test]
    fn jt_map_axes_differ_most_near_magic_angle() {
        let thetas: Vec<f64> = (1..90).map(|k| k as f64).collect();
        let map = jt_coupling_map(&c(), &P1Params::FITTED, &FITTED_FIELD, 35.0, SweepAngle::Theta { phi_deg: 90.0 }, &thetas, 1).unwrap();
        // relative spread across axes at each θ
        let rel: Vec<f64> = (0..thetas.len())
            .map(|i| {
                let v: Vec<f64> = (0..4).map(|a| map.nu_khz[a][i]).collect();
                let mean = v.iter().map(|x| x.abs()).sum::<f64>() / 4.0;
                (v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)) / mean
            })
            .collect();
        let best = thetas[rel.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0];
        assert!((best - 54.7).abs() < 8.0, "{best}");
    }
}
