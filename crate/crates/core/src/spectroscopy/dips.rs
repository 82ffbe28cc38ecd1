//! Spectrum data and parabolic dip-center extraction.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measured DEER spectrum: frequency grid in MHz, NV m_s = 0 fidelity and an
/// optional per-point standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumData {
    freq_mhz: Vec<f64>,
    signal: Vec<f64>,
    sigma: Option<Vec<f64>>,
}

impl SpectrumData {
    pub fn new(freq_mhz: Vec<f64>, signal: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        if freq_mhz.len() != signal.len() {
            return Err(Error::DimensionMismatch { expected: freq_mhz.len(), found: signal.len() });
        }
        if let Some(s) = &sigma {
            if s.len() != freq_mhz.len() {
                return Err(Error::DimensionMismatch { expected: freq_mhz.len(), found: s.len() });
            }
            if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidInput("uncertainties must be positive".into()));
            }
        }
        if freq_mhz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("frequency grid must be strictly increasing".into()));
        }
        if signal.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("signal values must lie in [0, 1]".into()));
        }
        Ok(Self { freq_mhz, signal, sigma })
    }

    /// Parse two- or three-column delimited text (comma, tab or spaces);
    /// lines starting with '#' are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut f = Vec::new();
        let mut y = Vec::new();
        let mut s = Vec::new();
        let mut ncol = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c == ',' || c == '\t' || c == ' ').filter(|c| !c.is_empty()).collect();
            let vals: std::result::Result<Vec<f64>, _> = cols.iter().map(|c| c.parse::<f64>()).collect();
            let vals = match vals {
                Ok(v) => v,
                // tolerate one header row
                Err(_) if f.is_empty() && ncol.is_none() => continue,
                Err(e) => return Err(Error::Parse(format!("line {}: {e}", lineno + 1))),
            };
            if !(vals.len() == 2 || vals.len() == 3) {
                return Err(Error::Parse(format!("line {}: expected 2 or 3 columns, found {}", lineno + 1, vals.len())));
            }
            if *ncol.get_or_insert(vals.len()) != vals.len() {
                return Err(Error::Parse(format!("line {}: inconsistent column count", lineno + 1)));
            }
            f.push(vals[0]);
            y.push(vals[1]);
            if vals.len() == 3 {
                s.push(vals[2]);
            }
        }
        let sigma = if ncol == Some(3) { Some(s) } else { None };
        Self::new(f, y, sigma)
    }

    pub fn len(&self) -> usize {
        self.freq_mhz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq_mhz.is_empty()
    }

    pub fn freq_mhz(&self) -> &[f64] {
        &self.freq_mhz
    }

    pub fn signal(&self) -> &[f64] {
        &self.signal
    }

    pub fn sigma(&self) -> Option<&[f64]> {
        self.sigma.as_deref()
    }
}

/// Vertex of a fitted parabola.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipCenter {
    pub center_mhz: f64,
    pub std_error_mhz: f64,
}

/// Weighted parabola fit y = a + b(x − x̄) + c(x − x̄)² in each window. A
/// dip needs c > 0; windows without upward curvature come back as errors in
/// their slot.
pub fn extract_dip_centers(spectrum: &SpectrumData, windows: &[(f64, f64)]) -> Vec<Result<DipCenter>> {
    windows.iter().map(|&(lo, hi)| fit_window(spectrum, lo, hi)).collect()
}

fn fit_window(sp: &SpectrumData, lo: f64, hi: f64) -> Result<DipCenter> {
    let idx: Vec<usize> = (0..sp.len()).filter(|&i| sp.freq_mhz[i] >= lo && sp.freq_mhz[i] <= hi).collect();
    if idx.len() < 5 {
        return Err(Error::Underdetermined { needed: 5, got: idx.len() });
    }
    let w = |i: usize| sp.sigma.as_ref().map_or(1.0, |s| 1.0 / (s[i] * s[i]));
    let wsum: f64 = idx.iter().map(|&i| w(i)).sum();
    let xbar = idx.iter().map(|&i| w(i) * sp.freq_mhz[i]).sum::<f64>() / wsum;

    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for &i in &idx {
        let d = sp.freq_mhz[i] - xbar;
        let row = Vector3::new(1.0, d, d * d);
        ata += row * row.transpose() * w(i);
        aty += row * (w(i) * sp.signal[i]);
    }
    let cov_unscaled = ata
        .try_inverse()
        .ok_or_else(|| Error::Unidentifiable(format!("window [{lo}, {hi}] MHz: degenerate design")))?;
    let coef = cov_unscaled * aty;
    let (b, c) = (coef[1], coef[2]);
    if !(c > 0.0) {
        return Err(Error::InvalidInput(format!(
            "window [{lo}, {hi}] MHz: fitted curvature {c:.3e} is not upward, no dip"
        )));
    }
    let cov = if sp.sigma.is_some() {
        cov_unscaled
    } else {
        let rss: f64 = idx
            .iter()
            .map(|&i| {
                let d = sp.freq_mhz[i] - xbar;
                let r = sp.signal[i] - (coef[0] + b * d + c * d * d);
                r * r
            })
            .sum();
        cov_unscaled * (rss / (idx.len() - 3) as f64)
    };
    let x0 = xbar - b / (2.0 * c);
    // gradient of x0 with respect to (b, c)
    let gb = -1.0 / (2.0 * c);
    let gc = b / (2.0 * c * c);
    let var = gb * gb * cov[(1, 1)] + 2.0 * gb * gc * cov[(1, 2)] + gc * gc * cov[(2, 2)];
    Ok(DipCenter { center_mhz: x0, std_error_mhz: var.max(0.0).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_parabola_exact_vertex() {
        let f: Vec<f64> = (0..21).map(|i| 257.9 + 0.01 * i as f64).collect();
        let y: Vec<f64> = f.iter().map(|x| 0.4 + 30.0 * (x - 258.0176).powi(2)).collect();
        let sp = SpectrumData::new(f, y, None).unwrap();
        let c = extract_dip_centers(&sp, &[(257.8, 258.2)]).remove(0).unwrap();
        assert!((c.center_mhz - 258.0176).abs() < 1e-9, "{}", c.center_mhz);
    }

    #[test]
    fn noisy_parabola_within_three_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 1e-3).unwrap();
        let f: Vec<f64> = (0..41).map(|i| 257.98 + 0.002 * i as f64).collect();
        let y: Vec<f64> = f.iter().map(|x| 0.5 + 200.0 * (x - 258.0176).powi(2) + noise.sample(&mut rng)).collect();
        let s = vec![1e-3; f.len()];
        let sp = SpectrumData::new(f, y, Some(s)).unwrap();
        let c = extract_dip_centers(&sp, &[(257.9, 258.1)]).remove(0).unwrap();
        assert!((c.center_mhz - 258.0176).abs() < 3.0 * c.std_error_mhz, "{c:?}");
    }

    #[test]
    fn symmetric_v_centered() {
        let f: Vec<f64> = (0..11).map(|i| 100.0 + 0.1 * i as f64).collect();
        let y: Vec<f64> = f.iter().map(|x| 0.2 + (x - 100.5).abs()).collect();
        let sp = SpectrumData::new(f, y, None).unwrap();
        let c = extract_dip_centers(&sp, &[(99.0, 102.0)]).remove(0).unwrap();
        assert!((c.center_mhz - 100.5).abs() < 1e-12);
    }

    #[test]
    fn monotone_window_flagged() {
        let f: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = f.iter().map(|x| 0.9 - 0.05 * x).collect();
        let sp = SpectrumData::new(f, y, None).unwrap();
        assert!(extract_dip_centers(&sp, &[(0.0, 9.0)])[0].is_err());
    }

    #[test]
    fn too_few_points() {
        let sp = SpectrumData::new(vec![1.0, 2.0, 3.0], vec![0.5, 0.4, 0.5], None).unwrap();
        assert!(matches!(extract_dip_centers(&sp, &[(0.0, 4.0)])[0], Err(Error::Underdetermined { .. })));
    }

    #[test]
    fn parse_with_comments_and_header() {
        let text = "# spectrum\nfrequency_mhz,signal,sigma\n1.0,0.5,0.01\n2.0,0.4,0.01\n";
        let sp = SpectrumData::parse(text).unwrap();
        assert_eq!(sp.len(), 2);
        assert_eq!(sp.sigma().unwrap(), &[0.01, 0.01]);
        assert!(SpectrumData::parse("1 0.5\n0.5 0.4\n").is_err());
    }
}
