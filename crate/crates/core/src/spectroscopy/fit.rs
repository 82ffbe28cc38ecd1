//! Hamiltonian and field fits to assigned P1 transition frequencies.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::transitions::{transition_frequencies, TransitionLabel};
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::lsq::{levenberg_marquardt, LmOptions};
use crate::spin::geometry::{FieldVector, JtAxis};
use crate::spin::hamiltonian::P1Params;

/// A measured dip assigned to a transition.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignedDip {
    pub frequency_mhz: f64,
    /// One-sigma uncertainty in MHz, used when the fit is weighted.
    pub sigma_mhz: Option<f64>,
    pub label: TransitionLabel,
}

/// Parse `frequency_mhz, label[, sigma_mhz]` rows; '#' starts a comment.
pub fn parse_dips(text: &str) -> Result<Vec<AssignedDip>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c == '\t' || c == ' ').filter(|c| !c.is_empty()).collect();
        let freq = match cols[0].parse::<f64>() {
            Ok(v) => v,
            Err(_) if out.is_empty() => continue, // header row
            Err(e) => return Err(Error::Parse(format!("line {}: {e}", n + 1))),
        };
        let label: TransitionLabel = cols
            .get(1)
            .ok_or_else(|| Error::Parse(format!("line {}: missing transition label", n + 1)))?
            .parse()?;
        let sigma_mhz = match cols.get(2) {
            Some(s) => Some(s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?),
            None => None,
        };
        out.push(AssignedDip { frequency_mhz: freq, sigma_mhz, label });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub params: P1Params,
    pub field: FieldVector,
    /// Measured minus computed, MHz, one per dip.
    pub residuals_mhz: Vec<f64>,
    /// Order: A∥, A⊥, P∥ (MHz), Bx, By, Bz (G).
    pub std_errors: [f64; 6],
    pub covariance: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl FitResult {
    pub fn start(params: P1Params, field: FieldVector) -> Self {
        Self { params, field, residuals_mhz: Vec::new(), std_errors: [0.0; 6], covariance: Vec::new(), iterations: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Divide residuals by each dip's sigma.
    pub weighted: bool,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { weighted: false, lm: LmOptions::default() }
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn dip_weights(dips: &[AssignedDip], weighted: bool) -> Result<Vec<f64>> {
    dips.iter()
        .map(|d| {
            if !weighted {
                return Ok(1.0);
            }
            match d.sigma_mhz {
                Some(s) if s > 0.0 => Ok(1.0 / s),
                _ => Err(Error::InvalidInput(format!("weighted fit needs a positive sigma for dip {}", d.label))),
            }
        })
        .collect()
}

/// Least squares over {A∥, A⊥, P∥, Bx, By, Bz}.
pub fn fit_hamiltonian(
    consts: &PhysicalConstants,
    dips: &[AssignedDip],
    init: &FitResult,
    opts: &FitOptions,
) -> Result<FitResult> {
    if dips.len() < 6 {
        return Err(Error::Underdetermined { needed: 6, got: dips.len() });
    }
    let labels: Vec<TransitionLabel> = dips.iter().map(|d| d.label).collect();
    let w = dip_weights(dips, opts.weighted)?;
    let model = |p: &[f64]| {
        let params = P1Params::new(p[0], p[1], p[2]);
        let field = FieldVector::new(p[3], p[4], p[5]);
        transition_frequencies(consts, &params, &field, &labels)
    };
    let resid = |p: &[f64]| -> Result<Vec<f64>> {
        let f = model(p)?;
        Ok(dips.iter().zip(f).zip(&w).map(|((d, fc), wi)| (fc - d.frequency_mhz) * wi).collect())
    };
    let p0 = [
        init.params.a_par,
        init.params.a_perp,
        init.params.p_par,
        init.field.bx,
        init.field.by,
        init.field.bz,
    ];
    let res = levenberg_marquardt(resid, &p0, &opts.lm)?;
    let p = &res.params;
    let params = P1Params::new(p[0], p[1], p[2]);
    let field = FieldVector::new(p[3], p[4], p[5]);
    let fc = model(p)?;
    let se = res.std_errors();
    Ok(FitResult {
        params,
        field,
        residuals_mhz: dips.iter().zip(fc).map(|(d, f)| d.frequency_mhz - f).collect(),
        std_errors: [se[0], se[1], se[2], se[3], se[4], se[5]],
        covariance: to_rows(&res.covariance),
        iterations: res.iterations,
    })
}

/// The four |+1,i⟩ main transitions in axis order A, B, C, D.
pub fn plus_one_labels() -> [TransitionLabel; 4] {
    JtAxis::ALL.map(|a| TransitionLabel::main(1, a))
}

/// Field from the four |+1,i⟩ frequencies (axis order A, B, C, D), holding
/// the P1 parameters fixed.
pub fn estimate_field_from_p1(
    consts: &PhysicalConstants,
    f_plus1: [f64; 4],
    params: &P1Params,
    init: &FieldVector,
) -> Result<FieldVector> {
    let labels = plus_one_labels();
    let resid = |p: &[f64]| -> Result<Vec<f64>> {
        let f = transition_frequencies(consts, params, &FieldVector::new(p[0], p[1], p[2]), &labels)?;
        Ok(f.iter().zip(&f_plus1).map(|(a, b)| a - b).collect())
    };
    let opts = LmOptions { diff_step: 1e-7, ..LmOptions::default() };
    let res = levenberg_marquardt(resid, &[init.bx, init.by, init.bz], &opts)?;
    Ok(FieldVector::new(res.params[0], res.params[1], res.params[2]))
}

/// Axis ranges and step for the exhaustive field search, in gauss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub bx: (f64, f64),
    pub by: (f64, f64),
    pub bz: (f64, f64),
    pub step: f64,
}

impl Default for FieldGrid {
    fn default() -> Self {
        Self { bx: (-4.0, 4.0), by: (-4.0, 4.0), bz: (45.0, 46.0), step: 0.02 }
    }
}

impl FieldGrid {
    fn axis_points(range: (f64, f64), step: f64) -> Vec<f64> {
        let n = ((range.1 - range.0) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| range.0 + step * i as f64).collect()
    }

    pub fn points(&self) -> Result<[Vec<f64>; 3]> {
        if !(self.step > 0.0) || self.bx.1 < self.bx.0 || self.by.1 < self.by.0 || self.bz.1 < self.bz.0 {
            return Err(Error::InvalidInput(format!("bad field grid {self:?}")));
        }
        Ok([
            Self::axis_points(self.bx, self.step),
            Self::axis_points(self.by, self.step),
            Self::axis_points(self.bz, self.step),
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub field: FieldVector,
    /// Σ (f_exp − f_theo)² in MHz².
    pub delta: f64,
    /// Grid indices (ix, iy, iz) of the minimum.
    pub index: (usize, usize, usize),
    /// The minimum lies on a face of the grid.
    pub at_boundary: bool,
}

/// Exhaustive grid minimum of Σ (sorted f_exp − sorted f_theo)² over the
/// four |+1,i⟩ lines. Ties resolve to the lexicographically first index.
pub fn bruteforce_field_estimate(
    consts: &PhysicalConstants,
    four_freqs: [f64; 4],
    params: &P1Params,
    grid: &FieldGrid,
) -> Result<BruteForceResult> {
    let [xs, ys, zs] = grid.points()?;
    let mut target = four_freqs;
    target.sort_by(f64::total_cmp);
    let labels = plus_one_labels();
    let (ny, nz) = (ys.len(), zs.len());
    let total = xs.len() * ny * nz;

    let eval = |k: usize| -> Result<(f64, usize)> {
        let (ix, iy, iz) = (k / (ny * nz), (k / nz) % ny, k % nz);
        let mut f: Vec<f64> = transition_frequencies(consts, params, &FieldVector::new(xs[ix], ys[iy], zs[iz]), &labels)?;
        f.sort_by(f64::total_cmp);
        Ok((f.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum(), k))
    };
    let better = |a: (f64, usize), b: (f64, usize)| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a };
    let best = (0..total)
        .into_par_iter()
        .map(eval)
        .try_reduce(|| (f64::INFINITY, usize::MAX), |a, b| Ok(better(a, b)))?;

    let k = best.1;
    let (ix, iy, iz) = (k / (ny * nz), (k / nz) % ny, k % nz);
    let at_boundary = ix == 0 || ix + 1 == xs.len() || iy == 0 || iy + 1 == ny || iz == 0 || iz + 1 == nz;
    Ok(BruteForceResult {
        field: FieldVector::new(xs[ix], ys[iy], zs[iz]),
        delta: best.0,
        index: (ix, iy, iz),
        at_boundary,
    })
}
