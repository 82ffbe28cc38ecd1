use nvp1_core::bath::substream;
use nvp1_core::constants::PhysicalConstants;
use nvp1_core::error::Error;
use nvp1_core::spectroscopy::{transition_table, TransitionTable};
use rand_distr::{Distribution, Normal};

use super::Context;
use crate::config::{SpectrumConfig, SyntheticSpectrum};
use crate::error::Result;
use crate::output::{Report, Table};

pub fn run(cfg: &SpectrumConfig, ctx: &mut Context) -> Result<()> {
    let table = transition_table(&PhysicalConstants::default(), &cfg.params, &cfg.field, cfg.main_threshold)?;
    let mut t = Table::new(&["axis", "label", "frequency_mhz", "intensity_frac", "main_flag"]);
    for e in &table.entries {
        t.push(vec![e.label.axis.to_string().into(), e.label.to_string().into(), e.frequency_mhz.into(), e.intensity.into(), e.main.into()]);
    }
    ctx.sink.table("transitions", &t)?;
    let mut r = Report::default();
    r.add("transitions", table.entries.len()).add("main_transitions", table.main().count());
    if let Some(s) = &cfg.synthetic {
        let (f, y) = synthesize(&table, s, ctx.seed)?;
        let mut t = Table::new(&["frequency_mhz", "signal_frac"]);
        for (f, y) in f.into_iter().zip(y) {
            t.push(vec![f.into(), y.into()]);
        }
        r.add("spectrum_points", t.rows.len());
        ctx.sink.table("spectrum", &t)?;
    }
    ctx.sink.report("spectrum_summary", &r)
}

/// 1 − contrast·Σ intensity·L(f) over main lines, L a unit-height
/// Lorentzian, plus Gaussian noise; clamped to [0, 1].
fn synthesize(table: &TransitionTable, s: &SyntheticSpectrum, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(s.step_mhz > 0.0 && s.f_max_mhz > s.f_min_mhz && s.linewidth_mhz > 0.0 && s.noise >= 0.0) {
        return Err(Error::InvalidInput("synthetic spectrum needs step > 0, f_max > f_min, linewidth > 0, noise ≥ 0".into()).into());
    }
    let n = ((s.f_max_mhz - s.f_min_mhz) / s.step_mhz).floor() as usize + 1;
    let hw2 = (s.linewidth_mhz / 2.0).powi(2);
    let noise = Normal::new(0.0, s.noise).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = substream(seed, 0);
    let freqs: Vec<f64> = (0..n).map(|i| s.f_min_mhz + s.step_mhz * i as f64).collect();
    let signal = freqs
        .iter()
        .map(|&f| {
            let dip: f64 = table.main().map(|t| t.intensity * hw2 / ((f - t.frequency_mhz).powi(2) + hw2)).sum();
            let y = 1.0 - s.contrast * dip + if s.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            y.clamp(0.0, 1.0)
        })
        .collect();
    Ok((freqs, signal))
}
