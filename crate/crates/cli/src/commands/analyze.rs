use std::path::Path;

use nvp1_core::error::Error;
use nvp1_core::readout::correlation::correlation_c;
use nvp1_core::readout::fidelity::{init_readout_fidelity, optimize_thresholds, FidelityReport, ThresholdSearch};
use nvp1_core::readout::mixture::{fit_histogram_mixture, MixtureFit};
use nvp1_core::readout::model::ShotMixture;
use nvp1_core::readout::record::{Bin, MeasurementRecord, OutcomePairs, RegionSpec};
use nvp1_core::readout::reset::{optimize_reset_policy, ResetProblem};

use super::Context;
use crate::config::{AnalyzeConfig, CorrelationConfig, FidelityConfig, Pairing, ResetConfig};
use crate::error::{CliError, Result};
use crate::output::{Report, Table};

/// CSV records via the core parser; JSON records as written by `--format json`.
fn load_record(path: &Path) -> Result<MeasurementRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let rows = v["rows"].as_array().ok_or_else(|| Error::Parse("JSON record needs a `rows` array".into()))?;
        let bins = rows
            .iter()
            .map(|r| {
                let f = |i: usize| r.get(i).and_then(|x| x.as_u64()).ok_or_else(|| Error::Parse(format!("bad record row {r}")));
                Ok(Bin { index: f(0)?, n: f(1)? as u32, k: f(2)? as u32 })
            })
            .collect::<nvp1_core::Result<Vec<_>>>()?;
        return Ok(MeasurementRecord::new(bins, None)?);
    }
    Ok(MeasurementRecord::from_csv(&text)?)
}

pub fn run(cfg: &AnalyzeConfig, ctx: &mut Context) -> Result<()> {
    let record = load_record(&ctx.resolve(&cfg.record))?;
    let pairs = match cfg.pairing {
        Pairing::Sliding => OutcomePairs::sliding(&record)?,
        Pairing::Alternating => OutcomePairs::alternating(&record)?,
    };
    let (values, k) = match (cfg.pairing, record.uniform_bin_size()) {
        (Pairing::Sliding, Some(k)) => (record.counts(), k),
        _ => (pairs.pairs.iter().map(|p| p.0).collect(), pairs.k_first),
    };
    let mix = fit_histogram_mixture(&values, k, cfg.components)?;
    write_mixture(&mix, k, record.len(), ctx)?;
    if let Some(c) = &cfg.correlation {
        correlation(c, &mix, &pairs, ctx)?;
    }
    if let Some(f) = &cfg.fidelity {
        fidelity(f, &pairs, ctx)?;
    }
    if let Some(r) = &cfg.reset {
        reset(r, &mix, k, ctx)?;
    }
    Ok(())
}

fn write_mixture(mix: &MixtureFit, k: u32, bins: usize, ctx: &mut Context) -> Result<()> {
    let mut t = Table::new(&[
        "component", "amplitude_bins", "amplitude_se_bins", "center_counts", "center_se_counts", "sigma_counts", "sigma_se_counts",
        "range_min_counts", "range_max_counts",
    ]);
    for (i, (c, r)) in mix.components.iter().zip(&mix.ranges).enumerate() {
        t.push(vec![
            i.into(), c.amplitude.into(), c.amplitude_se.into(), c.center.into(), c.center_se.into(), c.sigma.into(), c.sigma_se.into(),
            r.min.into(), r.max.into(),
        ]);
    }
    ctx.sink.table("mixture", &t)?;
    let join = |v: Vec<String>| if v.is_empty() { "none".to_string() } else { v.join(";") };
    let mut rep = Report::default();
    rep.add("bins", bins)
        .add("bin_size", k)
        .add("offset_bins", mix.offset)
        .add("chi2", mix.chi2)
        .add("overlapping", join(mix.overlapping.iter().map(|(a, b)| format!("{a}-{b}")).collect()))
        .add("unsupported", join(mix.unsupported.iter().map(|a| a.to_string()).collect()));
    ctx.sink.report("mixture_summary", &rep)
}

fn correlation(cfg: &CorrelationConfig, mix: &MixtureFit, pairs: &OutcomePairs, ctx: &mut Context) -> Result<()> {
    if pairs.k_first != pairs.k_second {
        return Err(Error::InvalidInput("correlation regions need equal bin sizes for both outcomes".into()).into());
    }
    let q = mix.ranges.len();
    let regions: Vec<(usize, usize)> =
        if cfg.regions.is_empty() { (0..q).flat_map(|i| (0..q).map(move |j| (i, j))).collect() } else { cfg.regions.clone() };
    let mut t = Table::new(&["i", "j", "c_ratio", "stderr_ratio", "n_pairs", "n_first", "n_second", "n_both"]);
    for (i, j) in regions {
        if i >= q || j >= q {
            return Err(Error::InvalidInput(format!("region ({i}, {j}) outside {q} components")).into());
        }
        let spec = RegionSpec::new((i, j), mix.ranges[i], mix.ranges[j]);
        match correlation_c(pairs, &spec) {
            Ok(e) => t.push(vec![i.into(), j.into(), e.c.into(), e.stderr.into(), e.n_pairs.into(), e.n_first.into(), e.n_second.into(), e.n_both.into()]),
            Err(Error::EmptySample(_)) => t.push(vec![i.into(), j.into(), f64::NAN.into(), f64::NAN.into(), pairs.len().into(), 0usize.into(), 0usize.into(), 0usize.into()]),
            Err(e) => return Err(e.into()),
        }
    }
    ctx.sink.table("correlation", &t)
}

fn add_report(r: &mut Report, rep: &FidelityReport) {
    r.add("f_frac", rep.f)
        .add("f_high_frac", rep.f_high)
        .add("f_low_frac", rep.f_low)
        .add("f_se_frac", rep.stderr)
        .add("success_rate_frac", rep.success_rate)
        .add("n_high_pairs", rep.n_high)
        .add("n_low_pairs", rep.n_low);
}

fn fidelity(cfg: &FidelityConfig, pairs: &OutcomePairs, ctx: &mut Context) -> Result<()> {
    let mut r = Report::default();
    r.add("mode", format!("{:?}", cfg.mode).to_lowercase());
    let policy = match cfg.policy {
        Some(p) => {
            r.add("optimized", false);
            p
        }
        None => {
            let search = ThresholdSearch { min_relative_success: cfg.min_relative_success, joint_window: cfg.joint_window };
            let opt = optimize_thresholds(pairs, &search)?;
            let mut j = Table::new(&["threshold_counts", "f_frac"]);
            for (n, f) in &opt.joint_curve {
                j.push(vec![(*n).into(), (*f).into()]);
            }
            ctx.sink.table("joint_curve", &j)?;
            let mut c = Table::new(&["init_high_counts", "f_frac", "success_rate_frac", "relative_success_frac"]);
            for p in &opt.init_curve {
                c.push(vec![p.init_high.into(), p.f.into(), p.success_rate.into(), p.relative_success.into()]);
            }
            ctx.sink.table("init_curve", &c)?;
            r.add("optimized", true).add("joint_optimum_counts", opt.joint_optimum).add("informative", opt.informative);
            opt.policy
        }
    };
    r.add("k_init", policy.k_init)
        .add("k_readout", policy.k_readout)
        .add("init_high_counts", policy.init_high)
        .add("init_low_counts", policy.init_low)
        .add("readout_counts", policy.readout);
    add_report(&mut r, &init_readout_fidelity(pairs, &policy, cfg.mode)?);
    ctx.sink.report("fidelity", &r)
}

/// Histogram mixture as per-shot bright probabilities: weight ∝ area,
/// probability = center / K.
fn shot_mixture(mix: &MixtureFit, k: u32) -> Result<ShotMixture> {
    let areas: Vec<f64> = mix.components.iter().map(|c| (c.amplitude * c.sigma).max(0.0)).collect();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("fitted mixture has no positive component".into()).into());
    }
    let comps = mix.components.iter().zip(&areas).map(|(c, a)| (a / total, (c.center / k as f64).clamp(0.0, 1.0))).collect();
    Ok(ShotMixture::new(comps)?)
}

fn reset(cfg: &ResetConfig, mix: &MixtureFit, k: u32, ctx: &mut Context) -> Result<()> {
    let mixture = match &cfg.mixture {
        Some(m) => ShotMixture::new(m.clone())?,
        None => shot_mixture(mix, k)?,
    };
    let problem = ResetProblem {
        mixture,
        k_total: cfg.k_total,
        pass_threshold: cfg.pass_threshold,
        t_deer: cfg.t_deer_s,
        t_reset: cfg.t_reset_s,
        target_successes: cfg.target_successes,
    };
    let thetas: Vec<u32> = (1..=cfg.theta_max).collect();
    let lambdas: Vec<u32> = (0..=cfg.lambda_max).collect();
    let map = optimize_reset_policy(&problem, &thetas, &lambdas, ctx.seed)?;
    let mut t = Table::new(&["theta_shots", "lambda_counts", "t_avg_s", "attempts", "aborts", "feasible_flag", "simulated_flag"]);
    for c in &map.cells {
        t.push(vec![c.theta.into(), c.lambda.into(), c.t_avg.into(), c.attempts.into(), c.aborts.into(), c.feasible.into(), c.simulated.into()]);
    }
    ctx.sink.table("reset_map", &t)?;
    let mut r = Report::default();
    for (i, (w, p)) in problem.mixture.components.iter().enumerate() {
        r.add(&format!("mixture{i}_weight_frac"), *w).add(&format!("mixture{i}_bright_prob_frac"), *p);
    }
    r.add("success_probability_frac", problem.success_probability())
        .add("baseline_s", map.baseline)
        .add("best_theta_shots", map.best.theta)
        .add("best_lambda_counts", map.best.lambda)
        .add("best_t_avg_s", map.best.t_avg)
        .add("gain_ratio", map.gain);
    ctx.sink.report("reset", &r)
}
