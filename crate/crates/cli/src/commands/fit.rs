use std::fmt::Write as _;

use nvp1_core::constants::PhysicalConstants;
use nvp1_core::error::Error;
use nvp1_core::spectroscopy::{extract_dip_centers, fit_hamiltonian, parse_dips, AssignedDip, FitOptions, FitResult, SpectrumData};

use super::Context;
use crate::config::FitConfig;
use crate::error::{CliError, Result};
use crate::output::{Report, Table};

const NAMES: [(&str, &str); 6] =
    [("a_par", "mhz"), ("a_perp", "mhz"), ("p_par", "mhz"), ("bx", "g"), ("by", "g"), ("bz", "g")];

fn read(ctx: &Context, p: &std::path::Path) -> Result<String> {
    let p = ctx.resolve(p);
    std::fs::read_to_string(&p).map_err(|e| CliError::io(p, e))
}

fn collect_dips(cfg: &FitConfig, ctx: &Context) -> Result<Vec<AssignedDip>> {
    let mut dips = match &cfg.dips {
        Some(p) => parse_dips(&read(ctx, p)?)?,
        None => Vec::new(),
    };
    match (&cfg.spectrum, cfg.windows.is_empty()) {
        (Some(p), false) => {
            let sp = SpectrumData::parse(&read(ctx, p)?)?;
            let windows: Vec<(f64, f64)> = cfg.windows.iter().map(|w| (w.lo_mhz, w.hi_mhz)).collect();
            for (w, c) in cfg.windows.iter().zip(extract_dip_centers(&sp, &windows)) {
                let c = c?;
                dips.push(AssignedDip { frequency_mhz: c.center_mhz, sigma_mhz: Some(c.std_error_mhz), label: w.label.parse()? });
            }
        }
        (Some(_), true) => return Err(CliError::schema("fit.spectrum needs at least one [[fit.windows]] entry")),
        (None, false) => return Err(CliError::schema("fit.windows needs fit.spectrum")),
        (None, true) if cfg.dips.is_none() => return Err(CliError::schema("fit needs `dips` or `spectrum` with `windows`")),
        (None, true) => {}
    }
    Ok(dips)
}

pub fn run(cfg: &FitConfig, ctx: &mut Context) -> Result<()> {
    let dips = collect_dips(cfg, ctx)?;
    let mut opts = FitOptions { weighted: cfg.weighted, ..FitOptions::default() };
    opts.lm.max_iterations = cfg.max_iterations;
    let fit = fit_hamiltonian(&PhysicalConstants::default(), &dips, &FitResult::start(cfg.start_params, cfg.start_field), &opts)?;
    if fit.std_errors.iter().any(|s| !s.is_finite()) {
        return Err(Error::Unidentifiable("singular normal matrix; some parameters are not constrained by these dips".into()).into());
    }
    let values = [fit.params.a_par, fit.params.a_perp, fit.params.p_par, fit.field.bx, fit.field.by, fit.field.bz];

    let mut r = Report::default();
    for ((name, unit), (v, se)) in NAMES.iter().zip(values.iter().zip(fit.std_errors)) {
        r.add(&format!("{name}_{unit}"), *v).add(&format!("{name}_se_{unit}"), se);
    }
    let rms = (fit.residuals_mhz.iter().map(|x| x * x).sum::<f64>() / dips.len() as f64).sqrt();
    r.add("dips", dips.len()).add("iterations", fit.iterations).add("rms_residual_khz", rms * 1e3).add("weighted", cfg.weighted);
    ctx.sink.report("fit", &r)?;

    let mut t = Table::new(&["dip", "measured_mhz", "computed_mhz", "residual_khz", "label"]);
    for (i, (d, res)) in dips.iter().zip(&fit.residuals_mhz).enumerate() {
        t.push(vec![(i + 1).into(), d.frequency_mhz.into(), (d.frequency_mhz - res).into(), (res * 1e3).into(), d.label.to_string().into()]);
    }
    ctx.sink.table("residuals", &t)?;
    ctx.sink.text("fit_report.txt", &text_report(&fit, &dips, &values, rms))
}

fn text_report(fit: &FitResult, dips: &[AssignedDip], values: &[f64; 6], rms: f64) -> String {
    let mut s = String::from("P1 Hamiltonian fit\n\n");
    for ((name, unit), (v, se)) in NAMES.iter().zip(values.iter().zip(fit.std_errors)) {
        let unit = if *unit == "g" { "G" } else { "MHz" };
        let _ = writeln!(s, "  {name:<7} = {v:>12.6} ± {se:.6} {unit}");
    }
    let _ = writeln!(s, "\n  {} dips, {} iterations, rms residual {:.3} kHz\n", dips.len(), fit.iterations, rms * 1e3);
    let _ = writeln!(s, "  {:>3}  {:>14}  {:>14}  {:>10}  label", "dip", "measured (MHz)", "computed (MHz)", "res. (kHz)");
    for (i, (d, res)) in dips.iter().zip(&fit.residuals_mhz).enumerate() {
        let _ = writeln!(s, "  {:>3}  {:>14.4}  {:>14.4}  {:>10.2}  {}", i + 1, d.frequency_mhz, d.frequency_mhz - res, res * 1e3, d.label);
    }
    s
}
