use nvp1_core::bath::{concentration_sweep, coupling_distributions, jt_coupling_map, linear_fit, Binning, SweepAngle, SweepOptions};
use nvp1_core::constants::PhysicalConstants;

use super::{grid, Context};
use crate::config::BathConfig;
use crate::error::{CliError, Result};
use crate::output::{Report, Table};

pub fn run(cfg: &BathConfig, ctx: &mut Context) -> Result<()> {
    let consts = PhysicalConstants::default();
    match cfg {
        BathConfig::Sweep { concentrations_ppb, n_d, samples, cutoff_nm } => {
            let opts = SweepOptions { n_d: *n_d, samples: *samples, cutoff_nm: *cutoff_nm, seed: ctx.seed };
            let s = concentration_sweep(&consts, concentrations_ppb, &opts)?;
            let mut t = Table::new(&["concentration_ppb", "inv_t2star_khz", "stderr_khz"]);
            for i in 0..s.concentrations_ppb.len() {
                t.push(vec![s.concentrations_ppb[i].into(), s.inv_t2star_khz[i].into(), s.stderr_khz[i].into()]);
            }
            ctx.sink.table("sweep", &t)?;
            let mut r = Report::default();
            r.add("n_d", *n_d).add("samples", *samples).add("cutoff_nm", *cutoff_nm);
            if s.concentrations_ppb.len() >= 3 {
                let (a, b, r2) = linear_fit(&s.concentrations_ppb, &s.inv_t2star_khz)?;
                r.add("intercept_khz", a).add("slope_khz_per_ppb", b).add("r_squared_frac", r2);
            }
            ctx.sink.report("sweep_fit", &r)
        }
        BathConfig::Couplings { concentration_ppb, ranks, window_khz, bins, n_d, samples, cutoff_nm } => {
            let opts = SweepOptions { n_d: *n_d, samples: *samples, cutoff_nm: *cutoff_nm, seed: ctx.seed };
            let binning = bins.map_or(Binning::FreedmanDiaconis, Binning::Fixed);
            let d = coupling_distributions(&consts, *concentration_ppb, *ranks, *window_khz, binning, &opts)?;
            for (k, h) in d.histograms.iter().enumerate() {
                let mut t = Table::new(&["bin_left_khz", "bin_right_khz", "density_per_khz"]);
                for (e, v) in h.edges.windows(2).zip(&h.density) {
                    t.push(vec![e[0].into(), e[1].into(), (*v).into()]);
                }
                ctx.sink.table(&format!("coupling_rank{}", k + 1), &t)?;
            }
            let mut r = Report::default();
            r.add("concentration_ppb", *concentration_ppb)
                .add("accepted", d.accepted)
                .add("drawn", d.drawn)
                .add("acceptance_rate_frac", d.acceptance_rate());
            for (k, s) in d.samples.iter().enumerate() {
                r.add(&format!("rank{}_mean_khz", k + 1), s.iter().sum::<f64>() / s.len() as f64);
            }
            ctx.sink.report("couplings", &r)
        }
        BathConfig::JtMap { r_nm, theta_deg, phi_deg, start_deg, stop_deg, points, m_i, params, field } => {
            let sweep = match (theta_deg, phi_deg) {
                (Some(t), None) => SweepAngle::Phi { theta_deg: *t },
                (None, Some(p)) => SweepAngle::Theta { phi_deg: *p },
                _ => return Err(CliError::schema("bath jt_map needs exactly one of theta_deg or phi_deg")),
            };
            let angles = grid(*start_deg, *stop_deg, *points);
            let m = jt_coupling_map(&consts, params, field, *r_nm, sweep, &angles, *m_i)?;
            let mut t = Table::new(&["angle_deg", "nu_a_khz", "nu_b_khz", "nu_c_khz", "nu_d_khz"]);
            for (i, a) in m.angles_deg.iter().enumerate() {
                t.push(vec![(*a).into(), m.nu_khz[0][i].into(), m.nu_khz[1][i].into(), m.nu_khz[2][i].into(), m.nu_khz[3][i].into()]);
            }
            ctx.sink.table("jt_map", &t)
        }
    }
}
