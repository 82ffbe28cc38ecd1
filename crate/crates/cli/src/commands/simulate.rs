use std::f64::consts::PI;

use nvp1_core::bath::substream;
use nvp1_core::error::Error;
use nvp1_core::pulse::deer::{deer_p_ms0_closed_form, deer_y_populations_closed_form, nv_zero_nitrogen, nv_zero_p1_mixed};
use nvp1_core::pulse::entangle::{target_state, xz_expectation};
use nvp1_core::pulse::{
    deer_sequence, deer_y_sequence, entanglement_sequence, fidelity_witness, fit_xz_coupling, run_sequence, tomography,
    tomography_sampled, xz_trace, Levels, QuantumState, ReadoutPhase, SequenceStep, StateSpace,
};
use nvp1_core::readout::model::{simulate_traces, SpinReadoutModel, TraceModel};
use nvp1_core::readout::record::{Bin, MeasurementRecord};

use super::{grid, Context};
use crate::config::{LevelSpec, SimulateConfig};
use crate::error::{CliError, Result};
use crate::output::{Report, Table};

fn khz_to_rad(f: f64) -> f64 {
    2.0 * PI * f * 1e3
}

pub fn run(cfg: &SimulateConfig, ctx: &mut Context) -> Result<()> {
    match cfg {
        SimulateConfig::Entanglement { j_khz, two_t_us, shots } => entanglement(*j_khz, *two_t_us, *shots, ctx),
        SimulateConfig::XzSweep { j_khz, start_us, step_us, points, shots, j_guess_khz } => {
            let two_t_us: Vec<f64> = (0..*points).map(|i| start_us + step_us * i as f64).collect();
            xz_sweep(*j_khz, &two_t_us, *shots, j_guess_khz.unwrap_or(0.8 * j_khz), ctx)
        }
        SimulateConfig::Deer { nu_khz, tau_us, tau_max_us, points, m_i, readout } => {
            let taus = match (tau_us.is_empty(), tau_max_us, points) {
                (false, None, None) => tau_us.clone(),
                (true, Some(max), Some(n)) => grid(0.0, *max, *n),
                _ => return Err(CliError::schema("simulate deer needs either tau_us or tau_max_us with points")),
            };
            deer(*nu_khz, &taus, *m_i, *readout, ctx)
        }
        SimulateConfig::Sequence { space, initial, levels, steps } => sequence(*space, initial, levels, steps, ctx),
        SimulateConfig::Trace { model, bins, traces } => {
            let model = model.clone().unwrap_or_else(TraceModel::calibrated);
            let records = simulate_traces(&model, *traces, *bins, ctx.seed)?;
            for (i, r) in records.iter().enumerate() {
                let name = if records.len() == 1 { "record.csv".to_string() } else { format!("record_{i}.csv") };
                ctx.sink.text(&name, &r.to_csv())?;
            }
            Ok(())
        }
        SimulateConfig::SpinPairs { model, l_first, l_second, pairs } => {
            let model = model.unwrap_or_else(SpinReadoutModel::calibrated);
            let p = model.simulate_pairs(*l_first, *l_second, *pairs, &mut substream(ctx.seed, 0))?;
            let bins = p
                .pairs
                .iter()
                .enumerate()
                .flat_map(|(i, &(a, b))| {
                    [Bin { index: 2 * i as u64, n: a, k: *l_first }, Bin { index: 2 * i as u64 + 1, n: b, k: *l_second }]
                })
                .collect();
            ctx.sink.text("record.csv", &MeasurementRecord::new(bins, None)?.to_csv())
        }
    }
}

fn tomogram_table(t: &nvp1_core::pulse::TwoQubitTomogram) -> Table {
    let mut tab = Table::new(&["operator", "expectation_frac"]);
    for (k, v) in &t.expectations {
        tab.push(vec![k.clone().into(), (*v).into()]);
    }
    tab
}

fn entanglement(j_khz: f64, two_t_us: Option<f64>, shots: Option<u64>, ctx: &mut Context) -> Result<()> {
    if j_khz == 0.0 || !j_khz.is_finite() {
        return Err(Error::InvalidInput("J must be finite and nonzero".into()).into());
    }
    let two_t = two_t_us.map_or(1.0 / (2.0 * j_khz.abs() * 1e3), |v| v * 1e-6);
    let state = entanglement_sequence(khz_to_rad(j_khz), two_t / 2.0)?;
    let tomo = match shots {
        Some(n) => tomography_sampled(&state, n, &mut substream(ctx.seed, 0))?,
        None => tomography(&state)?,
    };
    ctx.sink.table("tomogram", &tomogram_table(&tomo))?;
    ctx.sink.text("rho.txt", &tomo.matrix_dump())?;
    let mut r = Report::default();
    r.add("j_khz", j_khz)
        .add("two_t_us", two_t * 1e6)
        .add("fidelity_witness_frac", fidelity_witness(&tomo))
        .add("fidelity_exact_frac", state.fidelity_pure(&target_state())?)
        .add("shots_per_setting", shots.unwrap_or(0));
    ctx.sink.report("entanglement", &r)
}

fn xz_sweep(j_khz: f64, two_t_us: &[f64], shots: Option<u64>, guess_khz: f64, ctx: &mut Context) -> Result<()> {
    let x: Vec<f64> = two_t_us.iter().map(|v| v * 1e-6).collect();
    let j = khz_to_rad(j_khz);
    let exact = x.iter().map(|&v| xz_expectation(j, v)).collect::<nvp1_core::Result<Vec<_>>>()?;
    let measured = match shots {
        Some(n) => xz_trace(j, &x, Some((n, &mut substream(ctx.seed, 0))))?,
        None => exact.clone(),
    };
    let fit = fit_xz_coupling(&x, &measured, khz_to_rad(guess_khz))?;
    let mut t = Table::new(&["two_t_us", "xz_exact_frac", "xz_measured_frac"]);
    for i in 0..x.len() {
        t.push(vec![two_t_us[i].into(), exact[i].into(), measured[i].into()]);
    }
    ctx.sink.table("xz_trace", &t)?;
    let to_khz = |w: f64| w / (2.0 * PI * 1e3);
    let mut r = Report::default();
    r.add("j_input_khz", j_khz)
        .add("j_fit_khz", to_khz(fit.j))
        .add("j_fit_se_khz", to_khz(fit.j_std_error))
        .add("amplitude_frac", fit.amplitude)
        .add("offset_frac", fit.offset)
        .add("shots_per_point", shots.unwrap_or(0));
    ctx.sink.report("xz_fit", &r)
}

fn deer(nu_khz: f64, taus_us: &[f64], m_i: i8, readout: Option<ReadoutPhase>, ctx: &mut Context) -> Result<()> {
    let nu = khz_to_rad(nu_khz);
    let levels = Levels::ideal_coupled(nu)?;
    let n = match m_i {
        1 => 0,
        0 => 1,
        -1 => 2,
        _ => return Err(CliError::schema(format!("m_i must be -1, 0 or 1, got {m_i}"))),
    };
    let t = match readout {
        None => {
            let init = nv_zero_p1_mixed();
            let mut t = Table::new(&["tau_us", "p_ms0_frac", "p_ms0_closed_frac"]);
            for &tau in taus_us {
                let out = deer_sequence(&init, &levels, tau * 1e-6, m_i)?;
                t.push(vec![tau.into(), out.p_ms0.into(), deer_p_ms0_closed_form(nu, tau * 1e-6).into()]);
            }
            t
        }
        Some(phase) => {
            let init = nv_zero_nitrogen(m_i)?;
            let mut t = Table::new(&["tau_us", "p_ms0_frac", "p_up_ms0_frac", "p_down_ms0_frac", "p_up_closed_frac", "p_down_closed_frac"]);
            for &tau in taus_us {
                let out = deer_y_sequence(&init, &levels, tau * 1e-6, m_i, phase)?;
                let (up, down) = match &out.post_ms0 {
                    Some(s) => (s.populations()[n], s.populations()[3 + n]),
                    None => (f64::NAN, f64::NAN),
                };
                let (cu, cd) = deer_y_populations_closed_form(nu, tau * 1e-6, phase);
                t.push(vec![tau.into(), out.p_ms0.into(), up.into(), down.into(), cu.into(), cd.into()]);
            }
            t
        }
    };
    ctx.sink.table(if readout.is_some() { "deer_y" } else { "deer" }, &t)
}

fn levels_for(space: StateSpace, spec: &LevelSpec) -> Result<Levels> {
    let given = [spec.ideal_coupling_khz.is_some(), spec.zz_khz.is_some(), spec.energies_khz.is_some()];
    if given.iter().filter(|&&g| g).count() > 1 {
        return Err(CliError::schema("simulate.levels takes at most one of ideal_coupling_khz, zz_khz, energies_khz"));
    }
    let lv = if let Some(nu) = spec.ideal_coupling_khz {
        Levels::ideal_coupled(khz_to_rad(nu))?
    } else if let Some(j) = spec.zz_khz {
        Levels::two_qubit_zz(khz_to_rad(j))?
    } else if let Some(e) = &spec.energies_khz {
        Levels::new(space, e.iter().map(|&v| khz_to_rad(v)).collect())?
    } else {
        Levels::new(space, vec![0.0; space.dim()])?
    };
    if lv.space() != space {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: lv.space().dim() }.into());
    }
    Ok(lv)
}

fn sequence(space: StateSpace, initial: &[usize], spec: &LevelSpec, steps: &[SequenceStep], ctx: &mut Context) -> Result<()> {
    let levels = levels_for(space, spec)?;
    let init = QuantumState::mixture(space, initial)?;
    let run = run_sequence(&init, &levels, steps)?;
    let mut t = Table::new(&["basis_index", "population_frac"]);
    for (i, p) in run.state.populations().into_iter().enumerate() {
        t.push(vec![i.into(), p.into()]);
    }
    ctx.sink.table("populations", &t)?;
    let mut r = Report::default();
    r.add("steps", steps.len());
    for (i, p) in run.outcome_probabilities.iter().enumerate() {
        r.add(&format!("outcome_{}_prob_frac", i + 1), *p);
    }
    if space == StateSpace::TwoQubit {
        let tomo = tomography(&run.state)?;
        r.add("fidelity_witness_frac", fidelity_witness(&tomo));
        ctx.sink.table("tomogram", &tomogram_table(&tomo))?;
    }
    ctx.sink.report("sequence", &r)
}
