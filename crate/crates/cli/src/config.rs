//! Run configuration: one TOML file with a section per subcommand, plus
//! `--set key=value` overrides applied before validation.

use std::path::{Path, PathBuf};

use nvp1_core::pulse::{ReadoutPhase, SequenceStep, StateSpace};
use nvp1_core::readout::fidelity::{FidelityMode, ThresholdPolicy};
use nvp1_core::readout::model::{SpinReadoutModel, TraceModel};
use nvp1_core::spin::{FieldVector, P1Params, FITTED_FIELD};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bath: Option<BathConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analyze: Option<AnalyzeConfig>,
}

fn fitted_params() -> P1Params {
    P1Params::FITTED
}

fn fitted_field() -> FieldVector {
    FITTED_FIELD
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "fitted_params")]
    pub params: P1Params,
    #[serde(default = "fitted_field")]
    pub field: FieldVector,
    /// Minimum 4|⟨f|Sx|i⟩|² for a main transition.
    #[serde(default = "SpectrumConfig::default_threshold")]
    pub main_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpectrum>,
}

impl SpectrumConfig {
    fn default_threshold() -> f64 {
        0.4
    }
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { params: P1Params::FITTED, field: FITTED_FIELD, main_threshold: 0.4, synthetic: None }
    }
}

/// Lorentzian dips at the main transitions on a uniform grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpectrum {
    pub f_min_mhz: f64,
    pub f_max_mhz: f64,
    pub step_mhz: f64,
    /// Full width at half maximum.
    pub linewidth_mhz: f64,
    /// Dip depth for unit intensity.
    pub contrast: f64,
    /// Gaussian noise standard deviation on the normalized signal.
    #[serde(default)]
    pub noise: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipWindow {
    pub label: String,
    pub lo_mhz: f64,
    pub hi_mhz: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// `frequency_mhz,label[,sigma_mhz]` rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dips: Option<PathBuf>,
    /// Spectrum file whose dips are located inside `windows`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub windows: Vec<DipWindow>,
    #[serde(default)]
    pub weighted: bool,
    #[serde(default = "fitted_params")]
    pub start_params: P1Params,
    #[serde(default = "fitted_field")]
    pub start_field: FieldVector,
    /// Levenberg–Marquardt iteration cap.
    #[serde(default = "FitConfig::default_iterations")]
    pub max_iterations: usize,
}

impl FitConfig {
    fn default_iterations() -> usize {
        nvp1_core::lsq::LmOptions::default().max_iterations
    }
}

fn default_j_khz() -> f64 {
    -17.8
}

fn default_m_i() -> i8 {
    1
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimulateConfig {
    /// Ideal two-P1 entangling sequence and its tomogram.
    Entanglement {
        /// J/h in kHz.
        #[serde(default = "default_j_khz")]
        j_khz: f64,
        /// Total interaction time 2t; defaults to 1/(2|J/h|).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        two_t_us: Option<f64>,
        /// Shots per tomography setting; exact expectations when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shots: Option<u64>,
    },
    /// ⟨XZ⟩ against 2t, with a fit of J.
    XzSweep {
        #[serde(default = "default_j_khz")]
        j_khz: f64,
        #[serde(default)]
        start_us: f64,
        step_us: f64,
        points: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shots: Option<u64>,
        /// Starting J/h for the fit; defaults to 0.8·j_khz.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        j_guess_khz: Option<f64>,
    },
    /// DEER, or DEER(y) when `readout` is set, on ideal coupled levels.
    Deer {
        /// ν/2π in kHz.
        nu_khz: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        tau_us: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau_max_us: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<usize>,
        #[serde(default = "default_m_i")]
        m_i: i8,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        readout: Option<ReadoutPhase>,
    },
    /// Arbitrary step list on a chosen state space.
    Sequence {
        space: StateSpace,
        /// Basis indices mixed with equal weight.
        initial: Vec<usize>,
        #[serde(default)]
        levels: LevelSpec,
        steps: Vec<SequenceStep>,
    },
    /// Repeated-DEER time traces from the jump model.
    Trace {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        model: Option<TraceModel>,
        bins: usize,
        #[serde(default = "one")]
        traces: usize,
    },
    /// Electron-spin readout pairs, written as an alternating record.
    SpinPairs {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        model: Option<SpinReadoutModel>,
        l_first: u32,
        l_second: u32,
        pairs: usize,
    },
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig::Entanglement { j_khz: default_j_khz(), two_t_us: None, shots: None }
    }
}

/// Level energies for `sequence`; at most one source. All zero when empty.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    /// ν/2π of an ideal NV–P1 pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ideal_coupling_khz: Option<f64>,
    /// J/h of an S_zS_z two-qubit coupling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zz_khz: Option<f64>,
    /// E/h per basis state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies_khz: Option<Vec<f64>>,
}

fn default_concentrations() -> Vec<f64> {
    vec![10.0, 25.0, 50.0, 75.0, 100.0, 150.0, 200.0]
}

fn default_n_d() -> usize {
    40
}

fn default_samples() -> usize {
    10_000
}

fn default_cutoff() -> f64 {
    nvp1_core::bath::DEFAULT_CUTOFF_NM
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BathConfig {
    /// 1/⟨T2*⟩ against concentration.
    Sweep {
        #[serde(default = "default_concentrations")]
        concentrations_ppb: Vec<f64>,
        #[serde(default = "default_n_d")]
        n_d: usize,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_cutoff")]
        cutoff_nm: f64,
    },
    /// Distributions of the strongest couplings, optionally conditioned on
    /// 1/T2*.
    Couplings {
        concentration_ppb: f64,
        #[serde(default = "four")]
        ranks: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window_khz: Option<(f64, f64)>,
        /// Fixed bin count; Freedman–Diaconis when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bins: Option<usize>,
        #[serde(default = "default_n_d")]
        n_d: usize,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_cutoff")]
        cutoff_nm: f64,
    },
    /// Coupling against one polar angle for each JT axis.
    JtMap {
        r_nm: f64,
        /// Fixed polar angle; sweeps φ. Exactly one of theta_deg/phi_deg.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_deg: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phi_deg: Option<f64>,
        start_deg: f64,
        stop_deg: f64,
        points: usize,
        #[serde(default = "default_m_i")]
        m_i: i8,
        #[serde(default = "fitted_params")]
        params: P1Params,
        #[serde(default = "fitted_field")]
        field: FieldVector,
    },
}

fn four() -> usize {
    4
}

impl Default for BathConfig {
    fn default() -> Self {
        BathConfig::Sweep {
            concentrations_ppb: default_concentrations(),
            n_d: default_n_d(),
            samples: default_samples(),
            cutoff_nm: default_cutoff(),
        }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    #[default]
    Sliding,
    Alternating,
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub record: PathBuf,
    #[serde(default)]
    pub pairing: Pairing,
    /// Gaussian components of the outcome histogram.
    #[serde(default = "two")]
    pub components: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<CorrelationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<FidelityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reset: Option<ResetConfig>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationConfig {
    /// (i, j) component pairs; every ordered pair when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<(usize, usize)>,
}

fn state_mode() -> FidelityMode {
    FidelityMode::State
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelityConfig {
    #[serde(default = "state_mode")]
    pub mode: FidelityMode,
    /// Evaluated as given; searched for when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<ThresholdPolicy>,
    #[serde(default)]
    pub min_relative_success: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_window: Option<(u32, u32)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetConfig {
    #[serde(default = "ResetConfig::default_k_total")]
    pub k_total: u32,
    #[serde(default = "ResetConfig::default_pass")]
    pub pass_threshold: u32,
    #[serde(default = "ResetConfig::default_t_deer")]
    pub t_deer_s: f64,
    #[serde(default = "ResetConfig::default_t_reset")]
    pub t_reset_s: f64,
    #[serde(default = "ResetConfig::default_target")]
    pub target_successes: usize,
    #[serde(default = "ResetConfig::default_max")]
    pub theta_max: u32,
    #[serde(default = "ResetConfig::default_max")]
    pub lambda_max: u32,
    /// (weight, per-shot bright probability); the fitted histogram mixture
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<Vec<(f64, f64)>>,
}

impl ResetConfig {
    fn default_k_total() -> u32 {
        420
    }
    fn default_pass() -> u32 {
        180
    }
    fn default_t_deer() -> f64 {
        684e-6
    }
    fn default_t_reset() -> f64 {
        1e-3
    }
    fn default_target() -> usize {
        1000
    }
    fn default_max() -> u32 {
        15
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies `key=value` overrides and validates
    /// against the schema.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| CliError::schema(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::schema(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::schema(e.to_string()))
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| CliError::schema(format!("override {spec:?} is not key=value")))?;
    let (key, raw) = (key.trim(), raw.trim());
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::schema(format!("bad override key {key:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| CliError::schema(format!("override {key:?}: {p:?} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, text).unwrap();
        RunConfig::load(Some(&p), &[])
    }

    #[test]
    fn unknown_key_rejected() {
        let e = parse("[bath]\nkind = \"sweep\"\nsample = 3\n").unwrap_err();
        assert!(e.to_string().contains("sample"), "{e}");
        assert!(parse("sed = 1").is_err());
    }

    #[test]
    fn missing_key_named() {
        let e = parse("[spectrum.params]\na_par = 1.0\np_par = 0.0\n").unwrap_err();
        assert!(e.to_string().contains("a_perp"), "{e}");
    }

    #[test]
    fn overrides_build_tables() {
        let c = RunConfig::load(None, &["bath.kind=sweep".into(), "bath.samples=12".into(), "seed=5".into()]).unwrap();
        assert_eq!(c.seed, Some(5));
        match c.bath.unwrap() {
            BathConfig::Sweep { samples, n_d, .. } => assert_eq!((samples, n_d), (12, 40)),
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::load(None, &["seed".into()]).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let c = RunConfig::load(
            None,
            &["simulate.kind=\"xz_sweep\"".into(), "simulate.step_us=5".into(), "simulate.points=41".into(), "seed=3".into()],
        )
        .unwrap();
        let text = c.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.to_toml().unwrap(), text);
    }
}
