use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn nvp1(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvp1"))
        .args(args)
        .arg("--out")
        .arg(out)
        .current_dir(root())
        .env_remove("NVP1_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = nvp1(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn kv(path: &Path) -> BTreeMap<String, String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once(" = ").unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn num(m: &BTreeMap<String, String>, key: &str) -> f64 {
    m.get(key).unwrap_or_else(|| panic!("missing {key}")).parse().unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    (header, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (h, rows) = csv_rows(path);
    let i = h.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every file except the manifest, which carries the wall time.
fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn spectrum_table_has_sixty_transitions() {
    let tmp = TempDir::new().unwrap();
    ok(&["spectrum"], tmp.path());
    let text = fs::read_to_string(tmp.path().join("transitions.csv")).unwrap();
    assert_eq!(text.lines().count(), 61);
    assert!(text.lines().any(|l| l.contains("+1D") && l.contains(",258.018")));
    let s = kv(&tmp.path().join("spectrum_summary.kv"));
    assert_eq!(s["transitions"], "60");
    assert_eq!(s["main_transitions"], "12");
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["command"], "spectrum");
}

#[test]
fn without_hyperfine_main_lines_coincide() {
    let tmp = TempDir::new().unwrap();
    ok(&["spectrum", "--set", "spectrum.params={a_par=0.0, a_perp=0.0, p_par=0.0}"], tmp.path());
    let f = column(&tmp.path().join("transitions.csv"), "frequency_mhz");
    let main = column(&tmp.path().join("transitions.csv"), "main_flag");
    let lines: Vec<f64> = f.iter().zip(&main).filter(|(_, &m)| m == 1.0).map(|(f, _)| *f).collect();
    assert_eq!(lines.len(), 12);
    assert!(lines.iter().all(|x| (x - lines[0]).abs() < 1e-6), "{lines:?}");
    assert!((lines[0] - 128.0).abs() < 1.0);
}

#[test]
fn missing_key_is_named() {
    let tmp = TempDir::new().unwrap();
    let o = nvp1(&["spectrum", "--set", "spectrum.params={a_par=1.0, p_par=0.0}"], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("a_perp"));
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let o = nvp1(&["bath", "--set", "bath.kind=\"sweep\"", "--set", "bath.sampels=10"], tmp.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sampels"));
    assert!(!tmp.path().join("manifest.json").exists());
}

#[test]
fn measured_dips_fit_within_quoted_errors() {
    let tmp = TempDir::new().unwrap();
    ok(&["fit", "--config", "configs/measured-fit.toml"], tmp.path());
    let r = kv(&tmp.path().join("fit.kv"));
    let quoted = [
        ("a_par_mhz", 114.0264, 0.0009),
        ("a_perp_mhz", 81.312, 0.001),
        ("p_par_mhz", -3.9770, 0.0009),
        ("bx_g", 2.437, 0.002),
        ("by_g", 1.703, 0.001),
        ("bz_g", 45.5553, 0.0005),
    ];
    for (k, v, e) in quoted {
        assert!((num(&r, k) - v).abs() < 5.0 * e, "{k} = {}", r[k]);
    }
    assert!(num(&r, "rms_residual_khz") < 20.0);
    assert_eq!(column(&tmp.path().join("residuals.csv"), "residual_khz").len(), 11);
}

#[test]
fn synthetic_dips_round_trip() {
    let tmp = TempDir::new().unwrap();
    ok(&["fit", "--config", "configs/synthetic-roundtrip.toml"], tmp.path());
    let r = kv(&tmp.path().join("fit.kv"));
    for (k, v) in [("a_par_mhz", 113.5), ("a_perp_mhz", 80.9), ("p_par_mhz", -4.1), ("bx_g", 1.9), ("by_g", 2.2), ("bz_g", 45.3)] {
        assert!((num(&r, k) - v).abs() < 1e-4, "{k} = {}", r[k]);
    }
}

#[test]
fn snapshot_reruns_to_the_same_fit() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    ok(&["fit", "--config", "configs/measured-fit.toml"], a.path());
    let snapshot = a.path().join("config.toml");
    ok(&["fit", "--config", snapshot.to_str().unwrap()], b.path());
    assert_eq!(fs::read(a.path().join("fit.kv")).unwrap(), fs::read(b.path().join("fit.kv")).unwrap());
}

#[test]
fn fit_failures_map_to_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let few = tmp.path().join("five.csv");
    let text = fs::read_to_string(root().join("crates/cli/fixtures/synthetic_dips.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).take(6).collect();
    fs::write(&few, rows.join("\n")).unwrap();
    let set = format!("fit.dips=\"{}\"", few.display());
    let o = nvp1(&["fit", "--set", &set], &tmp.path().join("few"));
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));

    let o = nvp1(&["fit", "--config", "configs/synthetic-roundtrip.toml", "--set", "fit.max_iterations=1"], &tmp.path().join("cap"));
    assert_eq!(code(&o), 5);
    assert_eq!(manifest(&tmp.path().join("cap"))["status"], "error");

    let o = nvp1(&["fit", "--set", "fit.dips=\"no/such/file.csv\""], &tmp.path().join("io"));
    assert_eq!(code(&o), 7);

    let o = nvp1(&["fit"], &tmp.path().join("none"));
    assert_eq!(code(&o), 3);
}

#[test]
fn entangled_state_has_unit_fidelity() {
    let tmp = TempDir::new().unwrap();
    ok(&["simulate", "--config", "configs/entanglement.toml"], tmp.path());
    let r = kv(&tmp.path().join("entanglement.kv"));
    assert!((num(&r, "fidelity_witness_frac") - 1.0).abs() < 1e-9);
    assert!((num(&r, "fidelity_exact_frac") - 1.0).abs() < 1e-9);
    assert!(tmp.path().join("rho.txt").exists());
}

#[test]
fn xz_sweep_recovers_coupling() {
    let tmp = TempDir::new().unwrap();
    let args =
        ["simulate", "--seed", "17", "--set", "simulate={kind=\"xz_sweep\", step_us=2.0, points=60, shots=400}"];
    ok(&args, tmp.path());
    let r = kv(&tmp.path().join("xz_fit.kv"));
    assert!((num(&r, "j_fit_khz") / -17.8 - 1.0).abs() < 0.01, "{}", r["j_fit_khz"]);
}

#[test]
fn deer_y_follows_closed_form() {
    let tmp = TempDir::new().unwrap();
    ok(&["simulate", "--set", "simulate={kind=\"deer\", nu_khz=1.0, tau_us=[250.0, 125.0, 40.0], readout=\"+y\"}"], tmp.path());
    let path = tmp.path().join("deer_y.csv");
    let tau = column(&path, "tau_us");
    let up = column(&path, "p_up_ms0_frac");
    let down = column(&path, "p_down_ms0_frac");
    for ((t, u), d) in tau.iter().zip(&up).zip(&down) {
        let s = (2.0 * std::f64::consts::PI * 1e3 * t * 1e-6).sin();
        assert!((u - (1.0 - s) / 2.0).abs() < 1e-10);
        assert!((d - (1.0 + s) / 2.0).abs() < 1e-10);
    }
}

#[test]
fn bath_sweep_at_75_ppb() {
    let tmp = TempDir::new().unwrap();
    ok(&["bath", "--set", "bath={kind=\"sweep\", concentrations_ppb=[75.0], samples=1000}"], tmp.path());
    let v = column(&tmp.path().join("sweep.csv"), "inv_t2star_khz");
    assert!((4.0..=10.0).contains(&v[0]), "{v:?}");
}

#[test]
fn record_analysis_end_to_end() {
    let tmp = TempDir::new().unwrap();
    let rec = tmp.path().join("trace");
    ok(&["simulate", "--config", "configs/trace.toml", "--set", "simulate.bins=4000"], &rec);
    let set = format!("analyze.record=\"{}\"", rec.join("record.csv").display());
    let an = tmp.path().join("analysis");
    ok(&["analyze", "--config", "configs/readout-analysis.toml", "--set", &set, "--set", "analyze.reset.target_successes=200"], &an);

    let centers = column(&an.join("mixture.csv"), "center_counts");
    assert!((centers[0] - 200.0).abs() < 5.0, "{centers:?}");
    let c = column(&an.join("correlation.csv"), "c_ratio");
    assert_eq!(c.len(), 4);
    let f = kv(&an.join("fidelity.kv"));
    assert!((0.9..=1.0).contains(&num(&f, "f_frac")));
    let r = kv(&an.join("reset.kv"));
    assert!(num(&r, "gain_ratio") > 1.0);
    assert!(num(&r, "best_lambda_counts") <= num(&r, "best_theta_shots"));
}

#[test]
fn same_seed_gives_identical_outputs() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str, threads: &str| {
        let dir = tmp.path().join(name);
        ok(&["simulate", "--seed", "5", "--threads", threads, "--set", "simulate={kind=\"trace\", bins=500, traces=2}"], &dir.join("trace"));
        ok(&["bath", "--seed", "5", "--threads", threads, "--set", "bath={kind=\"sweep\", concentrations_ppb=[50.0, 100.0], samples=300}"], &dir.join("bath"));
        dir
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "2");
    for sub in ["trace", "bath"] {
        let first = outputs(&a.join(sub));
        assert!(first.len() >= 2);
        assert_eq!(first, outputs(&b.join(sub)), "{sub}");
        assert_eq!(first, outputs(&c.join(sub)), "{sub} with two threads");
    }
}

#[test]
fn out_dir_from_environment() {
    let tmp = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nvp1"))
        .arg("spectrum")
        .env("NVP1_OUT", tmp.path().join("env-out"))
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("env-out/transitions.csv").exists());
}

#[test]
fn json_format() {
    let tmp = TempDir::new().unwrap();
    ok(&["simulate", "--format", "json", "--config", "configs/entanglement.toml"], tmp.path());
    let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("tomogram.json")).unwrap()).unwrap();
    assert_eq!(t["columns"][0], "operator");
    assert_eq!(t["rows"].as_array().unwrap().len(), 15);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("entanglement.json")).unwrap()).unwrap();
    assert!((r["fidelity_exact_frac"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(manifest(tmp.path())["format"], "json");
}
