use std::path::Path;
use std::process::Command;

use ionspec::chain::{diagonalize_single_sector, ChainModel};
use ionspec::cli::{convergence_report, parse_config, preset, preset_text, run};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ionspec"))
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn variant(name: &str, edits: &[(&str, &str)]) -> ionspec::cli::ExperimentConfig {
    let mut text = preset_text(name).unwrap().to_string();
    for (from, to) in edits {
        assert!(text.contains(from), "{from}");
        text = text.replace(from, to);
    }
    parse_config(&text, name).unwrap()
}

#[test]
fn unitary_sqc_top_peaks_sit_on_exciton_and_tunnel_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    run(&preset("fig2-sqc-unitary").unwrap(), Some(dir.path())).unwrap();
    let w = diagonalize_single_sector(&ChainModel::for_chain(5, 0.1, 0.0).unwrap()).frequencies;
    let diffs: Vec<f64> = w.iter().flat_map(|a| w.iter().map(move |b| a - b)).collect();
    let meta = read_json(&dir.path().join("spectrum.json"));
    let (bin_a, bin_b) = (meta["axis_a"]["step"].as_f64().unwrap(), meta["axis_b"]["step"].as_f64().unwrap());
    let peaks = read_json(&dir.path().join("peaks.json"));
    let peaks = peaks["peaks"].as_array().unwrap();
    assert!(peaks.len() >= 5);
    for p in &peaks[..5] {
        let (a, b) = (p["omega_a"].as_f64().unwrap(), p["omega_b"].as_f64().unwrap());
        let da = w.iter().map(|x| (a - x).abs()).fold(f64::INFINITY, f64::min);
        let db = diffs.iter().map(|x| (b - x).abs()).fold(f64::INFINITY, f64::min);
        assert!(da <= bin_a && db <= bin_b, "peak ({a}, {b}) is off the exciton grid");
    }
}

fn line_weight(lines: &Value, a: f64, b: f64) -> f64 {
    lines["lines"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|l| (l["omega_a"].as_f64().unwrap() - a).abs() < 1e-6 && (l["omega_b"].as_f64().unwrap() - b).abs() < 1e-6)
        .map(|l| l["relative"].as_f64().unwrap())
        .fold(0.0, f64::max)
}

#[test]
fn anharmonicity_opens_the_omega1_omega31_line() {
    let harm = tempfile::tempdir().unwrap();
    let anh = tempfile::tempdir().unwrap();
    run(&preset("fig3-dqc-harmonic").unwrap(), Some(harm.path())).unwrap();
    run(&preset("fig3-dqc-anharmonic").unwrap(), Some(anh.path())).unwrap();
    let (lh, la) = (read_json(&harm.path().join("lines.json")), read_json(&anh.path().join("lines.json")));
    assert!(lh["relative_residual"].as_f64().unwrap() < 1e-8);
    assert!(la["relative_residual"].as_f64().unwrap() < 1e-8);
    // omega'_31 = E_f3 - omega_1: 1.05 at U = 0, 1.0309 at U = -0.025
    let visible = |lines: &Value| -> Vec<(f64, f64)> {
        lines["lines"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|l| l["relative"].as_f64().unwrap() > 1e-3)
            .map(|l| (l["omega_a"].as_f64().unwrap(), l["omega_b"].as_f64().unwrap()))
            .collect()
    };
    let new_in_anh: Vec<(f64, f64)> = visible(&la)
        .into_iter()
        .filter(|(a, b)| (a - 0.95).abs() < 1e-6 && *b > 1.0 + 1e-6)
        .collect();
    assert_eq!(new_in_anh.len(), 1, "{new_in_anh:?}");
    let (_, w31) = new_in_anh[0];
    assert!(line_weight(&la, 0.95, w31) > 0.05);
    assert!(line_weight(&lh, 0.95, 1.05) < 1e-3);
    assert!(!visible(&lh).iter().any(|(a, b)| (a - 0.95).abs() < 1e-6 && *b > 1.0 + 1e-6));
}

#[test]
fn negative_dt_exits_with_code_two_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        "{\n  \"schema_version\": 1,\n  \"experiment\": \"sqc\",\n  \"chain\": { \"n_ions\": 2 },\n  \"grid\": { \"dt\": -0.5 }\n}\n",
    )
    .unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("grid.dt") && msg.contains("bad.json:5"), "{msg}");
}

#[test]
fn unknown_key_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.json");
    std::fs::write(&path, r#"{"schema_version": 1, "experiment": "chain-modes", "chain": {"n_ions": 3, "betta": 0.1}}"#).unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("betta"));
}

fn read_csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_are_bit_identical() {
    let cfg = variant("sqc-n2", &[("\"samples\": 512", "\"samples\": 64"), ("\"t_max\": 500.0", "\"t_max\": 64.0")]);
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&cfg, Some(d1.path())).unwrap();
    run(&cfg, Some(d2.path())).unwrap();
    let (c1, c2) = (read_csvs(d1.path()), read_csvs(d2.path()));
    assert_eq!(c1.len(), 5);
    assert_eq!(c1, c2);
    for name in ["peaks.json", "lines.json", "spectrum.json"] {
        assert_eq!(std::fs::read(d1.path().join(name)).unwrap(), std::fs::read(d2.path().join(name)).unwrap());
    }
}

#[test]
fn manifest_holds_the_fully_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let sparse = parse_config(r#"{"schema_version": 1, "experiment": "dqc", "chain": {"n_ions": 2}, "grid": {"samples": 16}}"#, "t").unwrap();
    let outcome = run(&sparse, Some(dir.path())).unwrap();
    let manifest = read_json(&outcome.output_dir.join("manifest.json"));
    assert_eq!(manifest["tool"], "ionspec");
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    let cfg = &manifest["config"];
    for key in [
        "name", "pulses", "readout_site", "noise", "delays", "scanned", "evaluation", "grid", "eta", "pad_factor",
        "transform", "peak_threshold", "output_dir", "seed",
    ] {
        assert!(cfg.get(key).is_some(), "manifest lacks `{key}`");
    }
    for key in ["samples", "dt", "t_max"] {
        assert!(cfg["grid"][key].is_number(), "grid.{key}");
    }
    for key in ["beta", "U", "excitation_cap"] {
        assert!(cfg["chain"][key].is_number(), "chain.{key}");
    }
    assert!(cfg["pulses"]["sites"].is_array() && cfg["pulses"]["model"].is_string());
    // Rerunning from the manifest's config reproduces the resolved config exactly.
    let again = parse_config(&cfg.to_string(), "manifest").unwrap();
    assert_eq!(serde_json::to_value(&again).unwrap(), *cfg);
    let listed: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for f in &listed {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn default_two_ion_sqc_passes_all_convergence_checks() {
    let report = convergence_report(&preset("sqc-n2").unwrap()).unwrap();
    assert_eq!(report.checks.len(), 3);
    assert!(report.passed(), "{report:?}");
}

#[test]
fn coarse_grid_flags_peak_drift() {
    let cfg = variant("sqc-n2", &[("\"samples\": 512", "\"samples\": 32")]);
    let report = convergence_report(&cfg).unwrap();
    assert!(!report.check("grid").unwrap().passed, "{report:?}");
}

#[test]
fn large_exact_pulses_flag_the_alpha_check() {
    // Linearized pulses give an alpha-independent normalized SQC signal, so
    // the alpha^2 contamination needs the exact displacement.
    let cfg = variant(
        "sqc-n2",
        &[
            ("\"alpha\": 0.1, \"model\": \"linearized\"", "\"alpha\": 0.4, \"model\": \"exact\""),
            ("\"excitation_cap\": 2", "\"excitation_cap\": 3"),
            ("\"steps\": 3", "\"steps\": 5"),
            ("\"samples\": 512", "\"samples\": 128"),
        ],
    );
    let report = convergence_report(&cfg).unwrap();
    let alpha = report.check("alpha").unwrap();
    assert!(!alpha.passed && alpha.metric > 0.01, "{report:?}");
}

#[test]
fn converge_rejects_spin_experiments() {
    assert!(convergence_report(&preset("fig4-spins-local").unwrap()).is_err());
}

#[test]
fn presets_list_names_every_preset() {
    let out = bin().args(["presets", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for (name, _) in ionspec::cli::PRESETS {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn chain_modes_and_spin_runs_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(&preset("chain-modes").unwrap(), Some(dir.path())).unwrap();
    assert!(outcome.files.contains(&"modes.csv".to_string()));
    let modes = std::fs::read_to_string(dir.path().join("modes.csv")).unwrap();
    assert_eq!(modes.lines().count(), 6);

    let spin = variant("fig4-spins-collective", &[("\"samples\": 256", "\"samples\": 64")]);
    let outcome = run(&spin, Some(dir.path())).unwrap();
    assert!(outcome.files.contains(&"peaks.json".to_string()));
    assert!(!outcome.files.contains(&"lines.json".to_string()));
}

#[test]
fn gate_error_scan_writes_csv_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = variant("fig4-gate-error-scan", &[("0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08", "0.02, 0.04")]);
    run(&cfg, Some(dir.path())).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("gate_error.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("gamma,fidelity,error,fwhm_omega1"));
    assert_eq!(csv.lines().count(), 3);
    let fit = read_json(&dir.path().join("fit.json"));
    assert!(fit["fit"]["slope"].as_f64().unwrap() > 0.0);
}
