//! End-to-end checks of the optimize -> analyze -> export pipeline on a
//! deliberately tiny problem (single crystallite, short pulse).

use mqpulse_cli::config::validate_config;
use mqpulse_cli::manifest::RunManifest;
use mqpulse_cli::pulsefile::{export_shape, load_pulse, ExportFormat};
use mqpulse_cli::{run_analyze, run_optimize};

fn smoke_config(dir: &std::path::Path, mode: &str) -> String {
    let mode_block = match mode {
        "grape" => "kind = \"grape\"".to_string(),
        _ => "kind = \"group\"\nbasis_sizes = [4]".to_string(),
    };
    format!(
        r#"
[spin_system]
cq_hz = 3.2e6
eta = 0.2
larmor_hz = 130.9e6
rotor_hz = 30e3

[pulse_grid]
n_steps = 32
dt_s = 1e-7

[powder]
n_alpha_beta = 1
n_gamma = 1
rf_scales = [1.0]
repulsion_iterations = 10

[mode]
{mode_block}

[optimizer]
max_iterations = 5
initial_amplitude_hz = 100e3

[run]
n_starts = 2
base_seed = 7
output_dir = "{}"
"#,
        dir.display()
    )
}

#[test]
fn optimize_writes_complete_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = validate_config(&smoke_config(&out, "grape")).unwrap();
    let manifest = run_optimize(&cfg).unwrap();

    assert_eq!(manifest.runs.len(), 2);
    assert!(manifest.failures.is_empty());
    for rec in &manifest.runs {
        assert!(rec.final_fidelity >= 0.0 && rec.final_fidelity <= 1.0);
        assert!((rec.final_fidelity + rec.final_cost - 1.0).abs() < 1e-12);
        assert!(out.join(&rec.pulse_file).exists());
        assert!(out.join(&rec.history_file).exists());
    }
    assert!(out.join("manifest.json").exists());
    assert!(out.join("ensemble.txt").exists());
    assert!(out.join("config_normalized.toml").exists());

    // Manifest reload reproduces the exact config.
    let loaded = RunManifest::load(&out).unwrap();
    assert_eq!(loaded.config, cfg);
    assert_eq!(loaded.runs, manifest.runs);
}

#[test]
fn rerun_with_same_seed_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let cfg_a = validate_config(&smoke_config(&out_a, "grape")).unwrap();
    let cfg_b = validate_config(&smoke_config(&out_b, "grape")).unwrap();
    let man_a = run_optimize(&cfg_a).unwrap();
    let man_b = run_optimize(&cfg_b).unwrap();
    for (a, b) in man_a.runs.iter().zip(&man_b.runs) {
        assert_eq!(a.final_fidelity.to_bits(), b.final_fidelity.to_bits());
        assert_eq!(a.iterations, b.iterations);
    }
    // Pulse artifacts match byte for byte.
    for (a, b) in man_a.runs.iter().zip(&man_b.runs) {
        let pa = std::fs::read(out_a.join(&a.pulse_file)).unwrap();
        let pb = std::fs::read(out_b.join(&b.pulse_file)).unwrap();
        assert_eq!(pa, pb);
    }
    // And the serialized ensembles as well.
    let ea = std::fs::read(out_a.join("ensemble.txt")).unwrap();
    let eb = std::fs::read(out_b.join("ensemble.txt")).unwrap();
    assert_eq!(ea, eb);
}

#[test]
fn analyze_emits_tables_consistent_with_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = validate_config(&smoke_config(&out, "group")).unwrap();
    let manifest = run_optimize(&cfg).unwrap();
    let artifacts = run_analyze(&out).unwrap();

    assert!(artifacts.quartile_table.exists());
    assert!(artifacts.energy_table.exists());
    assert_eq!(artifacts.spectrum_tables.len(), 1);
    assert!(artifacts.spectrum_tables[0]
        .file_name()
        .unwrap()
        .to_str()
        .unwrap()
        .contains("group_m004"));

    // Quartile table median equals quartile_stats of the manifest
    // fidelities.
    let fidelities: Vec<f64> = manifest.runs.iter().map(|r| r.final_fidelity).collect();
    let expect = mqpulse::analysis::quartile_stats(&fidelities).unwrap();
    let table = std::fs::read_to_string(&artifacts.quartile_table).unwrap();
    let row = table.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split('\t').collect();
    assert_eq!(fields[0], "group");
    assert_eq!(fields[1], "4");
    let median: f64 = fields[5].parse().unwrap();
    // The table carries 12 significant digits.
    assert!((median - expect.median).abs() <= 1e-11 * expect.median.abs().max(1e-30));

    // GROUP coefficients were persisted and re-expand to the pulse.
    let rec = &manifest.runs[0];
    let coeff_file = rec.coefficients_file.as_ref().unwrap();
    let text = std::fs::read_to_string(out.join(coeff_file)).unwrap();
    let coeffs: mqpulse_cli::pulsefile::CoefficientFile = serde_json::from_str(&text).unwrap();
    let param = coeffs.to_parametrization().unwrap();
    let response = mqpulse::groupbasis::ResponseMatrix::fourier(4, 32, 1e-7).unwrap();
    let expanded = mqpulse::groupbasis::expand(&param, &response).unwrap();
    let stored = load_pulse(&out.join(&rec.pulse_file)).unwrap();
    for (a, b) in expanded.values().iter().zip(stored.values()) {
        assert!((a[0] - b[0]).abs() < 1e-6);
        assert!((a[1] - b[1]).abs() < 1e-6);
    }
}

#[test]
fn analyze_requires_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run_analyze(tmp.path()).is_err());
}

#[test]
fn export_round_trip_from_run_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = validate_config(&smoke_config(&out, "grape")).unwrap();
    let manifest = run_optimize(&cfg).unwrap();
    let pulse_path = out.join(&manifest.runs[0].pulse_file);

    // csv export -> import -> export is byte-stable.
    let csv1 = tmp.path().join("shape.csv");
    export_shape(&pulse_path, ExportFormat::Csv, &csv1).unwrap();
    let csv2 = tmp.path().join("shape2.csv");
    export_shape(&csv1, ExportFormat::Csv, &csv2).unwrap();
    assert_eq!(std::fs::read(&csv1).unwrap(), std::fs::read(&csv2).unwrap());

    // Vendor export parses as amplitude/phase rows within range.
    let vendor = tmp.path().join("shape.vendor.txt");
    export_shape(&pulse_path, ExportFormat::Vendor, &vendor).unwrap();
    let text = std::fs::read_to_string(&vendor).unwrap();
    let mut rows = 0;
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse().unwrap())
            .collect();
        assert_eq!(fields.len(), 2);
        assert!((0.0..=100.0 + 1e-9).contains(&fields[0]));
        assert!((0.0..360.0).contains(&fields[1]));
        rows += 1;
    }
    assert_eq!(rows, 32);
}
