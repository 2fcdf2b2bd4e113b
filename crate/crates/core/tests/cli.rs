use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heralded_teleport::cli::output::{
    from_csv, from_json, to_csv, to_json, BudgetOutput, ChiEntry, CountsFile, EventRecord, ProcessReport, StateMatrix,
    StateSummary, SummaryRow, TeleportSummary, TomographyReport,
};
use heralded_teleport::noise::BudgetLine;
use heralded_teleport::protocol::{InputQubit, MubState};
use heralded_teleport::ratebudget::SensitivityRow;
use heralded_teleport::tomography::simulate_counts;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heralded-teleport")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn json_round_trip<T: Serialize + DeserializeOwned>(dir: &Path, name: &str) {
    let text = read(dir, name);
    let value: T = from_json(&text).unwrap();
    assert_eq!(to_json(&value).unwrap(), text, "{name}");
}

fn csv_round_trip<T: Serialize + DeserializeOwned>(dir: &Path, name: &str) -> Vec<T> {
    let text = read(dir, name);
    let rows: Vec<T> = from_csv(&text).unwrap();
    assert_eq!(to_csv(&rows).unwrap(), text, "{name}");
    rows
}

#[test]
fn noiseless_teleport_gives_unit_fidelity() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    let config = configs().join("noiseless.toml");
    run_ok(&["teleport", "--config", config.to_str().unwrap(), "--heralds", "50", "--out", out]);
    let rows: Vec<StateSummary> = csv_round_trip(tmp.path(), "summary.csv");
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert!((r.fidelity - 1.0).abs() < 1e-9, "{r:?}");
        assert!(r.mean_attempts >= 1.0);
    }
    let events: Vec<EventRecord> = csv_round_trip(tmp.path(), "events.csv");
    assert_eq!(events.len(), 300);
    for e in &events {
        let expected = if e.bit == 0 { "Rx(pi)" } else { "Ry(pi)" };
        assert_eq!(e.correction, expected);
    }
    json_round_trip::<Vec<StateMatrix>>(tmp.path(), "states.json");
    json_round_trip::<TeleportSummary>(tmp.path(), "teleport_summary.json");
    let summary: TeleportSummary = from_json(&read(tmp.path(), "teleport_summary.json")).unwrap();
    assert!((summary.f_bar.unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn same_seed_gives_identical_files() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let out = dir.path().to_str().unwrap();
        run_ok(&["teleport", "--seed", "42", "--heralds", "100", "--format", "json", "--out", out]);
        run_ok(&["tomography", "--seed", "42", "--heralds", "100", "--out", out]);
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 8);
    for name in names {
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{name:?}");
    }

    let c = TempDir::new().unwrap();
    run_ok(&["teleport", "--seed", "43", "--heralds", "100", "--format", "json", "--out", c.path().to_str().unwrap()]);
    assert_ne!(read(a.path(), "events.json"), read(c.path(), "events.json"));
}

#[test]
fn tomography_outputs_round_trip() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().to_str().unwrap();
    let stdout = run_ok(&["tomography", "--heralds", "500", "--shots", "2000", "--out", out]);
    assert!(stdout.contains("process fidelity"));
    json_round_trip::<Vec<StateMatrix>>(tmp.path(), "reconstructed_states.json");
    json_round_trip::<TomographyReport>(tmp.path(), "tomography.json");
    let rows: Vec<SummaryRow> = csv_round_trip(tmp.path(), "tomography_summary.csv");
    assert_eq!(rows.len(), 9);

    let counts = read(tmp.path(), "counts.json");
    assert_eq!(CountsFile::parse(&counts).unwrap().to_json().unwrap(), counts);

    let report: TomographyReport = from_json(&read(tmp.path(), "tomography.json")).unwrap();
    assert!((0.80..=0.90).contains(&report.process.process_fidelity), "{}", report.process.process_fidelity);
    assert!(report.fidelity.relation_residual.unwrap().abs() < 0.02);

    // Feeding the emitted counts back in reproduces the same report.
    let again = TempDir::new().unwrap();
    let path = tmp.path().join("counts.json");
    run_ok(&["tomography", "--counts", path.to_str().unwrap(), "--out", again.path().to_str().unwrap()]);
    assert_eq!(read(tmp.path(), "tomography.json"), read(again.path(), "tomography.json"));
}

#[test]
fn identity_counts_give_unit_process_fidelity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let counts = MubState::ALL
        .iter()
        .map(|&m| simulate_counts(m, &InputQubit::from(m).ideal_state().density(), 100_000, 0.0, &mut rng).unwrap())
        .collect();
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("identity.json");
    fs::write(&path, CountsFile { counts }.to_json().unwrap()).unwrap();
    let out = tmp.path().join("out");
    run_ok(&["process", "--counts", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "csv"]);
    json_round_trip::<ProcessReport>(&out, "process.json");
    let report: ProcessReport = from_json(&read(&out, "process.json")).unwrap();
    assert!(report.fit.process_fidelity > 0.99, "{}", report.fit.process_fidelity);
    let chi: Vec<ChiEntry> = csv_round_trip(&out, "chi.csv");
    assert_eq!(chi.len(), 16);
}

#[test]
fn committed_example_counts_are_analyzable() {
    let example = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/counts_example.json");
    let tmp = TempDir::new().unwrap();
    let stdout = run_ok(&["tomography", "--counts", example.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(stdout.contains("average fidelity"));
}

#[test]
fn missing_basis_names_the_basis() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(
        &path,
        r#"{"counts": [{"input": "-x", "x": {"bright": 5, "dark": 1}, "y": {"bright": 3, "dark": 3}}]}"#,
    )
    .unwrap();
    let out = run(&["tomography", "--counts", path.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("basis z") && err.contains("-x"), "{err}");
}

#[test]
fn invalid_config_fails_with_diagnostics() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.toml");
    fs::write(&path, "[noise]\nhom_visibilty = 0.9\n").unwrap();
    let out = run(&["teleport", "--config", path.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("hom_visibilty"), "{err}");

    let out = run(&["teleport", "--mode", "rate-realistic", "--out", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("allow_unscaled_rate"));

    let out = run(&["teleport", "--mode", "fast"]);
    assert!(!out.status.success());
}

#[test]
fn budget_presets() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("paper");
    run_ok(&["budget", "--out", out.to_str().unwrap()]);
    json_round_trip::<BudgetOutput>(&out, "budget.json");
    csv_round_trip::<SensitivityRow>(&out, "sensitivity.csv");
    csv_round_trip::<BudgetLine>(&out, "noise_budget.csv");
    let report: BudgetOutput = from_json(&read(&out, "budget.json")).unwrap();
    assert!((report.rate.gate_probability - 2.01e-8).abs() < 0.01e-8);
    // 1 / (75 kHz * 2.01e-8) = 11.05 min; the quoted 2.2e-8 gives 10.1 min.
    assert!((report.rate.expected_wait_s / 60.0 - 11.05).abs() < 0.02);
    assert!((report.rate.expected_wait_quoted_s / 60.0 - 10.10).abs() < 0.01);

    let fit = tmp.path().join("fit.toml");
    fs::write(&fit, "[rate]\npreset = \"paper-fit\"\n").unwrap();
    let out = tmp.path().join("fit");
    run_ok(&["budget", "--config", fit.to_str().unwrap(), "--out", out.to_str().unwrap(), "--format", "json"]);
    let report: BudgetOutput = from_json(&read(&out, "budget.json")).unwrap();
    assert!((report.rate.expected_wait_quoted_s / 60.0 - 12.0).abs() < 0.01);
    json_round_trip::<Vec<SensitivityRow>>(&out, "sensitivity.json");

    let unit = tmp.path().join("unit.toml");
    fs::write(&unit, "[rate]\npreset = \"unit\"\n").unwrap();
    let out = tmp.path().join("unit");
    run_ok(&["budget", "--config", unit.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let report: BudgetOutput = from_json(&read(&out, "budget.json")).unwrap();
    assert_eq!(report.rate.gate_probability, 0.25);
}

#[test]
fn rate_realistic_config_runs() {
    let tmp = TempDir::new().unwrap();
    let config = configs().join("rate_scaled.toml");
    run_ok(&["teleport", "--config", config.to_str().unwrap(), "--heralds", "200", "--out", tmp.path().to_str().unwrap()]);
    let rows: Vec<StateSummary> = csv_round_trip(tmp.path(), "summary.csv");
    assert_eq!(rows.len(), 3);
    for r in rows {
        // Mean of Geometric(1e-4) is 1e4 with standard error 1e4/sqrt(200).
        assert!((r.mean_attempts - 1e4).abs() < 5.0 * 1e4 / 200f64.sqrt(), "{r:?}");
    }
}
