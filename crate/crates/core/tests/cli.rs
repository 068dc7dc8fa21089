// SPDX-License-Identifier: Apache-2.0

use std::path::Path;
use std::process::Command;

use rvb_core::config::Config;
use rvb_core::experiments;

fn rvb(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rvb"))
        .args(args)
        .output()
        .expect("run rvb")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn figure_output_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = rvb(&["figure", "fig4b", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(read(a.path(), "fig4b.csv"), read(b.path(), "fig4b.csv"));
    assert_eq!(read(a.path(), "fig4b.json"), read(b.path(), "fig4b.json"));
}

#[test]
fn figure_determinism_does_not_depend_on_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let out = rvb(&["figure", "figS9", "--threads", threads, "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success());
    }
    assert_eq!(read(a.path(), "figS9.csv"), read(b.path(), "figS9.csv"));
}

#[test]
fn unknown_figure_is_an_error() {
    let out = rvb(&["figure", "fig9z", "--out", std::env::temp_dir().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("fig9z"));
}

#[test]
fn fig4b_recovers_configured_dephasing_times() {
    let fig = experiments::compute_figure("fig4b", &Config::default(), 1).unwrap();
    let s = &fig.summary;
    let h = s["fit_P_S12S34"]["T_phi_ns"].as_f64().unwrap();
    let v = s["fit_P_S23S14"]["T_phi_ns"].as_f64().unwrap();
    assert!((h / 144.0 - 1.0).abs() < 0.1, "{h}");
    assert!((v / 130.0 - 1.0).abs() < 0.1, "{v}");
}

#[test]
fn fig5ab_residual_vanishes_beyond_140_ns() {
    let fig = experiments::compute_figure("fig5ab", &Config::default(), 0).unwrap();
    let r = fig.summary["max_residual_amplitude_beyond_140ns"].as_f64().unwrap();
    assert!(r < 0.01, "{r}");
    let b = fig.panel("fig5b").unwrap();
    let at_balance: Vec<f64> = b.rows.iter().filter(|r| r[0] == 0.0).map(|r| r[2]).collect();
    let mean = at_balance.iter().sum::<f64>() / at_balance.len() as f64;
    assert!((mean - 0.75).abs() < 0.005, "{mean}");
}

#[test]
fn fig3e_sweeps_exchange_monotonically() {
    let fig = experiments::compute_figure("fig3e", &Config::default(), 0).unwrap();
    let t = fig.panel("fig3f").unwrap();
    let jx = t.column("Jx_fit_MHz").unwrap();
    assert!(jx.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn spec_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "[fig5ef]\nt_j_cut_ns = 30.0\nt_start_ns = 0.0\nt_stop_ns = 50.0\n").unwrap();
    let out = rvb(&["figure", "fig5ef", "--spec", spec.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&read(dir.path(), "fig5ef.json")).unwrap();
    assert_eq!(json["parameters"]["t_j_cut_ns"], 30.0);
    assert_eq!(json["summary"]["linecut"]["t_j_ns"], 30.0);
}

#[test]
fn simulate_writes_outcome_table() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq.toml");
    std::fs::write(
        &seq,
        r#"
[init]
state = "singlet_x"

[[segment]]
kind = "SetDiabatic"
target = { j12 = 25.0, j34 = 25.0, j23 = 25.0, j14 = 25.0 }
duration_ns = 0.0

[dwell]
start_ns = 0.0
stop_ns = 40.0
step_ns = 10.0
"#,
    )
    .unwrap();
    let csv = dir.path().join("trace.csv");
    let out = rvb(&["simulate", seq.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut r = csv::Reader::from_path(&csv).unwrap();
    assert_eq!(r.headers().unwrap().len(), 9);
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    let p0: f64 = rows[0][1].parse().unwrap();
    let p1: f64 = rows[1][1].parse().unwrap();
    assert!((p0 - 1.0).abs() < 1e-12 && (p1 - 0.25).abs() < 1e-9);
}

#[test]
fn calibrate_recovers_unbiased_device() {
    let dir = tempfile::tempdir().unwrap();
    let out = rvb(&["calibrate", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&read(dir.path(), "calibrate.json")).unwrap();
    let r = &json["report"];
    assert!(r["center_mv"][0].as_f64().unwrap().abs() < 0.5);
    assert!((r["j0x_estimate_mhz"].as_f64().unwrap() / 50.0 - 1.0).abs() < 0.02);
}

#[test]
fn calibrate_reports_offset_error_near_prediction() {
    // Away from Jx = Jy, where the second-order prediction applies.
    let mut cfg = Config::default();
    cfg.set("calibrate.device.j0x", 30.0);
    cfg.set("calibrate.device.j0y", 60.0);
    cfg.set("calibrate.device.dvx0", 2.0);
    cfg.set("calibrate.device.dvy0", -2.0);
    let (r, _) = experiments::cmd_calibrate(&cfg, 3).unwrap();
    assert!((r.center_mv[0] - 2.0).abs() < 0.5 && (r.center_mv[1] + 2.0).abs() < 0.5);
    assert!((r.j0x_estimate_mhz / 30.0 - 1.0).abs() < 0.01);
    assert!((r.j0y_estimate_mhz / 60.0 - 1.0).abs() < 0.01);
    let (p, e) = (r.offset_jy_error_predicted_mhz, r.offset_jy_error_exact_mhz);
    assert!((p / e - 1.0).abs() < 0.2, "{p} vs {e}");
}

#[test]
fn drift_hook_tilts_vertical_exchange() {
    let mut cfg = Config::default();
    cfg.set("calibrate.drift.enabled", true);
    let (r, _) = experiments::cmd_calibrate(&cfg, 0).unwrap();
    let jy: Vec<f64> = r.sweep.iter().map(|row| row[3]).collect();
    let (first, last) = (jy[0], jy[jy.len() - 1]);
    assert!((first - 46.0).abs() < 2.0 && (last - 56.0).abs() < 2.0, "{first} -> {last}");
}
