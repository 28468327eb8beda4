use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use rydchain_cli::manifest::Manifest;
use rydchain_cli::run::find;
use rydchain_cli::table::{format_value, quantize, read_grid, read_series};
use rydchain_cli::{execute, run, Data, ExperimentConfig, RunOptions};

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(text, Path::new("test.json"), Path::new(".")).unwrap()
}

fn run_in(dir: &Path, text: &str) -> rydchain_cli::RunOutput {
    let opts = RunOptions {
        out: Some(dir.to_path_buf()),
        seed: None,
    };
    run(&config(text), &opts).unwrap()
}

#[test]
fn populations_file_has_one_column_per_site() {
    let dir = tempfile::tempdir().unwrap();
    run_in(
        dir.path(),
        r#"{"n_sites": 13, "protocol": {"kind": "populations", "times": {"stop_us": 0.5, "count": 6}}}"#,
    );
    let text = std::fs::read_to_string(dir.path().join("populations.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 14);
    assert_eq!(header[0], "t_us");
    assert_eq!(header[13], "site_12");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0.0000000000e+00");
    for (i, v) in first[1..].iter().enumerate() {
        let expect = if i % 2 == 0 {
            "1.0000000000e+00"
        } else {
            "0.0000000000e+00"
        };
        assert_eq!(*v, expect);
    }
}

#[test]
fn csv_round_trip_is_exact_and_checksums_hold() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        r#"{"n_sites": 10, "system": {"boundary": "periodic"}, "drive": {"model": "pxp"},
            "protocol": {"kind": "holevo", "times": {"stop_us": 1.0, "count": 11}}}"#,
    );
    for a in &out.artifacts {
        let Data::Grid(g) = &a.data else { continue };
        let read = read_grid(&dir.path().join(format!("{}.csv", a.name))).unwrap();
        assert_eq!(read.times, g.times);
        assert_eq!(read.sites, g.sites);
        assert_eq!(read.values, g.values, "{}", a.name);
    }
    assert_eq!(out.manifest.outputs.len(), 2);
    let loaded = Manifest::load(&out.manifest_path).unwrap();
    assert_eq!(loaded, out.manifest);
    assert!(loaded.verify(dir.path()).is_empty());
    std::fs::write(dir.path().join("holevo.csv"), "t_us,site_0\n").unwrap();
    assert_eq!(loaded.verify(dir.path()), vec!["holevo.csv".to_string()]);
}

#[test]
fn noisy_otoc_emits_means_and_standard_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        r#"{"n_sites": 6, "protocol": {"kind": "otoc", "times": {"stop_us": 0.6, "count": 4}},
            "noise": {"n_shots": 6, "seed": 3}}"#,
    );
    let names: Vec<&str> = out
        .manifest
        .outputs
        .iter()
        .map(|o| o.path.as_str())
        .collect();
    assert_eq!(
        names,
        [
            "otoc.csv",
            "otoc_stderr.csv",
            "iz.csv",
            "iz_stderr.csv",
            "mitigated.csv",
            "reference_pxp.csv"
        ]
    );
    assert_eq!(out.manifest.seed, Some(3));
    let stderr = read_grid(&dir.path().join("otoc_stderr.csv")).unwrap();
    assert!(stderr.values.iter().all(|v| *v >= 0.0));
    assert!(stderr.values.iter().any(|v| *v > 0.0));
    let reseeded = tempfile::tempdir().unwrap();
    let text = r#"{"n_sites": 6, "protocol": {"kind": "otoc", "times": {"stop_us": 0.6, "count": 4}},
                   "noise": {"n_shots": 6, "seed": 3}}"#;
    let opts = RunOptions {
        out: Some(reseeded.path().to_path_buf()),
        seed: Some(4),
    };
    let other = run(&config(text), &opts).unwrap();
    assert_eq!(other.manifest.seed, Some(4));
    assert_ne!(
        other.manifest.outputs[0].sha256,
        out.manifest.outputs[0].sha256
    );
}

#[test]
fn json_format_bundles_all_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        r#"{"n_sites": 7, "protocol": {"kind": "revival", "times": [0.0, 0.2, 0.4]}, "output": {"format": "json"}}"#,
    );
    assert_eq!(out.manifest.outputs.len(), 1);
    let text = std::fs::read_to_string(dir.path().join("results.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["revival"]["columns"][1], "overlap");
    assert_eq!(v["revival"]["rows"][0][1], 1.0);
}

#[test]
fn sweep_writes_one_grid_per_ratio() {
    let cfg = config(
        r#"{"n_sites": 7, "protocol": {"kind": "sweep", "times": {"stop_us": 0.8, "count": 5}},
            "sweep": {"axis": "v_over_omega", "values": [2, 4, 6, 8, 10]}}"#,
    );
    let artifacts = execute(&cfg).unwrap();
    for k in 0..5 {
        assert!(find(&artifacts, &format!("sweep_{k}_otoc")).is_some());
        assert!(find(&artifacts, &format!("sweep_{k}_pxp")).is_some());
    }
    let summary = find(&artifacts, "sweep_summary")
        .unwrap()
        .as_series()
        .unwrap();
    assert_eq!(summary.rows.len(), 5);
    let v_nn = summary.column("v_nn_mhz").unwrap();
    assert!((v_nn[2] - 6.0 * 1.21).abs() < 1e-9);
    let dev = summary.column("max_deviation").unwrap();
    assert!(
        dev[4] < dev[0],
        "stronger blockade should track PXP better: {dev:?}"
    );
}

#[test]
fn single_point_sweep_matches_a_plain_run() {
    let base = r#"{"n_sites": 8, "drive": {"detuning_mhz": 0.1140625},
                   "protocol": {"kind": "otoc", "times": {"stop_us": 0.6, "count": 4}}}"#;
    let plain = execute(&config(base)).unwrap();
    let swept = base.replace("\"otoc\"", "\"sweep\"").replace(
        "}}}",
        "}}, \"sweep\": {\"axis\": \"detuning_over_vnnn\", \"values\": [1.0]}}",
    );
    let artifacts = execute(&config(&swept)).unwrap();
    assert_eq!(
        find(&artifacts, "sweep_0_otoc").unwrap().as_grid(),
        find(&plain, "otoc").unwrap().as_grid()
    );
}

#[test]
fn mitigate_subcommand_divides_grids() {
    let dir = tempfile::tempdir().unwrap();
    let zz = dir.path().join("zz.csv");
    let iz = dir.path().join("iz.csv");
    std::fs::write(&zz, "t_us,site_0,site_1\n0.0,1.0,0.5\n1.0,0.2,0.01\n").unwrap();
    std::fs::write(&iz, "t_us,site_0,site_1\n0.0,1.0,0.5\n1.0,0.4,0.02\n").unwrap();
    let out_dir = dir.path().join("m");
    let status = Command::new(env!("CARGO_BIN_EXE_rydchain"))
        .args(["mitigate", "--floor", "0.05", "--out"])
        .arg(&out_dir)
        .arg("--zz")
        .arg(&zz)
        .arg("--iz")
        .arg(&iz)
        .status()
        .unwrap();
    assert!(status.success());
    let m = read_grid(&out_dir.join("mitigated.csv")).unwrap();
    assert_eq!(m.values[..3], [1.0, 1.0, 0.5]);
    assert!(m.values[3].is_nan());
    let manifest = Manifest::load(&out_dir.join("manifest.json")).unwrap();
    assert_eq!(manifest.command, "mitigate");
    assert!(manifest.verify(&out_dir).is_empty());
}

#[test]
fn failures_exit_nonzero_with_structured_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"n_sites": 9, "protocol": {"kind": "otoc", "perturb_site": 99}}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rydchain"))
        .arg("run")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "validation");
    let absent = Command::new(env!("CARGO_BIN_EXE_rydchain"))
        .args(["run", "--config", "/nonexistent/cfg.json"])
        .output()
        .unwrap();
    assert_eq!(absent.status.code(), Some(1));
}

#[test]
fn series_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        r#"{"n_sites": 8, "drive": {"model": "pxp"}, "protocol": {"kind": "reversal", "times": {"stop_us": 1, "count": 5}}}"#,
    );
    let s = read_series(&dir.path().join("reversal.csv")).unwrap();
    assert_eq!(s.columns, ["t_us", "fidelity"]);
    assert_eq!(Some(&s), out.artifacts[0].as_series());
    assert!(s
        .column("fidelity")
        .unwrap()
        .iter()
        .all(|f| (f - 1.0).abs() < 1e-9));
}

proptest! {
    #[test]
    fn formatting_is_a_fixed_point(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        let q = quantize(x);
        prop_assert_eq!(quantize(q), q);
        prop_assert_eq!(format_value(q), format_value(x));
        prop_assert!((q - x).abs() <= 5.0001e-11 * x.abs() || x.abs() < 1e-300);
    }
}

#[test]
fn reversal_fidelity_falls_with_rabi_frequency() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/omega_sweep.json");
    let cfg = ExperimentConfig::load(&path).unwrap();
    let artifacts = execute(&cfg).unwrap();
    let summary = find(&artifacts, "sweep_summary")
        .unwrap()
        .as_series()
        .unwrap();
    let f = summary.column("mean_reversal_fidelity").unwrap();
    assert!(f.windows(2).all(|w| w[1] < w[0]), "{f:?}");
    let times = find(&artifacts, "sweep_3_otoc")
        .unwrap()
        .as_grid()
        .unwrap()
        .times
        .clone();
    assert!(
        (times[0] - 0.2).abs() < 1e-12,
        "Ωt is held fixed: {times:?}"
    );
}
