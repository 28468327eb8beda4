use std::f64::consts::PI;
use std::path::Path;

use rydchain_cli::config::{Boundary, LabelKind, Model, ProtocolKind, TimeSpec};
use rydchain_cli::{CliError, ExperimentConfig};

fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::from_json(text, Path::new("test.json"), Path::new("."))
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse(r#"{"n_sites": 9, "protocol": "populations"}"#).unwrap();
    assert_eq!(cfg.n(), 9);
    assert_eq!(cfg.protocol.kind, ProtocolKind::Populations);
    assert_eq!(cfg.system.boundary, Boundary::Open);
    assert!(cfg.system.constrained);
    assert_eq!(cfg.drive.model, Model::Rydberg);
    assert!((cfg.drive.omega() - 2.0 * PI * 1.21).abs() < 1e-12);
    assert!((cfg.drive.detuning() - 2.0 * PI * 0.22).abs() < 1e-12);
    assert!((cfg.drive.v_nn() - 2.0 * PI * 7.3).abs() < 1e-12);
    assert_eq!(cfg.system.spacing_um, 7.0);
    assert_eq!(cfg.initial.label, Some(LabelKind::Z2));
    assert_eq!(
        cfg.protocol.sites.as_deref(),
        Some(&[0, 1, 2, 3, 4, 5, 6, 7, 8][..])
    );
    assert_eq!(cfg.protocol.perturb_site, Some(4));
    assert!(cfg.noise.is_none());
}

#[test]
fn nested_size_and_protocol_object() {
    let cfg = parse(
        r#"{"system": {"n_sites": 10, "boundary": "periodic", "constrained": false},
            "protocol": {"kind": "otoc", "times": {"stop_us": 1.0, "count": 5}, "sites": [2, 4]}}"#,
    )
    .unwrap();
    assert_eq!(cfg.n(), 10);
    assert_eq!(cfg.protocol.times.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(cfg.protocol.sites, Some(vec![2, 4]));
    let listed =
        parse(r#"{"n_sites": 5, "protocol": {"kind": "otoc", "times": [0.0, 0.3]}}"#).unwrap();
    assert_eq!(listed.protocol.times, TimeSpec::List(vec![0.0, 0.3]));
}

#[test]
fn out_of_range_perturbation_is_rejected() {
    match parse(r#"{"n_sites": 9, "protocol": {"kind": "otoc", "perturb_site": 99}}"#) {
        Err(CliError::Validation(v)) => assert!(v.iter().any(|m| m.contains("perturb_site = 99"))),
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn every_violation_is_reported() {
    let err = parse(
        r#"{"n_sites": 9, "drive": {"omega_mhz": -1},
            "protocol": {"kind": "otoc", "perturb_site": 99, "sites": [12]},
            "initial": {"fidelity": 1.5}}"#,
    )
    .unwrap_err();
    let CliError::Validation(v) = err else {
        panic!("expected validation")
    };
    assert_eq!(v.len(), 4, "{v:?}");
}

#[test]
fn duplicate_keys_are_parse_errors() {
    let err =
        parse(r#"{"n_sites": 9, "protocol": {"kind": "otoc", "kind": "holevo"}}"#).unwrap_err();
    match err {
        CliError::Parse {
            line,
            column,
            message,
            ..
        } => {
            assert_eq!(line, 1);
            assert!(column > 0);
            assert!(message.contains("duplicate field `kind`"), "{message}");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unknown_keys_are_parse_errors() {
    for text in [
        r#"{"n_sites": 9, "protocol": "otoc", "colour": 1}"#,
        r#"{"n_sites": 9, "protocol": "otoc", "drive": {"omega": 1}}"#,
        r#"{"n_sites": 9, "protocol": {"kind": "otoc", "times": {"stop_us": 1, "count": 3, "step": 2}}}"#,
        r#"{"n_sites": 9, "protocol": "teleport"}"#,
    ] {
        assert!(matches!(parse(text), Err(CliError::Parse { .. })), "{text}");
    }
}

#[test]
fn missing_size_is_reported() {
    let CliError::Validation(v) = parse(r#"{"protocol": "otoc"}"#).unwrap_err() else {
        panic!("expected validation")
    };
    assert!(v[0].contains("n_sites"));
}

#[test]
fn model_and_basis_must_agree() {
    assert!(parse(r#"{"system": {"n_sites": 8, "constrained": false}, "drive": {"model": "pxp"}, "protocol": "otoc"}"#).is_err());
    let toy = parse(r#"{"n_sites": 8, "protocol": "toy"}"#).unwrap();
    assert_eq!(toy.drive.model, Model::Toy);
    assert!(!toy.system.constrained);
    assert_eq!(toy.initial.label, Some(LabelKind::Dicke));
    assert!(
        parse(r#"{"system": {"n_sites": 17, "constrained": false}, "protocol": "otoc"}"#).is_err()
    );
}

#[test]
fn microstate_tables_resolve_against_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("states.csv"),
        "pattern,weight\n00101,2\n10001,1\n",
    )
    .unwrap();
    let text = r#"{"n_sites": 5, "protocol": "populations",
                   "initial": {"fidelity": 0.9, "error_model": "microstate_table",
                               "microstate_table_path": "states.csv"}}"#;
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, text).unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(
        cfg.initial.microstate_table_path,
        Some(dir.path().join("states.csv"))
    );
    let missing = text.replace("states.csv", "absent.csv");
    std::fs::write(&path, missing).unwrap();
    assert!(matches!(
        ExperimentConfig::load(&path),
        Err(CliError::Validation(_))
    ));
}

#[test]
fn noise_block_defaults_to_experimental_values() {
    let cfg = parse(r#"{"n_sites": 9, "protocol": "otoc", "noise": {"n_shots": 4}}"#).unwrap();
    let n = cfg.noise.unwrap();
    assert_eq!(n.n_shots, 4);
    assert!((n.delta_phi - 0.08 * PI).abs() < 1e-15);
    assert_eq!(n.gamma_per_us, 0.035);
    assert_eq!(n.mitigation_floor, 0.05);
    assert!(parse(r#"{"n_sites": 9, "protocol": "holevo", "noise": {}}"#).is_err());
}

#[test]
fn bundled_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 5);
}
