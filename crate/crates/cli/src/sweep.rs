//! Parameter sweeps comparing the Rydberg chain against ideal PXP dynamics.
//!
//! Each sweep point runs the configured OTOC protocol on the Rydberg
//! Hamiltonian and on the PXP model with the same Rabi frequency, and
//! records how far the two grids are apart together with the mean
//! time-reversal fidelity of the initial state.

use std::sync::Arc;

use rydchain::basis::build_basis;
use rydchain::hamiltonian::build_pxp;
use rydchain::protocols::{run_otoc, run_reversal_fidelity, Drive, PreparedEnsemble};
use rydchain::State;
use serde_json::json;

use crate::config::{ExperimentConfig, ProtocolKind, SweepAxis, SweepSection, TimeSpec};
use crate::error::{CliError, Result};
use crate::run::{self, evolve_config, otoc_config, Artifact, System};
use crate::table::Series;

/// Next-nearest-neighbour interaction of a van der Waals chain in units of
/// the nearest-neighbour one.
pub const NNN_RATIO: f64 = 1.0 / 64.0;

/// Summary of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub omega_mhz: f64,
    pub v_nn_mhz: f64,
    pub detuning_mhz: f64,
    pub max_deviation: f64,
    pub mean_deviation: f64,
    pub mean_reversal_fidelity: f64,
}

/// Configuration of the point `value` along `axis`.
///
/// Along the `omega` axis `v_nn/Ω` and `Δ/Ω` stay fixed and all evolution
/// times are rescaled so that `Ωt` is unchanged.
pub fn point_config(base: &ExperimentConfig, axis: SweepAxis, value: f64) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.protocol.kind = ProtocolKind::Otoc;
    cfg.sweep = None;
    let d = &mut cfg.drive;
    match axis {
        SweepAxis::VOverOmega => d.v_nn_mhz = value * d.omega_mhz,
        SweepAxis::DetuningOverVnnn => d.detuning_mhz = value * d.v_nn_mhz * NNN_RATIO,
        SweepAxis::Omega => {
            let scale = value / d.omega_mhz;
            d.omega_mhz = value;
            d.v_nn_mhz *= scale;
            d.detuning_mhz *= scale;
            let times: Vec<f64> = cfg
                .protocol
                .times
                .values()
                .iter()
                .map(|t| t / scale)
                .collect();
            cfg.protocol.times = TimeSpec::List(times);
        }
    }
    cfg
}

/// The ensemble of `sys` moved to the constrained basis of the PXP model.
fn constrained_ensemble(sys: &System) -> Result<PreparedEnsemble<f64>> {
    let basis = Arc::new(build_basis(
        sys.basis.n_sites(),
        sys.basis.boundary(),
        true,
    )?);
    let members = sys
        .ensemble
        .members
        .iter()
        .map(|(w, s)| {
            let idx = s
                .amplitudes()
                .iter()
                .position(|a| a.norm_sqr() > 0.5)
                .ok_or_else(|| {
                    CliError::Validation(vec!["sweeps need product initial states".into()])
                })?;
            Ok((*w, State::basis_state(&basis, s.basis().config_of(idx))?))
        })
        .collect::<Result<_>>()?;
    Ok(PreparedEnsemble {
        members,
        label: sys.ensemble.label,
    })
}

/// Runs one sweep point and returns its summary with the Rydberg and PXP
/// OTOC grids.
pub fn run_point(cfg: &ExperimentConfig, value: f64) -> Result<(SweepPoint, Artifact, Artifact)> {
    let sys = System::new(cfg)?;
    let ecfg = evolve_config();
    let ocfg = otoc_config(cfg);
    let otoc = run_otoc(&sys.ensemble, &Drive::ideal(&sys.hamiltonian), &ocfg, &ecfg)?;
    let pxp_ensemble = constrained_ensemble(&sys)?;
    let pxp = build_pxp(pxp_ensemble.basis(), cfg.drive.omega())?;
    let reference = run_otoc(&pxp_ensemble, &Drive::ideal(&pxp), &ocfg, &ecfg)?;
    let fidelity = run_reversal_fidelity(
        sys.initial_state(),
        &sys.hamiltonian,
        &ocfg.times,
        ocfg.reversal,
        run::gap(cfg),
        &ecfg,
    )?;
    let point = SweepPoint {
        value,
        omega_mhz: cfg.drive.omega_mhz,
        v_nn_mhz: cfg.drive.v_nn_mhz,
        detuning_mhz: cfg.drive.detuning_mhz,
        max_deviation: otoc.max_abs_diff(&reference)?,
        mean_deviation: otoc.mean_abs_diff(&reference)?,
        mean_reversal_fidelity: fidelity.iter().sum::<f64>() / fidelity.len() as f64,
    };
    Ok((
        point,
        Artifact::grid("otoc", &otoc),
        Artifact::grid("pxp", &reference),
    ))
}

/// Runs every point of the configured sweep.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let SweepSection { axis, values } = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Validation(vec!["a sweep run needs a sweep block".into()]))?;
    let mut out = Vec::new();
    let mut points = Vec::new();
    for (k, &value) in values.iter().enumerate() {
        let point_cfg = point_config(cfg, axis, value);
        let (point, otoc, pxp) = run_point(&point_cfg, value)?;
        log::info!(
            "sweep point {k} ({value}): max deviation {:.4}, mean reversal fidelity {:.4}",
            point.max_deviation,
            point.mean_reversal_fidelity
        );
        out.push(Artifact {
            name: format!("sweep_{k}_otoc"),
            ..otoc
        });
        out.push(Artifact {
            name: format!("sweep_{k}_pxp"),
            ..pxp
        });
        points.push(point);
    }
    let columns = [
        "value",
        "omega_mhz",
        "v_nn_mhz",
        "detuning_mhz",
        "max_deviation",
        "mean_deviation",
        "mean_reversal_fidelity",
    ];
    let mut series = Series::new(columns.iter().map(|c| c.to_string()).collect());
    series.rows = points
        .iter()
        .map(|p| {
            vec![
                p.value,
                p.omega_mhz,
                p.v_nn_mhz,
                p.detuning_mhz,
                p.max_deviation,
                p.mean_deviation,
                p.mean_reversal_fidelity,
            ]
        })
        .collect();
    let series = series.quantized();
    let best = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.max_deviation.total_cmp(&b.1.max_deviation))
        .map(|(k, _)| k);
    let summary = json!({
        "axis": axis,
        "values": values,
        "best_index": best,
        "points": series.rows.iter().map(|r| {
            columns.iter().zip(r).map(|(c, v)| (c.to_string(), json!(v))).collect::<serde_json::Map<_, _>>()
        }).collect::<Vec<_>>(),
    });
    out.push(Artifact::series("sweep_summary", series));
    out.push(Artifact::json("summary", summary));
    Ok(out)
}
