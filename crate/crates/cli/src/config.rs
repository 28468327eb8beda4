//! Experiment configuration files.
//!
//! Configurations are JSON documents. Frequencies are given in MHz and
//! converted to angular frequencies (rad/μs) when the simulation is set up;
//! times are in μs and lengths in μm. Every field has a default, so
//! `{"system": {"n_sites": 9}, "protocol": "populations"}` is a complete
//! configuration.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use rydchain::basis::{MAX_CONSTRAINED_SITES, MAX_UNCONSTRAINED_SITES};
use rydchain::protocols::central_site;
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    pub drive: DriveSection,
    pub protocol: ProtocolSection,
    pub initial: InitialSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    pub output: OutputSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Open,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default)]
    pub n_sites: Option<usize>,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "yes")]
    pub constrained: bool,
    #[serde(default = "default_spacing")]
    pub spacing_um: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_offsets: Option<Vec<f64>>,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            n_sites: None,
            boundary: default_boundary(),
            constrained: true,
            spacing_um: default_spacing(),
            position_offsets: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Rydberg,
    Pxp,
    Toy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    #[serde(default = "default_model")]
    pub model: Model,
    #[serde(default = "default_omega")]
    pub omega_mhz: f64,
    #[serde(default = "default_detuning")]
    pub detuning_mhz: f64,
    #[serde(default = "default_v_nn")]
    pub v_nn_mhz: f64,
    #[serde(default)]
    pub interaction_cutoff: Option<usize>,
    /// Coupling of the scarred toy model.
    #[serde(default = "default_toy_j")]
    pub toy_j_mhz: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        DriveSection {
            model: default_model(),
            omega_mhz: default_omega(),
            detuning_mhz: default_detuning(),
            v_nn_mhz: default_v_nn(),
            interaction_cutoff: None,
            toy_j_mhz: default_toy_j(),
        }
    }
}

impl DriveSection {
    pub fn omega(&self) -> f64 {
        2.0 * PI * self.omega_mhz
    }

    pub fn detuning(&self) -> f64 {
        2.0 * PI * self.detuning_mhz
    }

    pub fn v_nn(&self) -> f64 {
        2.0 * PI * self.v_nn_mhz
    }

    pub fn toy_j(&self) -> f64 {
        2.0 * PI * self.toy_j_mhz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Populations,
    Otoc,
    Holevo,
    Revival,
    Reversal,
    Toy,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ButterflyKind {
    SigmaZ,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReversalKind {
    GlobalZSandwich,
    ExactNegation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    None,
    DiagonalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexingKind {
    FixedSite,
    MeasuredUp,
}

/// Evolution times: an explicit list or `count` evenly spaced points from
/// `start_us` to `stop_us`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec {
    List(Vec<f64>),
    Range(TimeRange),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeRange {
    #[serde(default)]
    pub start_us: f64,
    pub stop_us: f64,
    pub count: usize,
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec::Range(TimeRange {
            start_us: 0.0,
            stop_us: 2.5,
            count: 51,
        })
    }
}

impl TimeSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            TimeSpec::List(v) => v.clone(),
            TimeSpec::Range(r) => match r.count {
                0 => Vec::new(),
                1 => vec![r.start_us],
                n => (0..n)
                    .map(|k| r.start_us + (r.stop_us - r.start_us) * k as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub kind: ProtocolKind,
    #[serde(default)]
    pub times: TimeSpec,
    /// Measured or reported sites; all sites when absent.
    #[serde(default)]
    pub sites: Option<Vec<usize>>,
    #[serde(default)]
    pub perturb_site: Option<usize>,
    #[serde(default)]
    pub flip_site: Option<usize>,
    #[serde(default = "default_butterfly")]
    pub butterfly: ButterflyKind,
    #[serde(default = "default_reversal")]
    pub reversal: ReversalKind,
    #[serde(default = "default_gap_model")]
    pub gap_model: GapKind,
    #[serde(default = "default_gap")]
    pub gap_us: f64,
    #[serde(default)]
    pub window: Option<Vec<usize>>,
    #[serde(default = "default_indexing")]
    pub indexing: IndexingKind,
    #[serde(default)]
    pub tomography: bool,
}

impl ProtocolSection {
    pub fn of_kind(kind: ProtocolKind) -> Self {
        ProtocolSection {
            kind,
            times: TimeSpec::default(),
            sites: None,
            perturb_site: None,
            flip_site: None,
            butterfly: default_butterfly(),
            reversal: default_reversal(),
            gap_model: default_gap_model(),
            gap_us: default_gap(),
            window: None,
            indexing: default_indexing(),
            tomography: false,
        }
    }
}

/// Accepts either a full protocol object or just its kind as a string.
fn protocol_from_str_or_map<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<ProtocolSection, D::Error> {
    struct ProtocolVisitor;
    impl<'de> Visitor<'de> for ProtocolVisitor {
        type Value = ProtocolSection;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a protocol kind or a protocol object")
        }
        fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
            let kind = ProtocolKind::deserialize(de::value::StrDeserializer::<E>::new(v))?;
            Ok(ProtocolSection::of_kind(kind))
        }
        fn visit_map<A: MapAccess<'de>>(
            self,
            map: A,
        ) -> std::result::Result<Self::Value, A::Error> {
            ProtocolSection::deserialize(de::value::MapAccessDeserializer::new(map))
        }
    }
    d.deserialize_any(ProtocolVisitor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Z2,
    Zero,
    Z2FlipCenter,
    Dicke,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModelKind {
    UniformUpFlip,
    MicrostateTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// `z2` by default, `dicke` for toy runs.
    #[serde(default)]
    pub label: Option<LabelKind>,
    /// Site pattern for `custom`, site 0 first, e.g. `"10100"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom_config: Option<String>,
    #[serde(default = "default_fidelity")]
    pub fidelity: f64,
    #[serde(default = "default_error_model")]
    pub error_model: ErrorModelKind,
    /// CSV file of `pattern,weight` rows, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub microstate_table_path: Option<PathBuf>,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            label: None,
            custom_config: None,
            fidelity: default_fidelity(),
            error_model: default_error_model(),
            microstate_table_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    PerShot,
    PerSegment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "default_delta_omega_rel")]
    pub delta_omega_rel: f64,
    /// RMS drive phase in radians.
    #[serde(default = "default_delta_phi")]
    pub delta_phi: f64,
    #[serde(default = "default_delta_detuning")]
    pub delta_detuning_mhz: f64,
    #[serde(default = "default_sigma_pos")]
    pub sigma_pos_um: f64,
    #[serde(default = "default_gamma")]
    pub gamma_per_us: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon_raw: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_lifetime")]
    pub t_rydberg_lifetime_us: Option<f64>,
    /// RMS error of the σ^z gate phase in radians.
    #[serde(default = "default_perturb_sigma")]
    pub perturb_phase_sigma: f64,
    #[serde(default = "default_shots")]
    pub n_shots: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_phase_mode")]
    pub phase_mode: PhaseMode,
    /// Smallest |IZ| that is divided by during mitigation.
    #[serde(default = "default_floor")]
    pub mitigation_floor: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            delta_omega_rel: default_delta_omega_rel(),
            delta_phi: default_delta_phi(),
            delta_detuning_mhz: default_delta_detuning(),
            sigma_pos_um: default_sigma_pos(),
            gamma_per_us: default_gamma(),
            epsilon_raw: default_epsilon(),
            eta: default_eta(),
            t_rydberg_lifetime_us: default_lifetime(),
            perturb_phase_sigma: default_perturb_sigma(),
            n_shots: default_shots(),
            seed: 0,
            phase_mode: default_phase_mode(),
            mitigation_floor: default_floor(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_out_dir(),
            format: default_format(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Nearest-neighbour interaction in units of Ω.
    VOverOmega,
    /// Detuning in units of the next-nearest-neighbour interaction.
    DetuningOverVnnn,
    /// Rabi frequency in MHz at fixed `v_nn/Ω` and `Δ/Ω`.
    Omega,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn yes() -> bool {
    true
}
fn default_boundary() -> Boundary {
    Boundary::Open
}
fn default_spacing() -> f64 {
    7.0
}
fn default_model() -> Model {
    Model::Rydberg
}
fn default_omega() -> f64 {
    1.21
}
fn default_detuning() -> f64 {
    0.22
}
fn default_v_nn() -> f64 {
    7.3
}
fn default_toy_j() -> f64 {
    2.0
}
fn default_butterfly() -> ButterflyKind {
    ButterflyKind::SigmaZ
}
fn default_reversal() -> ReversalKind {
    ReversalKind::GlobalZSandwich
}
fn default_gap_model() -> GapKind {
    GapKind::None
}
fn default_gap() -> f64 {
    0.2
}
fn default_indexing() -> IndexingKind {
    IndexingKind::FixedSite
}
fn default_fidelity() -> f64 {
    1.0
}
fn default_error_model() -> ErrorModelKind {
    ErrorModelKind::UniformUpFlip
}
fn default_delta_omega_rel() -> f64 {
    0.01
}
fn default_delta_phi() -> f64 {
    0.08 * PI
}
fn default_delta_detuning() -> f64 {
    0.025
}
fn default_sigma_pos() -> f64 {
    0.3
}
fn default_gamma() -> f64 {
    0.035
}
fn default_epsilon() -> f64 {
    0.01
}
fn default_eta() -> f64 {
    0.01
}
fn default_lifetime() -> Option<f64> {
    Some(140.0)
}
fn default_perturb_sigma() -> f64 {
    0.09 * PI
}
fn default_shots() -> usize {
    200
}
fn default_phase_mode() -> PhaseMode {
    PhaseMode::PerShot
}
fn default_floor() -> f64 {
    0.05
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_format() -> OutputFormat {
    OutputFormat::Csv
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default)]
    n_sites: Option<usize>,
    #[serde(default)]
    system: SystemSection,
    #[serde(default)]
    drive: DriveSection,
    #[serde(deserialize_with = "protocol_from_str_or_map")]
    protocol: ProtocolSection,
    #[serde(default)]
    initial: InitialSection,
    #[serde(default)]
    noise: Option<NoiseSection>,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    sweep: Option<SweepSection>,
}

impl ExperimentConfig {
    /// Parses JSON text, fills defaults and validates the result.
    ///
    /// `base` is the directory relative paths are resolved against.
    pub fn from_json(text: &str, origin: &Path, base: &Path) -> Result<Self> {
        let doc: Document = serde_json::from_str(text).map_err(|e| CliError::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut cfg = ExperimentConfig {
            system: doc.system,
            drive: doc.drive,
            protocol: doc.protocol,
            initial: doc.initial,
            noise: doc.noise,
            output: doc.output,
            sweep: doc.sweep,
        };
        let mut problems = Vec::new();
        match (doc.n_sites, cfg.system.n_sites) {
            (Some(a), Some(b)) if a != b => {
                problems.push(format!("n_sites = {a} disagrees with system.n_sites = {b}"))
            }
            (Some(a), _) => cfg.system.n_sites = Some(a),
            _ => {}
        }
        if let Some(p) = &cfg.initial.microstate_table_path {
            if p.is_relative() {
                cfg.initial.microstate_table_path = Some(base.join(p));
            }
        }
        cfg.resolve_defaults();
        problems.extend(cfg.violations());
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(CliError::Validation(problems))
        }
    }

    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json(&text, path, base)
    }

    pub fn n(&self) -> usize {
        self.system.n_sites.unwrap_or(0)
    }

    fn resolve_defaults(&mut self) {
        let Some(n) = self.system.n_sites else {
            return;
        };
        if n == 0 {
            return;
        }
        let p = &mut self.protocol;
        p.sites.get_or_insert_with(|| (0..n).collect());
        let c = central_site(n).min(n - 1);
        p.perturb_site.get_or_insert(c);
        p.flip_site.get_or_insert(c);
        let toy = p.kind == ProtocolKind::Toy;
        if toy {
            self.system.constrained = false;
            self.drive.model = Model::Toy;
        }
        self.initial
            .label
            .get_or_insert(if toy { LabelKind::Dicke } else { LabelKind::Z2 });
    }

    /// Every constraint the configuration violates.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let Some(n) = self.system.n_sites else {
            out.push("system.n_sites is required".into());
            return out;
        };
        let limit = match (self.drive.model, self.system.constrained) {
            (Model::Toy, _) => 14,
            (_, true) => MAX_CONSTRAINED_SITES,
            (_, false) => MAX_UNCONSTRAINED_SITES,
        };
        if n == 0 || n > limit {
            out.push(format!(
                "system.n_sites = {n} must lie in 1..={limit} for this model and basis"
            ));
        }
        let periodic = self.system.boundary == Boundary::Periodic;
        if periodic && n < 3 {
            out.push("periodic chains need at least 3 sites".into());
        }
        if !(self.system.spacing_um > 0.0) {
            out.push(format!(
                "system.spacing_um = {} must be positive",
                self.system.spacing_um
            ));
        }
        if let Some(off) = &self.system.position_offsets {
            if off.len() != n {
                out.push(format!(
                    "system.position_offsets has {} entries for {n} sites",
                    off.len()
                ));
            }
            if off
                .iter()
                .any(|d| !(d.abs() < self.system.spacing_um / 2.0))
            {
                out.push("system.position_offsets must stay below half the spacing".into());
            }
        }
        let d = &self.drive;
        for (name, v) in [("omega_mhz", d.omega_mhz), ("v_nn_mhz", d.v_nn_mhz)] {
            if !(v > 0.0) || !v.is_finite() {
                out.push(format!("drive.{name} = {v} must be positive"));
            }
        }
        if !d.detuning_mhz.is_finite() {
            out.push("drive.detuning_mhz must be finite".into());
        }
        match d.model {
            Model::Pxp if !self.system.constrained => {
                out.push("the pxp model needs system.constrained = true".into())
            }
            Model::Toy if self.system.constrained => {
                out.push("the toy model needs system.constrained = false".into())
            }
            Model::Toy if periodic && n < 4 => {
                out.push("the periodic toy model needs at least 4 sites".into())
            }
            _ => {}
        }
        let p = &self.protocol;
        let times = p.times.values();
        if times.is_empty() {
            out.push("protocol.times is empty".into());
        }
        if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            out.push("protocol.times must be finite and non-negative".into());
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            out.push("protocol.times must be non-decreasing".into());
        }
        let check_site = |out: &mut Vec<String>, name: &str, s: usize| {
            if s >= n {
                out.push(format!(
                    "protocol.{name} = {s} is outside the {n}-site chain"
                ));
            }
        };
        for &s in p.sites.iter().flatten() {
            check_site(&mut out, "sites", s);
        }
        if p.sites.as_ref().is_some_and(|s| s.is_empty()) {
            out.push("protocol.sites is empty".into());
        }
        if let Some(s) = p.perturb_site {
            check_site(&mut out, "perturb_site", s);
        }
        if let Some(s) = p.flip_site {
            check_site(&mut out, "flip_site", s);
        }
        if let Some(w) = &p.window {
            for &s in w {
                check_site(&mut out, "window", s);
            }
            if w.len() < 2 {
                out.push("protocol.window needs at least 2 sites".into());
            }
            if w.iter().collect::<BTreeSet<_>>().len() != w.len() {
                out.push("protocol.window repeats a site".into());
            }
        }
        if !(p.gap_us >= 0.0) {
            out.push(format!(
                "protocol.gap_us = {} must be non-negative",
                p.gap_us
            ));
        }
        if p.kind == ProtocolKind::Holevo && p.tomography && !periodic {
            log::warn!("tomography drops ⟨σx⟩, which only vanishes for periodic PXP chains");
        }
        let i = &self.initial;
        if !(i.fidelity > 0.0 && i.fidelity <= 1.0) {
            out.push(format!(
                "initial.fidelity = {} must lie in (0, 1]",
                i.fidelity
            ));
        }
        let label = i.label.unwrap_or(LabelKind::Z2);
        if i.fidelity < 1.0 && label != LabelKind::Z2 {
            out.push("initial.fidelity below 1 is only supported for label z2".into());
        }
        if i.fidelity < 1.0
            && matches!(
                p.kind,
                ProtocolKind::Revival
                    | ProtocolKind::Reversal
                    | ProtocolKind::Toy
                    | ProtocolKind::Sweep
            )
        {
            out.push(
                "revival, reversal, toy and sweep runs need a pure initial state (fidelity 1)"
                    .into(),
            );
        }
        match (label, &i.custom_config) {
            (LabelKind::Custom, None) => {
                out.push("initial.custom_config is required for label custom".into())
            }
            (LabelKind::Custom, Some(c)) => {
                if c.len() != n || !c.chars().all(|ch| ch == '0' || ch == '1') {
                    out.push(format!(
                        "initial.custom_config must be {n} characters of 0 and 1"
                    ));
                }
            }
            (_, Some(_)) => out.push("initial.custom_config is only used with label custom".into()),
            _ => {}
        }
        if i.fidelity < 1.0 && i.error_model == ErrorModelKind::MicrostateTable {
            match &i.microstate_table_path {
                None => out.push(
                    "initial.microstate_table_path is required for the microstate_table model"
                        .into(),
                ),
                Some(path) if !path.is_file() => out.push(format!(
                    "initial.microstate_table_path {} does not exist",
                    path.display()
                )),
                _ => {}
            }
        }
        if let Some(noise) = &self.noise {
            if p.kind != ProtocolKind::Otoc {
                out.push("a noise block is only supported for otoc runs".into());
            }
            if d.model != Model::Rydberg {
                out.push("noisy runs need the rydberg model".into());
            }
            if i.fidelity < 1.0 {
                out.push("noisy runs start from the ideal initial state".into());
            }
            for (name, v) in [
                ("delta_omega_rel", noise.delta_omega_rel),
                ("delta_phi", noise.delta_phi),
                ("delta_detuning_mhz", noise.delta_detuning_mhz),
                ("sigma_pos_um", noise.sigma_pos_um),
                ("gamma_per_us", noise.gamma_per_us),
                ("perturb_phase_sigma", noise.perturb_phase_sigma),
                ("mitigation_floor", noise.mitigation_floor),
            ] {
                if !(v >= 0.0) || !v.is_finite() {
                    out.push(format!("noise.{name} = {v} must be non-negative"));
                }
            }
            for (name, v) in [("epsilon_raw", noise.epsilon_raw), ("eta", noise.eta)] {
                if !(0.0..1.0).contains(&v) {
                    out.push(format!("noise.{name} = {v} must lie in [0, 1)"));
                }
            }
            if noise.t_rydberg_lifetime_us.is_some_and(|t| !(t > 0.0)) {
                out.push("noise.t_rydberg_lifetime_us must be positive".into());
            }
            if noise.n_shots == 0 {
                out.push("noise.n_shots must be at least 1".into());
            }
        }
        match (p.kind, &self.sweep) {
            (ProtocolKind::Sweep, None) => out.push("a sweep run needs a sweep block".into()),
            (_, Some(s)) => {
                if s.values.is_empty() {
                    out.push("sweep.values is empty".into());
                }
                let zero_ok = s.axis == SweepAxis::DetuningOverVnnn;
                if s.values
                    .iter()
                    .any(|v| !v.is_finite() || *v < 0.0 || (*v == 0.0 && !zero_ok))
                {
                    out.push("sweep.values must be positive".into());
                }
                if d.model != Model::Rydberg {
                    out.push("sweeps compare the rydberg model against pxp".into());
                }
            }
            _ => {}
        }
        out
    }
}
