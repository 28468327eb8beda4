//! Executing configured experiments.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rydchain::basis::build_basis;
use rydchain::evolve::EvolveConfig;
use rydchain::hamiltonian::{build_pxp, build_rydberg, build_toy, ChainGeometry, RydbergParams};
use rydchain::noise::{mitigate_otoc, NoiseParams, NoisyOtocSetup, PhaseNoiseMode};
use rydchain::protocols::{
    prepare_error_mixture, prepare_state, run_holevo, run_otoc, run_populations,
    run_reversal_fidelity, run_z2_revival, Butterfly, Drive, ErrorModel, Gap, GapModel,
    HolevoConfig, OtocProtocolConfig, PreparedEnsemble, Reversal, SiteIndexing, StateLabel,
};
use rydchain::{BoundaryCondition, Grid, HilbertBasis, Operator, SpinConfig, State};
use serde_json::json;

use crate::config::{
    Boundary, ButterflyKind, ErrorModelKind, ExperimentConfig, GapKind, IndexingKind, LabelKind,
    Model, OutputFormat, PhaseMode, ProtocolKind, ReversalKind,
};
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, OutputWriter};
use crate::sweep;
use crate::table::{self, quantize_grid, Series};

/// One result of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Data {
    Grid(Grid),
    Series(Series),
    Json(serde_json::Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    /// File stem of the output, e.g. `otoc` for `otoc.csv`.
    pub name: String,
    pub data: Data,
}

impl Artifact {
    pub fn grid(name: impl Into<String>, grid: &Grid) -> Self {
        Artifact {
            name: name.into(),
            data: Data::Grid(quantize_grid(grid)),
        }
    }

    pub fn series(name: impl Into<String>, series: Series) -> Self {
        Artifact {
            name: name.into(),
            data: Data::Series(series.quantized()),
        }
    }

    pub fn json(name: impl Into<String>, value: serde_json::Value) -> Self {
        Artifact {
            name: name.into(),
            data: Data::Json(value),
        }
    }

    pub fn as_grid(&self) -> Option<&Grid> {
        match &self.data {
            Data::Grid(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_series(&self) -> Option<&Series> {
        match &self.data {
            Data::Series(s) => Some(s),
            _ => None,
        }
    }
}

/// Finds an artifact by name.
pub fn find<'a>(artifacts: &'a [Artifact], name: &str) -> Option<&'a Artifact> {
    artifacts.iter().find(|a| a.name == name)
}

/// Command-line overrides of a configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
}

/// The simulated chain of a configuration.
pub struct System {
    pub basis: Arc<HilbertBasis>,
    pub geometry: ChainGeometry<f64>,
    pub rydberg: RydbergParams<f64>,
    pub hamiltonian: Operator,
    pub ensemble: PreparedEnsemble<f64>,
}

impl System {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let n = cfg.n();
        let boundary = match cfg.system.boundary {
            Boundary::Open => BoundaryCondition::Open,
            Boundary::Periodic => BoundaryCondition::Periodic,
        };
        let basis = Arc::new(build_basis(n, boundary, cfg.system.constrained)?);
        let mut geometry = ChainGeometry::uniform(n, boundary, cfg.system.spacing_um);
        if let Some(off) = &cfg.system.position_offsets {
            geometry = geometry.with_offsets(off.clone());
        }
        let d = &cfg.drive;
        let rydberg =
            RydbergParams::from_v_nn(d.omega(), d.detuning(), d.v_nn(), cfg.system.spacing_um)
                .with_cutoff(d.interaction_cutoff);
        let hamiltonian = match d.model {
            Model::Rydberg => build_rydberg(&basis, &geometry, &rydberg)?,
            Model::Pxp => build_pxp(&basis, d.omega())?,
            Model::Toy => build_toy(n, d.omega(), d.toy_j(), boundary)?,
        };
        let basis = hamiltonian.basis().clone();
        let ensemble = prepare_ensemble(cfg, &basis)?;
        Ok(System {
            basis,
            geometry,
            rydberg,
            hamiltonian,
            ensemble,
        })
    }

    /// The single initial state of a pure ensemble.
    pub fn initial_state(&self) -> &State {
        &self.ensemble.members[0].1
    }
}

fn state_label(cfg: &ExperimentConfig) -> StateLabel {
    match cfg.initial.label.unwrap_or(LabelKind::Z2) {
        LabelKind::Z2 => StateLabel::Z2,
        LabelKind::Zero => StateLabel::Zero,
        LabelKind::Z2FlipCenter => StateLabel::Z2FlipCenter,
        LabelKind::Dicke => StateLabel::Dicke,
        LabelKind::Custom => StateLabel::Custom(parse_pattern(
            cfg.initial.custom_config.as_deref().unwrap_or_default(),
        )),
    }
}

fn parse_pattern(bits: &str) -> SpinConfig {
    let up: Vec<usize> = bits
        .chars()
        .enumerate()
        .filter(|(_, c)| *c == '1')
        .map(|(i, _)| i)
        .collect();
    SpinConfig::from_sites(&up)
}

fn prepare_ensemble(
    cfg: &ExperimentConfig,
    basis: &Arc<HilbertBasis>,
) -> Result<PreparedEnsemble<f64>> {
    let i = &cfg.initial;
    if i.fidelity >= 1.0 {
        let label = state_label(cfg);
        return Ok(PreparedEnsemble::pure(label, prepare_state(label, basis)?));
    }
    let model = match i.error_model {
        ErrorModelKind::UniformUpFlip => ErrorModel::UniformUpFlip,
        ErrorModelKind::MicrostateTable => {
            let path = i.microstate_table_path.as_deref().unwrap_or(Path::new(""));
            ErrorModel::MicrostateTable(read_microstate_table(path, cfg.n())?)
        }
    };
    Ok(prepare_error_mixture(basis, i.fidelity, &model)?)
}

/// Reads `pattern,weight` rows; a header row is skipped.
pub fn read_microstate_table(path: &Path, n_sites: usize) -> Result<Vec<(SpinConfig, f64)>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let bad = |message: String| CliError::Table {
            path: path.to_path_buf(),
            message: format!("line {}: {message}", line + 1),
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let pattern = rec.get(0).unwrap_or_default();
        if line == 0 && !pattern.chars().all(|c| c == '0' || c == '1') {
            continue;
        }
        if rec.len() != 2 {
            return Err(bad(format!("expected 2 fields, found {}", rec.len())));
        }
        if pattern.len() != n_sites || !pattern.chars().all(|c| c == '0' || c == '1') {
            return Err(bad(format!(
                "`{pattern}` is not a {n_sites}-site pattern of 0 and 1"
            )));
        }
        let weight: f64 = rec[1]
            .parse()
            .map_err(|_| bad(format!("`{}` is not a number", &rec[1])))?;
        rows.push((parse_pattern(pattern), weight));
    }
    if rows.is_empty() {
        return Err(CliError::Table {
            path: path.to_path_buf(),
            message: "no microstates".into(),
        });
    }
    Ok(rows)
}

pub fn evolve_config() -> EvolveConfig<f64> {
    EvolveConfig::default()
}

/// OTOC schedule of a configuration.
pub fn otoc_config(cfg: &ExperimentConfig) -> OtocProtocolConfig<f64> {
    let p = &cfg.protocol;
    OtocProtocolConfig {
        perturb_site: p.perturb_site,
        perturb_phase: PI,
        measure_sites: p.sites.clone().unwrap_or_default(),
        times: p.times.values(),
        butterfly: match p.butterfly {
            ButterflyKind::SigmaZ => Butterfly::SigmaZ,
            ButterflyKind::Identity => Butterfly::Identity,
        },
        gap_model: gap_model(p.gap_model),
        gap_time: p.gap_us,
        reversal: reversal(p.reversal),
        indexing: match p.indexing {
            IndexingKind::FixedSite => SiteIndexing::FixedSite,
            IndexingKind::MeasuredUp => SiteIndexing::MeasuredUp,
        },
    }
}

fn gap_model(g: GapKind) -> GapModel {
    match g {
        GapKind::None => GapModel::None,
        GapKind::DiagonalOnly => GapModel::DiagonalOnly,
    }
}

fn reversal(r: ReversalKind) -> Reversal {
    match r {
        ReversalKind::GlobalZSandwich => Reversal::GlobalZSandwich,
        ReversalKind::ExactNegation => Reversal::ExactNegation,
    }
}

/// The pause between the segments of an echo, if it does anything.
pub fn gap(cfg: &ExperimentConfig) -> Option<Gap<f64>> {
    match cfg.protocol.gap_model {
        GapKind::None => None,
        GapKind::DiagonalOnly => Some(Gap {
            model: GapModel::DiagonalOnly,
            duration: cfg.protocol.gap_us,
        }),
    }
}

/// Noise parameters of a configuration's noise block.
pub fn noise_params(cfg: &ExperimentConfig) -> Option<NoiseParams<f64>> {
    cfg.noise.as_ref().map(|n| NoiseParams {
        delta_omega_rel: n.delta_omega_rel,
        delta_phi: n.delta_phi,
        delta_detuning: 2.0 * PI * n.delta_detuning_mhz,
        sigma_pos: n.sigma_pos_um,
        gamma: n.gamma_per_us,
        epsilon_raw: n.epsilon_raw,
        eta: n.eta,
        t_rydberg_lifetime: n.t_rydberg_lifetime_us,
        perturb_phase_sigma: n.perturb_phase_sigma,
        n_shots: n.n_shots,
        seed: n.seed,
        phase_mode: match n.phase_mode {
            PhaseMode::PerShot => PhaseNoiseMode::PerShot,
            PhaseMode::PerSegment => PhaseNoiseMode::PerSegment,
        },
    })
}

/// Keeps the columns of `sites`, in that order.
fn select_sites(grid: &Grid, sites: &[usize]) -> Result<Grid> {
    let idx: Vec<usize> = sites
        .iter()
        .map(|s| {
            grid.sites
                .iter()
                .position(|g| g == s)
                .expect("validated site")
        })
        .collect();
    let mut values = Vec::with_capacity(grid.n_times() * idx.len());
    for k in 0..grid.n_times() {
        let row = grid.row(k);
        values.extend(idx.iter().map(|&i| row[i]));
    }
    Ok(Grid::new(grid.times.clone(), sites.to_vec(), values)?)
}

/// Runs a configuration without writing anything.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let p = &cfg.protocol;
    if p.kind == ProtocolKind::Sweep {
        return sweep::execute(cfg);
    }
    let sys = System::new(cfg)?;
    let ecfg = evolve_config();
    let times = p.times.values();
    let sites = p.sites.clone().unwrap_or_default();
    let mut out = Vec::new();
    match p.kind {
        ProtocolKind::Populations => {
            let grid = run_populations(&sys.ensemble, &sys.hamiltonian, &times, &ecfg)?;
            out.push(Artifact::grid("populations", &select_sites(&grid, &sites)?));
        }
        ProtocolKind::Otoc => match noise_params(cfg) {
            None => {
                let grid = run_otoc(
                    &sys.ensemble,
                    &Drive::ideal(&sys.hamiltonian),
                    &otoc_config(cfg),
                    &ecfg,
                )?;
                out.push(Artifact::grid("otoc", &grid));
            }
            Some(noise) => out.extend(noisy_otoc(cfg, &sys, &noise)?),
        },
        ProtocolKind::Holevo | ProtocolKind::Toy => {
            let hcfg = HolevoConfig {
                times: times.clone(),
                sites: sites.clone(),
                flip_site: p.flip_site.unwrap_or_default(),
                tomography: p.tomography,
            };
            let (holevo, trace) = run_holevo(&sys.ensemble, &sys.hamiltonian, &hcfg, &ecfg)?;
            if p.kind == ProtocolKind::Toy {
                let series =
                    run_z2_revival(sys.initial_state(), &sys.hamiltonian, &times, None, &ecfg)?;
                out.push(Artifact::series(
                    "overlap",
                    Series::from_columns(&["t_us", "overlap"], &[&series.times, &series.overlap]),
                ));
                let pops = run_populations(&sys.ensemble, &sys.hamiltonian, &times, &ecfg)?;
                out.push(Artifact::grid("populations", &select_sites(&pops, &sites)?));
            }
            out.push(Artifact::grid("holevo", &holevo));
            out.push(Artifact::grid("trace_distance", &trace));
        }
        ProtocolKind::Revival => {
            let series = run_z2_revival(
                sys.initial_state(),
                &sys.hamiltonian,
                &times,
                p.window.as_deref(),
                &ecfg,
            )?;
            out.push(Artifact::series(
                "revival",
                Series::from_columns(
                    &["t_us", "overlap", "domain_wall"],
                    &[&series.times, &series.overlap, &series.domain_wall],
                ),
            ));
        }
        ProtocolKind::Reversal => {
            let fidelity = run_reversal_fidelity(
                sys.initial_state(),
                &sys.hamiltonian,
                &times,
                reversal(p.reversal),
                gap(cfg),
                &ecfg,
            )?;
            out.push(Artifact::series(
                "reversal",
                Series::from_columns(&["t_us", "fidelity"], &[&times, &fidelity]),
            ));
        }
        ProtocolKind::Sweep => unreachable!("handled above"),
    }
    Ok(out)
}

fn noisy_otoc(
    cfg: &ExperimentConfig,
    sys: &System,
    noise: &NoiseParams<f64>,
) -> Result<Vec<Artifact>> {
    let setup = NoisyOtocSetup {
        basis: sys.basis.clone(),
        geometry: sys.geometry.clone(),
        rydberg: sys.rydberg,
        ensemble: sys.ensemble.clone(),
        protocol: otoc_config(cfg),
        evolve: evolve_config(),
    };
    let result = setup.run(noise)?;
    let reference = setup.pxp_reference(noise)?;
    let floor = cfg.noise.as_ref().map_or(0.05, |n| n.mitigation_floor);
    let mitigated = mitigate_otoc(&result.zz, &result.iz, floor)?;
    if mitigated.invalid_count() > 0 {
        log::warn!(
            "{} of {} mitigated entries fall below the IZ floor {floor} and are left undefined",
            mitigated.invalid_count(),
            mitigated.grid.values.len()
        );
    }
    let mut out = vec![Artifact::grid("otoc", &result.zz)];
    if let Some(s) = table::stderr_grid(&result.zz) {
        out.push(Artifact::grid("otoc_stderr", &s));
    }
    out.push(Artifact::grid("iz", &result.iz));
    if let Some(s) = table::stderr_grid(&result.iz) {
        out.push(Artifact::grid("iz_stderr", &s));
    }
    out.push(Artifact::grid("mitigated", &mitigated.grid));
    out.push(Artifact::grid("reference_pxp", &reference));
    Ok(out)
}

/// JSON form of all artifacts, as written to `results.json`.
pub fn artifacts_json(artifacts: &[Artifact]) -> serde_json::Value {
    let mut map = serde_json::Map::new();
    for a in artifacts {
        let v = match &a.data {
            Data::Grid(g) => json!({
                "type": "grid",
                "times_us": g.times,
                "sites": g.sites,
                "values": (0..g.n_times()).map(|k| g.row(k).to_vec()).collect::<Vec<_>>(),
            }),
            Data::Series(s) => json!({
                "type": "series",
                "columns": s.columns,
                "rows": s.rows,
            }),
            Data::Json(v) => v.clone(),
        };
        map.insert(a.name.clone(), v);
    }
    serde_json::Value::Object(map)
}

/// Writes artifacts in the configured format and finishes with the manifest.
pub fn write_outputs(
    artifacts: &[Artifact],
    dir: &Path,
    format: OutputFormat,
    command: &str,
    seed: Option<u64>,
    config: serde_json::Value,
    mut writer: OutputWriter,
) -> Result<(Manifest, PathBuf)> {
    debug_assert_eq!(writer.dir(), dir);
    match format {
        OutputFormat::Csv => {
            for a in artifacts {
                match &a.data {
                    Data::Grid(g) => {
                        writer.write(&format!("{}.csv", a.name), "grid", &table::grid_to_csv(g))?
                    }
                    Data::Series(s) => writer.write(
                        &format!("{}.csv", a.name),
                        "series",
                        &table::series_to_csv(s),
                    )?,
                    Data::Json(v) => {
                        let mut text = serde_json::to_vec_pretty(v).expect("json serializes");
                        text.push(b'\n');
                        writer.write(&format!("{}.json", a.name), "json", &text)?
                    }
                }
            }
        }
        OutputFormat::Json => {
            let mut text =
                serde_json::to_vec_pretty(&artifacts_json(artifacts)).expect("json serializes");
            text.push(b'\n');
            writer.write("results.json", "json", &text)?;
        }
    }
    writer.finish(command, seed, config)
}

/// Applies command-line overrides to a configuration.
pub fn apply_options(cfg: &mut ExperimentConfig, opts: &RunOptions) {
    if let Some(out) = &opts.out {
        cfg.output.dir = out.clone();
    }
    if let (Some(seed), Some(noise)) = (opts.seed, cfg.noise.as_mut()) {
        noise.seed = seed;
    }
}

/// Runs a configuration and writes its outputs and manifest.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput> {
    run_command(cfg, opts, "run")
}

/// Runs a sweep configuration as the `sweep` subcommand.
pub fn sweep_command(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput> {
    run_command(cfg, opts, "sweep")
}

fn run_command(cfg: &ExperimentConfig, opts: &RunOptions, command: &str) -> Result<RunOutput> {
    let mut cfg = cfg.clone();
    apply_options(&mut cfg, opts);
    let dir = cfg.output.dir.clone();
    let writer = OutputWriter::create(&dir)?;
    let artifacts = execute(&cfg)?;
    let seed = cfg.noise.as_ref().map(|n| n.seed);
    let echo = serde_json::to_value(&cfg).expect("config serializes");
    let (manifest, manifest_path) = write_outputs(
        &artifacts,
        &dir,
        cfg.output.format,
        command,
        seed,
        echo,
        writer,
    )?;
    Ok(RunOutput {
        artifacts,
        manifest,
        manifest_path,
    })
}

/// Mitigates a measured ZZ-OTOC grid by an IZ-OTOC grid read from CSV.
pub fn mitigate_files(zz: &Path, iz: &Path, floor: f64, out: &Path) -> Result<RunOutput> {
    if !(floor >= 0.0) || !floor.is_finite() {
        return Err(CliError::Validation(vec![format!(
            "--floor = {floor} must be non-negative"
        )]));
    }
    let writer = OutputWriter::create(out)?;
    let zz_grid = table::read_grid(zz)?;
    let iz_grid = table::read_grid(iz)?;
    if zz_grid.times != iz_grid.times {
        return Err(CliError::Table {
            path: iz.to_path_buf(),
            message: format!("times differ from {}", zz.display()),
        });
    }
    let mitigated = mitigate_otoc(&zz_grid, &iz_grid, floor)?;
    if mitigated.invalid_count() > 0 {
        log::warn!(
            "{} entries fall below the IZ floor {floor}",
            mitigated.invalid_count()
        );
    }
    let artifacts = vec![Artifact::grid("mitigated", &mitigated.grid)];
    let echo = json!({ "zz": zz, "iz": iz, "floor": floor });
    let (manifest, manifest_path) = write_outputs(
        &artifacts,
        out,
        OutputFormat::Csv,
        "mitigate",
        None,
        echo,
        writer,
    )?;
    Ok(RunOutput {
        artifacts,
        manifest,
        manifest_path,
    })
}
