//! End-to-end experiment protocols: state preparation, population dynamics,
//! ZZ/IZ out-of-time-ordered correlators with particle-hole time reversal,
//! Holevo-information transport, wavefront detection, the Bloch-rotation
//! indicator and revival studies.

use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::{BoundaryCondition, HilbertBasis, SpinConfig};
use crate::error::{Error, Result};
use crate::evolve::{
    apply_global_z, apply_local_x, apply_local_z, evolve_diagonal, EvolveConfig, Propagator,
    StateVector,
};
use crate::hamiltonian::SparseOperator;
use crate::quantities::{
    check_weights, domain_wall_density, holevo, reduced_density, tomography_reconstruct,
    trace_distance, SingleSiteDensity,
};
use crate::scalar::Real;

/// Real values on a times × sites grid, row-major by time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTemporalGrid<T: Real> {
    pub times: Vec<T>,
    pub sites: Vec<usize>,
    pub values: Vec<T>,
    pub stderr: Option<Vec<T>>,
}

impl<T: Real> SpatioTemporalGrid<T> {
    pub fn new(times: Vec<T>, sites: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if values.len() != times.len() * sites.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} times × {} sites",
                values.len(),
                times.len(),
                sites.len()
            )));
        }
        Ok(SpatioTemporalGrid {
            times,
            sites,
            values,
            stderr: None,
        })
    }

    pub fn zeros(times: Vec<T>, sites: Vec<usize>) -> Self {
        let values = vec![T::zero(); times.len() * sites.len()];
        SpatioTemporalGrid {
            times,
            sites,
            values,
            stderr: None,
        }
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn get(&self, time_index: usize, site_index: usize) -> T {
        self.values[time_index * self.sites.len() + site_index]
    }

    pub fn set(&mut self, time_index: usize, site_index: usize, value: T) {
        let n = self.sites.len();
        self.values[time_index * n + site_index] = value;
    }

    pub fn row(&self, time_index: usize) -> &[T] {
        let n = self.sites.len();
        &self.values[time_index * n..(time_index + 1) * n]
    }

    pub fn column(&self, site_index: usize) -> Vec<T> {
        (0..self.n_times())
            .map(|t| self.get(t, site_index))
            .collect()
    }

    /// Column of the grid belonging to chain site `site`.
    pub fn site_series(&self, site: usize) -> Option<Vec<T>> {
        self.sites
            .iter()
            .position(|&s| s == site)
            .map(|k| self.column(k))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.times.len() == other.times.len() && self.sites == other.sites
    }

    /// Largest absolute entrywise difference; entries that are NaN in either
    /// grid are skipped.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.diffs(other).map(|d| d.fold(T::zero(), T::max))
    }

    /// Mean absolute entrywise difference over entries finite in both grids.
    pub fn mean_abs_diff(&self, other: &Self) -> Result<T> {
        let (sum, count) = self
            .diffs(other)?
            .fold((T::zero(), 0usize), |(s, c), d| (s + d, c + 1));
        Ok(if count == 0 {
            T::nan()
        } else {
            sum / T::from_count(count)
        })
    }

    fn diffs<'a>(&'a self, other: &'a Self) -> Result<impl Iterator<Item = T> + 'a> {
        if !self.same_shape(other) {
            return Err(Error::ShapeMismatch("grids differ in shape".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| (*a - *b).abs()))
    }
}

/// Named initial states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateLabel {
    /// Néel pattern with even sites excited.
    Z2,
    /// All sites in the ground state.
    Zero,
    /// `|ℤ₂⟩` with the central site flipped.
    Z2FlipCenter,
    /// Fully polarized Dicke state `|s = N/2, S^z = −N/2⟩` (all down).
    Dicke,
    Custom(SpinConfig),
}

/// Excited-site pattern of `|ℤ₂⟩`: every even site is up. On a periodic
/// chain of odd length the last site stays down so the pattern respects
/// the blockade across the wrap-around bond.
pub fn z2_config(n_sites: usize, boundary: BoundaryCondition) -> SpinConfig {
    let last = if boundary == BoundaryCondition::Periodic && n_sites % 2 == 1 && n_sites > 1 {
        n_sites - 1
    } else {
        n_sites
    };
    SpinConfig((0..last).step_by(2).fold(0, |w, s| w | (1 << s)))
}

/// Central site of a chain, chosen among the excited sites of `|ℤ₂⟩`.
pub fn central_site(n_sites: usize) -> usize {
    let h = n_sites / 2;
    if h % 2 == 0 {
        h
    } else {
        h - 1
    }
}

/// Computational product state for a label.
pub fn prepare_state<T: Real>(
    label: StateLabel,
    basis: &Arc<HilbertBasis>,
) -> Result<StateVector<T>> {
    StateVector::basis_state(basis, label_config(label, basis))
}

fn label_config(label: StateLabel, basis: &HilbertBasis) -> SpinConfig {
    let n = basis.n_sites();
    match label {
        StateLabel::Z2 => z2_config(n, basis.boundary()),
        StateLabel::Zero | StateLabel::Dicke => SpinConfig(0),
        StateLabel::Z2FlipCenter => z2_config(n, basis.boundary()).flipped(central_site(n)),
        StateLabel::Custom(c) => c,
    }
}

/// Statistical mixture of pure states sharing one basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedEnsemble<T: Real> {
    pub members: Vec<(T, StateVector<T>)>,
    pub label: StateLabel,
}

impl<T: Real> PreparedEnsemble<T> {
    pub fn pure(label: StateLabel, state: StateVector<T>) -> Self {
        PreparedEnsemble {
            members: vec![(T::one(), state)],
            label,
        }
    }

    /// Single-member ensemble of a labelled product state.
    pub fn from_label(label: StateLabel, basis: &Arc<HilbertBasis>) -> Result<Self> {
        Ok(Self::pure(label, prepare_state(label, basis)?))
    }

    pub fn basis(&self) -> &Arc<HilbertBasis> {
        self.members[0].1.basis()
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::ConfigInvalid("empty ensemble".into()));
        }
        let b = self.basis();
        if self.members.iter().any(|(_, s)| !s.basis().same_space(b)) {
            return Err(Error::BasisMismatch(
                "ensemble members use different bases".into(),
            ));
        }
        check_weights(self.members.iter().map(|(w, _)| *w))
    }
}

/// How the non-ideal weight of a prepared `|ℤ₂⟩` is distributed.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorModel<T: Real> {
    /// Equal weight on every single ↑→↓ flip of `|ℤ₂⟩`.
    UniformUpFlip,
    /// Weights proportional to measured counts. Entries equal to `|ℤ₂⟩`
    /// itself are ignored, since its weight is the fidelity.
    MicrostateTable(Vec<(SpinConfig, T)>),
}

/// `|ℤ₂⟩` prepared with the given fidelity plus an error distribution.
pub fn prepare_error_mixture<T: Real>(
    basis: &Arc<HilbertBasis>,
    fidelity: T,
    model: &ErrorModel<T>,
) -> Result<PreparedEnsemble<T>> {
    if !(fidelity > T::zero() && fidelity <= T::one()) {
        return Err(Error::InvalidParameter(format!(
            "fidelity {fidelity} outside (0, 1]"
        )));
    }
    let z2 = z2_config(basis.n_sites(), basis.boundary());
    let mut members = vec![(fidelity, StateVector::basis_state(basis, z2)?)];
    let rest = T::one() - fidelity;
    let errors: Vec<(SpinConfig, T)> = match model {
        ErrorModel::UniformUpFlip => (0..basis.n_sites())
            .filter(|&s| z2.is_up(s))
            .map(|s| (z2.flipped(s), T::one()))
            .collect(),
        ErrorModel::MicrostateTable(table) => {
            for (cfg, count) in table {
                if !(*count >= T::zero()) || !count.is_finite() {
                    return Err(Error::TableInvalid(format!("count {count} for {cfg:b}")));
                }
                if basis.index_of(*cfg).is_none() {
                    return Err(Error::TableInvalid(format!(
                        "config {} is not in the basis",
                        cfg.to_string_sites(basis.n_sites())
                    )));
                }
            }
            table.iter().filter(|(c, _)| *c != z2).cloned().collect()
        }
    };
    if rest > T::zero() {
        let total: T = errors.iter().map(|(_, c)| *c).sum();
        if !(total > T::zero()) {
            return Err(Error::TableInvalid(
                "no error microstates to carry the remaining weight".into(),
            ));
        }
        for (cfg, count) in errors {
            if count > T::zero() {
                members.push((rest * count / total, StateVector::basis_state(basis, cfg)?));
            }
        }
    }
    Ok(PreparedEnsemble {
        members,
        label: StateLabel::Z2,
    })
}

fn check_times<T: Real>(times: &[T]) -> Result<()> {
    if times.iter().any(|t| !(*t >= T::zero()) || !t.is_finite()) {
        return Err(Error::ConfigInvalid(
            "times must be finite and non-negative".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::ConfigInvalid("times must be non-decreasing".into()));
    }
    Ok(())
}

fn check_sites(sites: &[usize], n: usize) -> Result<()> {
    match sites.iter().find(|&&s| s >= n) {
        Some(s) => Err(Error::ConfigInvalid(format!(
            "site {s} outside a {n}-site chain"
        ))),
        None => Ok(()),
    }
}

/// `ψ(t_k)` for every requested time, evolving incrementally.
fn trajectory<T: Real>(
    psi: &StateVector<T>,
    prop: &Propagator<'_, T>,
    times: &[T],
) -> Result<Vec<StateVector<T>>> {
    let mut out = Vec::with_capacity(times.len());
    let mut current = psi.clone();
    let mut now = T::zero();
    for &t in times {
        if t > now {
            current = prop.evolve(&current, t - now)?;
            now = t;
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Ensemble-weighted Rydberg populations `⟨n_i⟩(t)` of every site.
pub fn run_populations<T: Real>(
    ensemble: &PreparedEnsemble<T>,
    h: &SparseOperator<T>,
    times: &[T],
    ecfg: &EvolveConfig<T>,
) -> Result<SpatioTemporalGrid<T>> {
    ensemble.validate()?;
    check_times(times)?;
    let n = ensemble.basis().n_sites();
    let mut grid = SpatioTemporalGrid::zeros(times.to_vec(), (0..n).collect());
    for (w, psi) in &ensemble.members {
        for (k, state) in trajectory(psi, &Propagator::new(h, ecfg)?, times)?
            .iter()
            .enumerate()
        {
            for (i, p) in state.populations().into_iter().enumerate() {
                let v = grid.get(k, i) + *w * p;
                grid.set(k, i, v);
            }
        }
    }
    Ok(grid)
}

/// Local perturbation applied between the forward and reversed evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Butterfly {
    SigmaZ,
    Identity,
}

/// What acts during the pause between forward and reversed evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapModel {
    None,
    /// Only the diagonal (interaction and detuning) part of the forward
    /// Hamiltonian acts while the drive is off.
    DiagonalOnly,
}

/// How the backward evolution is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reversal {
    /// `∏σ^z · e^{−iHt} · ∏σ^z`, exact for particle-hole symmetric `H`.
    GlobalZSandwich,
    /// `e^{+iHt}`.
    ExactNegation,
}

/// Assignment of perturbation and measurement sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteIndexing {
    /// The perturbation acts on `perturb_site` for every measured site.
    FixedSite,
    /// Every reported site is measured on a site initialized in `|↑⟩`:
    /// for a site `j` that starts down, site `j − 1` is measured (or `j + 1`
    /// when `j − 1` is also down), the perturbation moves by the same
    /// offset and the value is reported at `j`.
    MeasuredUp,
}

/// Settings of the OTOC protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct OtocProtocolConfig<T: Real> {
    pub perturb_site: Option<usize>,
    pub perturb_phase: T,
    pub measure_sites: Vec<usize>,
    pub times: Vec<T>,
    pub butterfly: Butterfly,
    pub gap_model: GapModel,
    /// Duration of the pause in μs, used with [`GapModel::DiagonalOnly`].
    pub gap_time: T,
    pub reversal: Reversal,
    pub indexing: SiteIndexing,
}

impl<T: Real> OtocProtocolConfig<T> {
    /// ZZ-OTOC with a π phase gate on `perturb_site`, global-Z reversal and
    /// no gap.
    pub fn zz(perturb_site: usize, measure_sites: Vec<usize>, times: Vec<T>) -> Self {
        OtocProtocolConfig {
            perturb_site: Some(perturb_site),
            perturb_phase: T::PI(),
            measure_sites,
            times,
            butterfly: Butterfly::SigmaZ,
            gap_model: GapModel::None,
            gap_time: T::lit(0.2),
            reversal: Reversal::GlobalZSandwich,
            indexing: SiteIndexing::FixedSite,
        }
    }

    /// IZ-OTOC (echo reference) with the same schedule.
    pub fn iz(measure_sites: Vec<usize>, times: Vec<T>) -> Self {
        OtocProtocolConfig {
            perturb_site: None,
            butterfly: Butterfly::Identity,
            ..Self::zz(0, measure_sites, times)
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        check_times(&self.times)?;
        check_sites(&self.measure_sites, n)?;
        if self.butterfly == Butterfly::SigmaZ {
            match self.perturb_site {
                None => {
                    return Err(Error::ConfigInvalid(
                        "a σ^z butterfly needs a perturbation site".into(),
                    ))
                }
                Some(c) if c >= n => {
                    return Err(Error::ConfigInvalid(format!(
                        "perturbation site {c} outside a {n}-site chain"
                    )))
                }
                _ => {}
            }
        }
        if !(self.gap_time >= T::zero()) {
            return Err(Error::ConfigInvalid("gap time must be non-negative".into()));
        }
        Ok(())
    }
}

/// Hamiltonians driving the forward and reversed segments of an echo.
#[derive(Debug, Clone, Copy)]
pub struct Drive<'a, T: Real> {
    pub forward: &'a SparseOperator<T>,
    pub backward: &'a SparseOperator<T>,
}

impl<'a, T: Real> Drive<'a, T> {
    /// The same Hamiltonian in both segments.
    pub fn ideal(h: &'a SparseOperator<T>) -> Self {
        Drive {
            forward: h,
            backward: h,
        }
    }
}

/// Runs the OTOC protocol: forward evolution, butterfly, optional gap,
/// reversal and a computational-basis measurement. The returned value at
/// site `j` is `⟨σ^z_j⟩₀ (2P_j(↑) − 1)`, which reduces to `2P_j(↑) − 1` on
/// sites that start excited.
pub fn run_otoc<T: Real>(
    ensemble: &PreparedEnsemble<T>,
    drive: &Drive<'_, T>,
    cfg: &OtocProtocolConfig<T>,
    ecfg: &EvolveConfig<T>,
) -> Result<SpatioTemporalGrid<T>> {
    run_otoc_measured(ensemble, drive, cfg, ecfg).map(|m| m.otoc)
}

/// OTOC grid together with the raw measurement record it is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct OtocMeasurement<T: Real> {
    pub otoc: SpatioTemporalGrid<T>,
    /// Ensemble-weighted `P(↑)` of the site measured for each reported site.
    pub populations: SpatioTemporalGrid<T>,
    /// `⟨σ^z⟩` of the measured site in the first ensemble member, so that
    /// `sign · (2P − 1)` is the OTOC of that member.
    pub signs: Vec<T>,
}

/// [`run_otoc`] that also returns the measured populations.
pub fn run_otoc_measured<T: Real>(
    ensemble: &PreparedEnsemble<T>,
    drive: &Drive<'_, T>,
    cfg: &OtocProtocolConfig<T>,
    ecfg: &EvolveConfig<T>,
) -> Result<OtocMeasurement<T>> {
    for op in [drive.forward, drive.backward] {
        if !op.basis().same_space(ensemble.basis()) {
            return Err(Error::BasisMismatch(
                "drive and ensemble bases differ".into(),
            ));
        }
    }
    let forward = Propagator::new(drive.forward, ecfg)?;
    if std::ptr::eq(drive.forward, drive.backward) {
        return run_otoc_with(ensemble, &forward, &forward, cfg);
    }
    let backward = Propagator::new(drive.backward, ecfg)?;
    run_otoc_with(ensemble, &forward, &backward, cfg)
}

/// [`run_otoc_measured`] with caller-supplied propagators for the forward
/// and reversed segments.
pub fn run_otoc_with<T: Real>(
    ensemble: &PreparedEnsemble<T>,
    forward_prop: &Propagator<'_, T>,
    backward_prop: &Propagator<'_, T>,
    cfg: &OtocProtocolConfig<T>,
) -> Result<OtocMeasurement<T>> {
    ensemble.validate()?;
    let basis = ensemble.basis().clone();
    let n = basis.n_sites();
    cfg.validate(n)?;
    for op in [forward_prop.operator(), backward_prop.operator()] {
        if !op.basis().same_space(&basis) {
            return Err(Error::BasisMismatch(
                "drive and ensemble bases differ".into(),
            ));
        }
    }
    let reference = member_config(&ensemble.members[0].1)?;
    let mut plan: Vec<(Option<usize>, usize)> = Vec::with_capacity(cfg.measure_sites.len());
    for &j in &cfg.measure_sites {
        let entry = match (cfg.indexing, cfg.butterfly) {
            (SiteIndexing::MeasuredUp, _) if !reference.is_up(j) => {
                let periodic = basis.boundary() == BoundaryCondition::Periodic;
                let shift = |s: usize, right: bool| -> Option<usize> {
                    match (right, periodic) {
                        (false, _) if s > 0 => Some(s - 1),
                        (false, true) => Some(n - 1),
                        (true, _) if s + 1 < n => Some(s + 1),
                        (true, true) => Some(0),
                        _ => None,
                    }
                };
                let right = [false, true]
                    .into_iter()
                    .find(|&r| shift(j, r).is_some_and(|m| reference.is_up(m)))
                    .ok_or_else(|| {
                        Error::ConfigInvalid(format!("no neighbour of site {j} starts excited"))
                    })?;
                let m = shift(j, right).expect("checked above");
                let c = match cfg.perturb_site {
                    Some(c) if cfg.butterfly == Butterfly::SigmaZ => {
                        Some(shift(c, right).ok_or_else(|| {
                            Error::ConfigInvalid(format!(
                                "perturbation site {c} cannot follow the shifted measurement"
                            ))
                        })?)
                    }
                    _ => None,
                };
                (c, m)
            }
            _ => (
                if cfg.butterfly == Butterfly::SigmaZ {
                    cfg.perturb_site
                } else {
                    None
                },
                j,
            ),
        };
        plan.push(entry);
    }
    let mut perturbations: Vec<Option<usize>> = plan.iter().map(|p| p.0).collect();
    perturbations.sort();
    perturbations.dedup();

    let nt = cfg.times.len();
    let mut grid = SpatioTemporalGrid::zeros(cfg.times.clone(), cfg.measure_sites.clone());
    let mut populations = grid.clone();
    let signs = plan
        .iter()
        .map(|&(_, m)| {
            if reference.is_up(m) {
                T::one()
            } else {
                -T::one()
            }
        })
        .collect();
    let gap_energies = match cfg.gap_model {
        GapModel::DiagonalOnly => Some(forward_prop.operator().diagonal()),
        GapModel::None => None,
    };
    for (weight, psi) in &ensemble.members {
        let initial = member_config(psi)?;
        let forward = trajectory(psi, forward_prop, &cfg.times)?;
        for &pert in &perturbations {
            let rows: Vec<Result<Vec<T>>> = (0..nt)
                .into_par_iter()
                .map(|k| {
                    let mut state = forward[k].clone();
                    if let Some(c) = pert {
                        state = apply_local_z(&state, c, cfg.perturb_phase)?;
                    }
                    if let Some(e) = &gap_energies {
                        if cfg.gap_time > T::zero() {
                            state = evolve_diagonal(&state, e, cfg.gap_time)?;
                        }
                    }
                    let t = cfg.times[k];
                    state = match cfg.reversal {
                        Reversal::GlobalZSandwich => {
                            apply_global_z(&backward_prop.evolve(&apply_global_z(&state), t)?)
                        }
                        Reversal::ExactNegation => backward_prop.evolve(&state, -t)?,
                    };
                    Ok(state.populations())
                })
                .collect();
            for (k, row) in rows.into_iter().enumerate() {
                let pops = row?;
                for (si, &(p_site, m)) in plan.iter().enumerate() {
                    if p_site != pert {
                        continue;
                    }
                    let s0 = if initial.is_up(m) {
                        T::one()
                    } else {
                        -T::one()
                    };
                    let f = s0 * (T::lit(2.0) * pops[m] - T::one());
                    let v = grid.get(k, si) + *weight * f;
                    grid.set(k, si, v);
                    let p = populations.get(k, si) + *weight * pops[m];
                    populations.set(k, si, p);
                }
            }
        }
    }
    Ok(OtocMeasurement {
        otoc: grid,
        populations,
        signs,
    })
}

fn member_config<T: Real>(psi: &StateVector<T>) -> Result<SpinConfig> {
    let amps = psi.amplitudes();
    let mut found = None;
    for (i, a) in amps.iter().enumerate() {
        if a.norm_sqr() > T::lit(1e-24) {
            if found.is_some() {
                return Err(Error::ConfigInvalid(
                    "OTOC ensembles must consist of computational basis states".into(),
                ));
            }
            found = Some(psi.basis().config_of(i));
        }
    }
    found.ok_or_else(|| Error::ConfigInvalid("empty state".into()))
}

/// Settings of the Holevo-information protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct HolevoConfig<T: Real> {
    pub times: Vec<T>,
    pub sites: Vec<usize>,
    pub flip_site: usize,
    /// Rebuild densities from `(P(↑), |⟨σ^y⟩|/2, sign of dP/dt)` as an
    /// experiment would, dropping `⟨σ^x⟩`.
    pub tomography: bool,
}

/// Reduced densities `[site][time]` of an ensemble evolving under `h`.
pub fn run_density_trajectories<T: Real>(
    ensemble: &PreparedEnsemble<T>,
    h: &SparseOperator<T>,
    times: &[T],
    sites: &[usize],
    ecfg: &EvolveConfig<T>,
) -> Result<Vec<Vec<SingleSiteDensity<T>>>> {
    ensemble.validate()?;
    check_times(times)?;
    check_sites(sites, ensemble.basis().n_sites())?;
    let mut acc = vec![vec![[[crate::scalar::czero::<T>(); 2]; 2]; times.len()]; sites.len()];
    for (w, psi) in &ensemble.members {
        for (k, state) in trajectory(psi, &Propagator::new(h, ecfg)?, times)?
            .iter()
            .enumerate()
        {
            for (si, &s) in sites.iter().enumerate() {
                let rho = reduced_density(state, s);
                for r in 0..2 {
                    for c in 0..2 {
                        acc[si][k][r][c] += rho.elements()[r][c].scale(*w);
                    }
                }
            }
        }
    }
    acc.into_iter()
        .map(|series| series.into_iter().map(SingleSiteDensity::new).collect())
        .collect()
}

fn tomography_series<T: Real>(
    series: &[SingleSiteDensity<T>],
) -> Result<Vec<SingleSiteDensity<T>>> {
    let p: Vec<T> = series.iter().map(|r| r.p_up()).collect();
    let n = p.len();
    (0..n)
        .map(|k| {
            let slope = if n < 2 {
                T::zero()
            } else if k == 0 {
                p[1] - p[0]
            } else if k == n - 1 {
                p[k] - p[k - 1]
            } else {
                p[k + 1] - p[k - 1]
            };
            let sign = if slope < T::zero() {
                -T::one()
            } else {
                T::one()
            };
            let amplitude = series[k].bloch()[1].abs() * T::lit(0.5);
            tomography_reconstruct(p[k], amplitude, sign)
        })
        .collect()
}

/// Holevo information and trace distance between an ensemble and its copy
/// with `flip_site` flipped, per site and time.
pub fn run_holevo<T: Real>(
    ensemble: &PreparedEnsemble<T>,
    h: &SparseOperator<T>,
    cfg: &HolevoConfig<T>,
    ecfg: &EvolveConfig<T>,
) -> Result<(SpatioTemporalGrid<T>, SpatioTemporalGrid<T>)> {
    ensemble.validate()?;
    check_sites(&[cfg.flip_site], ensemble.basis().n_sites())?;
    let flipped = PreparedEnsemble {
        members: ensemble
            .members
            .iter()
            .map(|(w, s)| Ok((*w, apply_local_x(s, cfg.flip_site)?)))
            .collect::<Result<Vec<_>>>()?,
        label: StateLabel::Custom(SpinConfig(0)),
    };
    let mut a = run_density_trajectories(ensemble, h, &cfg.times, &cfg.sites, ecfg)?;
    let mut b = run_density_trajectories(&flipped, h, &cfg.times, &cfg.sites, ecfg)?;
    if cfg.tomography {
        a = a
            .iter()
            .map(|s| tomography_series(s))
            .collect::<Result<_>>()?;
        b = b
            .iter()
            .map(|s| tomography_series(s))
            .collect::<Result<_>>()?;
    }
    let mut hol = SpatioTemporalGrid::zeros(cfg.times.clone(), cfg.sites.clone());
    let mut dist = hol.clone();
    for si in 0..cfg.sites.len() {
        for k in 0..cfg.times.len() {
            hol.set(k, si, holevo(&a[si][k], &b[si][k])?);
            dist.set(k, si, trace_distance(&a[si][k], &b[si][k]));
        }
    }
    Ok((hol, dist))
}

/// One moment where adjacent populations are equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossing<T: Real> {
    At(T),
    /// Populations coincide on every sample of this closed interval.
    Interval(T, T),
}

/// Crossings of the populations of two adjacent grid columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BondCrossings<T: Real> {
    pub left_site: usize,
    pub right_site: usize,
    pub crossings: Vec<Crossing<T>>,
}

/// Times where `P_i − P_{i+1}` changes sign for every adjacent pair of
/// grid columns, located by linear interpolation.
pub fn detect_wavefronts<T: Real>(grid: &SpatioTemporalGrid<T>) -> Result<Vec<BondCrossings<T>>> {
    if grid.n_sites() < 2 || grid.n_times() < 2 {
        return Err(Error::GridTooSmall(format!(
            "{} times × {} sites",
            grid.n_times(),
            grid.n_sites()
        )));
    }
    let tol = T::lit(1e-12);
    let times = &grid.times;
    let mut out = Vec::with_capacity(grid.n_sites() - 1);
    for b in 0..grid.n_sites() - 1 {
        let d: Vec<T> = (0..grid.n_times())
            .map(|k| grid.get(k, b) - grid.get(k, b + 1))
            .collect();
        let mut crossings = Vec::new();
        let mut k = 0;
        while k < d.len() {
            if d[k].abs() <= tol {
                let start = k;
                while k + 1 < d.len() && d[k + 1].abs() <= tol {
                    k += 1;
                }
                crossings.push(if k > start {
                    Crossing::Interval(times[start], times[k])
                } else {
                    Crossing::At(times[start])
                });
            } else if k + 1 < d.len()
                && d[k + 1].abs() > tol
                && (d[k] > T::zero()) != (d[k + 1] > T::zero())
            {
                let frac = d[k] / (d[k] - d[k + 1]);
                crossings.push(Crossing::At(times[k] + frac * (times[k + 1] - times[k])));
            }
            k += 1;
        }
        out.push(BondCrossings {
            left_site: grid.sites[b],
            right_site: grid.sites[b + 1],
            crossings,
        });
    }
    Ok(out)
}

/// Cumulative Bloch rotation in the YZ plane and its drift-corrected form.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationIndicator<T: Real> {
    /// Unwrapped rotation angle `[trajectory][time]`, zero at the first sample.
    pub angles: Vec<Vec<T>>,
    /// `angle − λ Ω_ref t`.
    pub indicator: Vec<Vec<T>>,
    pub lambda: T,
}

/// Angle of the Bloch vector measured from `−ẑ` towards `+ŷ`, which
/// increases at rate Ω under `(Ω/2)σ^x`.
fn yz_angle<T: Real>(rho: &SingleSiteDensity<T>) -> (T, T) {
    let [_, y, z] = rho.bloch();
    (y.atan2(-z), y * y + z * z)
}

/// Rotation indicator `f = ∫ d Arg[σ⃗] − λ Ω_ref t` per trajectory.
///
/// `omega_ref` is the angular frequency that normalizes the drift. With
/// `lambda` absent it is fitted as the least-squares slope through the
/// origin of all pooled angles against `Ω_ref t`.
pub fn rotation_indicator<T: Real>(
    trajectories: &[Vec<SingleSiteDensity<T>>],
    times: &[T],
    omega_ref: T,
    lambda: Option<T>,
) -> Result<RotationIndicator<T>> {
    let mut angles = Vec::with_capacity(trajectories.len());
    for (ti, series) in trajectories.iter().enumerate() {
        if series.len() != times.len() {
            return Err(Error::ShapeMismatch(format!(
                "trajectory {ti} has {} samples for {} times",
                series.len(),
                times.len()
            )));
        }
        let mut out = Vec::with_capacity(series.len());
        let mut prev = None;
        let mut total = T::zero();
        for (k, rho) in series.iter().enumerate() {
            let (phi, r2) = yz_angle(rho);
            if r2 < T::lit(1e-6) {
                return Err(Error::UndefinedAngle {
                    trajectory: ti,
                    sample: k,
                });
            }
            if let Some(p) = prev {
                let mut step: T = phi - p;
                let two_pi = T::TAU();
                while step > T::PI() {
                    step -= two_pi;
                }
                while step <= -T::PI() {
                    step += two_pi;
                }
                total += step;
            }
            prev = Some(phi);
            out.push(total);
        }
        angles.push(out);
    }
    let lambda = match lambda {
        Some(l) => l,
        None => {
            let (mut num, mut den) = (T::zero(), T::zero());
            for series in &angles {
                for (a, &t) in series.iter().zip(times) {
                    let x = omega_ref * t;
                    num += *a * x;
                    den += x * x;
                }
            }
            if !(den > T::zero()) {
                return Err(Error::GridTooSmall("no non-zero times to fit λ".into()));
            }
            num / den
        }
    };
    let indicator = angles
        .iter()
        .map(|s| {
            s.iter()
                .zip(times)
                .map(|(a, &t)| *a - lambda * omega_ref * t)
                .collect()
        })
        .collect();
    Ok(RotationIndicator {
        angles,
        indicator,
        lambda,
    })
}

/// Pause inserted between forward and reversed evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gap<T: Real> {
    pub model: GapModel,
    pub duration: T,
}

/// `|⟨ψ₀| U_rev U_fwd |ψ₀⟩|²` at each time.
pub fn run_reversal_fidelity<T: Real>(
    psi0: &StateVector<T>,
    h: &SparseOperator<T>,
    times: &[T],
    reversal: Reversal,
    gap: Option<Gap<T>>,
    ecfg: &EvolveConfig<T>,
) -> Result<Vec<T>> {
    check_times(times)?;
    let prop = Propagator::new(h, ecfg)?;
    let forward = trajectory(psi0, &prop, times)?;
    let energies = match gap {
        Some(Gap {
            model: GapModel::DiagonalOnly,
            duration,
        }) if duration > T::zero() => Some((h.diagonal(), duration)),
        _ => None,
    };
    (0..times.len())
        .into_par_iter()
        .map(|k| {
            let mut s = forward[k].clone();
            if let Some((e, tau)) = &energies {
                s = evolve_diagonal(&s, e, *tau)?;
            }
            let t = times[k];
            let back = match reversal {
                Reversal::GlobalZSandwich => apply_global_z(&prop.evolve(&apply_global_z(&s), t)?),
                Reversal::ExactNegation => prop.evolve(&s, -t)?,
            };
            Ok(psi0.overlap(&back))
        })
        .collect()
}

/// Return probability and domain-wall density along a forward evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct RevivalSeries<T: Real> {
    pub times: Vec<T>,
    pub overlap: Vec<T>,
    pub domain_wall: Vec<T>,
}

/// `|⟨ψ₀|ψ(t)⟩|²` and the domain-wall density over `window` (all sites when
/// `None`).
pub fn run_z2_revival<T: Real>(
    psi0: &StateVector<T>,
    h: &SparseOperator<T>,
    times: &[T],
    window: Option<&[usize]>,
    ecfg: &EvolveConfig<T>,
) -> Result<RevivalSeries<T>> {
    check_times(times)?;
    let all: Vec<usize> = (0..psi0.basis().n_sites()).collect();
    let window = window.unwrap_or(&all);
    let states = trajectory(psi0, &Propagator::new(h, ecfg)?, times)?;
    let overlap = states.iter().map(|s| psi0.overlap(s)).collect();
    let domain_wall = states
        .iter()
        .map(|s| domain_wall_density(s, window))
        .collect::<Result<_>>()?;
    Ok(RevivalSeries {
        times: times.to_vec(),
        overlap,
        domain_wall,
    })
}

/// Number of collapse-and-revival cycles in a series: each cycle is a drop
/// below `low` followed by a later rise above `high`.
pub fn count_collapse_revivals<T: Real>(series: &[T], low: T, high: T) -> usize {
    let mut armed = false;
    let mut count = 0;
    for &v in series {
        if v < low {
            armed = true;
        } else if armed && v > high {
            count += 1;
            armed = false;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;

    #[test]
    fn z2_patterns() {
        assert_eq!(
            z2_config(5, BoundaryCondition::Open).to_string_sites(5),
            "10101"
        );
        assert_eq!(
            z2_config(9, BoundaryCondition::Periodic).to_string_sites(9),
            "101010100"
        );
        assert_eq!(central_site(25), 12);
        assert_eq!(central_site(12), 6);
        assert_eq!(central_site(10), 4);
        assert_eq!(central_site(5), 2);
        let b = Arc::new(build_basis(5, BoundaryCondition::Open, true).unwrap());
        let s = prepare_state::<f64>(StateLabel::Z2FlipCenter, &b).unwrap();
        let idx = b.index_of(SpinConfig::from_sites(&[0, 4])).unwrap();
        assert_eq!(s.amplitudes()[idx].re, 1.0);
    }

    #[test]
    fn uniform_error_mixture() {
        let b = Arc::new(build_basis(5, BoundaryCondition::Open, true).unwrap());
        let e = prepare_error_mixture::<f64>(&b, 0.7, &ErrorModel::UniformUpFlip).unwrap();
        assert_eq!(e.members.len(), 4);
        for (w, _) in &e.members[1..] {
            assert!((w - 0.1).abs() < 1e-15);
        }
        let pure = prepare_error_mixture::<f64>(&b, 1.0, &ErrorModel::UniformUpFlip).unwrap();
        assert_eq!(pure.members.len(), 1);
        let bad = ErrorModel::MicrostateTable(vec![(SpinConfig(0b11), 1.0)]);
        assert!(matches!(
            prepare_error_mixture(&b, 0.5, &bad),
            Err(Error::TableInvalid(_))
        ));
    }

    #[test]
    fn wavefront_analytic() {
        let times: Vec<f64> = (0..2001).map(|k| k as f64 * 0.002).collect();
        let mut values = Vec::new();
        for &t in &times {
            values.push(t.sin().powi(2));
            values.push(t.cos().powi(2));
        }
        let g = SpatioTemporalGrid::new(times, vec![0, 1], values).unwrap();
        let w = detect_wavefronts(&g).unwrap();
        let expect = [
            std::f64::consts::FRAC_PI_4,
            3.0 * std::f64::consts::FRAC_PI_4,
            5.0 * std::f64::consts::FRAC_PI_4,
        ];
        assert_eq!(w[0].crossings.len(), expect.len());
        for (c, e) in w[0].crossings.iter().zip(expect) {
            match c {
                Crossing::At(t) => assert!((t - e).abs() < 1e-5),
                _ => panic!("unexpected interval"),
            }
        }
    }

    #[test]
    fn identical_columns_form_interval() {
        let g = SpatioTemporalGrid::new(vec![0.0, 1.0, 2.0], vec![0, 1], vec![0.3; 6]).unwrap();
        let w = detect_wavefronts(&g).unwrap();
        assert_eq!(w[0].crossings, vec![Crossing::Interval(0.0, 2.0)]);
        let tiny = SpatioTemporalGrid::new(vec![0.0], vec![0, 1], vec![0.0; 2]).unwrap();
        assert!(matches!(
            detect_wavefronts(&tiny),
            Err(Error::GridTooSmall(_))
        ));
    }

    #[test]
    fn collapse_revival_counter() {
        let s = [1.0, 0.2, 0.9, 0.5, 0.1, 0.85, 0.2];
        assert_eq!(count_collapse_revivals(&s, 0.3, 0.8), 2);
    }
}
