//! Quasi-static Monte Carlo noise, detection and depolarization models, and
//! IZ-based OTOC error mitigation.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::basis::{build_basis, HilbertBasis};
use crate::error::{Error, Result};
use crate::evolve::{DenseEvolver, EvolveConfig, Propagator, StateVector};
use crate::hamiltonian::{build_pxp, build_rydberg, ChainGeometry, RydbergParams, SparseOperator};
use crate::protocols::{
    run_otoc, run_otoc_with, Butterfly, Drive, OtocProtocolConfig, PreparedEnsemble,
    SpatioTemporalGrid,
};
use crate::scalar::Real;

/// Whether the drive-phase offset is shared by the forward and reversed
/// segments of an echo.
///
/// A phase common to both segments is a diagonal frame change: echo
/// populations from product states do not see it. `PerSegment` draws an
/// independent phase for the reversed segment instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseNoiseMode {
    PerShot,
    PerSegment,
}

/// Distribution parameters of the quasi-static noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseParams<T: Real> {
    /// Relative RMS fluctuation of Ω.
    pub delta_omega_rel: T,
    /// RMS drive-phase offset in radians.
    pub delta_phi: T,
    /// RMS detuning offset in rad/μs.
    pub delta_detuning: T,
    /// RMS atom displacement in μm.
    pub sigma_pos: T,
    /// Depolarization rate in 1/μs.
    pub gamma: T,
    /// Intrinsic Rydberg-state detection error.
    pub epsilon_raw: T,
    /// Ground-state loss probability.
    pub eta: T,
    /// Rydberg lifetime in μs; `None` disables decay before detection.
    pub t_rydberg_lifetime: Option<T>,
    /// RMS error of the local σ^z phase gate in radians.
    pub perturb_phase_sigma: T,
    pub n_shots: usize,
    pub seed: u64,
    pub phase_mode: PhaseNoiseMode,
}

impl<T: Real> Default for NoiseParams<T> {
    /// No noise and a single shot.
    fn default() -> Self {
        NoiseParams {
            delta_omega_rel: T::zero(),
            delta_phi: T::zero(),
            delta_detuning: T::zero(),
            sigma_pos: T::zero(),
            gamma: T::zero(),
            epsilon_raw: T::zero(),
            eta: T::zero(),
            t_rydberg_lifetime: None,
            perturb_phase_sigma: T::zero(),
            n_shots: 1,
            seed: 0,
            phase_mode: PhaseNoiseMode::PerShot,
        }
    }
}

impl<T: Real> NoiseParams<T> {
    /// Noise levels characterized for the 25-atom rubidium chain.
    pub fn experimental() -> Self {
        let two_pi = T::TAU();
        NoiseParams {
            delta_omega_rel: T::lit(0.01),
            delta_phi: T::lit(0.08) * T::PI(),
            delta_detuning: two_pi * T::lit(0.025),
            sigma_pos: T::lit(0.3),
            gamma: T::lit(0.035),
            epsilon_raw: T::lit(0.01),
            eta: T::lit(0.01),
            t_rydberg_lifetime: Some(T::lit(140.0)),
            perturb_phase_sigma: T::lit(0.09) * T::PI(),
            n_shots: 200,
            seed: 0,
            phase_mode: PhaseNoiseMode::PerShot,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("delta_omega_rel", self.delta_omega_rel),
            ("delta_phi", self.delta_phi),
            ("delta_detuning", self.delta_detuning),
            ("sigma_pos", self.sigma_pos),
            ("gamma", self.gamma),
            ("perturb_phase_sigma", self.perturb_phase_sigma),
        ];
        for (name, v) in non_negative {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must be non-negative"
                )));
            }
        }
        for (name, v) in [("epsilon_raw", self.epsilon_raw), ("eta", self.eta)] {
            if !(v >= T::zero() && v < T::one()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must lie in [0, 1)"
                )));
            }
        }
        if let Some(tr) = self.t_rydberg_lifetime {
            if !(tr > T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "Rydberg lifetime {tr} must be positive"
                )));
            }
        }
        if self.n_shots == 0 {
            return Err(Error::InvalidParameter("n_shots must be at least 1".into()));
        }
        Ok(())
    }
}

/// One quasi-static draw of the noisy parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample<T: Real> {
    pub shot: u64,
    /// Rabi frequency of this shot in rad/μs.
    pub omega: T,
    /// Absolute detuning of this shot in rad/μs.
    pub detuning: T,
    /// Drive phase of the forward segment.
    pub phase_offset: T,
    /// Drive phase of the reversed segment.
    pub reverse_phase_offset: T,
    /// Per-site displacement in μm, added to the geometry's own offsets.
    pub position_offsets: Vec<T>,
    /// Phase actually imprinted by the local σ^z gate.
    pub perturb_phase: T,
}

/// Draws the noise of shot `shot` around the nominal drive.
///
/// Each shot uses its own ChaCha stream selected by the shot index, so a
/// sample depends only on `(seed, shot)`.
pub fn sample_noise<T: Real>(
    params: &NoiseParams<T>,
    nominal: &RydbergParams<T>,
    n_sites: usize,
    shot: u64,
) -> NoiseSample<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(shot);
    let mut g = || -> T { T::lit(StandardNormal.sample(&mut rng)) };
    let omega = nominal.omega * (T::one() + params.delta_omega_rel * g());
    let detuning = nominal.detuning + params.delta_detuning * g();
    let phase_offset = params.delta_phi * g();
    let second = params.delta_phi * g();
    let reverse_phase_offset = match params.phase_mode {
        PhaseNoiseMode::PerShot => phase_offset,
        PhaseNoiseMode::PerSegment => second,
    };
    let perturb_phase = T::PI() + params.perturb_phase_sigma * g();
    let position_offsets = (0..n_sites).map(|_| params.sigma_pos * g()).collect();
    NoiseSample {
        shot,
        omega,
        detuning,
        phase_offset,
        reverse_phase_offset,
        position_offsets,
        perturb_phase,
    }
}

/// Rydberg Hamiltonian of one shot with the forward drive phase applied.
pub fn noisy_hamiltonian<T: Real>(
    sample: &NoiseSample<T>,
    geometry: &ChainGeometry<T>,
    params: &RydbergParams<T>,
    basis: &Arc<HilbertBasis>,
) -> Result<SparseOperator<T>> {
    Ok(noisy_segments(sample, geometry, params, basis)?.0)
}

/// Forward and reversed Hamiltonians of one shot.
pub fn noisy_segments<T: Real>(
    sample: &NoiseSample<T>,
    geometry: &ChainGeometry<T>,
    params: &RydbergParams<T>,
    basis: &Arc<HilbertBasis>,
) -> Result<(SparseOperator<T>, SparseOperator<T>)> {
    let h = shot_hamiltonian(sample, geometry, params, basis)?;
    Ok((
        h.with_drive_phase(sample.phase_offset),
        h.with_drive_phase(sample.reverse_phase_offset),
    ))
}

/// Rydberg Hamiltonian of one shot before any drive phase.
fn shot_hamiltonian<T: Real>(
    sample: &NoiseSample<T>,
    geometry: &ChainGeometry<T>,
    params: &RydbergParams<T>,
    basis: &Arc<HilbertBasis>,
) -> Result<SparseOperator<T>> {
    if sample.position_offsets.len() != geometry.n_sites {
        return Err(Error::InvalidGeometry(
            "noise sample and geometry differ in length".into(),
        ));
    }
    let offsets = geometry
        .position_offsets
        .iter()
        .zip(&sample.position_offsets)
        .map(|(a, b)| *a + *b)
        .collect();
    let jittered = geometry.clone().with_offsets(offsets);
    let shot_params = RydbergParams {
        omega: sample.omega,
        detuning: sample.detuning,
        ..*params
    };
    build_rydberg(basis, &jittered, &shot_params)
}

fn reduce_shots<T: Real>(grids: &[SpatioTemporalGrid<T>]) -> Result<SpatioTemporalGrid<T>> {
    let first = &grids[0];
    if let Some(g) = grids.iter().find(|g| !g.same_shape(first)) {
        return Err(Error::ShapeMismatch(format!(
            "shot grids differ: {}×{} vs {}×{}",
            first.n_times(),
            first.n_sites(),
            g.n_times(),
            g.n_sites()
        )));
    }
    let n = T::from_count(grids.len());
    let len = first.values.len();
    let mut mean = vec![T::zero(); len];
    for g in grids {
        for (m, v) in mean.iter_mut().zip(&g.values) {
            *m += *v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut stderr = vec![T::zero(); len];
    if grids.len() > 1 {
        for g in grids {
            for ((s, v), m) in stderr.iter_mut().zip(&g.values).zip(&mean) {
                *s += (*v - *m) * (*v - *m);
            }
        }
        let denom = (n - T::one()) * n;
        stderr.iter_mut().for_each(|s| *s = (*s / denom).sqrt());
    }
    let mut out = SpatioTemporalGrid::new(first.times.clone(), first.sites.clone(), mean)?;
    out.stderr = Some(stderr);
    Ok(out)
}

/// Runs `protocol` once per shot and averages each returned grid over
/// shots, with the standard error of the mean attached.
///
/// Shots run in parallel; the reduction always proceeds in shot order so
/// results do not depend on the thread count.
pub fn monte_carlo_multi<T, F>(
    params: &NoiseParams<T>,
    nominal: &RydbergParams<T>,
    n_sites: usize,
    protocol: F,
) -> Result<Vec<SpatioTemporalGrid<T>>>
where
    T: Real,
    F: Fn(&NoiseSample<T>) -> Result<Vec<SpatioTemporalGrid<T>>> + Sync,
{
    params.validate()?;
    let shots: Vec<Result<Vec<SpatioTemporalGrid<T>>>> = (0..params.n_shots as u64)
        .into_par_iter()
        .map(|shot| protocol(&sample_noise(params, nominal, n_sites, shot)))
        .collect();
    let mut per_output: Vec<Vec<SpatioTemporalGrid<T>>> = Vec::new();
    for (shot, result) in shots.into_iter().enumerate() {
        let grids = result.map_err(|e| Error::ShotFailed {
            shot: shot as u64,
            source: Box::new(e),
        })?;
        if per_output.is_empty() {
            per_output = grids
                .iter()
                .map(|_| Vec::with_capacity(params.n_shots))
                .collect();
        }
        if grids.len() != per_output.len() {
            return Err(Error::ShapeMismatch(
                "shots returned different grid counts".into(),
            ));
        }
        for (slot, g) in per_output.iter_mut().zip(grids) {
            slot.push(g);
        }
    }
    per_output.iter().map(|g| reduce_shots(g)).collect()
}

/// Single-output form of [`monte_carlo_multi`].
pub fn monte_carlo<T, F>(
    params: &NoiseParams<T>,
    nominal: &RydbergParams<T>,
    n_sites: usize,
    protocol: F,
) -> Result<SpatioTemporalGrid<T>>
where
    T: Real,
    F: Fn(&NoiseSample<T>) -> Result<SpatioTemporalGrid<T>> + Sync,
{
    let mut out = monte_carlo_multi(params, nominal, n_sites, |s| protocol(s).map(|g| vec![g]))?;
    Ok(out.remove(0))
}

/// Rydberg detection error after a wait `t_i` before imaging:
/// `ε = ε_raw + (1 − ε_raw)(1 − e^{−t_i/T_R})`.
pub fn detection_epsilon<T: Real>(params: &NoiseParams<T>, t_i: T) -> T {
    let decay = match params.t_rydberg_lifetime {
        Some(tr) => T::one() - (-t_i / tr).exp(),
        None => T::zero(),
    };
    params.epsilon_raw + (T::one() - params.epsilon_raw) * decay
}

fn check_rows<T: Real>(grid: &SpatioTemporalGrid<T>, per_time: &[T], what: &str) -> Result<()> {
    if per_time.len() != grid.n_times() {
        return Err(Error::ShapeMismatch(format!(
            "{} {what} for {} grid times",
            per_time.len(),
            grid.n_times()
        )));
    }
    Ok(())
}

/// Measured ground-state probability
/// `P(↓) = ε(1−η)P′(↑) + (1−η)P′(↓)` from true Rydberg populations.
///
/// `gap_times[k]` is the wait before imaging for row `k`.
pub fn apply_detection<T: Real>(
    p_up: &SpatioTemporalGrid<T>,
    params: &NoiseParams<T>,
    gap_times: &[T],
) -> Result<SpatioTemporalGrid<T>> {
    check_rows(p_up, gap_times, "gap times")?;
    let mut out = p_up.clone();
    out.stderr = None;
    let keep = T::one() - params.eta;
    for (k, &ti) in gap_times.iter().enumerate() {
        let eps = detection_epsilon(params, ti);
        for s in 0..p_up.n_sites() {
            let up = p_up.get(k, s);
            out.set(k, s, eps * keep * up + keep * (T::one() - up));
        }
    }
    Ok(out)
}

/// Inverse of [`apply_detection`]: true `P′(↑)` from measured `P(↓)`.
///
/// Results slightly outside `[0, 1]` are clamped with a warning; results
/// beyond `[−0.05, 1.05]` are errors.
pub fn invert_detection<T: Real>(
    p_down: &SpatioTemporalGrid<T>,
    params: &NoiseParams<T>,
    gap_times: &[T],
) -> Result<SpatioTemporalGrid<T>> {
    check_rows(p_down, gap_times, "gap times")?;
    let mut out = p_down.clone();
    out.stderr = None;
    let keep = T::one() - params.eta;
    let (lo, hi) = (T::lit(-0.05), T::lit(1.05));
    for (k, &ti) in gap_times.iter().enumerate() {
        let eps = detection_epsilon(params, ti);
        for s in 0..p_down.n_sites() {
            let up = (T::one() - p_down.get(k, s) / keep) / (T::one() - eps);
            if !(up >= lo && up <= hi) {
                return Err(Error::NonPhysical {
                    value: up.as_f64(),
                    time: k,
                    site: s,
                });
            }
            if up < T::zero() || up > T::one() {
                log::warn!("clamping corrected population {up} at time {k}, site {s}");
            }
            out.set(k, s, up.max(T::zero()).min(T::one()));
        }
    }
    Ok(out)
}

fn check_depolarization<T: Real>(gamma: T, times: &[T]) -> Result<()> {
    let worst = times.iter().fold(T::zero(), |m, t| m.max(gamma * *t));
    if !(worst < T::lit(0.5)) {
        return Err(Error::ApproximationInvalid(worst.as_f64()));
    }
    Ok(())
}

/// Ground-state population increased by the decayed fraction `γt`,
/// clamped at 1.
pub fn apply_depolarization<T: Real>(
    p_down: &SpatioTemporalGrid<T>,
    gamma: T,
    times: &[T],
) -> Result<SpatioTemporalGrid<T>> {
    check_rows(p_down, times, "times")?;
    check_depolarization(gamma, times)?;
    let mut out = p_down.clone();
    for (k, &t) in times.iter().enumerate() {
        for s in 0..p_down.n_sites() {
            out.set(k, s, (p_down.get(k, s) + gamma * t).min(T::one()));
        }
    }
    Ok(out)
}

/// First-order depolarization correction: ground-state population
/// reduced by `γt`.
pub fn depolarization_correct<T: Real>(
    p_down: &SpatioTemporalGrid<T>,
    gamma: T,
    times: &[T],
) -> Result<SpatioTemporalGrid<T>> {
    check_rows(p_down, times, "times")?;
    check_depolarization(gamma, times)?;
    let mut out = p_down.clone();
    for (k, &t) in times.iter().enumerate() {
        for s in 0..p_down.n_sites() {
            out.set(k, s, p_down.get(k, s) - gamma * t);
        }
    }
    Ok(out)
}

/// Mitigated OTOC grid: invalid entries hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct MitigatedOtoc<T: Real> {
    pub grid: SpatioTemporalGrid<T>,
    pub valid: Vec<bool>,
}

impl<T: Real> MitigatedOtoc<T> {
    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
}

/// Elementwise `zz / iz`, leaving entries with `|iz| < floor` invalid.
pub fn mitigate_otoc<T: Real>(
    zz: &SpatioTemporalGrid<T>,
    iz: &SpatioTemporalGrid<T>,
    floor: T,
) -> Result<MitigatedOtoc<T>> {
    if !zz.same_shape(iz) {
        return Err(Error::ShapeMismatch(format!(
            "ZZ grid {}×{} vs IZ grid {}×{}",
            zz.n_times(),
            zz.n_sites(),
            iz.n_times(),
            iz.n_sites()
        )));
    }
    let mut grid = zz.clone();
    grid.stderr = None;
    let mut valid = Vec::with_capacity(zz.values.len());
    for (v, d) in grid.values.iter_mut().zip(&iz.values) {
        if d.abs() < floor || !d.is_finite() {
            *v = T::nan();
            valid.push(false);
        } else {
            *v /= *d;
            valid.push(true);
        }
    }
    Ok(MitigatedOtoc { grid, valid })
}

/// Everything needed to simulate a noisy OTOC experiment.
#[derive(Debug, Clone)]
pub struct NoisyOtocSetup<T: Real> {
    pub basis: Arc<HilbertBasis>,
    pub geometry: ChainGeometry<T>,
    pub rydberg: RydbergParams<T>,
    pub ensemble: PreparedEnsemble<T>,
    /// ZZ protocol; the IZ reference reuses its schedule without butterfly.
    pub protocol: OtocProtocolConfig<T>,
    pub evolve: EvolveConfig<T>,
}

/// Shot-averaged results of a noisy OTOC experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyOtoc<T: Real> {
    /// ZZ-OTOC after detection and depolarization correction.
    pub zz: SpatioTemporalGrid<T>,
    /// IZ-OTOC after detection and depolarization correction.
    pub iz: SpatioTemporalGrid<T>,
}

impl<T: Real> NoisyOtocSetup<T> {
    fn iz_protocol(&self) -> OtocProtocolConfig<T> {
        OtocProtocolConfig {
            butterfly: Butterfly::Identity,
            ..self.protocol.clone()
        }
    }

    /// Total time from the start of the sequence to imaging for each row.
    pub fn sequence_durations(&self) -> Vec<T> {
        let gap = match self.protocol.gap_model {
            crate::protocols::GapModel::DiagonalOnly => self.protocol.gap_time,
            crate::protocols::GapModel::None => T::zero(),
        };
        self.protocol
            .times
            .iter()
            .map(|&t| T::lit(2.0) * t + gap)
            .collect()
    }

    /// Noisy ZZ and IZ OTOCs.
    ///
    /// Per shot the drive parameters, atom positions, drive phases and the
    /// σ^z gate phase are sampled; the simulated populations are then hit by
    /// depolarization (`P(↓) += γ·t_seq`) and detection errors (imaging
    /// after `t_seq`), and corrected back with the known parameters, as an
    /// experiment would post-process its data.
    pub fn run(&self, noise: &NoiseParams<T>) -> Result<NoisyOtoc<T>> {
        let iz_cfg = self.iz_protocol();
        let durations = self.sequence_durations();
        let n = self.basis.n_sites();
        let grids = monte_carlo_multi(noise, &self.rydberg, n, |sample| {
            let h = shot_hamiltonian(sample, &self.geometry, &self.rydberg, &self.basis)?;
            let fwd = h.with_drive_phase(sample.phase_offset);
            let bwd = h.with_drive_phase(sample.reverse_phase_offset);
            let (fwd_prop, bwd_prop) = if self.evolve.uses_dense(h.dim()) {
                let dense = DenseEvolver::new(&h)?;
                (
                    Propagator::from_dense(&fwd, dense.with_drive_phase(sample.phase_offset))?,
                    Propagator::from_dense(
                        &bwd,
                        dense.with_drive_phase(sample.reverse_phase_offset),
                    )?,
                )
            } else {
                (
                    Propagator::new(&fwd, &self.evolve)?,
                    Propagator::new(&bwd, &self.evolve)?,
                )
            };
            let zz_cfg = OtocProtocolConfig {
                perturb_phase: sample.perturb_phase,
                ..self.protocol.clone()
            };
            [zz_cfg, iz_cfg.clone()]
                .iter()
                .map(|cfg| {
                    let m = run_otoc_with(&self.ensemble, &fwd_prop, &bwd_prop, cfg)?;
                    let measured = corrupt(&m.populations, noise, &durations)?;
                    let restored = restore(&measured, noise, &durations)?;
                    Ok(otoc_from_measured(&restored, &m.signs))
                })
                .collect()
        })?;
        let mut it = grids.into_iter();
        Ok(NoisyOtoc {
            zz: it.next().expect("zz grid"),
            iz: it.next().expect("iz grid"),
        })
    }

    /// Shot-averaged ZZ-OTOC of the ideal PXP model in which only the σ^z
    /// gate phase is sampled, the benchmark that mitigation aims for.
    pub fn pxp_reference(&self, noise: &NoiseParams<T>) -> Result<SpatioTemporalGrid<T>> {
        let pxp_basis = if self.basis.is_constrained() {
            self.basis.clone()
        } else {
            Arc::new(build_basis(
                self.basis.n_sites(),
                self.basis.boundary(),
                true,
            )?)
        };
        let h = build_pxp(&pxp_basis, self.rydberg.omega)?;
        let ensemble = PreparedEnsemble {
            members: self
                .ensemble
                .members
                .iter()
                .map(|(w, s)| {
                    let cfg = s
                        .amplitudes()
                        .iter()
                        .position(|a| a.norm_sqr() > T::lit(0.5))
                        .map(|i| s.basis().config_of(i))
                        .ok_or_else(|| {
                            Error::ConfigInvalid("reference needs product states".into())
                        })?;
                    Ok((*w, StateVector::basis_state(&pxp_basis, cfg)?))
                })
                .collect::<Result<_>>()?,
            label: self.ensemble.label,
        };
        let n = pxp_basis.n_sites();
        monte_carlo(noise, &self.rydberg, n, |sample| {
            let cfg = OtocProtocolConfig {
                perturb_phase: sample.perturb_phase,
                ..self.protocol.clone()
            };
            run_otoc(&ensemble, &Drive::ideal(&h), &cfg, &self.evolve)
        })
    }
}

fn corrupt<T: Real>(
    p_up: &SpatioTemporalGrid<T>,
    noise: &NoiseParams<T>,
    durations: &[T],
) -> Result<SpatioTemporalGrid<T>> {
    let mut p_down = p_up.clone();
    p_down.values.iter_mut().for_each(|v| *v = T::one() - *v);
    let decayed = apply_depolarization(&p_down, noise.gamma, durations)?;
    let mut decayed_up = decayed.clone();
    decayed_up
        .values
        .iter_mut()
        .for_each(|v| *v = T::one() - *v);
    apply_detection(&decayed_up, noise, durations)
}

fn restore<T: Real>(
    measured_down: &SpatioTemporalGrid<T>,
    noise: &NoiseParams<T>,
    durations: &[T],
) -> Result<SpatioTemporalGrid<T>> {
    let up = invert_detection(measured_down, noise, durations)?;
    let mut down = up.clone();
    down.values.iter_mut().for_each(|v| *v = T::one() - *v);
    let corrected = depolarization_correct(&down, noise.gamma, durations)?;
    let mut out = corrected;
    out.values.iter_mut().for_each(|v| *v = T::one() - *v);
    Ok(out)
}

fn otoc_from_measured<T: Real>(p_up: &SpatioTemporalGrid<T>, signs: &[T]) -> SpatioTemporalGrid<T> {
    let mut out = p_up.clone();
    for k in 0..p_up.n_times() {
        for (s, sign) in signs.iter().enumerate() {
            out.set(k, s, *sign * (T::lit(2.0) * p_up.get(k, s) - T::one()));
        }
    }
    out
}
