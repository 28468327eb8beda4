//! Sparse Hamiltonians: PXP, the van der Waals Rydberg chain and the
//! Dicke-scarred toy model.

use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::{build_basis, BoundaryCondition, HilbertBasis, SpinConfig};
use crate::error::{Error, Result};
use crate::scalar::{cis, czero, Real, C};

/// Dimension above which matrix-vector products are split across threads.
const PARALLEL_MATVEC_DIM: usize = 1 << 15;

/// Largest dimension converted to a dense matrix.
pub const MAX_DENSE_DIM: usize = 4096;

/// Complex sparse matrix in compressed-sparse-row layout over a basis.
#[derive(Debug, Clone)]
pub struct SparseOperator<T: Real> {
    basis: Arc<HilbertBasis>,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<C<T>>,
    hermitian: bool,
}

impl<T: Real> SparseOperator<T> {
    /// Assembles an operator from `(row, col, value)` triplets. Duplicate
    /// positions are summed and exact zeros dropped.
    pub fn from_triplets(
        basis: Arc<HilbertBasis>,
        mut triplets: Vec<(usize, usize, C<T>)>,
        hermitian: bool,
    ) -> Self {
        let dim = basis.dim();
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<C<T>> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet index out of range");
            if let (Some(&lr), Some(&lc)) = (rows.last(), col_idx.last()) {
                if lr == r && lc as usize == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            col_idx.push(c as u32);
            values.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v != czero() {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseOperator {
            basis,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
            hermitian,
        }
    }

    pub fn basis(&self) -> &Arc<HilbertBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Entries of row `r` as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C<T>)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    /// All stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C<T>)> + '_ {
        (0..self.dim()).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Matrix element `H[r][c]` (zero when not stored).
    pub fn get(&self, r: usize, c: usize) -> C<T> {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&(c as u32)) {
            Ok(k) => self.values[span.start + k],
            Err(_) => czero(),
        }
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[C<T>], y: &mut [C<T>]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let row = |r: usize| -> C<T> {
            let mut acc = czero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            acc
        };
        if self.dim() >= PARALLEL_MATVEC_DIM {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(r, out)| *out = row(r));
        } else {
            for (r, out) in y.iter_mut().enumerate() {
                *out = row(r);
            }
        }
    }

    /// Real diagonal of the operator.
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim()).map(|r| self.get(r, r).re).collect()
    }

    /// Operator holding only the diagonal entries.
    pub fn diagonal_part(&self) -> Self {
        let triplets = (0..self.dim()).map(|r| (r, r, self.get(r, r))).collect();
        Self::from_triplets(self.basis.clone(), triplets, self.hermitian)
    }

    /// Largest entrywise deviation `max |H - H†|`.
    pub fn max_hermitian_defect(&self) -> T {
        self.entries()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(T::zero(), T::max)
    }

    /// Largest entrywise deviation `max |self - other|` over the union of
    /// stored positions.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let a = self.entries().map(|(r, c, v)| (v - other.get(r, c)).norm());
        let b = other.entries().map(|(r, c, v)| (v - self.get(r, c)).norm());
        a.chain(b).fold(T::zero(), T::max)
    }

    /// Sum of two operators over the same space.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if !self.basis.same_space(&other.basis) {
            return Err(Error::BasisMismatch(
                "operands live on different bases".into(),
            ));
        }
        let triplets = self.entries().chain(other.entries()).collect();
        Ok(Self::from_triplets(
            self.basis.clone(),
            triplets,
            self.hermitian && other.hermitian,
        ))
    }

    /// Operator multiplied by a real factor.
    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = v.scale(factor);
        }
        out
    }

    /// Conjugation `D H D†` with `D = diag((-1)^{#excitations})`.
    pub fn conjugated_by_parity(&self) -> Self {
        let mut out = self.clone();
        let cfg = self.basis.configs();
        for r in 0..self.dim() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k] as usize;
                if (cfg[r].excitations() + cfg[c].excitations()) % 2 == 1 {
                    out.values[k] = -out.values[k];
                }
            }
        }
        out
    }

    /// Drive-frame rotation `D H D†` with `D = diag(e^{-iφ·#excitations})`.
    ///
    /// Every single-flip coupling `(Ω/2)σ^x` becomes
    /// `(Ω/2)(e^{-iφ}σ^+ + e^{iφ}σ^-)`; diagonal entries are unchanged.
    pub fn with_drive_phase(&self, phi: T) -> Self {
        let mut out = self.clone();
        if phi == T::zero() {
            return out;
        }
        let cfg = self.basis.configs();
        for r in 0..self.dim() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k] as usize;
                let dn = cfg[r].excitations() as i64 - cfg[c].excitations() as i64;
                if dn != 0 {
                    let theta = -phi * T::from_i64(dn).unwrap();
                    out.values[k] = self.values[k] * cis(theta);
                }
            }
        }
        out
    }

    /// `⟨ψ|H|ψ⟩` for an amplitude vector (real part).
    pub fn expectation(&self, psi: &[C<T>]) -> T {
        let mut y = vec![czero(); self.dim()];
        self.apply(psi, &mut y);
        psi.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Result<Vec<C<T>>> {
        let n = self.dim();
        if n > MAX_DENSE_DIM {
            return Err(Error::SizeLimitExceeded(format!(
                "dense conversion of dimension {n} exceeds {MAX_DENSE_DIM}"
            )));
        }
        let mut m = vec![czero(); n * n];
        for (r, c, v) in self.entries() {
            m[r * n + c] = v;
        }
        Ok(m)
    }
}

/// Positions of the atoms along the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainGeometry<T: Real> {
    pub n_sites: usize,
    pub boundary: BoundaryCondition,
    /// Nominal lattice spacing in μm.
    pub spacing: T,
    /// Per-site displacement from the nominal lattice position, in μm.
    pub position_offsets: Vec<T>,
}

impl<T: Real> ChainGeometry<T> {
    /// Evenly spaced chain with no displacements.
    pub fn uniform(n_sites: usize, boundary: BoundaryCondition, spacing: T) -> Self {
        ChainGeometry {
            n_sites,
            boundary,
            spacing,
            position_offsets: vec![T::zero(); n_sites],
        }
    }

    pub fn with_offsets(mut self, offsets: Vec<T>) -> Self {
        self.position_offsets = offsets;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::InvalidGeometry("no sites".into()));
        }
        if !(self.spacing > T::zero()) {
            return Err(Error::InvalidGeometry(format!(
                "spacing must be positive, got {}",
                self.spacing
            )));
        }
        if self.position_offsets.len() != self.n_sites {
            return Err(Error::InvalidGeometry(format!(
                "{} offsets for {} sites",
                self.position_offsets.len(),
                self.n_sites
            )));
        }
        let half = self.spacing / T::lit(2.0);
        if let Some(i) = self.position_offsets.iter().position(|d| !(d.abs() < half)) {
            return Err(Error::InvalidGeometry(format!(
                "offset of site {i} is not below half the spacing"
            )));
        }
        Ok(())
    }

    /// Position of site `i` in μm.
    pub fn position(&self, i: usize) -> T {
        T::from_count(i) * self.spacing + self.position_offsets[i]
    }

    /// Distance between two sites; periodic chains use the shorter arc of a
    /// ring of circumference `n_sites · spacing`.
    pub fn distance(&self, i: usize, j: usize) -> T {
        let d = (self.position(i) - self.position(j)).abs();
        match self.boundary {
            BoundaryCondition::Open => d,
            BoundaryCondition::Periodic => {
                let ring = T::from_count(self.n_sites) * self.spacing;
                let d = d % ring;
                d.min(ring - d)
            }
        }
    }

    /// Separation of two sites counted in lattice steps.
    pub fn site_separation(&self, i: usize, j: usize) -> usize {
        let d = i.abs_diff(j);
        match self.boundary {
            BoundaryCondition::Open => d,
            BoundaryCondition::Periodic => d.min(self.n_sites - d),
        }
    }
}

/// Drive and interaction parameters of the Rydberg Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RydbergParams<T: Real> {
    /// Rabi frequency Ω in rad/μs.
    pub omega: T,
    /// Detuning Δ in rad/μs.
    pub detuning: T,
    /// Van der Waals coefficient in rad·μm⁶/μs.
    pub c6: T,
    /// Largest coupled separation in lattice steps; `None` couples all pairs.
    pub interaction_cutoff: Option<usize>,
}

impl<T: Real> RydbergParams<T> {
    /// Parameters from the nearest-neighbour interaction `v_nn` at the
    /// nominal spacing, using `c6 = v_nn · spacing⁶`.
    pub fn from_v_nn(omega: T, detuning: T, v_nn: T, spacing: T) -> Self {
        RydbergParams {
            omega,
            detuning,
            c6: v_nn * spacing.powi(6),
            interaction_cutoff: None,
        }
    }

    pub fn with_cutoff(mut self, cutoff: Option<usize>) -> Self {
        self.interaction_cutoff = cutoff;
        self
    }

    /// Interaction at `distance` μm.
    pub fn interaction_at(&self, distance: T) -> T {
        self.c6 / distance.powi(6)
    }

    fn validate(&self) -> Result<()> {
        if !(self.omega >= T::zero()) || !self.omega.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Rabi frequency {}",
                self.omega
            )));
        }
        if !(self.c6 > T::zero()) || !self.c6.is_finite() {
            return Err(Error::InvalidParameter(format!("c6 {}", self.c6)));
        }
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter("detuning is not finite".into()));
        }
        Ok(())
    }
}

/// Symmetric table of pairwise couplings `V_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable<T: Real> {
    n: usize,
    values: Vec<T>,
}

impl<T: Real> CouplingTable<T> {
    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.n + j]
    }

    /// Interaction energy of a configuration, `Σ_{i<j} V_ij n_i n_j`.
    pub fn energy(&self, config: SpinConfig) -> T {
        let up: Vec<usize> = (0..self.n).filter(|&i| config.is_up(i)).collect();
        let mut e = T::zero();
        for (a, &i) in up.iter().enumerate() {
            for &j in &up[a + 1..] {
                e += self.get(i, j);
            }
        }
        e
    }
}

/// Van der Waals couplings `V_ij = c6 / R_ij⁶` from the actual positions.
pub fn vdw_matrix<T: Real>(
    geometry: &ChainGeometry<T>,
    params: &RydbergParams<T>,
) -> Result<CouplingTable<T>> {
    geometry.validate()?;
    params.validate()?;
    let n = geometry.n_sites;
    let mut values = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            if let Some(cut) = params.interaction_cutoff {
                if geometry.site_separation(i, j) > cut {
                    continue;
                }
            }
            let r = geometry.distance(i, j);
            if r <= T::lit(1e-12) * geometry.spacing {
                return Err(Error::ZeroDistance(i, j));
            }
            let v = params.interaction_at(r);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(CouplingTable { n, values })
}

/// PXP Hamiltonian `(Ω/2) Σ_i P σ^x_i P` on a constrained basis.
///
/// A site may flip only when all of its neighbours are down, so the couplings
/// are exactly the single flips that stay inside the basis. Edge sites of an
/// open chain are constrained by their single neighbour.
pub fn build_pxp<T: Real>(basis: &Arc<HilbertBasis>, omega: T) -> Result<SparseOperator<T>> {
    if !basis.is_constrained() {
        return Err(Error::BasisMismatch("PXP needs a constrained basis".into()));
    }
    Ok(SparseOperator::from_triplets(
        basis.clone(),
        flip_triplets(basis, omega / T::lit(2.0)),
        true,
    ))
}

fn flip_triplets<T: Real>(basis: &HilbertBasis, amplitude: T) -> Vec<(usize, usize, C<T>)> {
    let n = basis.n_sites();
    let mut out = Vec::with_capacity(basis.dim() * n / 2);
    for (col, &cfg) in basis.configs().iter().enumerate() {
        for site in 0..n {
            if let Some(row) = basis.index_of(cfg.flipped(site)) {
                out.push((row, col, C::new(amplitude, T::zero())));
            }
        }
    }
    out
}

/// Rydberg Hamiltonian
/// `(Ω/2) Σ σ^x_i − Δ Σ n_i + Σ_{i<j} V_ij n_i n_j`.
///
/// On a constrained basis the drive only couples configurations inside the
/// basis while all in-basis interaction energies are kept.
pub fn build_rydberg<T: Real>(
    basis: &Arc<HilbertBasis>,
    geometry: &ChainGeometry<T>,
    params: &RydbergParams<T>,
) -> Result<SparseOperator<T>> {
    if geometry.n_sites != basis.n_sites() || geometry.boundary != basis.boundary() {
        return Err(Error::BasisMismatch(
            "geometry and basis describe different chains".into(),
        ));
    }
    let table = vdw_matrix(geometry, params)?;
    let mut triplets = flip_triplets(basis, params.omega / T::lit(2.0));
    for (i, &cfg) in basis.configs().iter().enumerate() {
        let e = table.energy(cfg) - params.detuning * T::from_count(cfg.excitations() as usize);
        triplets.push((i, i, C::new(e, T::zero())));
    }
    Ok(SparseOperator::from_triplets(basis.clone(), triplets, true))
}

/// Interaction part `Σ_i V_{i−1,i+2} P_{i,i+1}` of the toy model on a full
/// basis, with `P_{i,j} = (1 − σ⃗_i·σ⃗_j)/4` and
/// `V_{i,j} = J(σ^x_i σ^y_j + σ^y_i σ^x_j)`.
pub fn build_toy_interaction<T: Real>(
    basis: &Arc<HilbertBasis>,
    j: T,
) -> Result<SparseOperator<T>> {
    if basis.is_constrained() {
        return Err(Error::BasisMismatch(
            "the toy model lives in the full space".into(),
        ));
    }
    let n = basis.n_sites();
    let periodic = basis.boundary() == BoundaryCondition::Periodic;
    if periodic && n < 4 {
        return Err(Error::InvalidSize(format!(
            "periodic toy model needs at least 4 sites, got {n}"
        )));
    }
    let terms: Vec<(usize, usize, usize, usize)> = if periodic {
        (0..n)
            .map(|i| ((i + n - 1) % n, i, (i + 1) % n, (i + 2) % n))
            .collect()
    } else {
        (1..n.saturating_sub(2))
            .map(|i| (i - 1, i, i + 1, i + 2))
            .collect()
    };
    let half = T::lit(0.5);
    let mut triplets = Vec::new();
    for (col, &cfg) in basis.configs().iter().enumerate() {
        for &(a, p, q, b) in &terms {
            if cfg.is_up(p) == cfg.is_up(q) || cfg.is_up(a) != cfg.is_up(b) {
                continue;
            }
            // σ^y|↑⟩ = i|↓⟩ and σ^y|↓⟩ = −i|↑⟩, so both V terms carry ±i.
            let v = if cfg.is_up(a) {
                C::new(T::zero(), T::lit(2.0) * j)
            } else {
                C::new(T::zero(), -T::lit(2.0) * j)
            };
            let moved = cfg.flipped(a).flipped(b);
            let swapped = moved.flipped(p).flipped(q);
            triplets.push((moved.0 as usize, col, v * half));
            triplets.push((swapped.0 as usize, col, -v * half));
        }
    }
    Ok(SparseOperator::from_triplets(basis.clone(), triplets, true))
}

/// Toy model `H_toy = (Ω/2) Σ σ^x_i + Σ_i V_{i−1,i+2} P_{i,i+1}` on the full
/// `2^N` space.
pub fn build_toy<T: Real>(
    n_sites: usize,
    omega: T,
    j: T,
    boundary: BoundaryCondition,
) -> Result<SparseOperator<T>> {
    if n_sites > 14 {
        return Err(Error::SizeLimitExceeded(format!(
            "toy model limited to 14 sites, got {n_sites}"
        )));
    }
    let basis = Arc::new(build_basis(n_sites, boundary, false)?);
    let field = build_transverse_field(&basis, omega);
    field.add(&build_toy_interaction(&basis, j)?)
}

/// Uniform transverse field `(Ω/2) Σ σ^x_i` restricted to the basis.
pub fn build_transverse_field<T: Real>(basis: &Arc<HilbertBasis>, omega: T) -> SparseOperator<T> {
    SparseOperator::from_triplets(
        basis.clone(),
        flip_triplets(basis, omega / T::lit(2.0)),
        true,
    )
}
