//! State vectors, Krylov time evolution, a dense reference propagator and
//! instantaneous gates.

use std::sync::Arc;

use crate::basis::{HilbertBasis, SpinConfig};
use crate::error::{Error, Result};
use crate::hamiltonian::SparseOperator;
use crate::linalg::{hermitian_eigen, symmetric_eigen, tridiagonal_eigen};
use crate::scalar::{cis, cone, czero, Real, C};

/// Normalized complex amplitude vector over a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    basis: Arc<HilbertBasis>,
    amplitudes: Vec<C<T>>,
}

impl<T: Real> StateVector<T> {
    /// Computational basis state `|config⟩`.
    pub fn basis_state(basis: &Arc<HilbertBasis>, config: SpinConfig) -> Result<Self> {
        let idx = basis.index_of(config).ok_or_else(|| {
            Error::BasisMismatch(format!(
                "config {} is not in the basis",
                config.to_string_sites(basis.n_sites())
            ))
        })?;
        let mut amplitudes = vec![czero(); basis.dim()];
        amplitudes[idx] = cone();
        Ok(StateVector {
            basis: basis.clone(),
            amplitudes,
        })
    }

    /// State with the given amplitudes, rescaled to unit norm.
    pub fn from_amplitudes(basis: &Arc<HilbertBasis>, amplitudes: Vec<C<T>>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "{} amplitudes for dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        let mut s = StateVector {
            basis: basis.clone(),
            amplitudes,
        };
        let norm = s.norm();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::InvalidParameter(
                "state has zero or non-finite norm".into(),
            ));
        }
        s.scale(T::one() / norm);
        Ok(s)
    }

    pub fn basis(&self) -> &Arc<HilbertBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> T {
        norm(&self.amplitudes)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C<T> {
        dot(&self.amplitudes, &other.amplitudes)
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &Self) -> T {
        self.inner(other).norm_sqr()
    }

    /// Euclidean distance between the amplitude vectors.
    pub fn distance(&self, other: &Self) -> T {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (*a - *b).norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    /// Rydberg populations `⟨n_i⟩` of every site.
    pub fn populations(&self) -> Vec<T> {
        let n = self.basis.n_sites();
        let mut p = vec![T::zero(); n];
        for (a, cfg) in self.amplitudes.iter().zip(self.basis.configs()) {
            let w = a.norm_sqr();
            if w == T::zero() {
                continue;
            }
            let mut bits = cfg.0;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                p[i] += w;
                bits &= bits - 1;
            }
        }
        p
    }

    fn scale(&mut self, f: T) {
        for a in &mut self.amplitudes {
            *a = a.scale(f);
        }
    }

    fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self.scale(T::one() / n);
        }
        self
    }
}

/// Dimension up to which [`Propagation::Auto`] diagonalizes the operator.
pub const AUTO_DENSE_MAX_DIM: usize = 1024;

/// How protocols propagate states under a fixed operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    /// Adaptive Krylov steps for every evolution.
    Krylov,
    /// One dense diagonalization per operator, reused for every evolution.
    Dense,
    /// Dense up to [`AUTO_DENSE_MAX_DIM`], Krylov above.
    Auto,
}

/// Propagator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveConfig<T: Real> {
    pub method: Propagation,
    /// Maximum Krylov subspace dimension.
    pub krylov_dim: usize,
    /// Reference step in μs: the error budget is `tol` per `step` of
    /// evolution time.
    pub step: T,
    /// Error tolerance per reference step.
    pub tol: T,
}

impl<T: Real> Default for EvolveConfig<T> {
    fn default() -> Self {
        EvolveConfig {
            method: Propagation::Auto,
            krylov_dim: 30,
            step: T::lit(0.01),
            tol: T::lit(1e-10),
        }
    }
}

impl<T: Real> EvolveConfig<T> {
    /// Whether an operator of dimension `dim` is diagonalized rather than
    /// propagated by Krylov steps.
    pub fn uses_dense(&self, dim: usize) -> bool {
        match self.method {
            Propagation::Dense => true,
            Propagation::Auto => dim <= AUTO_DENSE_MAX_DIM,
            Propagation::Krylov => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.krylov_dim < 2 {
            return Err(Error::InvalidParameter(
                "krylov_dim must be at least 2".into(),
            ));
        }
        if !(self.step > T::zero()) || !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter(
                "step and tol must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn dot<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter()
        .zip(b)
        .fold(czero(), |acc, (x, y)| acc + x.conj() * y)
}

fn norm<T: Real>(a: &[C<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

fn check_basis<T: Real>(psi: &StateVector<T>, h: &SparseOperator<T>) -> Result<()> {
    if !psi.basis.same_space(h.basis()) {
        return Err(Error::BasisMismatch(
            "state and operator live on different bases".into(),
        ));
    }
    Ok(())
}

struct Krylov<T: Real> {
    vectors: Vec<Vec<C<T>>>,
    beta0: T,
    residual: T,
    exact: bool,
    eigenvalues: Vec<T>,
    eigenvectors: Vec<T>,
}

impl<T: Real> Krylov<T> {
    fn build(h: &SparseOperator<T>, v: &[C<T>], max_dim: usize) -> Result<Self> {
        let dim = v.len();
        let m_max = max_dim.min(dim);
        let beta0 = norm(v);
        let mut vectors: Vec<Vec<C<T>>> = Vec::with_capacity(m_max);
        vectors.push(v.iter().map(|z| z.unscale(beta0)).collect());
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta: Vec<T> = Vec::with_capacity(m_max);
        let mut w = vec![czero(); dim];
        let mut residual = T::zero();
        let mut exact = false;
        for j in 0..m_max {
            h.apply(&vectors[j], &mut w);
            let a = dot(&vectors[j], &w).re;
            alpha.push(a);
            for (wi, vi) in w.iter_mut().zip(&vectors[j]) {
                *wi -= vi.scale(a);
            }
            if j > 0 {
                let b = beta[j - 1];
                for (wi, vi) in w.iter_mut().zip(&vectors[j - 1]) {
                    *wi -= vi.scale(b);
                }
            }
            for _ in 0..2 {
                for vk in &vectors {
                    let c = dot(vk, &w);
                    for (wi, vi) in w.iter_mut().zip(vk) {
                        *wi -= *vi * c;
                    }
                }
            }
            let b = norm(&w);
            let scale = a.abs() + beta.last().copied().unwrap_or_else(T::zero) + T::one();
            if b <= T::lit(16.0) * T::epsilon() * scale {
                exact = true;
                break;
            }
            if j + 1 == m_max {
                residual = b;
                if m_max == dim {
                    exact = true;
                }
                break;
            }
            beta.push(b);
            vectors.push(w.iter().map(|z| z.unscale(b)).collect());
        }
        let m = alpha.len();
        vectors.truncate(m);
        let (eigenvalues, eigenvectors) = tridiagonal_eigen(&alpha, &beta[..m.saturating_sub(1)])?;
        Ok(Krylov {
            vectors,
            beta0,
            residual,
            exact,
            eigenvalues,
            eigenvectors,
        })
    }

    /// Coefficients of `e^{-iTt} e_1` in the Krylov basis.
    fn coefficients(&self, t: T) -> Vec<C<T>> {
        let m = self.eigenvalues.len();
        let mut y = vec![czero(); m];
        for k in 0..m {
            let w = cis(-self.eigenvalues[k] * t).scale(self.eigenvectors[k]);
            for (j, yj) in y.iter_mut().enumerate() {
                *yj += w.scale(self.eigenvectors[j * m + k]);
            }
        }
        y
    }

    fn error_estimate(&self, coeffs: &[C<T>]) -> T {
        if self.exact {
            return T::zero();
        }
        self.beta0 * self.residual * coeffs[coeffs.len() - 1].norm()
    }

    fn combine(&self, coeffs: &[C<T>], out: &mut [C<T>]) {
        out.iter_mut().for_each(|z| *z = czero());
        for (vk, ck) in self.vectors.iter().zip(coeffs) {
            let c = ck.scale(self.beta0);
            for (o, v) in out.iter_mut().zip(vk) {
                *o += *v * c;
            }
        }
    }
}

/// `e^{-iHt}ψ` by restarted Lanczos.
///
/// Substeps adapt to the a-posteriori error estimate so that each substep of
/// length `h` stays within `tol · h / step`; the accepted length may at most
/// double from one substep to the next. Negative `t` evolves backwards.
pub fn evolve<T: Real>(
    psi: &StateVector<T>,
    h: &SparseOperator<T>,
    t: T,
    cfg: &EvolveConfig<T>,
) -> Result<StateVector<T>> {
    check_basis(psi, h)?;
    cfg.validate()?;
    if t == T::zero() || h.nnz() == 0 {
        return Ok(psi.clone());
    }
    let direction = t.signum();
    let mut remaining = t.abs();
    let mut h_try = cfg.step.min(remaining);
    let tol = cfg.tol.max(T::lit(10.0) * T::epsilon());
    let min_step = cfg.step * T::lit(1e-9);
    let mut v = psi.amplitudes.clone();
    let mut next = vec![czero(); v.len()];
    while remaining > T::zero() {
        let krylov = Krylov::build(h, &v, cfg.krylov_dim)?;
        let mut step = if krylov.exact {
            remaining
        } else {
            h_try.min(remaining)
        };
        let coeffs = loop {
            let coeffs = krylov.coefficients(direction * step);
            let err = krylov.error_estimate(&coeffs);
            if err <= tol * step / cfg.step {
                break coeffs;
            }
            step *= T::lit(0.5);
            if step < min_step {
                return Err(Error::ConvergenceFailure(format!(
                    "Krylov substep fell below {} μs",
                    min_step
                )));
            }
        };
        krylov.combine(&coeffs, &mut next);
        std::mem::swap(&mut v, &mut next);
        remaining -= step;
        if remaining <= T::epsilon() * t.abs() {
            remaining = T::zero();
        }
        h_try = step * T::lit(2.0);
    }
    Ok(StateVector {
        basis: psi.basis.clone(),
        amplitudes: v,
    }
    .normalized())
}

/// Dense eigen-decomposition of a Hamiltonian, reusable for many
/// propagations.
#[derive(Debug, Clone)]
pub struct DenseEvolver<T: Real> {
    basis: Arc<HilbertBasis>,
    eigenvalues: Vec<T>,
    eigenvectors: Vec<C<T>>,
}

impl<T: Real> DenseEvolver<T> {
    pub fn new(h: &SparseOperator<T>) -> Result<Self> {
        let n = h.dim();
        let dense = h.to_dense()?;
        let (eigenvalues, eigenvectors) = if dense.iter().all(|z| z.im == T::zero()) {
            let re: Vec<T> = dense.iter().map(|z| z.re).collect();
            let (w, v) = symmetric_eigen(&re, n)?;
            (w, v.into_iter().map(|x| C::new(x, T::zero())).collect())
        } else {
            hermitian_eigen(dense, n)?
        };
        Ok(DenseEvolver {
            basis: h.basis().clone(),
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Propagator of the operator returned by
    /// [`SparseOperator::with_drive_phase`], obtained without a new
    /// diagonalization.
    pub fn with_drive_phase(&self, phi: T) -> Self {
        let n = self.eigenvalues.len();
        let mut eigenvectors = self.eigenvectors.clone();
        for (r, row) in eigenvectors.chunks_mut(n).enumerate() {
            let phase = cis(-phi * T::from_count(self.basis.config_of(r).excitations() as usize));
            row.iter_mut().for_each(|x| *x *= phase);
        }
        DenseEvolver {
            basis: self.basis.clone(),
            eigenvalues: self.eigenvalues.clone(),
            eigenvectors,
        }
    }

    /// `e^{-iHt}ψ`.
    pub fn evolve(&self, psi: &StateVector<T>, t: T) -> Result<StateVector<T>> {
        if !psi.basis.same_space(&self.basis) {
            return Err(Error::BasisMismatch(
                "state and operator live on different bases".into(),
            ));
        }
        if t == T::zero() {
            return Ok(psi.clone());
        }
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut coeff = vec![czero::<T>(); n];
        for (r, a) in psi.amplitudes.iter().enumerate() {
            for (ck, x) in coeff.iter_mut().zip(&v[r * n..(r + 1) * n]) {
                *ck += x.conj() * a;
            }
        }
        for (ck, e) in coeff.iter_mut().zip(&self.eigenvalues) {
            *ck *= cis(-*e * t);
        }
        let mut out = vec![czero(); n];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &v[r * n..(r + 1) * n];
            *o = row
                .iter()
                .zip(&coeff)
                .fold(czero(), |acc, (x, c)| acc + x * c);
        }
        Ok(StateVector {
            basis: psi.basis.clone(),
            amplitudes: out,
        })
    }
}

/// Repeated evolution under one operator with the strategy chosen by an
/// [`EvolveConfig`].
pub struct Propagator<'a, T: Real> {
    op: &'a SparseOperator<T>,
    cfg: EvolveConfig<T>,
    dense: Option<DenseEvolver<T>>,
}

impl<'a, T: Real> Propagator<'a, T> {
    pub fn new(op: &'a SparseOperator<T>, cfg: &EvolveConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Propagator {
            op,
            cfg: *cfg,
            dense: if cfg.uses_dense(op.dim()) {
                Some(DenseEvolver::new(op)?)
            } else {
                None
            },
        })
    }

    /// Wraps an existing diagonalization of `op`.
    pub fn from_dense(op: &'a SparseOperator<T>, dense: DenseEvolver<T>) -> Result<Self> {
        if !dense.basis.same_space(op.basis()) || dense.eigenvalues.len() != op.dim() {
            return Err(Error::BasisMismatch(
                "diagonalization and operator live on different bases".into(),
            ));
        }
        Ok(Propagator {
            op,
            cfg: EvolveConfig {
                method: Propagation::Dense,
                ..EvolveConfig::default()
            },
            dense: Some(dense),
        })
    }

    pub fn operator(&self) -> &'a SparseOperator<T> {
        self.op
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    /// `e^{-iHt}ψ`.
    pub fn evolve(&self, psi: &StateVector<T>, t: T) -> Result<StateVector<T>> {
        match &self.dense {
            Some(d) => d.evolve(psi, t),
            None => evolve(psi, self.op, t, &self.cfg),
        }
    }
}

/// `e^{-iHt}ψ` from a dense eigen-decomposition (dimension ≤ 4096).
pub fn dense_oracle<T: Real>(
    psi: &StateVector<T>,
    h: &SparseOperator<T>,
    t: T,
) -> Result<StateVector<T>> {
    check_basis(psi, h)?;
    DenseEvolver::new(h)?.evolve(psi, t)
}

fn check_site<T: Real>(psi: &StateVector<T>, site: usize) -> Result<()> {
    if site >= psi.basis.n_sites() {
        return Err(Error::InvalidParameter(format!(
            "site {site} outside a {}-site chain",
            psi.basis.n_sites()
        )));
    }
    Ok(())
}

/// `σ^x_site ψ`: permutes amplitudes by the single-bit flip.
pub fn apply_local_x<T: Real>(psi: &StateVector<T>, site: usize) -> Result<StateVector<T>> {
    check_site(psi, site)?;
    let basis = &psi.basis;
    let mut out = vec![czero(); psi.dim()];
    for (a, cfg) in psi.amplitudes.iter().zip(basis.configs()) {
        if *a == czero() {
            continue;
        }
        let target = cfg.flipped(site);
        let idx = basis.index_of(target).ok_or_else(|| {
            Error::ConstraintViolation(format!(
                "flipping site {site} of {} leaves the constrained basis",
                cfg.to_string_sites(basis.n_sites())
            ))
        })?;
        out[idx] = *a;
    }
    Ok(StateVector {
        basis: basis.clone(),
        amplitudes: out,
    })
}

/// Phase gate: multiplies every amplitude with `site` excited by `e^{i·phase}`.
pub fn apply_local_z<T: Real>(
    psi: &StateVector<T>,
    site: usize,
    phase: T,
) -> Result<StateVector<T>> {
    check_site(psi, site)?;
    let factor = cis(phase);
    let mut out = psi.clone();
    for (a, cfg) in out.amplitudes.iter_mut().zip(psi.basis.configs()) {
        if cfg.is_up(site) {
            *a *= factor;
        }
    }
    Ok(out)
}

/// Global `∏σ^z`: negates amplitudes of configs with an odd number of
/// excitations.
pub fn apply_global_z<T: Real>(psi: &StateVector<T>) -> StateVector<T> {
    let mut out = psi.clone();
    for (a, cfg) in out.amplitudes.iter_mut().zip(psi.basis.configs()) {
        if cfg.excitations() % 2 == 1 {
            *a = -*a;
        }
    }
    out
}

/// Exact evolution under a diagonal Hamiltonian with the given energies.
pub fn evolve_diagonal<T: Real>(
    psi: &StateVector<T>,
    energies: &[T],
    t: T,
) -> Result<StateVector<T>> {
    if energies.len() != psi.dim() {
        return Err(Error::BasisMismatch(
            "energy list does not match the basis".into(),
        ));
    }
    let mut out = psi.clone();
    for (a, e) in out.amplitudes.iter_mut().zip(energies) {
        *a *= cis(-*e * t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, BoundaryCondition};
    use crate::hamiltonian::{build_pxp, build_transverse_field};
    use std::f64::consts::PI;

    fn single_site() -> Arc<HilbertBasis> {
        Arc::new(build_basis(1, BoundaryCondition::Open, false).unwrap())
    }

    #[test]
    fn rabi_pi_pulse() {
        let b = single_site();
        let omega = 2.0 * PI;
        let h = build_transverse_field::<f64>(&b, omega);
        let down = StateVector::basis_state(&b, SpinConfig(0)).unwrap();
        for out in [
            dense_oracle(&down, &h, PI / omega).unwrap(),
            evolve(&down, &h, PI / omega, &EvolveConfig::default()).unwrap(),
        ] {
            let a = out.amplitudes();
            assert!(a[0].norm() < 1e-12);
            assert!((a[1] - C::new(0.0, -1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let b = Arc::new(build_basis(4, BoundaryCondition::Open, true).unwrap());
        let h = build_pxp::<f64>(&b, 0.0).unwrap();
        let psi = StateVector::basis_state(&b, SpinConfig(0b0101)).unwrap();
        assert_eq!(
            evolve(&psi, &h, 1.3, &EvolveConfig::default()).unwrap(),
            psi
        );
    }

    #[test]
    fn gates() {
        let b = Arc::new(build_basis(3, BoundaryCondition::Open, true).unwrap());
        let s010 = StateVector::<f64>::basis_state(&b, SpinConfig(0b010)).unwrap();
        let z = apply_global_z(&s010);
        assert_eq!(
            z.amplitudes()[b.index_of(SpinConfig(0b010)).unwrap()].re,
            -1.0
        );
        let s101 = StateVector::<f64>::basis_state(&b, SpinConfig(0b101)).unwrap();
        assert_eq!(apply_global_z(&s101), s101);
        assert!(matches!(
            apply_local_x(&s010, 0),
            Err(Error::ConstraintViolation(_))
        ));
        let flipped = apply_local_x(&s010, 1).unwrap();
        assert_eq!(apply_local_x(&flipped, 1).unwrap(), s010);
        let ph = apply_local_z(&s010, 1, PI).unwrap();
        assert!((ph.amplitudes()[2].re + 1.0).abs() < 1e-15);
        let two_pi = apply_local_z(&s010, 1, 2.0 * PI).unwrap();
        assert!(two_pi.distance(&s010) < 1e-15);
    }

    #[test]
    fn invalid_config() {
        let c = EvolveConfig::<f64> {
            krylov_dim: 1,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
