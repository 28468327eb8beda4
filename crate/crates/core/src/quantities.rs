//! Single-site reduced densities and the information measures built on
//! them: von Neumann entropy, Holevo information, trace distance,
//! tomographic reconstruction and domain-wall density.
//!
//! Matrices are written in the `(↓, ↑)` ordering, so index 0 is the ground
//! state and index 1 the Rydberg state.

use crate::error::{Error, Result};
use crate::evolve::StateVector;
use crate::scalar::{czero, Real, C};

const TRACE_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;
const POSITIVITY_TOL: f64 = 1e-9;

/// 2×2 reduced density matrix of one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleSiteDensity<T: Real> {
    elements: [[C<T>; 2]; 2],
}

fn tolerance<T: Real>(value: f64) -> T {
    T::lit(value).max(T::lit(64.0) * T::epsilon())
}

impl<T: Real> SingleSiteDensity<T> {
    /// Wraps a matrix after checking trace, hermiticity and positivity.
    pub fn new(elements: [[C<T>; 2]; 2]) -> Result<Self> {
        let rho = SingleSiteDensity { elements };
        rho.validate()?;
        Ok(rho)
    }

    /// `½(I + x σ^x + y σ^y + z σ^z)`, unchecked.
    pub fn from_bloch(x: T, y: T, z: T) -> Self {
        let half = T::lit(0.5);
        SingleSiteDensity {
            elements: [
                [
                    C::new(half * (T::one() - z), T::zero()),
                    C::new(half * x, half * y),
                ],
                [
                    C::new(half * x, -half * y),
                    C::new(half * (T::one() + z), T::zero()),
                ],
            ],
        }
    }

    pub fn pure_down() -> Self {
        Self::from_bloch(T::zero(), T::zero(), -T::one())
    }

    pub fn pure_up() -> Self {
        Self::from_bloch(T::zero(), T::zero(), T::one())
    }

    pub fn elements(&self) -> &[[C<T>; 2]; 2] {
        &self.elements
    }

    /// Rydberg population `ρ_{↑↑}`.
    pub fn p_up(&self) -> T {
        self.elements[1][1].re
    }

    /// Bloch vector `(⟨σ^x⟩, ⟨σ^y⟩, ⟨σ^z⟩)`.
    pub fn bloch(&self) -> [T; 3] {
        let two = T::lit(2.0);
        let up_down = self.elements[1][0];
        [
            two * up_down.re,
            -two * up_down.im,
            self.elements[1][1].re - self.elements[0][0].re,
        ]
    }

    pub fn trace(&self) -> T {
        self.elements[0][0].re + self.elements[1][1].re
    }

    /// Eigenvalues in ascending order, from the closed 2×2 formula.
    pub fn eigenvalues(&self) -> [T; 2] {
        hermitian_2x2_eigenvalues(&self.elements)
    }

    fn validate(&self) -> Result<()> {
        let e = &self.elements;
        let herm = (e[0][1] - e[1][0].conj())
            .norm()
            .max(e[0][0].im.abs())
            .max(e[1][1].im.abs());
        if herm > tolerance(HERMITIAN_TOL) {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (defect {herm})"
            )));
        }
        let tr = self.trace();
        if (tr - T::one()).abs() > tolerance(TRACE_TOL) {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let [lo, hi] = self.eigenvalues();
        let tol: T = tolerance(POSITIVITY_TOL);
        if lo < -tol || hi > T::one() + tol {
            return Err(Error::InvalidDensity(format!("eigenvalues {lo}, {hi}")));
        }
        Ok(())
    }

    fn mix(&self, other: &Self) -> Self {
        let half = T::lit(0.5);
        let mut elements = [[czero(); 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                elements[r][c] = (self.elements[r][c] + other.elements[r][c]).scale(half);
            }
        }
        SingleSiteDensity { elements }
    }
}

fn hermitian_2x2_eigenvalues<T: Real>(m: &[[C<T>; 2]; 2]) -> [T; 2] {
    let half = T::lit(0.5);
    let mean = half * (m[0][0].re + m[1][1].re);
    let gap = half * (m[0][0].re - m[1][1].re);
    let r = (gap * gap + m[0][1].norm_sqr()).sqrt();
    [mean - r, mean + r]
}

/// Exact partial trace of `ψ` over every site except `site`.
pub fn reduced_density<T: Real>(psi: &StateVector<T>, site: usize) -> SingleSiteDensity<T> {
    let basis = psi.basis();
    let amps = psi.amplitudes();
    let (mut down, mut up) = (T::zero(), T::zero());
    let mut coherence = czero::<T>();
    for (a, cfg) in amps.iter().zip(basis.configs()) {
        let w = a.norm_sqr();
        if cfg.is_up(site) {
            up += w;
        } else {
            down += w;
            if *a != czero() {
                if let Some(j) = basis.index_of(cfg.flipped(site)) {
                    coherence += amps[j] * a.conj();
                }
            }
        }
    }
    SingleSiteDensity {
        elements: [
            [C::new(down, T::zero()), coherence.conj()],
            [coherence, C::new(up, T::zero())],
        ],
    }
}

/// Weighted sum of reduced densities of an ensemble.
pub fn ensemble_density<T: Real>(
    states: &[(T, StateVector<T>)],
    site: usize,
) -> Result<SingleSiteDensity<T>> {
    check_weights(states.iter().map(|(w, _)| *w))?;
    let mut elements = [[czero(); 2]; 2];
    for (w, psi) in states {
        let rho = reduced_density(psi, site);
        for r in 0..2 {
            for c in 0..2 {
                elements[r][c] += rho.elements[r][c].scale(*w);
            }
        }
    }
    Ok(SingleSiteDensity { elements })
}

pub(crate) fn check_weights<T: Real>(weights: impl Iterator<Item = T>) -> Result<()> {
    let mut total = T::zero();
    for w in weights {
        if !(w >= T::zero()) {
            return Err(Error::WeightSumInvalid(w.as_f64()));
        }
        total += w;
    }
    if (total - T::one()).abs() > tolerance(1e-9) {
        return Err(Error::WeightSumInvalid(total.as_f64()));
    }
    Ok(())
}

/// `−Tr ρ log₂ ρ` in bits.
pub fn von_neumann_entropy<T: Real>(rho: &SingleSiteDensity<T>) -> Result<T> {
    rho.validate()?;
    Ok(rho
        .eigenvalues()
        .iter()
        .map(|&l| {
            let l = l.max(T::zero()).min(T::one());
            if l > T::zero() {
                -l * l.log2()
            } else {
                T::zero()
            }
        })
        .sum())
}

/// Holevo information `S((ρ+ρ′)/2) − (S(ρ) + S(ρ′))/2` in bits.
pub fn holevo<T: Real>(rho: &SingleSiteDensity<T>, rho_prime: &SingleSiteDensity<T>) -> Result<T> {
    let s_mix = von_neumann_entropy(&rho.mix(rho_prime))?;
    let s_a = von_neumann_entropy(rho)?;
    let s_b = von_neumann_entropy(rho_prime)?;
    Ok((s_mix - T::lit(0.5) * (s_a + s_b))
        .max(T::zero())
        .min(T::one()))
}

/// Trace distance `½ Tr|ρ − ρ′|`.
pub fn trace_distance<T: Real>(rho: &SingleSiteDensity<T>, rho_prime: &SingleSiteDensity<T>) -> T {
    let mut diff = [[czero(); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            diff[r][c] = rho.elements[r][c] - rho_prime.elements[r][c];
        }
    }
    let [a, b] = hermitian_2x2_eigenvalues(&diff);
    T::lit(0.5) * (a.abs() + b.abs())
}

/// Density reconstructed from a population and a parity-oscillation
/// amplitude: `ρ = ½(I + (2P − 1)σ^z) + ε A σ^y`.
///
/// `A` is normalized as `|⟨σ^y⟩|/2`.
pub fn tomography_reconstruct<T: Real>(
    p_up: T,
    amplitude: T,
    sign: T,
) -> Result<SingleSiteDensity<T>> {
    let z = T::lit(2.0) * p_up - T::one();
    let rho = SingleSiteDensity::from_bloch(T::zero(), T::lit(2.0) * sign * amplitude, z);
    let [lo, hi] = rho.eigenvalues();
    let tol: T = tolerance(POSITIVITY_TOL);
    if lo < -tol || hi > T::one() + tol {
        return Err(Error::NonPhysicalDensity(format!(
            "P = {p_up}, A = {amplitude} gives eigenvalues {lo}, {hi}"
        )));
    }
    Ok(rho)
}

/// ZZ-OTOC value `2P(↑) − 1` of a measured site initialized in `|↑⟩`.
pub fn otoc_from_population<T: Real>(p_up: T) -> T {
    T::lit(2.0) * p_up - T::one()
}

/// Mean of `(1 − σ^z_a σ^z_b)/2` over consecutive pairs of `window`, i.e.
/// the fraction of bonds whose two spins differ.
pub fn domain_wall_density<T: Real>(psi: &StateVector<T>, window: &[usize]) -> Result<T> {
    if window.len() < 2 {
        return Err(Error::WindowTooSmall(window.len()));
    }
    let n = psi.basis().n_sites();
    if let Some(&s) = window.iter().find(|&&s| s >= n) {
        return Err(Error::InvalidParameter(format!(
            "window site {s} outside the chain"
        )));
    }
    let bonds = T::from_count(window.len() - 1);
    let mut acc = T::zero();
    for (a, cfg) in psi.amplitudes().iter().zip(psi.basis().configs()) {
        let w = a.norm_sqr();
        if w == T::zero() {
            continue;
        }
        let walls = window
            .windows(2)
            .filter(|p| cfg.is_up(p[0]) != cfg.is_up(p[1]))
            .count();
        acc += w * T::from_count(walls);
    }
    Ok(acc / bonds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, BoundaryCondition, SpinConfig};
    use std::sync::Arc;

    fn two_site() -> Arc<crate::basis::HilbertBasis> {
        Arc::new(build_basis(2, BoundaryCondition::Open, false).unwrap())
    }

    fn state(amps: &[(u32, f64)]) -> StateVector<f64> {
        let b = two_site();
        let mut v = vec![C::new(0.0, 0.0); 4];
        for &(c, a) in amps {
            v[c as usize] = C::new(a, 0.0);
        }
        StateVector::from_amplitudes(&b, v).unwrap()
    }

    fn close(a: &SingleSiteDensity<f64>, b: &SingleSiteDensity<f64>) -> bool {
        (0..2).all(|r| (0..2).all(|c| (a.elements[r][c] - b.elements[r][c]).norm() < 1e-12))
    }

    #[test]
    fn reduced_density_examples() {
        let down = state(&[(0, 1.0)]);
        assert!(close(
            &reduced_density(&down, 0),
            &SingleSiteDensity::pure_down()
        ));
        // (|↓↓⟩ + |↑↓⟩)/√2 with site 0 the first spin.
        let plus = state(&[(0b00, 1.0), (0b01, 1.0)]);
        assert!(close(
            &reduced_density(&plus, 0),
            &SingleSiteDensity::from_bloch(1.0, 0.0, 0.0)
        ));
        let bell = state(&[(0b10, 1.0), (0b01, 1.0)]);
        assert!(close(
            &reduced_density(&bell, 0),
            &SingleSiteDensity::from_bloch(0.0, 0.0, 0.0)
        ));
    }

    #[test]
    fn entropy_examples() {
        let pure = SingleSiteDensity::<f64>::pure_up();
        assert!(von_neumann_entropy(&pure).unwrap().abs() < 1e-15);
        let mixed = SingleSiteDensity::<f64>::from_bloch(0.0, 0.0, 0.0);
        assert!((von_neumann_entropy(&mixed).unwrap() - 1.0).abs() < 1e-15);
        let rho = SingleSiteDensity::<f64>::from_bloch(0.0, 0.0, 0.8);
        assert!((von_neumann_entropy(&rho).unwrap() - 0.468_995_593_589_281_2).abs() < 1e-12);
    }

    #[test]
    fn holevo_examples() {
        let up = SingleSiteDensity::<f64>::pure_up();
        let down = SingleSiteDensity::<f64>::pure_down();
        assert_eq!(holevo(&up, &up).unwrap(), 0.0);
        assert!((holevo(&up, &down).unwrap() - 1.0).abs() < 1e-15);
        let left = SingleSiteDensity::<f64>::from_bloch(-1.0, 0.0, 0.0);
        let right = SingleSiteDensity::<f64>::from_bloch(1.0, 0.0, 0.0);
        assert!((holevo(&left, &right).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trace_distance_examples() {
        let a = SingleSiteDensity::<f64>::from_bloch(0.0, 0.0, 0.4);
        let b = SingleSiteDensity::<f64>::from_bloch(0.0, 0.0, -0.4);
        assert!((trace_distance(&a, &b) - 0.4).abs() < 1e-15);
        assert_eq!(trace_distance(&a, &a), 0.0);
        let up = SingleSiteDensity::<f64>::pure_up();
        let down = SingleSiteDensity::<f64>::pure_down();
        assert!((trace_distance(&up, &down) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tomography_examples() {
        let up = tomography_reconstruct(1.0, 0.0, 1.0).unwrap();
        assert!(close(&up, &SingleSiteDensity::pure_up()));
        let y = tomography_reconstruct(0.5, 0.5, 1.0).unwrap();
        assert!(close(&y, &SingleSiteDensity::from_bloch(0.0, 1.0, 0.0)));
        assert!(von_neumann_entropy(&y).unwrap().abs() < 1e-12);
        assert!(matches!(
            tomography_reconstruct(0.5, 0.6, 1.0),
            Err(Error::NonPhysicalDensity(_))
        ));
    }

    #[test]
    fn otoc_population_map() {
        assert_eq!(otoc_from_population(1.0), 1.0);
        assert_eq!(otoc_from_population(0.5), 0.0);
        assert_eq!(otoc_from_population(0.0), -1.0);
    }

    #[test]
    fn domain_walls() {
        let b = Arc::new(build_basis(5, BoundaryCondition::Open, true).unwrap());
        let z2 = StateVector::<f64>::basis_state(&b, SpinConfig(0b10101)).unwrap();
        let zero = StateVector::<f64>::basis_state(&b, SpinConfig(0)).unwrap();
        let window: Vec<usize> = (0..5).collect();
        assert_eq!(domain_wall_density(&z2, &window).unwrap(), 1.0);
        assert_eq!(domain_wall_density(&zero, &window).unwrap(), 0.0);
        let plus = state(&[(0b00, 1.0), (0b01, 1.0)]);
        assert!((domain_wall_density(&plus, &[0, 1]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            domain_wall_density(&plus, &[0]),
            Err(Error::WindowTooSmall(1))
        ));
    }

    #[test]
    fn ensemble_weights() {
        let b = Arc::new(build_basis(1, BoundaryCondition::Open, false).unwrap());
        let d = StateVector::<f64>::basis_state(&b, SpinConfig(0)).unwrap();
        let u = StateVector::<f64>::basis_state(&b, SpinConfig(1)).unwrap();
        let rho = ensemble_density(&[(0.5, d.clone()), (0.5, u.clone())], 0).unwrap();
        assert!(close(&rho, &SingleSiteDensity::from_bloch(0.0, 0.0, 0.0)));
        assert!(matches!(
            ensemble_density(&[(0.5, d), (0.4, u)], 0),
            Err(Error::WeightSumInvalid(_))
        ));
    }
}
