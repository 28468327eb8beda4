//! Hilbert spaces of an N-site chain: the full `2^N` space or the
//! blockade-constrained subspace with no two adjacent excitations.

use std::fmt;

use crate::error::{Error, Result};

/// Largest chain accepted for a constrained basis.
pub const MAX_CONSTRAINED_SITES: usize = 30;
/// Largest chain accepted for the full `2^N` basis.
pub const MAX_UNCONSTRAINED_SITES: usize = 16;

/// Chain boundary condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    Open,
    Periodic,
}

/// Occupation word of a chain: bit `i` set means site `i` is in the Rydberg
/// state `|↑⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SpinConfig(pub u32);

impl SpinConfig {
    /// Config with the given sites excited.
    pub fn from_sites(sites: &[usize]) -> Self {
        SpinConfig(sites.iter().fold(0u32, |w, &s| w | (1 << s)))
    }

    #[inline]
    pub fn is_up(self, site: usize) -> bool {
        (self.0 >> site) & 1 == 1
    }

    #[inline]
    pub fn flipped(self, site: usize) -> Self {
        SpinConfig(self.0 ^ (1 << site))
    }

    #[inline]
    pub fn excitations(self) -> u32 {
        self.0.count_ones()
    }

    /// `true` when no two adjacent sites are both excited.
    pub fn satisfies_blockade(self, n_sites: usize, boundary: BoundaryCondition) -> bool {
        let w = self.0;
        if w & (w >> 1) != 0 {
            return false;
        }
        match boundary {
            BoundaryCondition::Open => true,
            BoundaryCondition::Periodic => {
                n_sites < 2 || !(self.is_up(0) && self.is_up(n_sites - 1))
            }
        }
    }

    /// Renders the word as a string of `0`/`1` with site 0 first.
    pub fn to_string_sites(self, n_sites: usize) -> String {
        (0..n_sites)
            .map(|i| if self.is_up(i) { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Binary for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Binary::fmt(&self.0, f)
    }
}

/// Ordered set of allowed configurations with a config ↔ index map.
///
/// Configs are sorted ascending by their word value, so the index of a
/// config is found by binary search and is reproducible across runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertBasis {
    n_sites: usize,
    boundary: BoundaryCondition,
    constrained: bool,
    configs: Vec<SpinConfig>,
}

impl HilbertBasis {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn configs(&self) -> &[SpinConfig] {
        &self.configs
    }

    /// Config at ordinal `index`.
    pub fn config_of(&self, index: usize) -> SpinConfig {
        self.configs[index]
    }

    /// Ordinal of `config`, or `None` when it is not in the basis.
    pub fn index_of(&self, config: SpinConfig) -> Option<usize> {
        if !self.constrained {
            let i = config.0 as usize;
            return (i < self.configs.len()).then_some(i);
        }
        self.configs.binary_search(&config).ok()
    }

    /// `true` when both bases describe the same space.
    pub fn same_space(&self, other: &HilbertBasis) -> bool {
        self.n_sites == other.n_sites
            && self.boundary == other.boundary
            && self.constrained == other.constrained
    }

    /// Neighbours of `site` under the basis boundary condition.
    pub fn neighbors(&self, site: usize) -> Vec<usize> {
        neighbors(self.n_sites, self.boundary, site)
    }
}

pub(crate) fn neighbors(n: usize, boundary: BoundaryCondition, site: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(2);
    match boundary {
        BoundaryCondition::Open => {
            if site > 0 {
                out.push(site - 1);
            }
            if site + 1 < n {
                out.push(site + 1);
            }
        }
        BoundaryCondition::Periodic => {
            if n > 1 {
                out.push((site + n - 1) % n);
                let right = (site + 1) % n;
                if !out.contains(&right) {
                    out.push(right);
                }
            }
        }
    }
    out.retain(|&s| s != site);
    out
}

/// Builds the Hilbert space of an `n_sites` chain.
///
/// The constrained space is generated by extending words one site at a time
/// (a 0 may always be appended, a 1 only after a 0), followed by a wrap-around
/// filter for periodic chains.
pub fn build_basis(
    n_sites: usize,
    boundary: BoundaryCondition,
    constrained: bool,
) -> Result<HilbertBasis> {
    if n_sites == 0 {
        return Err(Error::InvalidSize("a chain needs at least one site".into()));
    }
    let limit = if constrained {
        MAX_CONSTRAINED_SITES
    } else {
        MAX_UNCONSTRAINED_SITES
    };
    if n_sites > limit {
        return Err(Error::SizeLimitExceeded(format!(
            "{n_sites} sites exceeds the {} basis limit of {limit}",
            if constrained { "constrained" } else { "full" }
        )));
    }
    let configs = if constrained {
        let mut words: Vec<u32> = vec![0, 1];
        for site in 1..n_sites {
            let mut next = Vec::with_capacity(words.len() * 2);
            for &w in &words {
                next.push(w);
                if (w >> (site - 1)) & 1 == 0 {
                    next.push(w | (1 << site));
                }
            }
            words = next;
        }
        let mut configs: Vec<SpinConfig> = words
            .into_iter()
            .map(SpinConfig)
            .filter(|c| c.satisfies_blockade(n_sites, boundary))
            .collect();
        configs.sort_unstable();
        configs
    } else {
        (0..(1u32 << n_sites)).map(SpinConfig).collect()
    };
    Ok(HilbertBasis {
        n_sites,
        boundary,
        constrained,
        configs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_site_open_enumeration() {
        let b = build_basis(3, BoundaryCondition::Open, true).unwrap();
        let words: Vec<u32> = b.configs().iter().map(|c| c.0).collect();
        assert_eq!(words, vec![0b000, 0b001, 0b010, 0b100, 0b101]);
        assert_eq!(b.index_of(SpinConfig(0b101)), Some(4));
        assert_eq!(b.index_of(SpinConfig(0b011)), None);
    }

    #[test]
    fn four_site_ring_is_lucas() {
        let b = build_basis(4, BoundaryCondition::Periodic, true).unwrap();
        assert_eq!(b.dim(), 7);
    }

    #[test]
    fn full_space_indexing() {
        let b = build_basis(2, BoundaryCondition::Open, false).unwrap();
        assert_eq!(b.index_of(SpinConfig(0b11)), Some(3));
        assert_eq!(b.index_of(SpinConfig(0b100)), None);
    }

    #[test]
    fn guards() {
        assert!(matches!(
            build_basis(0, BoundaryCondition::Open, true),
            Err(Error::InvalidSize(_))
        ));
        assert!(matches!(
            build_basis(17, BoundaryCondition::Open, false),
            Err(Error::SizeLimitExceeded(_))
        ));
        assert!(matches!(
            build_basis(31, BoundaryCondition::Periodic, true),
            Err(Error::SizeLimitExceeded(_))
        ));
    }

    #[test]
    fn ring_neighbors() {
        assert_eq!(neighbors(5, BoundaryCondition::Periodic, 0), vec![4, 1]);
        assert_eq!(neighbors(5, BoundaryCondition::Open, 0), vec![1]);
        assert_eq!(neighbors(2, BoundaryCondition::Periodic, 0), vec![1]);
        assert!(neighbors(1, BoundaryCondition::Periodic, 0).is_empty());
    }
}
