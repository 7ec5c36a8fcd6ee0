use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// Photon numbers per mode.
pub type Occupation = Vec<u32>;

/// Truncated multimode Fock basis: every occupation vector with at most
/// `max_total_photons` photons in total.
///
/// States are ordered by total photon number (sector) first and
/// lexicographically within a sector, so `(2, 2)` enumerates as
/// `00, 01, 10, 02, 11, 20`.
#[derive(Clone)]
pub struct FockBasis {
    n_modes: usize,
    max_total: usize,
    states: Vec<Occupation>,
    lookup: HashMap<Occupation, usize>,
    sector_offsets: Vec<usize>,
}

impl FockBasis {
    pub fn new(n_modes: usize, max_total_photons: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::ZeroModes);
        }
        Ok(Self::build(n_modes, max_total_photons))
    }

    /// The single-state basis of zero modes. Tracing out every mode of an
    /// operator lands here; its one matrix element is the full trace.
    pub fn trivial() -> Self {
        Self::build(0, 0)
    }

    fn build(n_modes: usize, max_total: usize) -> Self {
        let mut states = Vec::new();
        let mut sector_offsets = Vec::with_capacity(max_total + 2);
        for total in 0..=max_total {
            sector_offsets.push(states.len());
            let mut current = vec![0u32; n_modes];
            compositions(total as u32, 0, &mut current, &mut states);
            if n_modes == 0 {
                break;
            }
        }
        sector_offsets.push(states.len());
        let lookup = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Self {
            n_modes,
            max_total,
            states,
            lookup,
            sector_offsets,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn max_total_photons(&self) -> usize {
        self.max_total
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, index: usize) -> &[u32] {
        &self.states[index]
    }

    pub fn states(&self) -> impl Iterator<Item = &[u32]> {
        self.states.iter().map(|s| s.as_slice())
    }

    pub fn index_of(&self, occupation: &[u32]) -> Option<usize> {
        self.lookup.get(occupation).copied()
    }

    pub fn total_photons(&self, index: usize) -> usize {
        self.states[index].iter().sum::<u32>() as usize
    }

    /// Index range of the states holding exactly `total` photons.
    pub fn sector(&self, total: usize) -> std::ops::Range<usize> {
        if total + 1 >= self.sector_offsets.len() {
            return self.dim()..self.dim();
        }
        self.sector_offsets[total]..self.sector_offsets[total + 1]
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes {
            return Err(Error::ModeOutOfRange {
                mode,
                n_modes: self.n_modes,
            });
        }
        Ok(())
    }

    /// `|n_1, ..., n_m>` label used in serialised output.
    pub fn label(&self, index: usize) -> String {
        let inner: Vec<String> = self.states[index].iter().map(|n| n.to_string()).collect();
        format!("|{}>", inner.join(","))
    }
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n_modes == other.n_modes && self.max_total == other.max_total
    }
}

impl Eq for FockBasis {}

impl fmt::Debug for FockBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FockBasis")
            .field("n_modes", &self.n_modes)
            .field("max_total_photons", &self.max_total)
            .field("dim", &self.dim())
            .finish()
    }
}

/// Push every way of placing `remaining` photons into modes `mode..` in
/// lexicographic order of the occupation vector.
fn compositions(remaining: u32, mode: usize, current: &mut Occupation, out: &mut Vec<Occupation>) {
    let n = current.len();
    if mode + 1 >= n {
        if n > 0 {
            current[n - 1] = remaining;
        } else if remaining > 0 {
            return;
        }
        out.push(current.clone());
        return;
    }
    for k in 0..=remaining {
        current[mode] = k;
        compositions(remaining - k, mode + 1, current, out);
    }
    current[mode] = 0;
}

/// Public entry point mirroring [`FockBasis::new`].
pub fn enumerate_basis(n_modes: usize, max_total_photons: usize) -> Result<FockBasis> {
    FockBasis::new(n_modes, max_total_photons)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn two_modes_two_photons_order() {
        let b = enumerate_basis(2, 2).unwrap();
        let got: Vec<Vec<u32>> = b.states().map(|s| s.to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![0, 0],
                vec![0, 1],
                vec![1, 0],
                vec![0, 2],
                vec![1, 1],
                vec![2, 0]
            ]
        );
    }

    #[test]
    fn fourteen_modes_two_photons() {
        let b = enumerate_basis(14, 2).unwrap();
        let stars_and_bars = 1 + 14 + binomial(15, 2);
        assert_eq!(stars_and_bars, 120);
        assert_eq!(b.dim(), 120);
    }

    #[test]
    fn single_mode_vacuum() {
        let b = enumerate_basis(1, 0).unwrap();
        assert_eq!(b.dim(), 1);
        assert_eq!(b.state(0), &[0]);
    }

    #[test]
    fn zero_modes_rejected() {
        assert!(matches!(enumerate_basis(0, 3), Err(Error::ZeroModes)));
    }

    #[test]
    fn sector_sizes_are_multisets() {
        let b = enumerate_basis(4, 5).unwrap();
        for k in 0..=5 {
            assert_eq!(b.sector(k).len(), binomial(4 + k - 1, k));
            for i in b.sector(k) {
                assert_eq!(b.total_photons(i), k);
            }
        }
    }

    #[test]
    fn trivial_basis_has_one_state() {
        let b = FockBasis::trivial();
        assert_eq!(b.dim(), 1);
        assert_eq!(b.n_modes(), 0);
    }

    proptest::proptest! {
        #[test]
        fn index_map_round_trips(modes in 1usize..6, max in 0usize..6) {
            let b = enumerate_basis(modes, max).unwrap();
            let expected: usize = (0..=max).map(|k| binomial(modes + k - 1, k)).sum();
            proptest::prop_assert_eq!(b.dim(), expected);
            for i in 0..b.dim() {
                proptest::prop_assert_eq!(b.index_of(b.state(i)), Some(i));
            }
        }
    }
}
