//! POVMs on Fock spaces and outcome distributions.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fock::{DensityOperator, FockBasis};
use crate::linalg::{hermitian_eigen, hermiticity_defect, max_abs, CMatrix, C64};

/// Probabilities above `-PROBABILITY_CLAMP` are clamped to zero.
pub const PROBABILITY_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum PovmOperator {
    /// Diagonal in the Fock basis.
    Diagonal(DVector<f64>),
    Dense(CMatrix),
}

impl PovmOperator {
    pub fn dim(&self) -> usize {
        match self {
            Self::Diagonal(d) => d.len(),
            Self::Dense(m) => m.nrows(),
        }
    }

    /// `Re tr(rho Pi)`.
    pub fn expectation(&self, rho: &CMatrix) -> f64 {
        match self {
            Self::Diagonal(d) => d.iter().enumerate().map(|(i, &w)| w * rho[(i, i)].re).sum(),
            Self::Dense(m) => {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        acc += rho[(i, j)] * m[(j, i)];
                    }
                }
                acc.re
            }
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Self::Diagonal(d) => CMatrix::from_diagonal(&d.map(|x| C64::new(x, 0.0))),
            Self::Dense(m) => m.clone(),
        }
    }
}

/// Labelled outcome operators on one basis.
#[derive(Debug, Clone)]
pub struct Povm {
    basis: Arc<FockBasis>,
    labels: Vec<String>,
    elements: Vec<PovmOperator>,
}

impl Povm {
    pub fn new(basis: Arc<FockBasis>, labels: Vec<String>, elements: Vec<PovmOperator>) -> Result<Self> {
        if labels.len() != elements.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: elements.len(),
            });
        }
        for e in &elements {
            if e.dim() != basis.dim() {
                return Err(Error::DimensionMismatch {
                    expected: basis.dim(),
                    found: e.dim(),
                });
            }
        }
        Ok(Self {
            basis,
            labels,
            elements,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elements(&self) -> &[PovmOperator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn sum(&self) -> CMatrix {
        let d = self.basis.dim();
        self.elements
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, e| acc + e.to_dense())
    }

    /// `max |sum_k Pi_k - 1|`.
    pub fn completeness_defect(&self) -> f64 {
        let d = self.basis.dim();
        max_abs(&(self.sum() - CMatrix::identity(d, d)))
    }

    /// Smallest eigenvalue over all elements.
    pub fn min_eigenvalue(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                PovmOperator::Diagonal(d) => d.min(),
                PovmOperator::Dense(m) => hermitian_eigen(m).0[0],
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_hermiticity_defect(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                PovmOperator::Diagonal(_) => 0.0,
                PovmOperator::Dense(m) => hermiticity_defect(m),
            })
            .fold(0.0, f64::max)
    }
}

fn diagonal_povm<K: Ord + Clone>(
    basis: &Arc<FockBasis>,
    key: impl Fn(&[u32]) -> K,
    label: impl Fn(&K) -> String,
) -> Povm {
    let mut groups: BTreeMap<K, DVector<f64>> = BTreeMap::new();
    for (i, occ) in basis.states().enumerate() {
        groups
            .entry(key(occ))
            .or_insert_with(|| DVector::zeros(basis.dim()))[i] = 1.0;
    }
    let labels = groups.keys().map(&label).collect();
    let elements = groups.into_values().map(PovmOperator::Diagonal).collect();
    Povm {
        basis: basis.clone(),
        labels,
        elements,
    }
}

fn occupation_label(occ: &[u32]) -> String {
    let parts: Vec<String> = occ.iter().map(u32::to_string).collect();
    format!("({})", parts.join(","))
}

/// Photon-number-resolving detection of `modes`; one projector per
/// occupation pattern present in the basis, other modes unmonitored.
pub fn number_resolving_povm(basis: &Arc<FockBasis>, modes: &[usize]) -> Result<Povm> {
    for &m in modes {
        basis.check_mode(m)?;
    }
    Ok(diagonal_povm(
        basis,
        |occ| modes.iter().map(|&m| occ[m]).collect::<Vec<u32>>(),
        |k| occupation_label(k),
    ))
}

/// Binary click detectors `{|0><0|, 1 - |0><0|}` on each of `modes`.
pub fn click_povm(basis: &Arc<FockBasis>, modes: &[usize]) -> Result<Povm> {
    for &m in modes {
        basis.check_mode(m)?;
    }
    Ok(diagonal_povm(
        basis,
        |occ| modes.iter().map(|&m| occ[m] > 0).collect::<Vec<bool>>(),
        |k| k.iter().map(|&c| if c { '1' } else { '0' }).collect(),
    ))
}

/// `{|n><n| on modes, 1 - |n><n|}` for a single occupation pattern `n`.
pub fn binary_projector_povm(basis: &Arc<FockBasis>, modes: &[usize], pattern: &[u32]) -> Result<Povm> {
    if modes.len() != pattern.len() {
        return Err(Error::DimensionMismatch {
            expected: modes.len(),
            found: pattern.len(),
        });
    }
    for &m in modes {
        basis.check_mode(m)?;
    }
    let hit = DVector::from_iterator(
        basis.dim(),
        basis
            .states()
            .map(|occ| f64::from(u8::from(modes.iter().zip(pattern).all(|(&m, &n)| occ[m] == n)))),
    );
    let miss = hit.map(|x| 1.0 - x);
    Ok(Povm {
        basis: basis.clone(),
        labels: vec![occupation_label(pattern), format!("not {}", occupation_label(pattern))],
        elements: vec![PovmOperator::Diagonal(hit), PovmOperator::Diagonal(miss)],
    })
}

/// `p_k = tr(rho Pi_k)`, with values in `[-1e-12, 0)` clamped to zero.
pub fn outcome_distribution(rho: &DensityOperator, povm: &Povm) -> Result<Vec<f64>> {
    outcome_distribution_matrix(rho.matrix(), povm)
}

/// As [`outcome_distribution`] for an arbitrary (e.g. unnormalised) operator.
pub fn outcome_distribution_matrix(rho: &CMatrix, povm: &Povm) -> Result<Vec<f64>> {
    if rho.nrows() != povm.basis.dim() || rho.ncols() != povm.basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.basis.dim(),
            found: rho.nrows(),
        });
    }
    Ok(povm
        .elements
        .iter()
        .map(|e| {
            let p = e.expectation(rho);
            if (-PROBABILITY_CLAMP..0.0).contains(&p) {
                0.0
            } else {
                p
            }
        })
        .collect())
}
