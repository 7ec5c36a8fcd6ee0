use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};

use super::basis::FockBasis;

/// Normalised pure state on a truncated Fock basis.
#[derive(Debug, Clone)]
pub struct PureState {
    basis: Arc<FockBasis>,
    amplitudes: CVector,
}

impl PureState {
    pub fn new(basis: Arc<FockBasis>, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite amplitude vector".into()));
        }
        Ok(Self {
            basis,
            amplitudes: amplitudes / C64::new(norm, 0.0),
        })
    }

    /// The Fock state with the given occupation.
    pub fn fock(basis: Arc<FockBasis>, occupation: &[u32]) -> Result<Self> {
        let index = basis.index_of(occupation).ok_or_else(|| {
            Error::InvalidState(format!("occupation {occupation:?} is not in the basis"))
        })?;
        let mut amplitudes = CVector::zeros(basis.dim());
        amplitudes[index] = linalg::ONE;
        Ok(Self { basis, amplitudes })
    }

    /// Normalised superposition of Fock states.
    pub fn superposition(basis: Arc<FockBasis>, terms: &[(C64, &[u32])]) -> Result<Self> {
        let mut amplitudes = CVector::zeros(basis.dim());
        for (amp, occ) in terms {
            let index = basis.index_of(occ).ok_or_else(|| {
                Error::InvalidState(format!("occupation {occ:?} is not in the basis"))
            })?;
            amplitudes[index] += *amp;
        }
        Self::new(basis, amplitudes)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn probability(&self, occupation: &[u32]) -> f64 {
        self.basis
            .index_of(occupation)
            .map_or(0.0, |i| self.amplitudes[i].norm_sqr())
    }

    pub(crate) fn from_parts(basis: Arc<FockBasis>, amplitudes: CVector) -> Self {
        Self { basis, amplitudes }
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            basis: self.basis.clone(),
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

/// Hermitian, unit-trace, positive operator on a truncated Fock basis.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    basis: Arc<FockBasis>,
    matrix: CMatrix,
}

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const EIGEN_TOL: f64 = 1e-10;

impl DensityOperator {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(basis: Arc<FockBasis>, matrix: CMatrix) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(basis, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Only the shape is checked; used for intermediate operators.
    pub fn from_matrix_unchecked(basis: Arc<FockBasis>, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: matrix.nrows(),
            });
        }
        Ok(Self { basis, matrix })
    }

    pub fn validate(&self) -> Result<()> {
        let defect = linalg::hermiticity_defect(&self.matrix);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let tr = linalg::trace(&self.matrix);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -EIGEN_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    pub fn purity(&self) -> f64 {
        linalg::hs_inner(&self.matrix, &self.matrix).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_eigen(&self.matrix)
            .0
            .first()
            .copied()
            .unwrap_or(0.0)
    }

    pub fn population(&self, occupation: &[u32]) -> f64 {
        self.basis
            .index_of(occupation)
            .map_or(0.0, |i| self.matrix[(i, i)].re)
    }

    /// Total population of the states whose `mode` holds at least one photon.
    pub fn mode_occupied_population(&self, mode: usize) -> f64 {
        (0..self.basis.dim())
            .filter(|&i| self.basis.state(i)[mode] > 0)
            .map(|i| self.matrix[(i, i)].re)
            .sum()
    }

    /// Convex mixture `sum_k w_k rho_k` of states on the same basis.
    pub fn mixture(parts: &[(f64, &DensityOperator)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let mut m = CMatrix::zeros(first.1.basis.dim(), first.1.basis.dim());
        for (w, rho) in parts {
            if rho.basis != first.1.basis {
                return Err(Error::DimensionMismatch {
                    expected: first.1.basis.dim(),
                    found: rho.basis.dim(),
                });
            }
            m += &rho.matrix * C64::new(*w, 0.0);
        }
        Ok(Self {
            basis: first.1.basis.clone(),
            matrix: m,
        })
    }
}

impl From<&PureState> for DensityOperator {
    fn from(psi: &PureState) -> Self {
        psi.to_density()
    }
}

impl From<&DensityOperator> for DensityOperator {
    fn from(rho: &DensityOperator) -> Self {
        rho.clone()
    }
}

impl From<PureState> for DensityOperator {
    fn from(psi: PureState) -> Self {
        psi.to_density()
    }
}
