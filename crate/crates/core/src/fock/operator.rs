use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64, I, ZERO};

use super::basis::FockBasis;

/// Column-sparse square operator on a Fock basis.
///
/// Number-conserving optics produce a handful of non-zeros per column, so
/// conjugating a dense density matrix costs `nnz * dim` rather than `dim^3`.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    columns: Vec<Vec<(usize, C64)>>,
}

impl SparseOperator {
    pub fn from_columns(dim: usize, columns: Vec<Vec<(usize, C64)>>) -> Self {
        debug_assert_eq!(columns.len(), dim);
        Self { dim, columns }
    }

    pub fn diagonal(values: &[C64]) -> Self {
        Self {
            dim: values.len(),
            columns: values.iter().enumerate().map(|(i, &v)| vec![(i, v)]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn column(&self, j: usize) -> &[(usize, C64)] {
        &self.columns[j]
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut columns = vec![Vec::new(); self.dim];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                columns[i].push((j, v.conj()));
            }
        }
        Self {
            dim: self.dim,
            columns,
        }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        let mut out = CVector::zeros(self.dim);
        for (j, col) in self.columns.iter().enumerate() {
            let x = v[j];
            if x == ZERO {
                continue;
            }
            for &(i, u) in col {
                out[i] += u * x;
            }
        }
        out
    }

    /// `self * m`.
    pub fn mul_dense(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, m.ncols());
        for c in 0..m.ncols() {
            for (j, col) in self.columns.iter().enumerate() {
                let x = m[(j, c)];
                if x == ZERO {
                    continue;
                }
                for &(i, u) in col {
                    out[(i, c)] += u * x;
                }
            }
        }
        out
    }

    /// `self * m * self^dagger`, valid for any square `m`.
    pub fn conjugate(&self, m: &CMatrix) -> CMatrix {
        let left = self.mul_dense(m);
        self.mul_dense(&left.adjoint()).adjoint()
    }

    pub fn compose(&self, rhs: &Self) -> Self {
        let columns = rhs
            .columns
            .iter()
            .map(|col| {
                let mut acc = vec![ZERO; self.dim];
                let mut touched = Vec::new();
                for &(k, r) in col {
                    for &(i, l) in &self.columns[k] {
                        if acc[i] == ZERO {
                            touched.push(i);
                        }
                        acc[i] += l * r;
                    }
                }
                touched.sort_unstable();
                touched.dedup();
                touched.into_iter().map(|i| (i, acc[i])).collect()
            })
            .collect();
        Self {
            dim: self.dim,
            columns,
        }
    }
}

/// 2x2 mode transfer matrix `t`: the unitary maps `a^dag -> t00 a^dag + t10 b^dag`
/// and `b^dag -> t01 a^dag + t11 b^dag`.
pub type ModeTransfer = [[C64; 2]; 2];

/// Mode transfer of `B(theta) = exp(-2 i theta J_x)`:
/// `a^dag -> cos(theta) a^dag - i sin(theta) b^dag`, symmetric in `a`, `b`.
/// The cross-over probability of a single photon is `sin^2(theta)`.
pub fn beam_splitter_transfer(theta: f64) -> ModeTransfer {
    let (s, c) = theta.sin_cos();
    [
        [C64::new(c, 0.0), -I * s],
        [-I * s, C64::new(c, 0.0)],
    ]
}

/// Fock-space unitary induced on modes `mode_a`, `mode_b` by a passive
/// two-mode transfer matrix.
pub fn two_mode_unitary(
    basis: &FockBasis,
    mode_a: usize,
    mode_b: usize,
    transfer: &ModeTransfer,
) -> Result<SparseOperator> {
    basis.check_mode(mode_a)?;
    basis.check_mode(mode_b)?;
    if mode_a == mode_b {
        return Err(Error::IdenticalModes(mode_a));
    }
    let blocks: Vec<CMatrix> = (0..=basis.max_total_photons())
        .map(|n| sector_block(n, transfer))
        .collect();
    let mut columns = Vec::with_capacity(basis.dim());
    let mut target = vec![0u32; basis.n_modes()];
    for j in 0..basis.dim() {
        let occ = basis.state(j);
        let na = occ[mode_a] as usize;
        let nb = occ[mode_b] as usize;
        let n = na + nb;
        target.copy_from_slice(occ);
        let mut col = Vec::with_capacity(n + 1);
        for p in 0..=n {
            let amp = blocks[n][(p, na)];
            if amp == ZERO {
                continue;
            }
            target[mode_a] = p as u32;
            target[mode_b] = (n - p) as u32;
            // Number conservation keeps every image inside the truncation.
            let i = basis.index_of(&target).ok_or(Error::TruncationOverflow)?;
            col.push((i, amp));
        }
        columns.push(col);
    }
    Ok(SparseOperator::from_columns(basis.dim(), columns))
}

/// `B(theta) = exp(-2 i theta J_x)` on modes `mode_a`, `mode_b`.
pub fn beam_splitter_matrix(
    basis: &FockBasis,
    mode_a: usize,
    mode_b: usize,
    theta: f64,
) -> Result<SparseOperator> {
    two_mode_unitary(basis, mode_a, mode_b, &beam_splitter_transfer(theta))
}

/// `exp(i phi n_mode)`.
pub fn phase_shifter_matrix(basis: &FockBasis, mode: usize, phi: f64) -> Result<SparseOperator> {
    basis.check_mode(mode)?;
    let diag: Vec<C64> = basis
        .states()
        .map(|s| C64::from_polar(1.0, phi * s[mode] as f64))
        .collect();
    Ok(SparseOperator::diagonal(&diag))
}

/// Block of the two-mode unitary on the `n`-photon sector, indexed by the
/// photon number in mode `a` (row: output, column: input).
fn sector_block(n: usize, t: &ModeTransfer) -> CMatrix {
    let fact: Vec<f64> = (0..=n).scan(1.0, |acc, k| {
        if k > 0 {
            *acc *= k as f64;
        }
        Some(*acc)
    })
    .collect();
    let binom = |m: usize, k: usize| fact[m] / (fact[k] * fact[m - k]);
    let mut block = CMatrix::zeros(n + 1, n + 1);
    for na in 0..=n {
        let nb = n - na;
        // (t00 a + t10 b)^na (t01 a + t11 b)^nb, expanded in powers of a^dag.
        let mut poly = vec![ZERO; n + 1];
        for j in 0..=na {
            let c1 = t[0][0].powu(j as u32) * t[1][0].powu((na - j) as u32) * binom(na, j);
            for l in 0..=nb {
                let c2 = t[0][1].powu(l as u32) * t[1][1].powu((nb - l) as u32) * binom(nb, l);
                poly[j + l] += c1 * c2;
            }
        }
        let norm_in = (fact[na] * fact[nb]).sqrt();
        for (p, coeff) in poly.into_iter().enumerate() {
            let norm_out = (fact[p] * fact[n - p]).sqrt();
            block[(p, na)] = coeff * (norm_out / norm_in);
        }
    }
    block
}
