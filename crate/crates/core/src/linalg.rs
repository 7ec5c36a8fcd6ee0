//! Small dense linear-algebra helpers over complex matrices.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest elementwise deviation of `m` from its adjoint.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows().saturating_sub(1)) {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Symmetrise a nearly Hermitian matrix.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |i, j| {
        eig.eigenvectors[(i, order[j])]
    });
    (values, vectors)
}

/// `exp(i t H)` for Hermitian `H`.
pub fn expm_i_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(h);
    let phases = CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&l| C64::from_polar(1.0, t * l)),
    ));
    &vectors * phases * vectors.adjoint()
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let roots = CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&l| C64::new(l.max(0.0).sqrt(), 0.0)),
    ));
    &vectors * roots * vectors.adjoint()
}

/// Uhlmann fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let root = psd_sqrt(rho);
    let inner = &root * sigma * &root;
    let (values, _) = hermitian_eigen(&inner);
    let s: f64 = values.iter().map(|l| l.max(0.0).sqrt()).sum();
    s * s
}

/// Trace distance `0.5 * ||rho - sigma||_1`.
pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let (values, _) = hermitian_eigen(&(rho - sigma));
    0.5 * values.iter().map(|l| l.abs()).sum::<f64>()
}

/// Frobenius inner product `tr(A^dagger B)`, real part for Hermitian pairs.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}
