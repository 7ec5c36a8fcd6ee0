use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

use super::basis::FockBasis;

/// Angular-momentum operators of two bosonic modes `a` (mode 0) and `b`
/// (mode 1): `J_x = (a^dag b + a b^dag)/2`, `J_y = (a^dag b - a b^dag)/(2i)`,
/// `J_z = (n_a - n_b)/2`.
#[derive(Debug, Clone)]
pub struct SchwingerOperators {
    pub jx: CMatrix,
    pub jy: CMatrix,
    pub jz: CMatrix,
    pub j2: CMatrix,
}

pub fn schwinger_operators(basis: &FockBasis) -> Result<SchwingerOperators> {
    if basis.n_modes() != 2 {
        return Err(Error::NotTwoMode(basis.n_modes()));
    }
    let d = basis.dim();
    // a^dag b
    let mut raise = CMatrix::zeros(d, d);
    let mut jz = CMatrix::zeros(d, d);
    for j in 0..d {
        let occ = basis.state(j);
        let (na, nb) = (occ[0], occ[1]);
        jz[(j, j)] = C64::new(0.5 * (na as f64 - nb as f64), 0.0);
        if nb > 0 {
            let i = basis
                .index_of(&[na + 1, nb - 1])
                .expect("same total photon number");
            raise[(i, j)] = C64::new(((na + 1) as f64 * nb as f64).sqrt(), 0.0);
        }
    }
    let lower = raise.adjoint();
    let half = C64::new(0.5, 0.0);
    let jx = (&raise + &lower) * half;
    let jy = (&raise - &lower) * C64::new(0.0, -0.5);
    let j2 = &jx * &jx + &jy * &jy + &jz * &jz;
    Ok(SchwingerOperators { jx, jy, jz, j2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::basis::enumerate_basis;
    use crate::fock::operator::beam_splitter_matrix;
    use crate::linalg::{expm_i_hermitian, max_abs, I};
    use std::f64::consts::FRAC_PI_4;

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn su2_commutation_relations() {
        let b = enumerate_basis(2, 6).unwrap();
        let j = schwinger_operators(&b).unwrap();
        assert!(max_abs(&(commutator(&j.jx, &j.jy) - &j.jz * I)) < 1e-12);
        assert!(max_abs(&(commutator(&j.jy, &j.jz) - &j.jx * I)) < 1e-12);
        assert!(max_abs(&(commutator(&j.jz, &j.jx) - &j.jy * I)) < 1e-12);
    }

    #[test]
    fn jz_eigenvalue_of_single_photon_in_a() {
        let b = enumerate_basis(2, 1).unwrap();
        let j = schwinger_operators(&b).unwrap();
        let i = b.index_of(&[1, 0]).unwrap();
        assert!((j.jz[(i, i)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn jx_squared_on_twin_fock() {
        let b = enumerate_basis(2, 8).unwrap();
        let j = schwinger_operators(&b).unwrap();
        let jx2 = &j.jx * &j.jx;
        for n in 1..=4u32 {
            let i = b.index_of(&[n, n]).unwrap();
            let expected = (n * (n + 1)) as f64 / 2.0;
            assert!((jx2[(i, i)].re - expected).abs() < 1e-12, "N={n}");
        }
    }

    #[test]
    fn beam_splitter_is_exponentiated_jx() {
        let b = enumerate_basis(2, 5).unwrap();
        let j = schwinger_operators(&b).unwrap();
        let expm = expm_i_hermitian(&j.jx, -2.0 * FRAC_PI_4);
        let direct = beam_splitter_matrix(&b, 0, 1, FRAC_PI_4).unwrap().to_dense();
        assert!(max_abs(&(expm - direct)) < 1e-12);
    }

    #[test]
    fn three_modes_rejected() {
        let b = enumerate_basis(3, 1).unwrap();
        assert!(matches!(schwinger_operators(&b), Err(Error::NotTwoMode(3))));
    }
}
