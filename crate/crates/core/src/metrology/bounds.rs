use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{beam_splitter_matrix, schwinger_operators, FockBasis};
use crate::linalg::{expm_i_hermitian, max_abs};

/// Phase-uncertainty benchmarks for `nu` repetitions. `f64::INFINITY`
/// marks a bound whose Fisher information is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionBounds {
    pub trials: f64,
    /// Photon resource entering the phase; for two-mode probes the total
    /// photon number.
    pub photons: f64,
    pub eta: f64,
    pub eta_d: f64,
    pub sql: f64,
    pub hl: f64,
    pub sil: f64,
    pub crb: f64,
    pub qcrb: f64,
}

fn check_transmissivity(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            range: "(0, 1]",
        })
    }
}

fn inverse_sqrt(x: f64) -> f64 {
    if x > 0.0 {
        1.0 / x.sqrt()
    } else {
        f64::INFINITY
    }
}

pub fn precision_bounds(
    trials: f64,
    photons: f64,
    eta: f64,
    eta_d: f64,
    fisher: f64,
    quantum_fisher: f64,
) -> Result<PrecisionBounds> {
    if !(trials >= 1.0) {
        return Err(Error::OutOfRange {
            name: "trials",
            value: trials,
            range: ">= 1",
        });
    }
    if !(photons > 0.0) {
        return Err(Error::OutOfRange {
            name: "photons",
            value: photons,
            range: "> 0",
        });
    }
    check_transmissivity("eta", eta)?;
    check_transmissivity("eta_d", eta_d)?;
    for (name, value) in [("fisher", fisher), ("quantum_fisher", quantum_fisher)] {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::OutOfRange {
                name,
                value,
                range: "[0, inf)",
            });
        }
    }
    Ok(PrecisionBounds {
        trials,
        photons,
        eta,
        eta_d,
        sql: inverse_sqrt(trials * photons),
        hl: 1.0 / (trials.sqrt() * photons),
        sil: inverse_sqrt(trials * eta * eta_d * photons),
        crb: inverse_sqrt(trials * fisher),
        qcrb: inverse_sqrt(trials * quantum_fisher),
    })
}

/// `B(theta) P(phi) B(theta)^dag = exp(i phi (jz J_z + jy J_y))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseAxis {
    pub jz: f64,
    pub jy: f64,
    /// Projection of the rotation axis onto the `J_y` direction,
    /// `|sin 2 theta| = 2 sqrt(v (1 - v))`.
    pub shrink: f64,
}

pub fn effective_phase_axis(theta: f64) -> PhaseAxis {
    let (s, c) = (2.0 * theta).sin_cos();
    PhaseAxis {
        jz: c,
        jy: -s,
        shrink: s.abs(),
    }
}

/// `max |B P(phi) B^dag - exp(i phi axis.J)|` on a two-mode basis.
pub fn effective_phase_axis_residual(basis: &FockBasis, theta: f64, phi: f64) -> Result<f64> {
    let j = schwinger_operators(basis)?;
    let axis = effective_phase_axis(theta);
    let b = beam_splitter_matrix(basis, 0, 1, theta)?.to_dense();
    let lhs = &b * expm_i_hermitian(&j.jz, phi) * b.adjoint();
    let generator = &j.jz * crate::linalg::C64::new(axis.jz, 0.0) + &j.jy * crate::linalg::C64::new(axis.jy, 0.0);
    let rhs = expm_i_hermitian(&generator, phi);
    Ok(max_abs(&(lhs - rhs)))
}
