use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::model::JointSpectralAmplitude;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtDecomposition {
    /// `lambda_n = sigma_n^2 / sum sigma^2`, descending.
    pub coefficients: Vec<f64>,
    pub purity: f64,
}

impl SchmidtDecomposition {
    /// Effective number of modes `1 / purity`.
    pub fn schmidt_number(&self) -> f64 {
        1.0 / self.purity
    }
}

pub fn schmidt_decompose(jsa: &JointSpectralAmplitude) -> Result<SchmidtDecomposition> {
    if jsa.norm_squared() == 0.0 {
        return Err(Error::ZeroAmplitude);
    }
    let mut sigma: Vec<f64> = match jsa.real_part_if_real() {
        Some(real) => SVD::new(real, false, false).singular_values.iter().copied().collect(),
        None => SVD::new(jsa.amplitude().clone(), false, false)
            .singular_values
            .iter()
            .copied()
            .collect(),
    };
    sigma.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    let coefficients: Vec<f64> = sigma.iter().map(|s| s * s / total).collect();
    let purity = coefficients.iter().map(|l| l * l).sum();
    Ok(SchmidtDecomposition { coefficients, purity })
}
