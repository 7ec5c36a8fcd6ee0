use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::filter::{apply_profiles, arm_profiles, SpectralFilter};
use super::model::JointSpectralAmplitude;
use super::schmidt::schmidt_decompose;

const HERALD_GUARD: f64 = 1e-14;

/// Heralded-source figures of merit for one filter configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFigures {
    /// Purity of the heralded signal photon after both filters.
    pub purity: f64,
    /// `||F_s F_i f||^2 / ||F_i f||^2`: the signal passes given the idler passed.
    pub heralding_efficiency: f64,
    /// `||F_s F_i f||^2 / ||f||^2`: both photons pass. This is the heralding
    /// efficiency with the idler filter's own transmission included.
    pub pass_probability: f64,
    pub schmidt_coefficients: Vec<f64>,
}

pub fn source_figures(jsa: &JointSpectralAmplitude, filters: &[SpectralFilter]) -> Result<SourceFigures> {
    let (signal, idler) = arm_profiles(jsa.axis(), filters)?;
    let total = jsa.norm_squared();
    if total == 0.0 {
        return Err(Error::ZeroAmplitude);
    }
    let herald = apply_profiles(jsa, None, idler.as_deref());
    let both = apply_profiles(&herald, signal.as_deref(), None);
    let herald_norm = herald.norm_squared();
    if herald_norm < HERALD_GUARD * total {
        return Err(Error::ZeroAmplitude);
    }
    let both_norm = both.norm_squared();
    let schmidt = schmidt_decompose(&both)?;
    Ok(SourceFigures {
        purity: schmidt.purity,
        heralding_efficiency: (both_norm / herald_norm).min(1.0),
        pass_probability: (both_norm / total).min(1.0),
        schmidt_coefficients: schmidt.coefficients,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub bandwidth: f64,
    pub purity: f64,
    pub heralding_efficiency: f64,
    pub pass_probability: f64,
}

/// Symmetric Gaussian filters of each bandwidth on both arms.
pub fn tradeoff_scan(jsa: &JointSpectralAmplitude, bandwidths: &[f64]) -> Result<Vec<TradeoffPoint>> {
    if bandwidths.windows(2).any(|w| !(w[1] > w[0])) || bandwidths.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::InvalidState("bandwidths must be positive and strictly ascending".into()));
    }
    bandwidths
        .par_iter()
        .map(|&b| {
            let f = source_figures(jsa, &[SpectralFilter::symmetric(b)?])?;
            Ok(TradeoffPoint {
                bandwidth: b,
                purity: f.purity,
                heralding_efficiency: f.heralding_efficiency,
                pass_probability: f.pass_probability,
            })
        })
        .collect()
}

/// Largest symmetric filter bandwidth in `[lo, hi]` whose purity reaches
/// `target`, by bisection to `tol`. Assumes purity decreases with bandwidth
/// on the bracket.
pub fn bandwidth_for_purity(
    jsa: &JointSpectralAmplitude,
    target: f64,
    (mut lo, mut hi): (f64, f64),
    tol: f64,
) -> Result<f64> {
    let purity = |b: f64| -> Result<f64> { Ok(source_figures(jsa, &[SpectralFilter::symmetric(b)?])?.purity) };
    if purity(lo)? < target {
        return Err(Error::OutOfRange {
            name: "target purity",
            value: target,
            range: "reachable at the narrowest bracketed bandwidth",
        });
    }
    if purity(hi)? >= target {
        return Ok(hi);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if purity(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
