use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

use super::model::JointSpectralAmplitude;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterArm {
    Signal,
    Idler,
    Both,
}

impl FilterArm {
    fn covers_signal(self) -> bool {
        matches!(self, Self::Signal | Self::Both)
    }

    fn covers_idler(self) -> bool {
        matches!(self, Self::Idler | Self::Both)
    }
}

/// Gaussian amplitude transmission `t(nu) = exp(-(nu - c)^2 / (2 b^2))`.
/// `b = inf` passes everything.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFilter {
    pub bandwidth: f64,
    #[serde(default)]
    pub center: f64,
    pub arm: FilterArm,
}

impl SpectralFilter {
    pub fn new(bandwidth: f64, center: f64, arm: FilterArm) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::OutOfRange {
                name: "bandwidth",
                value: bandwidth,
                range: "(0, inf]",
            });
        }
        Ok(Self { bandwidth, center, arm })
    }

    pub fn symmetric(bandwidth: f64) -> Result<Self> {
        Self::new(bandwidth, 0.0, FilterArm::Both)
    }

    pub fn transmission(&self, nu: f64) -> f64 {
        if self.bandwidth.is_infinite() {
            return 1.0;
        }
        let x = (nu - self.center) / self.bandwidth;
        (-0.5 * x * x).exp()
    }

    /// FWHM of the intensity transmission `t^2`: `2 b sqrt(ln 2)`.
    pub fn intensity_fwhm(&self) -> f64 {
        2.0 * self.bandwidth * std::f64::consts::LN_2.sqrt()
    }
}

/// Per-arm transmission profiles; `None` means no filter on that arm.
pub(crate) fn arm_profiles(axis: &[f64], filters: &[SpectralFilter]) -> Result<(Option<Vec<f64>>, Option<Vec<f64>>)> {
    let mut signal = None;
    let mut idler = None;
    for f in filters {
        if !(f.bandwidth > 0.0) {
            return Err(Error::OutOfRange {
                name: "bandwidth",
                value: f.bandwidth,
                range: "(0, inf]",
            });
        }
        let profile: Vec<f64> = axis.iter().map(|&nu| f.transmission(nu)).collect();
        if f.arm.covers_signal() {
            if signal.is_some() {
                return Err(Error::FilterConflict("signal"));
            }
            signal = Some(profile.clone());
        }
        if f.arm.covers_idler() {
            if idler.is_some() {
                return Err(Error::FilterConflict("idler"));
            }
            idler = Some(profile);
        }
    }
    Ok((signal, idler))
}

pub(crate) fn apply_profiles(
    jsa: &JointSpectralAmplitude,
    signal: Option<&[f64]>,
    idler: Option<&[f64]>,
) -> JointSpectralAmplitude {
    let mut a = jsa.amplitude().clone();
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            let t = signal.map_or(1.0, |s| s[r]) * idler.map_or(1.0, |i| i[c]);
            a[(r, c)] *= C64::new(t, 0.0);
        }
    }
    jsa.with_amplitude(a)
}

/// Multiply by the filter transmissions. The result is not renormalised: its
/// squared norm is the probability that the pair passes.
pub fn apply_filters(jsa: &JointSpectralAmplitude, filters: &[SpectralFilter]) -> Result<JointSpectralAmplitude> {
    let (signal, idler) = arm_profiles(jsa.axis(), filters)?;
    Ok(apply_profiles(jsa, signal.as_deref(), idler.as_deref()))
}
