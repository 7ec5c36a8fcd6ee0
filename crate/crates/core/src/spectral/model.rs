use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Shape of the phase-matching function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMatching {
    /// `sin(x)/x`.
    Sinc,
    /// `exp(-x^2/2)`.
    Gaussian,
}

impl PhaseMatching {
    fn eval(self, x: f64) -> f64 {
        match self {
            Self::Sinc => {
                if x.abs() < 1e-8 {
                    1.0 - x * x / 6.0
                } else {
                    x.sin() / x
                }
            }
            Self::Gaussian => (-0.5 * x * x).exp(),
        }
    }
}

/// Square detuning grid, in units of the pump bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points per axis, endpoints included.
    pub points: usize,
    /// Axis spans `[-half_width, half_width]`.
    pub half_width: f64,
    /// Largest accepted `max |f| on the boundary / max |f|`.
    pub boundary_tolerance: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 512,
            half_width: 6.0,
            boundary_tolerance: 1e-4,
        }
    }
}

impl GridSpec {
    pub fn axis(&self) -> Vec<f64> {
        let n = self.points;
        let step = 2.0 * self.half_width / (n - 1) as f64;
        (0..n).map(|k| -self.half_width + step * k as f64).collect()
    }

    /// Same span with `2 points - 1` samples (every old point retained).
    pub fn refined(&self) -> Self {
        Self {
            points: 2 * self.points - 1,
            ..*self
        }
    }
}

/// `f(s, i) = exp(-(s + i)^2 / (2 sigma_p^2)) * Phi(k_s s + k_i i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JsaModel {
    pub pump_bandwidth: f64,
    pub k_s: f64,
    pub k_i: f64,
    pub phase_matching: PhaseMatching,
    #[serde(default)]
    pub grid: GridSpec,
}

/// Amplitude on a uniform grid; rows index the signal detuning, columns the
/// idler detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectralAmplitude {
    axis: Vec<f64>,
    amplitude: CMatrix,
    model: Option<JsaModel>,
}

impl JointSpectralAmplitude {
    pub fn from_grid(axis: Vec<f64>, amplitude: CMatrix) -> Result<Self> {
        let n = axis.len();
        if amplitude.nrows() != n || amplitude.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: amplitude.nrows(),
            });
        }
        if n < 2 {
            return Err(Error::InvalidState("grid needs at least two points per axis".into()));
        }
        let step = axis[1] - axis[0];
        let uniform = axis
            .windows(2)
            .all(|w| w[1] > w[0] && ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs());
        if !uniform {
            return Err(Error::InvalidState("axis must be strictly increasing and uniform".into()));
        }
        if amplitude.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite amplitude".into()));
        }
        Ok(Self {
            axis,
            amplitude,
            model: None,
        })
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn amplitude(&self) -> &CMatrix {
        &self.amplitude
    }

    pub fn model(&self) -> Option<&JsaModel> {
        self.model.as_ref()
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitude.iter().map(|z| z.norm_sqr()).sum()
    }

    /// The grid as a real matrix when every imaginary part is exactly zero.
    pub fn real_part_if_real(&self) -> Option<DMatrix<f64>> {
        self.amplitude
            .iter()
            .all(|z| z.im == 0.0)
            .then(|| self.amplitude.map(|z| z.re))
    }

    pub(crate) fn with_amplitude(&self, amplitude: CMatrix) -> Self {
        Self {
            axis: self.axis.clone(),
            amplitude,
            model: self.model,
        }
    }

    /// `max |f|` on the outer rows and columns relative to `max |f|`.
    pub fn boundary_ratio(&self) -> f64 {
        let a = &self.amplitude;
        let n = a.nrows();
        let peak = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let edge = (0..n)
            .flat_map(|k| [a[(0, k)], a[(n - 1, k)], a[(k, 0)], a[(k, n - 1)]])
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        edge / peak
    }
}

/// Sample the model on its grid and normalise to `||f||^2 = 1`.
pub fn build_jsa(model: &JsaModel) -> Result<JointSpectralAmplitude> {
    if !(model.pump_bandwidth > 0.0) {
        return Err(Error::OutOfRange {
            name: "pump_bandwidth",
            value: model.pump_bandwidth,
            range: "> 0",
        });
    }
    if model.grid.points < 2 || !(model.grid.half_width > 0.0) {
        return Err(Error::InvalidState("grid needs >= 2 points and a positive half width".into()));
    }
    let axis = model.grid.axis();
    let n = axis.len();
    let two_var = 2.0 * model.pump_bandwidth * model.pump_bandwidth;
    let mut f = DMatrix::from_fn(n, n, |r, c| {
        let (s, i) = (axis[r], axis[c]);
        (-(s + i) * (s + i) / two_var).exp() * model.phase_matching.eval(model.k_s * s + model.k_i * i)
    });
    let norm = f.norm();
    if norm == 0.0 {
        return Err(Error::ZeroAmplitude);
    }
    f /= norm;
    let jsa = JointSpectralAmplitude {
        axis,
        amplitude: f.map(|x| C64::new(x, 0.0)),
        model: Some(*model),
    };
    let ratio = jsa.boundary_ratio();
    if ratio >= model.grid.boundary_tolerance {
        return Err(Error::GridTruncation {
            ratio,
            tolerance: model.grid.boundary_tolerance,
        });
    }
    Ok(jsa)
}
