use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four port-to-port intensities around one splitter. Any common
/// detector scale cancels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatiometricData {
    pub i_ac: f64,
    pub i_ad: f64,
    pub i_bc: f64,
    pub i_bd: f64,
    /// Standard errors in the order `ac, ad, bc, bd`.
    #[serde(default)]
    pub stderr: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectivityEstimate {
    pub u: f64,
    pub ratio: f64,
    /// First-order propagated standard error, if input errors were given.
    pub stderr: Option<f64>,
}

const NAMES: [&str; 4] = ["I_ac", "I_ad", "I_bc", "I_bd"];

impl RatiometricData {
    pub fn new(i_ac: f64, i_ad: f64, i_bc: f64, i_bd: f64) -> Self {
        Self {
            i_ac,
            i_ad,
            i_bc,
            i_bd,
            stderr: None,
        }
    }

    fn values(&self) -> [f64; 4] {
        [self.i_ac, self.i_ad, self.i_bc, self.i_bd]
    }

    /// Intensities produced by splitting ratio `u`, input couplings
    /// `eta_a, eta_b`, output couplings `eta_c, eta_d` and source power.
    pub fn forward(u: f64, eta: [f64; 4], intensity: f64) -> Self {
        let [a, b, c, d] = eta;
        Self::new(
            a * u * c * intensity,
            a * (1.0 - u) * d * intensity,
            b * (1.0 - u) * c * intensity,
            b * u * d * intensity,
        )
    }
}

/// `u = 1 / (1 + sqrt(r))`, `r = I_ad I_bc / (I_ac I_bd)`.
pub fn ratiometric_reflectivity(data: &RatiometricData) -> Result<ReflectivityEstimate> {
    let values = data.values();
    for (name, &value) in NAMES.iter().zip(&values) {
        if !value.is_finite() {
            return Err(Error::OutOfRange {
                name: "intensity",
                value,
                range: "finite",
            });
        }
        if value < 0.0 {
            return Err(Error::NegativeIntensity { name, value });
        }
    }
    if data.i_ac == 0.0 {
        return Err(Error::ZeroIntensity { name: "I_ac" });
    }
    if data.i_bd == 0.0 {
        return Err(Error::ZeroIntensity { name: "I_bd" });
    }
    let ratio = data.i_ad * data.i_bc / (data.i_ac * data.i_bd);
    let root = ratio.sqrt();
    let u = 1.0 / (1.0 + root);
    // du = -sqrt(r) / (2 (1 + sqrt r)^2) * d ln r, d ln r = sum of +-dI/I
    let stderr = data.stderr.map(|errs| {
        let rel: f64 = errs.iter().zip(&values).map(|(e, v)| (e / v).powi(2)).sum();
        if root == 0.0 {
            if errs[1] == 0.0 && errs[2] == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            root / (2.0 * (1.0 + root).powi(2)) * rel.sqrt()
        }
    });
    Ok(ReflectivityEstimate { u, ratio, stderr })
}

#[derive(Debug, Deserialize)]
struct Row {
    input_mode: String,
    output_mode: String,
    intensity: f64,
    #[serde(default)]
    stderr: Option<f64>,
}

/// CSV with columns `input_mode,output_mode,intensity[,stderr]`, one row
/// for each of the pairs `a,c`, `a,d`, `b,c`, `b,d`.
pub fn read_ratiometric_csv(reader: impl Read) -> Result<RatiometricData> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for required in ["input_mode", "output_mode", "intensity"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Schema {
                line: 1,
                message: format!("missing column '{required}'"),
            });
        }
    }
    let mut values: [Option<(f64, Option<f64>)>; 4] = [None; 4];
    for (k, record) in rdr.deserialize::<Row>().enumerate() {
        let line = k + 2;
        let row = record.map_err(|e| Error::Schema {
            line,
            message: e.to_string(),
        })?;
        let slot = match (row.input_mode.as_str(), row.output_mode.as_str()) {
            ("a", "c") => 0,
            ("a", "d") => 1,
            ("b", "c") => 2,
            ("b", "d") => 3,
            (i, o) => {
                return Err(Error::Schema {
                    line,
                    message: format!("unknown port pair ({i}, {o}); expected inputs a/b and outputs c/d"),
                })
            }
        };
        if row.intensity < 0.0 || !row.intensity.is_finite() {
            return Err(Error::Schema {
                line,
                message: format!("intensity {} for {} must be non-negative", row.intensity, NAMES[slot]),
            });
        }
        if let Some(e) = row.stderr {
            if e < 0.0 || !e.is_finite() {
                return Err(Error::Schema {
                    line,
                    message: format!("stderr {e} must be non-negative"),
                });
            }
        }
        if values[slot].is_some() {
            return Err(Error::Schema {
                line,
                message: format!("duplicate row for {}", NAMES[slot]),
            });
        }
        values[slot] = Some((row.intensity, row.stderr));
    }
    let mut out = [(0.0, None); 4];
    for (k, v) in values.iter().enumerate() {
        out[k] = v.ok_or_else(|| Error::Schema {
            line: 0,
            message: format!("no row for {}", NAMES[k]),
        })?;
    }
    let stderr = if out.iter().all(|(_, e)| e.is_some()) {
        Some([0, 1, 2, 3].map(|k| out[k].1.unwrap_or(0.0)))
    } else {
        None
    };
    Ok(RatiometricData {
        i_ac: out[0].0,
        i_ad: out[1].0,
        i_bc: out[2].0,
        i_bd: out[3].0,
        stderr,
    })
}
