use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CLAMP: f64 = 1e-12;

fn check_ratio(name: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value: x,
            range: "[0, 1]",
        })
    }
}

/// `(A, B)` with `v_eff = A + B cos(phi)`.
pub fn fringe_coefficients(v: f64, w: f64) -> (f64, f64) {
    let a = v * w + (1.0 - v) * (1.0 - w);
    // grouped so that swapping v and w is bit-exact
    let b = 2.0 * ((v * (1.0 - v)) * (w * (1.0 - w))).max(0.0).sqrt();
    (a, b)
}

/// Reflectivity of a two-splitter interferometer with internal phase `phi`.
pub fn effective_reflectivity(v: f64, w: f64, phi: f64) -> Result<f64> {
    check_ratio("v", v)?;
    check_ratio("w", w)?;
    let (a, b) = fringe_coefficients(v, w);
    let x = a + b * phi.cos();
    Ok(if (-CLAMP..0.0).contains(&x) {
        0.0
    } else if x > 1.0 && x <= 1.0 + CLAMP {
        1.0
    } else {
        x
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Reachability {
    /// `phi` in `[0, pi]`; `-phi` works as well.
    Reachable { phi: f64 },
    Unreachable { min: f64, max: f64 },
}

impl Reachability {
    pub fn phase(&self) -> Option<f64> {
        match *self {
            Self::Reachable { phi } => Some(phi),
            Self::Unreachable { .. } => None,
        }
    }
}

/// Phase at which the interferometer reaches reflectivity `target`. When
/// either splitter is `0` or `1` the reflectivity is constant; a match then
/// returns `phi = 0`.
pub fn reachable_phase(v: f64, w: f64, target: f64) -> Result<Reachability> {
    check_ratio("v", v)?;
    check_ratio("w", w)?;
    check_ratio("target", target)?;
    let (a, b) = fringe_coefficients(v, w);
    if b == 0.0 {
        return Ok(if (a - target).abs() <= CLAMP {
            Reachability::Reachable { phi: 0.0 }
        } else {
            Reachability::Unreachable { min: a, max: a }
        });
    }
    let c = (target - a) / b;
    if c.abs() > 1.0 + CLAMP {
        return Ok(Reachability::Unreachable {
            min: (a - b).max(0.0),
            max: (a + b).min(1.0),
        });
    }
    Ok(Reachability::Reachable {
        phi: c.clamp(-1.0, 1.0).acos(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityMap {
    pub target: f64,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// `phase[i][j]` at `(v[i], w[j])`; `None` where unreachable.
    pub phase: Vec<Vec<Option<f64>>>,
}

impl ReachabilityMap {
    pub fn unreachable_fraction(&self) -> f64 {
        let total = self.v.len() * self.w.len();
        let missing = self.phase.iter().flatten().filter(|p| p.is_none()).count();
        missing as f64 / total as f64
    }

    /// Columns `v,w,phase_rad`; an empty phase cell marks an unreachable point.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        wtr.write_record(["v", "w", "phase_rad"])?;
        for (i, &v) in self.v.iter().enumerate() {
            for (j, &w) in self.w.iter().enumerate() {
                let phase = self.phase[i][j].map(|p| p.to_string()).unwrap_or_default();
                wtr.write_record([v.to_string(), w.to_string(), phase])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn reachability_map(target: f64, v: &[f64], w: &[f64]) -> Result<ReachabilityMap> {
    let rows: Vec<Vec<Option<f64>>> = v
        .par_iter()
        .map(|&vi| {
            w.iter()
                .map(|&wj| Ok(reachable_phase(vi, wj, target)?.phase()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(ReachabilityMap {
        target,
        v: v.to_vec(),
        w: w.to_vec(),
        phase: rows,
    })
}
