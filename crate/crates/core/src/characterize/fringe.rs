use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::golden_section_max;

use super::mzi::effective_reflectivity;

/// One fringe point: dissipated heater power (W) and measured reflectivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeSample {
    pub power: f64,
    pub v_eff: f64,
    #[serde(default)]
    pub stderr: Option<f64>,
}

/// Splitting ratios and the affine phase `phi(P) = phi0 + kappa P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MziModel {
    pub v: f64,
    pub w: f64,
    pub phi0: f64,
    /// rad/W.
    pub kappa: f64,
}

impl MziModel {
    pub fn predict(&self, power: f64) -> Result<f64> {
        effective_reflectivity(self.v, self.w, self.phi0 + self.kappa * power)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    /// Canonical representative: `v <= w` and `v + w <= 1`.
    pub model: MziModel,
    /// `(1 - w, 1 - v)` produces the same fringe.
    pub complement: (f64, f64),
    /// Swapping `v` and `w` leaves the fringe unchanged.
    pub exchange_ambiguous: bool,
    pub complement_ambiguous: bool,
    /// `v_eff = offset + amplitude cos(phi0 + kappa P)`.
    pub offset: f64,
    pub amplitude: f64,
    pub fringe_max: f64,
    pub fringe_min: f64,
    /// Unweighted root-mean-square residual.
    pub rms: f64,
    pub iterations: usize,
}

const MIN_SAMPLES: usize = 5;
const MAX_ITERATIONS: usize = 500;
const MAX_SCAN: usize = 200_000;

struct Problem {
    p: Vec<f64>,
    y: Vec<f64>,
    wt: Vec<f64>,
}

impl Problem {
    /// Weighted linear least squares in `(A, C, S)` for fixed `kappa`, with
    /// `v_eff = A + C cos(kappa P) - S sin(kappa P)`.
    fn linear(&self, kappa: f64) -> (Vector3<f64>, f64) {
        let mut m = Matrix3::zeros();
        let mut rhs = Vector3::zeros();
        for ((&p, &y), &w) in self.p.iter().zip(&self.y).zip(&self.wt) {
            let (s, c) = (kappa * p).sin_cos();
            let row = Vector3::new(1.0, c, -s);
            m += w * row * row.transpose();
            rhs += w * y * row;
        }
        let coef = m
            .cholesky()
            .map(|ch| ch.solve(&rhs))
            .or_else(|| m.lu().solve(&rhs))
            .unwrap_or_else(Vector3::zeros);
        let rss = self.cost(&[coef[0], coef[1], coef[2], kappa], true);
        (coef, rss)
    }

    /// Weighted residual sum of squares. With `linear_form` the first three
    /// parameters are `(A, C, S)`, otherwise `(A, B, phi0)`.
    fn cost(&self, x: &[f64; 4], linear_form: bool) -> f64 {
        self.p
            .iter()
            .zip(&self.y)
            .zip(&self.wt)
            .map(|((&p, &y), &w)| {
                let model = if linear_form {
                    let (s, c) = (x[3] * p).sin_cos();
                    x[0] + x[1] * c - x[2] * s
                } else {
                    x[0] + x[1] * (x[2] + x[3] * p).cos()
                };
                w * (y - model).powi(2)
            })
            .sum()
    }

    /// Levenberg-Marquardt on `(A, B, phi0, kappa)`.
    fn polish(&self, start: [f64; 4]) -> Result<([f64; 4], usize)> {
        let n = self.p.len();
        let mut x = start;
        let mut cost = self.cost(&x, false);
        let mut lambda = 1e-3;
        for it in 1..=MAX_ITERATIONS {
            let mut j = DMatrix::zeros(n, 4);
            let mut r = DVector::zeros(n);
            for k in 0..n {
                let sw = self.wt[k].sqrt();
                let theta = x[2] + x[3] * self.p[k];
                let (s, c) = theta.sin_cos();
                r[k] = sw * (self.y[k] - x[0] - x[1] * c);
                j[(k, 0)] = sw;
                j[(k, 1)] = sw * c;
                j[(k, 2)] = -sw * x[1] * s;
                j[(k, 3)] = -sw * x[1] * s * self.p[k];
            }
            let jtj = j.transpose() * &j;
            let jtr = j.transpose() * &r;
            if jtr.amax() <= 1e-14 * (1.0 + cost.sqrt()) * jtj.diagonal().amax().max(1.0).sqrt() {
                return Ok((x, it));
            }
            loop {
                let mut a = jtj.clone();
                for d in 0..4 {
                    a[(d, d)] += lambda * jtj[(d, d)].max(1e-300);
                }
                let step = a.lu().solve(&jtr).unwrap_or_else(|| DVector::zeros(4));
                let trial = [x[0] + step[0], x[1] + step[1], x[2] + step[2], x[3] + step[3]];
                let trial_cost = self.cost(&trial, false);
                if trial_cost <= cost {
                    let scale = x.iter().map(|v| v.abs()).fold(1.0, f64::max);
                    let small_step = step.amax() <= 1e-15 * scale;
                    let small_gain = cost - trial_cost <= 1e-15 * cost;
                    x = trial;
                    cost = trial_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    if small_step || small_gain {
                        return Ok((x, it));
                    }
                    break;
                }
                lambda *= 10.0;
                if lambda > 1e12 {
                    // no descent direction left: stationary to working precision
                    return Ok((x, it));
                }
            }
        }
        let (v, w) = ratios_from_fringe(x[0], x[1]);
        Err(Error::FitNotConverged {
            iterations: MAX_ITERATIONS,
            rms: (cost / self.wt.iter().sum::<f64>()).sqrt(),
            best: [v, w, x[2].rem_euclid(TAU), x[3]],
        })
    }
}

/// Splitting ratios from the fringe offset and amplitude: `t = vw` solves
/// `t^2 - A t + B^2/4 = 0` (smaller root), `v + w = 1 - A + 2t`.
pub fn ratios_from_fringe(offset: f64, amplitude: f64) -> (f64, f64) {
    let (a, b) = (offset, amplitude.abs());
    let t = 0.5 * (a - (a * a - b * b).max(0.0).sqrt());
    let s = 1.0 - a + 2.0 * t;
    let d = (s * s - 4.0 * t).max(0.0).sqrt();
    let v = (0.5 * (s - d)).clamp(0.0, 1.0);
    let w = (0.5 * (s + d)).clamp(0.0, 1.0);
    (v, w)
}

/// Weighted least-squares fit of `v_eff(P)` to the two-splitter fringe
/// with an affine phase. Weights are `1/stderr^2` where given, else 1.
pub fn fit_fringe(samples: &[FringeSample]) -> Result<FringeFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::DegenerateFit(format!(
            "{} samples; at least {MIN_SAMPLES} are needed",
            samples.len()
        )));
    }
    let mut wt = Vec::with_capacity(samples.len());
    for s in samples {
        if !s.power.is_finite() || !s.v_eff.is_finite() {
            return Err(Error::DegenerateFit("non-finite sample".into()));
        }
        wt.push(match s.stderr {
            Some(e) if e > 0.0 && e.is_finite() => 1.0 / (e * e),
            Some(e) => return Err(Error::DegenerateFit(format!("stderr {e} must be positive"))),
            None => 1.0,
        });
    }
    let mut powers: Vec<f64> = samples.iter().map(|s| s.power).collect();
    powers.sort_by(f64::total_cmp);
    let min_gap = powers.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if !(min_gap > 0.0) {
        return Err(Error::DegenerateFit("power values must be distinct".into()));
    }
    let span = powers[powers.len() - 1] - powers[0];
    let problem = Problem {
        p: samples.iter().map(|s| s.power).collect(),
        y: samples.iter().map(|s| s.v_eff).collect(),
        wt,
    };
    let wsum: f64 = problem.wt.iter().sum();
    let mean = problem.y.iter().zip(&problem.wt).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let spread = problem.y.iter().map(|y| (y - mean).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 {
        return Err(Error::DegenerateFit("constant data carries no fringe".into()));
    }

    // kappa above pi / min_gap aliases onto a lower frequency
    let kappa_max = PI / min_gap;
    let n_scan = ((20.0 * kappa_max * span / PI).ceil() as usize).clamp(2000, MAX_SCAN);
    let step = kappa_max / n_scan as f64;
    let (k_best, _) = (1..=n_scan)
        .map(|k| (k, problem.linear(step * k as f64).1))
        .fold((1, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
    let centre = step * k_best as f64;
    let (kappa, _) = golden_section_max(|k| -problem.linear(k).1, (centre - step).max(0.0), centre + step, 1e-13 * kappa_max);
    let (coef, _) = problem.linear(kappa);
    let start = [coef[0], coef[1].hypot(coef[2]), coef[2].atan2(coef[1]), kappa];
    let (mut x, iterations) = problem.polish(start)?;

    if x[1] < 0.0 {
        x[1] = -x[1];
        x[2] += PI;
    }
    if x[3] < 0.0 {
        x[3] = -x[3];
        x[2] = -x[2];
    }
    x[2] = x[2].rem_euclid(TAU);
    let (offset, amplitude) = (x[0], x[1]);
    let (v, w) = ratios_from_fringe(offset, amplitude);
    let rms = (problem
        .p
        .iter()
        .zip(&problem.y)
        .map(|(&p, &y)| (y - offset - amplitude * (x[2] + x[3] * p).cos()).powi(2))
        .sum::<f64>()
        / problem.p.len() as f64)
        .sqrt();
    let complement = (1.0 - w, 1.0 - v);
    Ok(FringeFit {
        model: MziModel {
            v,
            w,
            phi0: x[2],
            kappa: x[3],
        },
        complement,
        exchange_ambiguous: v != w,
        complement_ambiguous: (v, w) != complement,
        offset,
        amplitude,
        fringe_max: offset + amplitude,
        fringe_min: offset - amplitude,
        rms,
        iterations,
    })
}

/// CSV with columns `power_W,v_eff[,stderr]`.
pub fn read_fringe_csv(reader: impl Read) -> Result<Vec<FringeSample>> {
    #[derive(Deserialize)]
    struct Row {
        #[serde(rename = "power_W")]
        power: f64,
        v_eff: f64,
        #[serde(default)]
        stderr: Option<f64>,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for required in ["power_W", "v_eff"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::Schema {
                line: 1,
                message: format!("missing column '{required}'"),
            });
        }
    }
    rdr.deserialize::<Row>()
        .enumerate()
        .map(|(k, row)| {
            let line = k + 2;
            let row = row.map_err(|e| Error::Schema {
                line,
                message: e.to_string(),
            })?;
            if let Some(e) = row.stderr {
                if !(e > 0.0) {
                    return Err(Error::Schema {
                        line,
                        message: format!("stderr {e} must be positive"),
                    });
                }
            }
            Ok(FringeSample {
                power: row.power,
                v_eff: row.v_eff,
                stderr: row.stderr,
            })
        })
        .collect()
}

pub fn write_fringe_csv(samples: &[FringeSample], out: impl Write) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let with_err = samples.iter().all(|s| s.stderr.is_some());
    if with_err {
        wtr.write_record(["power_W", "v_eff", "stderr"])?;
    } else {
        wtr.write_record(["power_W", "v_eff"])?;
    }
    for s in samples {
        let mut rec = vec![s.power.to_string(), s.v_eff.to_string()];
        if with_err {
            rec.push(s.stderr.unwrap_or_default().to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
