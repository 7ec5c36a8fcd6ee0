use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::apparatus::{ConditionedPovm, N_OUTCOMES};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

const SUM_CHECK: f64 = 1e-8;

/// Counts for one setting. Counts are stored as reals so that exact
/// expected frequencies can be fed to the estimators as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: usize,
    pub theta: f64,
    pub phi: f64,
    pub heralds: f64,
    pub counts: [f64; N_OUTCOMES],
}

fn checked_probabilities(rho: &CMatrix, povm: &ConditionedPovm, setting: usize) -> Result<Vec<f64>> {
    if rho.nrows() != povm.space.dim() || rho.ncols() != povm.space.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.space.dim(),
            found: rho.nrows(),
        });
    }
    let p = povm.probabilities(rho);
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SUM_CHECK {
        return Err(Error::PovmIncomplete { setting, sum });
    }
    Ok(p.into_iter().map(|x| x.max(0.0)).collect())
}

/// `n * p_k` for every setting: the noiseless limit of [`simulate_counts`].
pub fn expected_counts(rho: &CMatrix, povms: &[ConditionedPovm], heralds: f64) -> Result<Vec<CountRecord>> {
    povms
        .iter()
        .enumerate()
        .map(|(a, povm)| {
            let p = checked_probabilities(rho, povm, a)?;
            let mut counts = [0.0; N_OUTCOMES];
            for (c, pk) in counts.iter_mut().zip(&p) {
                *c = heralds * pk;
            }
            Ok(CountRecord {
                setting: a,
                theta: povm.setting.theta,
                phi: povm.setting.phi,
                heralds,
                counts,
            })
        })
        .collect()
}

/// Multinomial draws of `heralds` trials per setting. Setting `a` uses
/// stream `a` of a ChaCha20 generator seeded with `seed`, so records do
/// not depend on evaluation order.
pub fn simulate_counts(rho: &CMatrix, povms: &[ConditionedPovm], heralds: u64, seed: u64) -> Result<Vec<CountRecord>> {
    povms
        .iter()
        .enumerate()
        .map(|(a, povm)| {
            let p = checked_probabilities(rho, povm, a)?;
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(a as u64);
            let mut counts = [0.0; N_OUTCOMES];
            let mut remaining = heralds;
            let mut mass: f64 = p.iter().sum();
            for k in 0..N_OUTCOMES - 1 {
                if remaining == 0 {
                    break;
                }
                let q = if mass > 0.0 { (p[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
                let draw = Binomial::new(remaining, q)
                    .expect("probability clamped to [0, 1]")
                    .sample(&mut rng);
                counts[k] = draw as f64;
                remaining -= draw;
                mass -= p[k];
            }
            counts[N_OUTCOMES - 1] = remaining as f64;
            Ok(CountRecord {
                setting: a,
                theta: povm.setting.theta,
                phi: povm.setting.phi,
                heralds: heralds as f64,
                counts,
            })
        })
        .collect()
}

/// One bootstrap replicate: each record redrawn multinomially from its own
/// observed frequencies. Uses the same stream layout as [`simulate_counts`].
pub fn resample_records(records: &[CountRecord], seed: u64) -> Result<Vec<CountRecord>> {
    records
        .iter()
        .enumerate()
        .map(|(a, r)| {
            if !(r.heralds >= 0.0) || r.heralds.fract() != 0.0 || r.counts.iter().any(|c| c.fract() != 0.0) {
                return Err(Error::Schema {
                    line: a + 2,
                    message: "resampling needs integer counts".into(),
                });
            }
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(a as u64);
            let mut counts = [0.0; N_OUTCOMES];
            let mut remaining = r.heralds as u64;
            let mut mass = r.heralds;
            for k in 0..N_OUTCOMES - 1 {
                if remaining == 0 {
                    break;
                }
                let q = if mass > 0.0 { (r.counts[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
                let draw = Binomial::new(remaining, q)
                    .expect("probability clamped to [0, 1]")
                    .sample(&mut rng);
                counts[k] = draw as f64;
                remaining -= draw;
                mass -= r.counts[k];
            }
            counts[N_OUTCOMES - 1] = remaining as f64;
            Ok(CountRecord { counts, ..r.clone() })
        })
        .collect()
}

const HEADER: [&str; 9] = ["setting_id", "theta_rad", "phi_rad", "n_alpha", "n_1", "n_2", "n_3", "n_4", "n_5"];

pub fn write_records_csv(records: &[CountRecord], out: impl Write) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    wtr.write_record(HEADER)?;
    for r in records {
        let mut row = vec![r.setting.to_string(), r.theta.to_string(), r.phi.to_string(), r.heralds.to_string()];
        row.extend(r.counts.iter().map(|c| c.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the CSV written by [`write_records_csv`]; each row must satisfy
/// `n_1 + ... + n_5 = n_alpha`.
pub fn read_records_csv(reader: impl Read) -> Result<Vec<CountRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut cols = [0usize; 9];
    for (slot, name) in cols.iter_mut().zip(HEADER) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema {
            line: 1,
            message: format!("missing column '{name}'"),
        })?;
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Schema {
            line,
            message: e.to_string(),
        })?;
        let field = |c: usize| -> Result<f64> {
            let raw = rec.get(cols[c]).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Schema {
                line,
                message: format!("column '{}': '{raw}' is not a number", HEADER[c]),
            })
        };
        let setting_raw = rec.get(cols[0]).unwrap_or("");
        let setting = setting_raw.parse::<usize>().map_err(|_| Error::Schema {
            line,
            message: format!("column 'setting_id': '{setting_raw}' is not a non-negative integer"),
        })?;
        let heralds = field(3)?;
        let mut counts = [0.0; N_OUTCOMES];
        for (g, c) in counts.iter_mut().enumerate() {
            *c = field(4 + g)?;
            if *c < 0.0 || !c.is_finite() {
                return Err(Error::Schema {
                    line,
                    message: format!("column '{}': count must be non-negative", HEADER[4 + g]),
                });
            }
        }
        let sum: f64 = counts.iter().sum();
        if (sum - heralds).abs() > 1e-9 * heralds.max(1.0) {
            return Err(Error::Schema {
                line,
                message: format!("outcome counts sum to {sum}, n_alpha is {heralds}"),
            });
        }
        out.push(CountRecord {
            setting,
            theta: field(1)?,
            phi: field(2)?,
            heralds,
            counts,
        });
    }
    Ok(out)
}
