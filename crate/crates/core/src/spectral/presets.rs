use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::golden_section_max;

use super::model::{build_jsa, GridSpec, JsaModel, PhaseMatching};
use super::schmidt::schmidt_decompose;

const PRESET_FILE: &str = include_str!("presets.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetFile {
    pub version: u32,
    pub note: String,
    pub presets: BTreeMap<String, Preset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub description: String,
    /// How the parameters were obtained; always a calibration.
    pub calibration: String,
    pub model: JsaModel,
}

pub fn preset_file() -> PresetFile {
    serde_json::from_str(PRESET_FILE).expect("embedded preset file parses")
}

pub fn preset_names() -> Vec<String> {
    preset_file().presets.into_keys().collect()
}

pub fn preset(name: &str) -> Result<JsaModel> {
    preset_file()
        .presets
        .remove(name)
        .map(|p| p.model)
        .ok_or_else(|| Error::UnknownPreset(format!("{name} (available: {})", preset_names().join(", "))))
}

fn purity_of(model: &JsaModel) -> Result<f64> {
    Ok(schmidt_decompose(&build_jsa(model)?)?.purity)
}

/// Gaussian phase matching with `k_i = ratio * k_s`; bisect `k_s` on
/// `[k_lo, k_hi]` (where unfiltered purity falls with `k_s`) until the
/// purity equals `target` within `tol` in `k_s`.
pub fn calibrate_correlated(target: f64, ratio: f64, (k_lo, k_hi): (f64, f64), grid: GridSpec, tol: f64) -> Result<JsaModel> {
    let model = |k: f64| JsaModel {
        pump_bandwidth: 1.0,
        k_s: k,
        k_i: ratio * k,
        phase_matching: PhaseMatching::Gaussian,
        grid,
    };
    let (mut lo, mut hi) = (k_lo, k_hi);
    if purity_of(&model(lo))? < target || purity_of(&model(hi))? > target {
        return Err(Error::OutOfRange {
            name: "target purity",
            value: target,
            range: "between the purities at the bracket ends",
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if purity_of(&model(mid))? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(model(0.5 * (lo + hi)))
}

/// Sinc phase matching with `k_i = -k_s = -k`; the `k` in `[k_lo, k_hi]`
/// maximising unfiltered purity.
pub fn calibrate_matched((k_lo, k_hi): (f64, f64), grid: GridSpec, tol: f64) -> Result<JsaModel> {
    let model = |k: f64| JsaModel {
        pump_bandwidth: 1.0,
        k_s: k,
        k_i: -k,
        phase_matching: PhaseMatching::Sinc,
        grid,
    };
    let failure = std::cell::RefCell::new(None);
    let (k, _) = golden_section_max(
        |k| match purity_of(&model(k)) {
            Ok(p) => p,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        k_lo,
        k_hi,
        tol,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(model(k))
}
