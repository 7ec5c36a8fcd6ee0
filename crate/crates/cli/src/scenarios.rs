use std::f64::consts::{FRAC_PI_4, PI};
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use fockline::characterize::{
    fit_fringe, read_fringe_csv, read_ratiometric_csv, ratiometric_reflectivity, reachability_map, write_fringe_csv,
    FringeSample, MziModel,
};
use fockline::linalg::{fidelity, trace_distance, CMatrix};
use fockline::metrology::{fisher_surface, hb_loss_threshold, holland_burnett_state, unit_grid, ThresholdOutcome};
use fockline::spectral::{
    bandwidth_for_purity, build_jsa, preset, schmidt_decompose, source_figures, tradeoff_scan, SpectralFilter,
};
use fockline::tomography::{
    grid_settings, lsq_reconstruct, measurement_povms, mle_reconstruct, qcrb_of_reconstruction, read_records_csv,
    resample_records, simulate_counts, write_records_csv, Apparatus, ConditionedPovm, ConditionedSpace, CountRecord,
    MleOptions, PhotonCap, Setting, StateJson,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::{check_positive, check_unit, csv_bytes, resolve, Artifacts, CliError, Context, Params, Result};

pub const SCENARIOS: [&str; 9] = [
    "jsa-tradeoff",
    "fisher-surface",
    "hb-threshold",
    "mzi-map",
    "fringe-fit",
    "ratiometric",
    "tomo-simulate",
    "tomo-fit",
    "tomo-roundtrip",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    JsaTradeoff,
    FisherSurface,
    HbThreshold,
    MziMap,
    FringeFit,
    Ratiometric,
    TomoSimulate,
    TomoFit,
    TomoRoundtrip,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Self::JsaTradeoff => "jsa-tradeoff",
            Self::FisherSurface => "fisher-surface",
            Self::HbThreshold => "hb-threshold",
            Self::MziMap => "mzi-map",
            Self::FringeFit => "fringe-fit",
            Self::Ratiometric => "ratiometric",
            Self::TomoSimulate => "tomo-simulate",
            Self::TomoFit => "tomo-fit",
            Self::TomoRoundtrip => "tomo-roundtrip",
        }
    }

    /// Parameter names and default values.
    pub fn defaults(self) -> Value {
        let v = match self {
            Self::JsaTradeoff => serde_json::to_value(JsaTradeoff::default()),
            Self::FisherSurface => serde_json::to_value(FisherSurfaceParams::default()),
            Self::HbThreshold => serde_json::to_value(HbThreshold::default()),
            Self::MziMap => serde_json::to_value(MziMap::default()),
            Self::FringeFit => serde_json::to_value(FringeFitParams::default()),
            Self::Ratiometric => serde_json::to_value(RatiometricParams::default()),
            Self::TomoSimulate => serde_json::to_value(TomoSimulate::default()),
            Self::TomoFit => serde_json::to_value(TomoFit::default()),
            Self::TomoRoundtrip => serde_json::to_value(TomoRoundtrip::default()),
        };
        v.expect("defaults serialise")
    }

    pub(crate) fn run(self, overrides: &Map<String, Value>, ctx: &Context) -> Result<(Value, Artifacts, Vec<String>)> {
        fn go<P: Params>(
            overrides: &Map<String, Value>,
            ctx: &Context,
            f: impl FnOnce(&P, &Context, &mut Artifacts) -> Result<Vec<String>>,
        ) -> Result<(Value, Artifacts, Vec<String>)> {
            let p: P = resolve(overrides)?;
            let mut artifacts = Artifacts::default();
            let summary = f(&p, ctx, &mut artifacts)?;
            Ok((serde_json::to_value(&p)?, artifacts, summary))
        }
        match self {
            Self::JsaTradeoff => go(overrides, ctx, jsa_tradeoff),
            Self::FisherSurface => go(overrides, ctx, fisher_surface_scenario),
            Self::HbThreshold => go(overrides, ctx, hb_threshold),
            Self::MziMap => go(overrides, ctx, mzi_map),
            Self::FringeFit => go(overrides, ctx, fringe_fit),
            Self::Ratiometric => go(overrides, ctx, ratiometric),
            Self::TomoSimulate => go(overrides, ctx, tomo_simulate),
            Self::TomoFit => go(overrides, ctx, tomo_fit),
            Self::TomoRoundtrip => go(overrides, ctx, tomo_roundtrip),
        }
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "jsa-tradeoff" => Self::JsaTradeoff,
            "fisher-surface" => Self::FisherSurface,
            "hb-threshold" => Self::HbThreshold,
            "mzi-map" => Self::MziMap,
            "fringe-fit" => Self::FringeFit,
            "ratiometric" => Self::Ratiometric,
            "tomo-simulate" => Self::TomoSimulate,
            "tomo-fit" => Self::TomoFit,
            "tomo-roundtrip" => Self::TomoRoundtrip,
            _ => return Err(CliError::UnknownScenario { name: s.to_string() }),
        })
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn read_input<T>(path: &Option<PathBuf>, read: impl FnOnce(fs::File) -> fockline::Result<T>) -> Result<T> {
    let path = path.as_ref().expect("checked by Params::check");
    let file = fs::File::open(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    read(file).map_err(|source| CliError::Input {
        path: path.clone(),
        source,
    })
}

// ---- jsa-tradeoff --------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JsaTradeoff {
    pub preset: String,
    /// Replaces the preset's grid size when set.
    pub grid_points: Option<usize>,
    pub bandwidth_min: f64,
    pub bandwidth_max: f64,
    /// Log-spaced scan points.
    pub points: usize,
    pub purity_target: f64,
    pub tolerance: f64,
}

impl Default for JsaTradeoff {
    fn default() -> Self {
        Self {
            preset: "correlated".into(),
            grid_points: None,
            bandwidth_min: 0.05,
            bandwidth_max: 20.0,
            points: 60,
            purity_target: 0.95,
            tolerance: 1e-6,
        }
    }
}

impl Params for JsaTradeoff {
    fn check(&self) -> Vec<String> {
        let mut e = Vec::new();
        if preset(&self.preset).is_err() {
            e.push(format!("preset: unknown preset '{}' (available: {})", self.preset, fockline::spectral::preset_names().join(", ")));
        }
        if let Some(n) = self.grid_points {
            if n < 16 {
                e.push(format!("grid_points: {n} is below 16"));
            }
        }
        check_positive(&mut e, "bandwidth_min", self.bandwidth_min);
        check_positive(&mut e, "bandwidth_max", self.bandwidth_max);
        if self.bandwidth_max <= self.bandwidth_min {
            e.push("bandwidth_max: must exceed bandwidth_min".into());
        }
        if self.points < 2 {
            e.push(format!("points: {} is below 2", self.points));
        }
        check_unit(&mut e, "purity_target", self.purity_target);
        check_positive(&mut e, "tolerance", self.tolerance);
        e
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let r = (hi / lo).ln();
    (0..n)
        .map(|k| match k {
            0 => lo,
            k if k == n - 1 => hi,
            k => lo * (r * k as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

fn jsa_tradeoff(p: &JsaTradeoff, _: &Context, out: &mut Artifacts) -> Result<Vec<String>> {
    let mut model = preset(&p.preset)?;
    if let Some(n) = p.grid_points {
        model.grid.points = n;
    }
    let jsa = build_jsa(&model)?;
    let unfiltered = schmidt_decompose(&jsa)?;
    let curve = tradeoff_scan(&jsa, &log_space(p.bandwidth_min, p.bandwidth_max, p.points))?;
    out.add(
        "tradeoff.csv",
        csv_bytes(
            &["bandwidth", "purity", "heralding_efficiency", "pass_probability"],
            curve.iter().map(|t| vec![num(t.bandwidth), num(t.purity), num(t.heralding_efficiency), num(t.pass_probability)]),
        )?,
    );
    let at_target = match bandwidth_for_purity(&jsa, p.purity_target, (p.bandwidth_min, p.bandwidth_max), p.tolerance) {
        Ok(b) => {
            let f = source_figures(&jsa, &[SpectralFilter::symmetric(b)?])?;
            Some(json!({
                "bandwidth": b,
                "purity": f.purity,
                "heralding_efficiency": f.heralding_efficiency,
                "pass_probability": f.pass_probability,
            }))
        }
        Err(fockline::Error::OutOfRange { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let mut summary = vec![
        format!("preset {}: unfiltered purity {:.6}", p.preset, unfiltered.purity),
        format!("schmidt number {:.4}", 1.0 / unfiltered.purity),
    ];
    match &at_target {
        Some(t) => summary.push(format!(
            "purity {} first reached at bandwidth {:.6}: heralding {:.6}, pass probability {:.6}",
            p.purity_target, t["bandwidth"], t["heralding_efficiency"], t["pass_probability"]
        )),
        None => summary.push(format!("purity {} not reached on the bandwidth bracket", p.purity_target)),
    }
    out.add_json(
        "summary.json",
        &json!({
            "preset": p.preset,
            "model": model,
            "boundary_ratio": jsa.boundary_ratio(),
            "unfiltered_purity": unfiltered.purity,
            "schmidt_number": 1.0 / unfiltered.purity,
            "purity_target": p.purity_target,
            "at_target": at_target,
        }),
    )?;
    Ok(summary)
}

// ---- fisher-surface ------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FisherSurfaceParams {
    pub grid: usize,
}

impl Default for FisherSurfaceParams {
    fn default() -> Self {
        Self { grid: 21 }
    }
}

impl Params for FisherSurfaceParams {
    fn check(&self) -> Vec<String> {
        if (2..=501).contains(&self.grid) {
            Vec::new()
        } else {
            vec![format!("grid: {} is outside [2, 501]", self.grid)]
        }
    }
}

fn fisher_surface_scenario(p: &FisherSurfaceParams, ctx: &Context, out: &mut Artifacts) -> Result<Vec<String>> {
    let g = unit_grid(p.grid);
    let s = fisher_surface(&g, &g, ctx.convention)?;
    let mut rows = Vec::new();
    let mut best = (0.0, 0.0, 0.0);
    for (i, &v) in s.v.iter().enumerate() {
        for (j, &w) in s.w.iter().enumerate() {
            rows.push(vec![num(v), num(w), num(s.values[i][j]), num(s.best_phase[i][j])]);
            if s.values[i][j] > best.2 {
                best = (v, w, s.values[i][j]);
            }
        }
    }
    out.add("fisher_surface.csv", csv_bytes(&["v", "w", "fisher", "best_phase_rad"], rows)?);
    out.add_json(
        "summary.json",
        &json!({
            "outcome": s.outcome,
            "convention": s.convention,
            "max": {"v": best.0, "w": best.1, "fisher": best.2},
        }),
    )?;
    Ok(vec![format!(
        "max Fisher information {:.6} at v = {}, w = {} ({} convention)",
        best.2, best.0, best.1, ctx.convention
    )])
}

// ---- hb-threshold --------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbThreshold {
    pub eta: f64,
    pub eta_d: f64,
    pub n_min: u32,
    pub n_max: u32,
}

impl Default for HbThreshold {
    fn default() -> Self {
        Self {
            eta: 0.95,
            eta_d: 0.6,
            n_min: 1,
            n_max: 5,
        }
    }
}

impl Params for HbThreshold {
    fn check(&self) -> Vec<String> {
        let mut e = Vec::new();
        check_unit(&mut e, "eta", self.eta);
        check_unit(&mut e, "eta_d", self.eta_d);
        if self.n_min == 0 {
            e.push("n_min: must be at least 1".into());
        }
        if self.n_max < self.n_min {
            e.push(format!("n_max: {} is below n_min {}", self.n_max, self.n_min));
        }
        if self.n_max > 6 {
            e.push(format!("n_max: {} exceeds 6 (12 photons)", self.n_max));
        }
        e
    }
}

fn hb_threshold(p: &HbThreshold, ctx: &Context, out: &mut Artifacts) -> Result<Vec<String>> {
    let rows = (p.n_min..=p.n_max)
        .map(|n| hb_loss_threshold(n, p.eta, p.eta_d, ctx.convention))
        .collect::<fockline::Result<Vec<_>>>()?;
    let mut table = Vec::new();
    let mut summary = vec![format!(
        "eta = {}, eta_d = {}, convention {}; SIL counts 2N photons",
        p.eta, p.eta_d, ctx.convention
    )];
    for r in &rows {
        let (status, eta_p, qcrb, sil) = match r.outcome {
            ThresholdOutcome::Found { eta_p, qcrb, sil } => ("found", num(eta_p), num(qcrb), num(sil)),
            ThresholdOutcome::NoThreshold { qcrb_at_unity, sil } => ("none", String::new(), num(qcrb_at_unity), num(sil)),
        };
        summary.push(format!(
            "N = {}: {}",
            r.n,
            if eta_p.is_empty() { "no threshold".to_string() } else { format!("eta_p >= {eta_p}") }
        ));
        table.push(vec![
            r.n.to_string(),
            num(r.eta),
            num(r.eta_d),
            r.convention.to_string(),
            r.resource_photons.to_string(),
            status.into(),
            eta_p,
            qcrb,
            sil,
        ]);
    }
    out.add(
        "thresholds.csv",
        csv_bytes(
            &["n", "eta", "eta_d", "convention", "resource_photons", "status", "eta_p", "qcrb", "sil"],
            table,
        )?,
    );
    out.add_json(
        "thresholds.json",
        &json!({
            "convention": ctx.convention,
            "criterion": "smallest eta_p with 1/sqrt(F_Q) <= 1/sqrt(eta * eta_d * 2N)",
            "rows": rows,
        }),
    )?;
    Ok(summary)
}

// ---- mzi-map -------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MziMap {
    pub target: f64,
    pub grid: usize,
}

impl Default for MziMap {
    fn default() -> Self {
        Self { target: 0.5, grid: 101 }
    }
}

impl Params for MziMap {
    fn check(&self) -> Vec<String> {
        let mut e = Vec::new();
        check_unit(&mut e, "target", self.target);
        if !(2..=2001).contains(&self.grid) {
            e.push(format!("grid: {} is outside [2, 2001]", self.grid));
        }
        e
    }
}

fn mzi_map(p: &MziMap, _: &Context, out: &mut Artifacts) -> Result<Vec<String>> {
    let g = unit_grid(p.grid);
    let map = reachability_map(p.target, &g, &g)?;
    let mut csv = Vec::new();
    map.write_csv(&mut csv)?;
    out.add("mzi_map.csv", csv);
    let fraction = map.unreachable_fraction();
    out.add_json(
        "summary.json",
        &json!({"target": p.target, "grid": p.grid, "unreachable_fraction": fraction}),
    )?;
    Ok(vec![format!("target {}: {:.4} of the grid unreachable", p.target, fraction)])
}

// ---- fringe-fit ----------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeFitParams {
    /// Measured fringe; when absent a fringe is simulated from the fields below.
    pub input: Option<PathBuf>,
    pub v: f64,
    pub w: f64,
    pub phi0: f64,
    /// Phase per watt of heater power.
    pub kappa: f64,
    pub power_min: f64,
    pub power_max: f64,
    pub points: usize,
    /// Gaussian noise with standard deviation `relative_noise * v_eff`.
    pub relative_noise: f64,
}

impl Default for FringeFitParams {
    fn default() -> Self {
        Self {
            input: None,
            v: 0.45,
            w: 0.55,
            phi0: 0.3,
            kappa: PI,
            power_min: 0.0,
            power_max: 2.0,
            points: 101,
            relative_noise: 0.005,
        }
    }
}

impl Params for FringeFitParams {
    fn check(&self) -> Vec<String> {
        let mut e = Vec::new();
        check_unit(&mut e, "v", self.v);
        check_unit(&mut e, "w", self.w);
        if !self.phi0.is_finite() {
            e.push("phi0: must be finite".into());
        }
        check_positive(&mut e, "kappa", self.kappa);
        if !(self.power_max > self.power_min && self.power_min.is_finite() && self.power_max.is_finite()) {
            e.push("power_max: must exceed power_min".into());
        }
        if self.points < 5 {
            e.push(format!("points: {} is below 5", self.points));
        }
        if !(self.relative_noise >= 0.0 && self.relative_noise.is_finite()) {
            e.push(format!("relative_noise: {} must be non-negative", self.relative_noise));
        }
        e
    }
}

fn fringe_fit(p: &FringeFitParams, ctx: &Context, out: &mut Artifacts) -> Result<Vec<String>> {
    let (samples, truth) = match &p.input {
        Some(_) => (read_input(&p.input, read_fringe_csv)?, None),
        None => {
            let truth = MziModel {
                v: p.v,
                w: p.w,
                phi0: p.phi0,
                kappa: p.kappa,
            };
            let mut rng = ChaCha20Rng::seed_from_u64(ctx.seed("fringe-fit")?);
            let step = (p.power_max - p.power_min) / (p.points - 1) as f64;
            let samples = (0..p.points)
                .map(|k| {
                    let power = p.power_min + step * k as f64;
                    let clean = truth.predict(power)?;
                    let sd = p.relative_noise * clean;
                    let noise = if sd > 0.0 {
                        Normal::new(0.0, sd).expect("positive deviation").sample(&mut rng)
                    } else {
                        0.0
                    };
                    Ok(FringeSample {
                        power,
                        v_eff: clean + noise,
                        stderr: None,
                    })
                })
                .collect::<fockline::Result<Vec<_>>>()?;
            let mut csv = Vec::new();
            write_fringe_csv(&samples, &mut csv)?;
            out.add("fringe_data.csv", csv);
            (samples, Some(truth))
        }
    };
    let fit = fit_fringe(&samples)?;
    let rows = samples
        .iter()
        .map(|s| {
            let f = fit.model.predict(s.power)?;
            Ok(vec![num(s.power), num(s.v_eff), num(f), num(s.v_eff - f)])
        })
        .collect::<fockline::Result<Vec<_>>>()?;
    out.add("fringe_curve.csv", csv_bytes(&["power_W", "v_eff", "v_eff_fit", "residual"], rows)?);
    out.add_json("fringe_fit.json", &json!({"fit": fit, "truth": truth}))?;
    Ok(vec![
        format!(
            "v = {:.6}, w = {:.6} (complement {:.6}, {:.6}), phi0 = {:.6} rad, kappa = {:.6} rad/W",
            fit.model.v, fit.model.w, fit.complement.0, fit.complement.1, fit.model.phi0, fit.model.kappa
        ),
        format!("fringe range [{:.6}, {:.6}], rms residual {:.3e}", fit.fringe_min, fit.fringe_max, fit.rms),
    ])
}

// ---- ratiometric ---------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatiometricParams {
    pub input: Option<PathBuf>,
}

impl Params for RatiometricParams {
    fn check(&self) -> Vec<String> {
        match self.input {
            Some(_) => Vec::new(),
            None => vec!["input: a ratiometric CSV is required".into()],
        }
    }
}

fn ratiometric(p: &RatiometricParams, _: &Context, out: &mut Artifacts) -> Result<Vec<String>> {
    let data = read_input(&p.input, read_ratiometric_csv)?;
    let est = ratiometric_reflectivity(&data)?;
    out.add_json("ratiometric.json", &json!({"data": data, "estimate": est}))?;
    let err = est.stderr.map(|s| format!(" +/- {s:.3e}")).unwrap_or_default();
    Ok(vec![format!("u = {:.9}{err}", est.u)])
}

// ---- tomography ----------------------------------------------------------

const QUARTER: [f64; 4] = [0.0, FRAC_PI_4, 2.0 * FRAC_PI_4, 3.0 * FRAC_PI_4];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoSimulate {
    /// Photons per input of the HB probe.
    pub n: u32,
    /// Input splitter ratio.
    pub v: f64,
    /// Transmission of each arm before the apparatus.
    pub eta_p: f64,
    pub eta: [f64; 6],
    pub per_mode: u32,
    pub total: u32,
    pub heralds: u64,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
}

impl Default for TomoSimulate {
    fn default() -> Self {
        Self {
            n: 1,
            v: 0.5,
            eta_p: 0.8,
            eta: [1.0, 1.0, 1.0, 1.0, 0.6, 0.6],
            per_mode: 2,
            total: 4,
            heralds: 100_000,
            thetas: QUARTER.to_vec(),
            phis: QUARTER.to_vec(),
        }
    }
}

fn check_apparatus(e: &mut Vec<String>, eta: &[f64; 6], per_mode: u32, total: u32) {
    for (k, &x) in eta.iter().enumerate() {
        check_unit(e, &format!("eta[{k}]"), x);
    }
    if total > 6 {
        e.push(format!("total: {total} exceeds 6"));
    }
    if per_mode > total {
        e.push(format!("per_mode: {per_mode} exceeds total {total}"));
    }
}

impl Params for TomoSimulate {
    fn check(&self) -> Vec<String> {
        let mut e = Vec::new();
        if self.n == 0 {
            e.push("n: must be at least 1".into());
        }
        check_unit(&mut e, "v", self.v);
        check_unit(&mut e, "eta_p", self.eta_p);
        check_apparatus(&mut e, &self.eta, self.per_mode, self.total);
        if self.heralds == 0 {
            e.push("heralds: must be positive".into());
        }
        for (name, list) in [("thetas", &self.thetas), ("phis", &self.phis)] {
            if list.is_empty() || list.iter().any(|x| !x.is_finite()) {
                e.push(format!("{name}: needs at least one finite angle"));
            }
        }
        e
    }
}

fn apparatus(eta: [f64; 6], per_mode: u32, total: u32) -> Apparatus {
    Apparatus {
        eta,
        cap: PhotonCap { per_mode, total },
    }
}

fn true_state(p: &TomoSimulate, space: &ConditionedSpace) -> Result<CMatrix> {
    let (basis, m) = holland_burnett_state(p.n, p.v, p.eta_p)?;
    Ok(space.embed(&basis, &m)?)
}

fn simulate(p: &TomoSimulate, seed: u64, out: &mut Artifacts) -> Result<(Vec<ConditionedPovm>, CMatrix, Vec<CountRecord>)> {
    let povms = measurement_povms(&apparatus(p.eta, p.per_mode, p.total), &grid_settings(&p.thetas, &p.phis))?;
    let rho = true_state(p, &povms[0].space)?;
    let records = simulate_counts(&rho, &povms, p.heralds, seed)?;
    let mut csv = Vec::new();
    write_records_csv(&records, &mut csv)?;
    out.add("counts.csv", csv);
    out.add_json("rho_true.json", &StateJson::new(&povms[0].space, &rho))?;
    Ok((povms, rho, records))
}

fn tomo_simulate(p: &TomoSimulate, ctx: &Context, out: &mut Artifacts) -> Result<Vec<String>> {
    let (povms, _, _) = simulate(p, ctx.seed("tomo-simulate")?, out)?;
    Ok(vec![format!(
        "{} settings x {} heralds over a {}-state space",
        povms.len(),
        p.heralds,
        povms[0].space.dim()
    )])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoFit {
    /// Counts CSV; the settings are read from its angle columns.
    pub input: Option<PathBuf>,
    pub eta: [f64; 6],
    pub per_mode: u32,
    pub total: u32,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Optional reference state (JSON) for fidelity reporting.
    pub truth: Option<PathBuf>,
    /// Bootstrap replicates of the MLE; needs a seed when positive.
    pub bootstrap: usize,
}

impl Default for TomoFit {
    fn default() -> Self {
        let mle = MleOptions::default();
        Self {
            input: None,
            eta: [1.0, 1.0, 1.0, 1.0, 0.6, 0.6],
            per_mode: 2,
            total: 4,
            max_iterations: mle.max_iterations,
            tolerance: mle.tolerance,
            truth: None,
            bootstrap: 0,
        }
    }
}

fn check_mle(e: &mut Vec<String>, max_iterations: usize, tolerance: f64) {
    if max_iterations == 0 {
        e.push("max_iterations: must be positive".into());
    }
    check_positive(e, "tolerance", tolerance);
}

impl Params for TomoFit {
    fn check(&self) -> Vec<String> {
        let mut e = Vec::new();
        if self.input.is_none() {
            e.push("input: a counts CSV is required".into());
        }
        check_apparatus(&mut e, &self.eta, self.per_mode, self.total);
        check_mle(&mut e, self.max_iterations, self.tolerance);
        e
    }
}

struct FitOutput {
    report: Map<String, Value>,
    mle_rho: CMatrix,
    lsq_rho: CMatrix,
    space: std::sync::Arc<ConditionedSpace>,
    summary: Vec<String>,
}

fn vacuum(rho: &CMatrix) -> f64 {
    rho[(0, 0)].re
}

fn fit_records(
    records: &[CountRecord],
    povms: &[ConditionedPovm],
    options: MleOptions,
    ctx: &Context,
    out: &mut Artifacts,
) -> Result<FitOutput> {
    let mle = mle_reconstruct(records, povms, options)?;
    if let Some(k) = mle.log_likelihood.windows(2).position(|w| w[1] < w[0]) {
        return Err(CliError::Invariant(format!("log-likelihood decreased at iteration {}", k + 1)));
    }
    let lsq = lsq_reconstruct(records, povms)?;
    out.add_json("rho_mle.json", &StateJson::new(&mle.space, &mle.rho))?;
    out.add_json("rho_lsq.json", &StateJson::new(&lsq.space, &lsq.rho))?;
    out.add(
        "likelihood.csv",
        csv_bytes(
            &["iteration", "log_likelihood"],
            mle.log_likelihood.iter().enumerate().map(|(k, l)| vec![k.to_string(), num(*l)]),
        )?,
    );
    let heralds: f64 = records.iter().map(|r| r.heralds).sum::<f64>() / records.len() as f64;
    let q = qcrb_of_reconstruction(&mle.space, &mle.rho, ctx.convention, heralds)?;
    let distance = trace_distance(&mle.rho, &lsq.rho);
    let mut report = Map::new();
    report.insert("mle_iterations".into(), json!(mle.iterations));
    report.insert("mle_converged".into(), json!(mle.converged));
    report.insert("mle_log_likelihood".into(), json!(mle.log_likelihood.last()));
    report.insert("mle_vacuum_population".into(), json!(vacuum(&mle.rho)));
    report.insert("lsq_vacuum_population".into(), json!(vacuum(&lsq.rho)));
    report.insert("lsq_unconstrained_distance".into(), json!(lsq.unconstrained_distance));
    report.insert("lsq_reweights".into(), json!(lsq.reweights));
    report.insert("mle_lsq_trace_distance".into(), json!(distance));
    report.insert("mle_qfi".into(), json!(q.fisher));
    report.insert("mle_qcrb_per_setting_heralds".into(), json!({"trials": q.trials, "qcrb": q.qcrb}));
    let summary = vec![
        format!(
            "MLE: {} iterations (converged: {}), vacuum population {:.6}",
            mle.iterations,
            mle.converged,
            vacuum(&mle.rho)
        ),
        format!("MLE/LSQ trace distance {distance:.3e}; F_Q of the MLE {:.6}", q.fisher.value),
    ];
    Ok(FitOutput {
        report,
        mle_rho: mle.rho,
        lsq_rho: lsq.rho,
        space: mle.space,
        summary,
    })
}

fn settings_from_records(records: &[CountRecord]) -> Vec<Setting> {
    records.iter().map(|r| Setting { theta: r.theta, phi: r.phi }).collect()
}

fn tomo_fit(p: &TomoFit, ctx: &Context, out: &mut Artifacts) -> Result<Vec<String>> {
    let records = read_input(&p.input, read_records_csv)?;
    if records.is_empty() {
        return Err(CliError::Input {
            path: p.input.clone().unwrap_or_default(),
            source: fockline::Error::Schema {
                line: 1,
                message: "no count records".into(),
            },
        });
    }
    let povms = measurement_povms(&apparatus(p.eta, p.per_mode, p.total), &settings_from_records(&records))?;
    let options = MleOptions {
        max_iterations: p.max_iterations,
        tolerance: p.tolerance,
    };
    let mut fit = fit_records(&records, &povms, options, ctx, out)?;
    if let Some(path) = &p.truth {
        let state: StateJson = read_input(&Some(path.clone()), |f| Ok(serde_json::from_reader(f)?))?;
        let (space, rho) = state.to_matrix().map_err(|source| CliError::Input {
            path: path.clone(),
            source,
        })?;
        if space != *fit.space {
            return Err(CliError::Input {
                path: path.clone(),
                source: fockline::Error::DimensionMismatch {
                    expected: fit.space.dim(),
                    found: space.dim(),
                },
            });
        }
        let f = fidelity(&rho, &fit.mle_rho);
        fit.report.insert("fidelity_mle".into(), json!(f));
        fit.report.insert("fidelity_lsq".into(), json!(fidelity(&rho, &fit.lsq_rho)));
        fit.summary.push(format!("fidelity with the reference state {f:.6}"));
    }
    if p.bootstrap > 0 {
        let seed = ctx.seed("tomo-fit")?;
        let mut vac = Vec::with_capacity(p.bootstrap);
        let mut fisher = Vec::with_capacity(p.bootstrap);
        for b in 0..p.bootstrap {
            let replicate = resample_records(&records, seed.wrapping_add(b as u64))?;
            let m = mle_reconstruct(&replicate, &povms, options)?;
            vac.push(vacuum(&m.rho));
            fisher.push(qcrb_of_reconstruction(&m.space, &m.rho, ctx.convention, 1.0)?.fisher.value);
        }
        let stats = |xs: &[f64]| {
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len().max(2) - 1) as f64;
            json!({"mean": mean, "std": var.sqrt()})
        };
        fit.report.insert(
            "bootstrap".into(),
            json!({"replicates": p.bootstrap, "vacuum_population": stats(&vac), "qfi": stats(&fisher)}),
        );
    }
    out.add_json("report.json", &fit.report)?;
    Ok(fit.summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoRoundtrip {
    pub n: u32,
    pub v: f64,
    pub eta_p: f64,
    pub eta: [f64; 6],
    pub per_mode: u32,
    pub total: u32,
    pub heralds: u64,
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for TomoRoundtrip {
    fn default() -> Self {
        let s = TomoSimulate::default();
        let mle = MleOptions::default();
        Self {
            n: s.n,
            v: s.v,
            eta_p: s.eta_p,
            eta: s.eta,
            per_mode: s.per_mode,
            total: s.total,
            heralds: s.heralds,
            thetas: s.thetas,
            phis: s.phis,
            max_iterations: mle.max_iterations,
            tolerance: mle.tolerance,
        }
    }
}

impl TomoRoundtrip {
    fn simulation(&self) -> TomoSimulate {
        TomoSimulate {
            n: self.n,
            v: self.v,
            eta_p: self.eta_p,
            eta: self.eta,
            per_mode: self.per_mode,
            total: self.total,
            heralds: self.heralds,
            thetas: self.thetas.clone(),
            phis: self.phis.clone(),
        }
    }
}

impl Params for TomoRoundtrip {
    fn check(&self) -> Vec<String> {
        let mut e = self.simulation().check();
        check_mle(&mut e, self.max_iterations, self.tolerance);
        e
    }
}

fn tomo_roundtrip(p: &TomoRoundtrip, ctx: &Context, out: &mut Artifacts) -> Result<Vec<String>> {
    let (povms, rho, records) = simulate(&p.simulation(), ctx.seed("tomo-roundtrip")?, out)?;
    let options = MleOptions {
        max_iterations: p.max_iterations,
        tolerance: p.tolerance,
    };
    let mut fit = fit_records(&records, &povms, options, ctx, out)?;
    let f = fidelity(&rho, &fit.mle_rho);
    let vac_err = (vacuum(&fit.mle_rho) - vacuum(&rho)).abs();
    let q_true = qcrb_of_reconstruction(&povms[0].space, &rho, ctx.convention, p.heralds as f64)?;
    fit.report.insert("fidelity_mle".into(), json!(f));
    fit.report.insert("fidelity_lsq".into(), json!(fidelity(&rho, &fit.lsq_rho)));
    fit.report.insert("true_vacuum_population".into(), json!(vacuum(&rho)));
    fit.report.insert("vacuum_population_error".into(), json!(vac_err));
    fit.report.insert("true_qfi".into(), json!(q_true.fisher));
    out.add_json("report.json", &fit.report)?;
    fit.summary.insert(0, format!("fidelity(MLE, true) = {f:.6}; vacuum population error {vac_err:.3e}"));
    Ok(fit.summary)
}

/// `name = default` pairs, for help text.
pub fn describe(scenario: Scenario) -> String {
    let defaults = scenario.defaults();
    let Value::Object(map) = defaults else { unreachable!() };
    map.iter().map(|(k, v)| format!("{k} = {v}")).collect::<Vec<_>>().join(", ")
}
