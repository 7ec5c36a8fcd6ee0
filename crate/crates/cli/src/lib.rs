//! Batch scenarios over the `fockline` toolkit.
//!
//! A scenario resolves its parameters (defaults, then a config file, then
//! command-line overrides), computes every artifact in memory and only then
//! writes them, together with `manifest.json`, into the output directory.
//! Angles are radians and powers are watts everywhere.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fockline::metrology::GeneratorConvention;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

mod scenarios;
mod validate;

pub use scenarios::{describe, Scenario, SCENARIOS};
pub use validate::{validate_inputs, FileKind, ValidationEntry, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown scenario '{name}' (valid: {})", SCENARIOS.join(", "))]
    UnknownScenario { name: String },

    #[error("invalid parameters:\n  {}", .0.join("\n  "))]
    InvalidParameters(Vec<String>),

    #[error("scenario '{0}' is stochastic and needs --seed")]
    MissingSeed(&'static str),

    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: fockline::Error,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Core(#[from] fockline::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// One scenario invocation.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: String,
    /// Parameter overrides by name.
    pub overrides: Map<String, Value>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub convention: GeneratorConvention,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub parameters: Map<String, Value>,
    pub seed: Option<u64>,
    pub convention: Option<GeneratorConvention>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::InvalidParameters(vec![format!("{}: {e}", path.display())]))
    }
}

/// Named outputs, kept in insertion order until written.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit: String,
    pub version: String,
    pub scenario: String,
    pub seed: Option<u64>,
    pub convention: GeneratorConvention,
    pub parameters: Value,
    pub artifacts: Vec<ManifestEntry>,
}

/// Outcome of a finished scenario: the manifest plus a short text summary
/// for the terminal.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: Manifest,
    pub summary: Vec<String>,
}

pub(crate) struct Context {
    pub seed: Option<u64>,
    pub convention: GeneratorConvention,
}

impl Context {
    pub fn seed(&self, scenario: &'static str) -> Result<u64> {
        self.seed.ok_or(CliError::MissingSeed(scenario))
    }
}

/// Parameters with defaults and field-level validation.
pub(crate) trait Params: Serialize + DeserializeOwned + Default {
    /// One message per offending field.
    fn check(&self) -> Vec<String> {
        Vec::new()
    }
}

/// Merges `overrides` into the defaults of `P`, reporting every unknown or
/// ill-typed field and every failed range check.
pub(crate) fn resolve<P: Params>(overrides: &Map<String, Value>) -> Result<P> {
    let Value::Object(base) = serde_json::to_value(P::default())? else {
        unreachable!("parameter structs serialise to objects")
    };
    let mut errors = Vec::new();
    let mut merged = base.clone();
    for (key, value) in overrides {
        if !base.contains_key(key) {
            let known: Vec<&str> = base.keys().map(String::as_str).collect();
            errors.push(format!("{key}: unknown parameter (known: {})", known.join(", ")));
            continue;
        }
        let mut probe = base.clone();
        probe.insert(key.clone(), value.clone());
        if let Err(e) = serde_json::from_value::<P>(Value::Object(probe)) {
            errors.push(format!("{key}: {e}"));
            continue;
        }
        merged.insert(key.clone(), value.clone());
    }
    if !errors.is_empty() {
        return Err(CliError::InvalidParameters(errors));
    }
    let params: P = serde_json::from_value(Value::Object(merged))?;
    let errors = params.check();
    if !errors.is_empty() {
        return Err(CliError::InvalidParameters(errors));
    }
    Ok(params)
}

pub(crate) fn check_unit(errors: &mut Vec<String>, name: &str, x: f64) {
    if !(0.0..=1.0).contains(&x) {
        errors.push(format!("{name}: {x} is outside [0, 1]"));
    }
}

pub(crate) fn check_positive(errors: &mut Vec<String>, name: &str, x: f64) {
    if !(x > 0.0 && x.is_finite()) {
        errors.push(format!("{name}: {x} must be positive and finite"));
    }
}

pub(crate) fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(header).map_err(fockline::Error::from)?;
    for row in rows {
        wtr.write_record(&row).map_err(fockline::Error::from)?;
    }
    wtr.into_inner().map_err(|e| CliError::Io {
        path: PathBuf::from("<buffer>"),
        source: e.into_error(),
    })
}

/// Resolves, runs and writes one scenario.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport> {
    let scenario: Scenario = config.scenario.parse()?;
    let ctx = Context {
        seed: config.seed,
        convention: config.convention,
    };
    let (parameters, artifacts, summary) = scenario.run(&config.overrides, &ctx)?;
    let manifest = Manifest {
        toolkit: "fockline".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: scenario.name().into(),
        seed: config.seed,
        convention: config.convention,
        parameters,
        artifacts: artifacts
            .files
            .iter()
            .map(|(name, bytes)| ManifestEntry {
                name: name.clone(),
                bytes: bytes.len(),
            })
            .collect(),
    };
    let mut all = artifacts;
    all.add_json("manifest.json", &manifest)?;
    write_all(&config.out, &all)?;
    Ok(RunReport { manifest, summary })
}

/// Writes every artifact or, on the first failure, removes the ones
/// already written.
fn write_all(dir: &Path, artifacts: &Artifacts) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, bytes) in &artifacts.files {
        let path = dir.join(name);
        let result = fs::File::create(&path).and_then(|mut f| f.write_all(bytes));
        if let Err(source) = result {
            for p in written.iter().chain([&path]) {
                let _ = fs::remove_file(p);
            }
            return Err(CliError::Io { path, source });
        }
        written.push(path);
    }
    Ok(())
}
