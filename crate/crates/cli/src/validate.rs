use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use fockline::characterize::{read_fringe_csv, read_ratiometric_csv};
use fockline::tomography::{read_records_csv, StateJson};
use serde::Serialize;
use serde_json::Value;

use crate::ConfigFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FileKind {
    Ratiometric,
    Fringe,
    Counts,
    State,
    Config,
}

impl fmt::Display for FileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ratiometric => "ratiometric",
            Self::Fringe => "fringe",
            Self::Counts => "counts",
            Self::State => "state",
            Self::Config => "config",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationEntry {
    pub path: PathBuf,
    pub kind: Option<FileKind>,
    /// Empty when the file is valid.
    pub errors: Vec<String>,
}

impl ValidationEntry {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.entries.iter().all(ValidationEntry::ok)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let kind = e.kind.map(|k| k.to_string()).unwrap_or_else(|| "unknown".into());
            if e.ok() {
                writeln!(f, "OK    {} ({kind})", e.path.display())?;
            } else {
                writeln!(f, "ERROR {} ({kind})", e.path.display())?;
                for msg in &e.errors {
                    writeln!(f, "      {msg}")?;
                }
            }
        }
        Ok(())
    }
}

fn csv_kind(header: &str) -> Option<FileKind> {
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let has = |c: &str| cols.contains(&c);
    if has("input_mode") || has("output_mode") {
        Some(FileKind::Ratiometric)
    } else if has("power_W") || has("v_eff") {
        Some(FileKind::Fringe)
    } else if has("setting_id") || has("n_alpha") {
        Some(FileKind::Counts)
    } else {
        None
    }
}

fn read_csv(kind: FileKind, text: &str) -> fockline::Result<()> {
    match kind {
        FileKind::Ratiometric => read_ratiometric_csv(text.as_bytes()).map(drop),
        FileKind::Fringe => read_fringe_csv(text.as_bytes()).map(drop),
        FileKind::Counts => read_records_csv(text.as_bytes()).map(drop),
        FileKind::State | FileKind::Config => unreachable!("JSON kinds"),
    }
}

/// Checks every data row on its own so that all malformed rows are listed,
/// then the file as a whole for cross-row rules.
fn check_csv(kind: FileKind, text: &str) -> Vec<String> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let mut errors = Vec::new();
    let mut header_ok = true;
    for (k, row) in lines.enumerate() {
        if row.trim().is_empty() {
            continue;
        }
        let line = k + 2;
        match read_csv(kind, &format!("{header}\n{row}\n")) {
            Ok(()) => {}
            Err(fockline::Error::Schema { line: 1, message }) => {
                if header_ok {
                    errors.push(format!("line 1: {message}"));
                    header_ok = false;
                }
            }
            Err(fockline::Error::Schema { line: 2, message }) => errors.push(format!("line {line}: {message}")),
            // cross-row rules are checked below
            Err(_) => {}
        }
    }
    if errors.is_empty() {
        if let Err(e) = read_csv(kind, text) {
            errors.push(e.to_string());
        }
    }
    errors
}

fn check_json(text: &str) -> (Option<FileKind>, Vec<String>) {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return (None, vec![format!("line {}: {e}", e.line())]),
    };
    if value.get("labels").is_some() {
        let err = serde_json::from_value::<StateJson>(value)
            .map_err(|e| e.to_string())
            .and_then(|s| s.to_matrix().map(drop).map_err(|e| e.to_string()));
        (Some(FileKind::State), err.err().into_iter().collect())
    } else {
        let err = serde_json::from_value::<ConfigFile>(value).err().map(|e| e.to_string());
        (Some(FileKind::Config), err.into_iter().collect())
    }
}

fn validate_file(path: &Path) -> ValidationEntry {
    let entry = |kind, errors| ValidationEntry {
        path: path.to_path_buf(),
        kind,
        errors,
    };
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return entry(None, vec![e.to_string()]),
    };
    if path.extension().is_some_and(|e| e == "json") {
        let (kind, errors) = check_json(&text);
        return entry(kind, errors);
    }
    let header = text.lines().next().unwrap_or("");
    match csv_kind(header) {
        Some(kind) => entry(Some(kind), check_csv(kind, &text)),
        None => entry(None, vec![format!("line 1: unrecognised header '{header}'")]),
    }
}

/// Schema check of ratiometric, fringe and counts CSVs, state JSON and
/// config JSON, with line-numbered diagnostics.
pub fn validate_inputs(paths: &[PathBuf]) -> ValidationReport {
    ValidationReport {
        entries: paths.iter().map(|p| validate_file(p)).collect(),
    }
}
