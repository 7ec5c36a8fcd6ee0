use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fockline::metrology::GeneratorConvention;
use fockline_cli::{describe, run_scenario, validate_inputs, CliError, ConfigFile, Scenario, ScenarioConfig, SCENARIOS};
use serde_json::{json, Map, Value};

/// Scenarios and estimators for lossy photonic interferometry.
///
/// All angles are in radians and all powers in watts, both in inputs and
/// in the CSV/JSON artifacts. CSV files use a header row, '.' decimals and
/// LF line endings.
#[derive(Parser)]
#[command(name = "fockline", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Output directory for artifacts and manifest.json.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for stochastic scenarios.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file with optional keys "parameters", "seed" and "convention".
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Phase generator: exp(i phi J_z) or exp(i phi n_a).
    #[arg(long, global = true, value_parser = ["jz", "single-arm"])]
    convention: Option<String>,
    /// Parameter override KEY=VALUE; VALUE is read as JSON, else as a string.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Purity and heralding efficiency against filter bandwidth.
    JsaTradeoff {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        grid_points: Option<usize>,
        #[arg(long)]
        purity_target: Option<f64>,
    },
    /// Max-over-phase Fisher information of |1,1> over splitter ratios.
    FisherSurface {
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Input transmission at which HB(N) reaches the SIL.
    HbThreshold {
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        eta_d: Option<f64>,
        /// Inclusive range such as 1..5.
        #[arg(long)]
        n_range: Option<String>,
    },
    /// Phase that tunes an MZI to a target reflectivity.
    MziMap {
        #[arg(long)]
        target: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Fit splitter ratios to a heater-power fringe (simulated when no input).
    FringeFit {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Coupling-independent splitter ratio from four intensities.
    Ratiometric {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Simulate heralded tomography counts.
    TomoSimulate {
        #[arg(long)]
        eta_p: Option<f64>,
        #[arg(long)]
        heralds: Option<u64>,
    },
    /// Reconstruct a state from tomography counts.
    TomoFit {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        bootstrap: Option<usize>,
    },
    /// Simulate, reconstruct and compare with the true state.
    TomoRoundtrip {
        #[arg(long)]
        eta_p: Option<f64>,
        #[arg(long)]
        heralds: Option<u64>,
    },
    /// Run a scenario by name; parameters via --set or --config.
    Run { scenario: String },
    /// List scenarios and their default parameters.
    List,
    /// Schema-check input files.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn put<T: serde::Serialize>(map: &mut Map<String, Value>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        map.insert(key.into(), json!(v));
    }
}

fn parse_n_range(s: &str) -> Result<(u32, u32), CliError> {
    let bad = || CliError::InvalidParameters(vec![format!("n_range: '{s}' is not of the form A..B")]);
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// Scenario name and its subcommand-specific overrides.
fn scenario_flags(cmd: Command) -> Result<(String, Map<String, Value>), CliError> {
    let mut m = Map::new();
    let name = match cmd {
        Command::JsaTradeoff {
            preset,
            grid_points,
            purity_target,
        } => {
            put(&mut m, "preset", preset);
            put(&mut m, "grid_points", grid_points);
            put(&mut m, "purity_target", purity_target);
            "jsa-tradeoff"
        }
        Command::FisherSurface { grid } => {
            put(&mut m, "grid", grid);
            "fisher-surface"
        }
        Command::HbThreshold { eta, eta_d, n_range } => {
            put(&mut m, "eta", eta);
            put(&mut m, "eta_d", eta_d);
            if let Some(r) = n_range {
                let (a, b) = parse_n_range(&r)?;
                put(&mut m, "n_min", Some(a));
                put(&mut m, "n_max", Some(b));
            }
            "hb-threshold"
        }
        Command::MziMap { target, grid } => {
            put(&mut m, "target", target);
            put(&mut m, "grid", grid);
            "mzi-map"
        }
        Command::FringeFit { input } => {
            put(&mut m, "input", input);
            "fringe-fit"
        }
        Command::Ratiometric { input } => {
            put(&mut m, "input", input);
            "ratiometric"
        }
        Command::TomoSimulate { eta_p, heralds } => {
            put(&mut m, "eta_p", eta_p);
            put(&mut m, "heralds", heralds);
            "tomo-simulate"
        }
        Command::TomoFit { input, truth, bootstrap } => {
            put(&mut m, "input", input);
            put(&mut m, "truth", truth);
            put(&mut m, "bootstrap", bootstrap);
            "tomo-fit"
        }
        Command::TomoRoundtrip { eta_p, heralds } => {
            put(&mut m, "eta_p", eta_p);
            put(&mut m, "heralds", heralds);
            "tomo-roundtrip"
        }
        Command::Run { scenario } => return Ok((scenario, m)),
        Command::List | Command::Validate { .. } => unreachable!("handled before"),
    };
    Ok((name.into(), m))
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let g = cli.global;
    match cli.command {
        Command::List => {
            for name in SCENARIOS {
                let s: Scenario = name.parse()?;
                println!("{name}\n    {}", describe(s));
            }
            return Ok(ExitCode::SUCCESS);
        }
        Command::Validate { files } => {
            let report = validate_inputs(&files);
            print!("{report}");
            return Ok(if report.ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        _ => {}
    }
    let file = match &g.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let (scenario, flags) = scenario_flags(cli.command)?;
    let mut overrides = file.parameters;
    let mut bad = Vec::new();
    for kv in &g.set {
        match kv.split_once('=') {
            Some((k, v)) => {
                let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.into()));
                overrides.insert(k.trim().into(), value);
            }
            None => bad.push(format!("--set {kv}: expected KEY=VALUE")),
        }
    }
    if !bad.is_empty() {
        return Err(CliError::InvalidParameters(bad));
    }
    overrides.extend(flags);
    let convention = match g.convention {
        Some(c) => c.parse::<GeneratorConvention>()?,
        None => file.convention.unwrap_or(GeneratorConvention::Jz),
    };
    let config = ScenarioConfig {
        scenario,
        overrides,
        out: g.out,
        seed: g.seed.or(file.seed),
        convention,
    };
    let report = run_scenario(&config)?;
    for line in &report.summary {
        println!("{line}");
    }
    let names: Vec<&str> = report.manifest.artifacts.iter().map(|a| a.name.as_str()).collect();
    println!("wrote {} and manifest.json to {}", names.join(", "), config.out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
