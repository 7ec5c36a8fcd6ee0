use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("a Fock basis needs at least one mode")]
    ZeroModes,

    #[error("mode {mode} is out of range for a {n_modes}-mode basis")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("two-mode element acts on mode {0} twice")]
    IdenticalModes(usize),

    #[error("{name} = {value} is outside its valid range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("ancilla mode {mode} is not in the vacuum (population {population:.3e})")]
    AncillaNotVacuum { mode: usize, population: f64 },

    #[error("ancilla mode {0} is used by a non-loss element or as a loss system mode")]
    AncillaMisuse(usize),

    #[error("ancilla mode {0} feeds more than one loss element; a unitary dilation needs one ancilla per loss")]
    AncillaReused(usize),

    #[error("operator dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operation requires a two-mode basis, got {0} modes")]
    NotTwoMode(usize),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid density operator: {0}")]
    InvalidState(String),

    #[error("element scattered amplitude outside the truncated space")]
    TruncationOverflow,

    #[error("non-finite Fisher information; check p_floor and the derivative step")]
    NonFiniteFisher,

    #[error("intensity {name} is zero; the ratio is undefined")]
    ZeroIntensity { name: &'static str },

    #[error("intensity {name} = {value} is negative")]
    NegativeIntensity { name: &'static str, value: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error(
        "fit did not converge after {iterations} iterations (best rms residual {rms:.3e} at v={:.6}, w={:.6}, phi0={:.6}, kappa={:.6})",
        best[0], best[1], best[2], best[3]
    )]
    FitNotConverged { iterations: usize, rms: f64, best: [f64; 4] },

    #[error("JSA grid too narrow: boundary amplitude ratio {ratio:.3e} exceeds {tolerance:.1e}")]
    GridTruncation { ratio: f64, tolerance: f64 },

    #[error("joint spectral amplitude is identically zero")]
    ZeroAmplitude,

    #[error("more than one filter acts on the {0} arm")]
    FilterConflict(&'static str),

    #[error("tomographically incomplete: measurement span has rank {rank}, need {required}")]
    TomographicallyIncomplete { rank: usize, required: usize },

    #[error("setting {setting}: outcome {outcome} has {count} counts but zero model probability")]
    ModelMismatch {
        setting: usize,
        outcome: usize,
        count: f64,
    },

    #[error("setting {setting}: outcome probabilities sum to {sum}, POVM is not complete")]
    PovmIncomplete { setting: usize, sum: f64 },

    #[error("count records do not match the measurement settings: {0}")]
    RecordMismatch(String),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
