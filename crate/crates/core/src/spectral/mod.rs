//! Joint spectral amplitudes of photon-pair sources, Gaussian spectral
//! filtering, Schmidt decomposition and the purity / heralding-efficiency
//! trade-off.
//!
//! Detunings are in units of the pump bandwidth. Filters act on amplitudes;
//! a filter of bandwidth `b` has intensity FWHM `2 b sqrt(ln 2)`.

mod figures;
mod filter;
mod model;
mod presets;
mod schmidt;

pub use figures::{bandwidth_for_purity, source_figures, tradeoff_scan, SourceFigures, TradeoffPoint};
pub use filter::{apply_filters, FilterArm, SpectralFilter};
pub use model::{build_jsa, GridSpec, JointSpectralAmplitude, JsaModel, PhaseMatching};
pub use presets::{calibrate_correlated, calibrate_matched, preset, preset_file, preset_names, Preset, PresetFile};
pub use schmidt::{schmidt_decompose, SchmidtDecomposition};
