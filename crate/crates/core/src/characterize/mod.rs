//! Splitter and interferometer calibration: coupling-independent ratiometric
//! estimation, the programmable-reflectivity picture of a two-splitter
//! interferometer, and heater-power fringe fitting.
//!
//! A fringe `v_eff(P)` determines `{v, w}` only up to exchange and up to the
//! complement `(v, w) -> (1 - v, 1 - w)`; both ambiguities are reported.

mod fringe;
mod mzi;
mod ratiometric;

pub use fringe::{fit_fringe, ratios_from_fringe, read_fringe_csv, write_fringe_csv, FringeFit, FringeSample, MziModel};
pub use mzi::{
    effective_reflectivity, fringe_coefficients, reachability_map, reachable_phase, Reachability, ReachabilityMap,
};
pub use ratiometric::{ratiometric_reflectivity, read_ratiometric_csv, RatiometricData, ReflectivityEstimate};
