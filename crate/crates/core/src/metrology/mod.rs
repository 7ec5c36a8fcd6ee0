//! Classical and quantum Fisher information, precision bounds and the
//! lossy Holland-Burnett phase-sensing network.
//!
//! Under `exp(i phi J_z)` the lossless HB(N) probe prepared with splitting
//! ratio `v` has `F_Q = 8 N (N + 1) v (1 - v)`; `exp(i phi n_a)` gives the
//! same value because the probe is diagonal in total photon number.

mod bounds;
mod channel;
mod networks;

pub use bounds::{effective_phase_axis, effective_phase_axis_residual, precision_bounds, PhaseAxis, PrecisionBounds};
pub use channel::{
    quantum_fisher_information, FisherValue, GeneratorConvention, PhaseChannel, Probe, FD_STEP, PHASE_SCAN_POINTS,
    P_FLOOR, QFI_EPSILON, SEARCH_FLOOR,
};
pub use networks::{
    fisher_surface, fisher_surface_cell, hb_loss_threshold, holland_burnett_network, holland_burnett_qfi,
    holland_burnett_state, noon_loss_sensitivity, unit_grid, FisherSurface, NetworkLosses, NoonSensitivity,
    ThresholdOutcome, ThresholdResult, THRESHOLD_TOLERANCE,
};
