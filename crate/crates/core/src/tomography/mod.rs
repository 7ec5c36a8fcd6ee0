//! Heralded-state tomography through a lossy interferometer with click
//! detectors.
//!
//! Output click patterns are pulled back through the unitary dilation of
//! the apparatus (one ancilla per loss), restricted to vacuum loss inputs
//! and to a photon-number prior on the probed modes, and then used for
//! count simulation and reconstruction. Every outcome operator is block
//! diagonal in total photon number, so reconstructions live on that
//! block-diagonal space.

mod apparatus;
mod reconstruct;
mod records;

pub use apparatus::{
    back_propagate_povm, build_output_povm, condition_povm, default_settings, grid_settings, loss_population, measurement_povms,
    setting_povm, Apparatus, ApparatusConfig, ConditionedPovm, ConditionedSpace, PhotonCap, Setting, AUX,
    DETECTORS, LOSS_MODES, M1, M2, N_OUTCOMES, OUTCOME_LABELS,
};
pub use reconstruct::{
    check_completeness, lsq_reconstruct, mle_reconstruct, qcrb_of_reconstruction, LsqResult, MleOptions, MleResult,
    QcrbReport, StateJson,
};
pub use records::{
    expected_counts, read_records_csv, resample_records, simulate_counts, write_records_csv, CountRecord,
};
