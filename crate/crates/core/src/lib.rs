//! Simulation and estimation toolkit for lossy photonic interferometry.
//!
//! * [`fock`]: Fock-space states, beam splitters, phases and loss.
//! * [`measurement`]: POVMs and outcome distributions.
//! * [`metrology`]: classical and quantum Fisher information, precision bounds.
//! * [`spectral`]: joint spectral amplitudes, filtering and Schmidt analysis.
//! * [`characterize`]: ratiometric splitter estimation and MZI calibration.
//! * [`tomography`]: loss-aware POVMs and heralded-state reconstruction.

pub mod characterize;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod measurement;
pub mod metrology;
pub mod optimize;
pub mod spectral;
pub mod tomography;

pub use error::{Error, Result};
