//! Number-conserving linear optics with loss on truncated multimode Fock
//! spaces.
//!
//! Beam splitters follow `B(theta) = exp(-2 i theta J_x)`, so a photon
//! crosses to the other mode with probability `v = sin^2(theta)` and picks
//! up a factor `-i` when it does. With this convention
//! `B(pi/4)|1,1> = -i (|2,0> + |0,2>)/sqrt(2)`.

mod basis;
mod circuit;
mod operator;
mod schwinger;
mod state;

pub use basis::{enumerate_basis, FockBasis, Occupation};
pub use circuit::{
    apply_circuit, embed_with_vacuum, partial_trace, partial_trace_operator, splitting_angle, Circuit,
    CircuitElement, CompiledCircuit, UnitaryDilation,
};
pub use operator::{
    beam_splitter_matrix, beam_splitter_transfer, phase_shifter_matrix, two_mode_unitary, ModeTransfer,
    SparseOperator,
};
pub use schwinger::{schwinger_operators, SchwingerOperators};
pub use state::{DensityOperator, PureState};
