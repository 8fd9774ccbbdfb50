//! Simulation of qudit channels as convex mixtures of generalized extreme
//! channels, each realized by a single-ancilla circuit.

pub mod ansatz;
pub mod blocks;
pub mod channel;
pub mod circuit;
pub mod decompose;
pub mod error;
pub mod io;
pub mod linalg;
pub mod qutrit;
pub mod random;
pub mod sampler;

pub use ansatz::{
    check_extremality, extreme_choi, extreme_kraus, kappa, parameter_count, unitary_from_params,
    BTensor, Extremality, ExtremalityReport, ExtremeParams,
};
pub use blocks::{certify_generalized_extreme, choi_blocks, ChoiBlocks, GenExtReport};
pub use channel::{
    apply_channel, choi_to_kraus, kraus_to_choi, partial_trace, trace_distance, weyl_x, weyl_z,
    ChoiState, DensityMatrix, KrausChannel, Subsystem,
};
pub use circuit::{synthesize, Circuit, Gate, GateCounts};
pub use decompose::{optimize, DecompositionParams, DecompositionResult, OptimizerConfig};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, Tolerances};
pub use sampler::{sample, SampleReport};
