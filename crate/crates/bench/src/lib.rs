//! Fixtures for the benchmarks.

use chansim_core::ansatz::ExtremeParams;
use chansim_core::channel::{kraus_to_choi, ChoiState};
use chansim_core::decompose::DecompositionParams;
use chansim_core::random::{random_channel, stream, streams};

/// Random full-rank target with `d` ansatz terms at a random point.
pub struct Fixture {
    pub target: ChoiState,
    pub params: DecompositionParams,
    pub flat: Vec<f64>,
}

pub fn fixture(d: usize, seed: u64) -> Fixture {
    let target = kraus_to_choi(
        &random_channel(d, d * d, &mut stream(seed, streams::CHANNEL)).expect("valid dim"),
    );
    let params =
        DecompositionParams::random(d, d, &mut stream(seed, streams::PARAMS)).expect("valid dim");
    let flat = params.to_flat();
    Fixture {
        target,
        params,
        flat,
    }
}

pub fn extreme(d: usize, seed: u64) -> ExtremeParams {
    ExtremeParams::random(d, &mut stream(seed, streams::PARAMS)).expect("valid dim")
}
