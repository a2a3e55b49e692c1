//! Benchmark fixtures. The benchmarks themselves live in `benches/`.

use lsmm::builtin::{
    build_fss, build_inverter_chain, fss_generator, inverter_generator, FssParams,
    InverterChainParams,
};
use lsmm::{PolyMap, PolyVectorField, SignalGenerator, StateSpace};

/// Flexible space structure with its default generator.
pub fn fss() -> (StateSpace, SignalGenerator) {
    (
        build_fss(&FssParams::default()).expect("default FSS parameters are valid"),
        fss_generator().expect("FSS frequencies are distinct"),
    )
}

/// Cubic inverter chain with its default generator.
pub fn inverter() -> (PolyVectorField, PolyMap, SignalGenerator) {
    let (field, h) = build_inverter_chain(&InverterChainParams::default(), 3)
        .expect("default inverter parameters are valid");
    (
        field,
        h,
        inverter_generator().expect("inverter frequencies are distinct"),
    )
}
