//! Benchmark fixtures shared by the criterion benches.

use pedwarn_core::{ScenarioMap, SyntheticParams, TraceSequence};

/// A small synthetic city for benchmarking: 2x2 blocks, two minutes.
pub fn small_city() -> (ScenarioMap, TraceSequence) {
    let params = SyntheticParams { blocks_x: 2, blocks_y: 2, duration: 120.0, ..SyntheticParams::default() };
    pedwarn_core::trace::generate_synthetic(&params).expect("default params are valid")
}
