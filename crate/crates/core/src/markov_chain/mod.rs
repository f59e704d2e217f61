//! Continuous-time Markov chains: generator validation, exact path
//! simulation, quasi-stationary distributions, two-time-scale composition
//! and aggregation, and occupation-measure diagnostics.

mod generator;
mod occupation;
mod path;
mod two_scale;

pub use generator::{
    quasi_stationary, transition_matrix, validate_generator, GeneratorMatrix,
    QuasiStationaryDistribution, GENERATOR_TOL,
};
pub use occupation::{
    adaptive_simpson, occupation_deviation, occupation_rate, OccupationEntry, OccupationOptions,
    OccupationRateReport, OccupationReport, SlopeEntry,
};
pub use path::{aggregate_path, simulate_chain, write_chain_paths_csv, ChainPath, Segment};
pub use two_scale::{
    aggregate_generator, compose, verify_decomposition, DecompositionReport, StatePartition,
    TwoScaleGenerator,
};
