//! Joint model / quantization / hardware design-space search for
//! compute-in-memory accelerators.
//!
//! The engine samples combined design points, prices them with an
//! analytical crossbar cost model, estimates accuracy through a pluggable
//! surrogate, and runs an area-constrained evolutionary search plus the
//! staged comparison searchers and baselines.

pub mod config;
pub mod cost;
pub mod evolve;
pub mod operators;
pub mod predictor;
pub mod report;
pub mod rng;
pub mod space;
pub mod workload;

#[cfg(test)]
pub(crate) mod testutil;

pub use space::{
    load_spec, Cardinality, DesignPoint, ExecutionMode, HardwareConfig, ModelGenome,
    ModelTemplate, QuantPolicy, SearchSpaceSpec, SpecError, ValueDistribution,
};
