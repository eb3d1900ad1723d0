use alloc::string::String;

use thiserror::Error;

/// Errors raised by the model, solver, simulator and analysis layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} resource components, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("expected {expected} miner allocations, got {got}")]
    MinerCountMismatch { expected: usize, got: usize },

    #[error("allocation component {index} = {value} outside [0, {upper}]")]
    OutOfBox {
        index: usize,
        value: f64,
        upper: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("cost derivative is not monotone near u = {at} (cost model is not convex)")]
    NonConvexCost { at: f64 },

    #[error("infeasible: mean arrival {mean_arrival} exceeds service capacity {capacity}")]
    Infeasible { mean_arrival: f64, capacity: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("solver failed at slot {slot}: {source}")]
    SlotFailure {
        slot: u64,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}
