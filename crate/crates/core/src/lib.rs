//! Mining-resource allocation for proof-of-work networks.
//!
//! Transactions wait in one logical queue that is drained in batches of `V`
//! whenever any miner wins a block race. Each slot, miners choose how much of
//! each resource to spend; the drift-plus-penalty controller picks the
//! allocation that trades net mining cost against queue growth with a single
//! weight `K`.
//!
//! The crate is `no_std` (needs `alloc`). File formats, configuration and the
//! command-line driver live in the `dmra` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod error;
mod math;
pub mod model;
pub mod policy;
pub mod sim;
pub mod solver;

pub use analysis::{
    drift_bound_b, min_static_cost, optimal_static_cost, slater_delta, verify_bounds,
    verify_summaries, BoundsReport,
};
pub use error::{Error, Result};
pub use model::{
    cost, expected_slot_cost, mining_rate, queue_step, sample_block_count, slot_cost, total_rate,
    LinearCost, QuadraticCost, QueueState, ResourceVector, ScalarCost, SlotRecord, SystemParams,
};
pub use policy::{decide, PolicySpec};
pub use sim::{run, sample_arrivals, ArrivalSpec, Trace, TraceSummary};
pub use solver::{
    expand_scalar, oracle_grid_search, slot_gain, solve_miner_bisection, solve_miner_closed_form,
    solve_slot, SlotProblem, SlotSolution,
};
