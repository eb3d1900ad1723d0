//! Seeded slotted simulation.
//!
//! Each slot: observe `Q[t]`, ask the policy for allocations, draw the block
//! count, draw arrivals, apply the backlog recursion, record. Arrivals, block
//! production and policy randomness each draw from their own ChaCha stream
//! keyed off the master seed, so swapping the policy leaves the arrival
//! sample path untouched.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{
    draw_poisson, expected_slot_cost, queue_step, slot_cost, total_rate, QueueState, SlotRecord,
    SystemParams,
};
use crate::policy::{decide, PolicySpec};

/// Per-slot arrival law. Draws are i.i.d. across slots.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrivalSpec {
    /// Uniform on the integers `lo..=hi`.
    UniformInt {
        lo: u64,
        hi: u64,
    },
    Constant(u64),
    /// `batch` with probability `p`, else nothing.
    BernoulliBatch {
        p: f64,
        batch: u64,
    },
}

impl Default for ArrivalSpec {
    fn default() -> Self {
        ArrivalSpec::UniformInt { lo: 50, hi: 200 }
    }
}

impl ArrivalSpec {
    pub fn mean(&self) -> f64 {
        match *self {
            ArrivalSpec::UniformInt { lo, hi } => (lo as f64 + hi as f64) / 2.0,
            ArrivalSpec::Constant(v) => v as f64,
            ArrivalSpec::BernoulliBatch { p, batch } => p * batch as f64,
        }
    }

    pub fn upper_support(&self) -> u64 {
        match *self {
            ArrivalSpec::UniformInt { hi, .. } => hi,
            ArrivalSpec::Constant(v) => v,
            ArrivalSpec::BernoulliBatch { p, batch } => {
                if p > 0.0 {
                    batch
                } else {
                    0
                }
            }
        }
    }

    pub fn validate(&self, a_max: u64) -> Result<()> {
        match *self {
            ArrivalSpec::UniformInt { lo, hi } if lo > hi => {
                return Err(invalid("arrival", "uniform bounds need lo <= hi"))
            }
            ArrivalSpec::BernoulliBatch { p, .. } if !(0.0..=1.0).contains(&p) => {
                return Err(invalid("arrival", "probability must be in [0,1]"))
            }
            _ => {}
        }
        if self.upper_support() > a_max {
            return Err(invalid(
                "a_max",
                alloc::format!(
                    "arrival upper support {} exceeds a_max {a_max}",
                    self.upper_support()
                ),
            ));
        }
        Ok(())
    }
}

/// One arrival draw.
pub fn sample_arrivals<R: Rng + ?Sized>(spec: &ArrivalSpec, rng: &mut R) -> u64 {
    match *spec {
        ArrivalSpec::UniformInt { lo, hi } => rng.random_range(lo..=hi),
        ArrivalSpec::Constant(v) => v,
        ArrivalSpec::BernoulliBatch { p, batch } => {
            if p > 0.0 && rng.random_bool(p) {
                batch
            } else {
                0
            }
        }
    }
}

/// Independent random sources for one run.
#[derive(Debug, Clone)]
pub struct Streams {
    pub arrivals: ChaCha8Rng,
    pub blocks: ChaCha8Rng,
    pub policy: ChaCha8Rng,
}

impl Streams {
    const ARRIVALS: u64 = 0x6172_7269_7661_6c73; // "arrivals"
    const BLOCKS: u64 = 0x626c_6f63_6b73; // "blocks"
    const POLICY: u64 = 0x706f_6c69_6379; // "policy"

    pub fn new(seed: u64) -> Self {
        let stream = |label| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(label);
            rng
        };
        Self {
            arrivals: stream(Self::ARRIVALS),
            blocks: stream(Self::BLOCKS),
            policy: stream(Self::POLICY),
        }
    }
}

/// Full record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<SlotRecord>,
    /// Prefix means of the expected net cost.
    pub running_avg_cost: Vec<f64>,
    /// Prefix means of the backlog `Q[t]` observed at the start of each slot.
    pub running_avg_queue: Vec<f64>,
    pub seed: u64,
    pub policy: PolicySpec,
    /// Set by the caller; identifies the effective configuration.
    pub config_digest: String,
}

impl Trace {
    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    pub fn time_average_cost(&self) -> Result<f64> {
        self.running_avg_cost
            .last()
            .copied()
            .ok_or_else(|| Error::Contract("empty trace".into()))
    }

    pub fn time_average_queue(&self) -> Result<f64> {
        self.running_avg_queue
            .last()
            .copied()
            .ok_or_else(|| Error::Contract("empty trace".into()))
    }

    /// Fraction of slots where the uncapped block draw exceeded `s_max`.
    pub fn clamp_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let clamped = self.records.iter().filter(|r| r.clamped).count();
        clamped as f64 / self.records.len() as f64
    }

    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.config_digest = digest.into();
        self
    }

    /// Re-checks slot numbering, bounds and the backlog recursion on every
    /// record.
    pub fn check_consistency(&self, params: &SystemParams) -> Result<()> {
        let mut expected_backlog = 0u64;
        for (t, r) in self.records.iter().enumerate() {
            let fail = |what: &str| Err(Error::Contract(alloc::format!("slot {t}: {what}")));
            if r.slot != t as u64 {
                return fail("slot index out of sequence");
            }
            if r.backlog_before != expected_backlog {
                return fail("backlog_before does not continue previous slot");
            }
            if r.arrivals > params.a_max || r.blocks_mined > params.s_max {
                return fail("arrivals or blocks outside bounds");
            }
            let next = queue_step(
                QueueState {
                    backlog: r.backlog_before,
                    slot: r.slot,
                },
                r.blocks_mined,
                r.arrivals,
                params,
            );
            if next.backlog != r.backlog_after {
                return fail("backlog recursion violated");
            }
            expected_backlog = r.backlog_after;
        }
        if self.running_avg_cost.len() != self.records.len()
            || self.running_avg_queue.len() != self.records.len()
        {
            return Err(Error::Contract("running averages length mismatch".into()));
        }
        Ok(())
    }
}

/// Time averages of one finished run, without the per-slot records.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub policy: PolicySpec,
    pub seed: u64,
    pub horizon: u64,
    pub time_avg_cost: f64,
    pub time_avg_queue: f64,
    pub clamp_rate: f64,
    /// Backlog left after the final slot.
    pub final_backlog: u64,
}

impl Trace {
    pub fn summary(&self) -> Result<TraceSummary> {
        Ok(TraceSummary {
            policy: self.policy.clone(),
            seed: self.seed,
            horizon: self.records.len() as u64,
            time_avg_cost: self.time_average_cost()?,
            time_avg_queue: self.time_average_queue()?,
            clamp_rate: self.clamp_rate(),
            final_backlog: self.records.last().map_or(0, |r| r.backlog_after),
        })
    }
}

/// Runs `horizon` slots from an empty queue. Identical inputs give an
/// identical trace.
pub fn run(
    params: &SystemParams,
    arrival: &ArrivalSpec,
    policy: &PolicySpec,
    horizon: u64,
    seed: u64,
) -> Result<Trace> {
    if horizon == 0 {
        return Err(invalid("horizon", "must be at least 1"));
    }
    params.validate()?;
    arrival.validate(params.a_max)?;
    policy.validate(params)?;

    let mut streams = Streams::new(seed);
    let mut q = QueueState::default();
    let cap = horizon as usize;
    let mut records = Vec::with_capacity(cap);
    let mut running_avg_cost = Vec::with_capacity(cap);
    let mut running_avg_queue = Vec::with_capacity(cap);
    let mut cost_sum = 0.0;
    let mut queue_sum = 0.0;

    for t in 0..horizon {
        let at_slot = |e: Error| Error::SlotFailure {
            slot: t,
            source: alloc::boxed::Box::new(e),
        };
        let allocations =
            decide(policy, q.backlog, t, params, &mut streams.policy).map_err(at_slot)?;
        let rate = total_rate(&allocations, params).map_err(at_slot)?;
        let raw_blocks = draw_poisson(rate, &mut streams.blocks);
        let blocks_mined = raw_blocks.min(params.s_max);
        let arrivals = sample_arrivals(arrival, &mut streams.arrivals);
        let next = queue_step(q, blocks_mined, arrivals, params);

        let expected_cost = expected_slot_cost(&allocations, params).map_err(at_slot)?;
        let realized_cost = slot_cost(&allocations, blocks_mined, params).map_err(at_slot)?;
        let u_total = allocations
            .iter()
            .map(|theta| theta.weighted(&params.weights))
            .sum::<Result<f64>>()
            .map_err(at_slot)?;

        cost_sum += expected_cost;
        queue_sum += q.backlog as f64;
        let n = (t + 1) as f64;
        running_avg_cost.push(cost_sum / n);
        running_avg_queue.push(queue_sum / n);

        records.push(SlotRecord {
            slot: t,
            backlog_before: q.backlog,
            arrivals,
            blocks_mined,
            allocations,
            u_total,
            realized_cost,
            expected_cost,
            backlog_after: next.backlog,
            clamped: raw_blocks > params.s_max,
        });
        q = next;
    }

    Ok(Trace {
        records,
        running_avg_cost,
        running_avg_queue,
        seed,
        policy: policy.clone(),
        config_digest: String::new(),
    })
}
