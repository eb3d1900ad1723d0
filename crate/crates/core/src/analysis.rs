//! Reference optima and the performance bounds of the drift-plus-penalty
//! controller, checked against simulated ensembles.
//!
//! All quantities are per slot and summed over miners:
//!
//! - `B = max(A_max², (S_max·V)²) / 2`
//! - `p*`: best symmetric static allocation that keeps `N·λ·V ≥ E[A]`
//! - `p_min`: best allocation with no stability requirement
//! - `Δ = E[S]·V − E[A]` at the full-power allocation
//! - cost bound `p* + B/K`, backlog bound `(B + K·(p* − p_min)) / Δ`

use alloc::format;
use alloc::vec;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{rate_of_scalar, total_rate, ResourceVector, ScalarCost, SystemParams};
use crate::policy::PolicySpec;
use crate::sim::{ArrivalSpec, Trace, TraceSummary};
use crate::solver::{solve_miner, SlotProblem};

/// Width of the statistical slack on empirical checks, in standard errors.
pub const SLACK_STANDARD_ERRORS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub k: f64,
    pub b_const: f64,
    pub p_star: f64,
    /// Per-miner `wᵀθ` of the reference static allocation.
    pub u_star_static: f64,
    pub p_min: f64,
    pub slater_delta: f64,
    pub theorem1_bound: f64,
    /// `None` when `Δ <= 0`.
    pub theorem2_bound: Option<f64>,
    pub n_traces: usize,
    pub empirical_cost: f64,
    pub empirical_cost_se: f64,
    pub empirical_queue: f64,
    pub empirical_queue_se: f64,
    pub cost_ok: bool,
    /// `None` when the backlog bound is not applicable.
    pub queue_ok: Option<bool>,
}

/// Mean and standard error (sample deviation over `√n`).
pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, math::sqrt(var / n as f64))
}

/// `max(A_max², (S_max·V)²) / 2`.
pub fn drift_bound_b(a_max: u64, s_max: u64, block_size: u64) -> f64 {
    let a = a_max as f64;
    let s = s_max as f64 * block_size as f64;
    f64::max(a * a, s * s) / 2.0
}

/// Per-miner static subproblem `c(u) − (R+M)·u^ε`.
fn static_problem(params: &SystemParams) -> SlotProblem<impl ScalarCost> {
    SlotProblem {
        gain: params.reward_total(),
        k: 1.0,
        u_max: params.u_max(),
        cost: params.cost_model(),
        epsilon: params.epsilon,
    }
}

/// Best stable symmetric static allocation: returns `(p*, u*)`.
///
/// The per-miner objective is convex, so the constrained optimum is the
/// larger of the unconstrained minimizer and the smallest `u` meeting
/// `N·u^ε·V ≥ mean_arrival`.
pub fn optimal_static_cost(params: &SystemParams, mean_arrival: f64) -> Result<(f64, f64)> {
    params.validate()?;
    let n = params.n_miners as f64;
    let v = params.block_size as f64;
    let u_max = params.u_max();
    let capacity = n * rate_of_scalar(u_max, params.epsilon) * v;
    if mean_arrival > capacity {
        return Err(Error::Infeasible {
            mean_arrival,
            capacity,
        });
    }
    let problem = static_problem(params);
    let unconstrained = solve_miner(&problem)?;
    let required = if mean_arrival > 0.0 {
        math::pow(mean_arrival / (n * v), 1.0 / params.epsilon).min(u_max)
    } else {
        0.0
    };
    let u = unconstrained.max(required);
    Ok((n * problem.objective(u), u))
}

/// Smallest achievable expected slot cost over the box, ignoring stability.
pub fn min_static_cost(params: &SystemParams) -> Result<f64> {
    params.validate()?;
    let problem = static_problem(params);
    let u = solve_miner(&problem)?;
    Ok(params.n_miners as f64 * problem.objective(u))
}

/// `E[S]·V − E[A]` under fixed allocations; positive means the service margin
/// holds.
pub fn slater_delta(
    params: &SystemParams,
    arrival: &ArrivalSpec,
    allocations: &[ResourceVector],
) -> Result<f64> {
    Ok(total_rate(allocations, params)? * params.block_size as f64 - arrival.mean())
}

/// `Δ` at the full-power allocation.
pub fn max_mining_delta(params: &SystemParams, arrival: &ArrivalSpec) -> Result<f64> {
    let full = vec![params.theta_max.clone(); params.n_miners];
    slater_delta(params, arrival, &full)
}

/// `p* + B/K`.
pub fn cost_bound(p_star: f64, b: f64, k: f64) -> f64 {
    p_star + b / k
}

/// `(B + K·(p* − p_min)) / Δ`, or `None` when `Δ <= 0`.
pub fn backlog_bound(p_star: f64, p_min: f64, b: f64, k: f64, delta: f64) -> Option<f64> {
    (delta > 0.0).then(|| (b + k * (p_star - p_min)) / delta)
}

/// `(B/K0)·ln(t)/t`, the residual cost gap under `K[t] = K0·(t+1)` after
/// `t` slots.
pub fn varying_k_gap_bound(b: f64, k0: f64, t: u64) -> f64 {
    let t = t as f64;
    b / k0 * math::ln(t) / t
}

/// Checks an ensemble of fixed-`K` drift-plus-penalty traces against the
/// cost and backlog bounds. Empirical values are ensemble means of the
/// per-trace time averages; each check allows three standard errors.
pub fn verify_bounds(
    traces: &[Trace],
    params: &SystemParams,
    k: f64,
    arrival: &ArrivalSpec,
) -> Result<BoundsReport> {
    let summaries = traces
        .iter()
        .map(Trace::summary)
        .collect::<Result<alloc::vec::Vec<_>>>()?;
    verify_summaries(&summaries, params, k, arrival)
}

/// [`verify_bounds`] over already-reduced runs.
pub fn verify_summaries(
    runs: &[TraceSummary],
    params: &SystemParams,
    k: f64,
    arrival: &ArrivalSpec,
) -> Result<BoundsReport> {
    if runs.is_empty() {
        return Err(Error::Contract("no traces to verify".into()));
    }
    for run in runs {
        match run.policy {
            PolicySpec::Dmra { k: tk } if tk == k => {}
            ref other => {
                return Err(Error::Contract(format!(
                    "bound check needs dmra({k}) traces, got {other}"
                )))
            }
        }
    }

    let b = drift_bound_b(params.a_max, params.s_max, params.block_size);
    let (p_star, u_star_static) = optimal_static_cost(params, arrival.mean())?;
    let p_min = min_static_cost(params)?;
    let delta = max_mining_delta(params, arrival)?;
    let t1 = cost_bound(p_star, b, k);
    let t2 = backlog_bound(p_star, p_min, b, k, delta);

    let costs: alloc::vec::Vec<f64> = runs.iter().map(|r| r.time_avg_cost).collect();
    let queues: alloc::vec::Vec<f64> = runs.iter().map(|r| r.time_avg_queue).collect();
    let (empirical_cost, empirical_cost_se) = mean_and_se(&costs);
    let (empirical_queue, empirical_queue_se) = mean_and_se(&queues);

    Ok(BoundsReport {
        k,
        b_const: b,
        p_star,
        u_star_static,
        p_min,
        slater_delta: delta,
        theorem1_bound: t1,
        theorem2_bound: t2,
        n_traces: runs.len(),
        empirical_cost,
        empirical_cost_se,
        empirical_queue,
        empirical_queue_se,
        cost_ok: empirical_cost <= t1 + SLACK_STANDARD_ERRORS * empirical_cost_se,
        queue_ok: t2
            .map(|bound| empirical_queue <= bound + SLACK_STANDARD_ERRORS * empirical_queue_se),
    })
}
