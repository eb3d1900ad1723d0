//! Physical model: mining rate, block production, mining cost and the
//! transaction backlog recursion.
//!
//! Every miner's investment enters the model only through the weighted
//! scalar `u = wᵀθ`. The mining rate is `u^ε` (concave, diminishing returns)
//! and block production in a unit slot is the count of a Poisson process with
//! the summed rate, clamped to `s_max`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Error, Result};
use crate::math;

/// Per-miner allocation of the `D` resource types.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceVector(Vec<f64>);

impl ResourceVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Weighted scalar `wᵀθ`.
    pub fn weighted(&self, weights: &[f64]) -> Result<f64> {
        if weights.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                got: self.0.len(),
            });
        }
        Ok(self.0.iter().zip(weights).map(|(x, w)| x * w).sum())
    }

    /// Checks `0 <= θ[k] <= upper[k]` componentwise.
    pub fn check_box(&self, upper: &ResourceVector) -> Result<()> {
        if upper.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: upper.len(),
                got: self.len(),
            });
        }
        for (index, (&value, &hi)) in self.0.iter().zip(&upper.0).enumerate() {
            if !(value >= 0.0 && value <= hi) {
                return Err(Error::OutOfBox {
                    index,
                    value,
                    upper: hi,
                });
            }
        }
        Ok(())
    }
}

impl From<Vec<f64>> for ResourceVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// A cost function of the weighted scalar `u = wᵀθ`, assumed increasing,
/// convex and differentiable.
pub trait ScalarCost {
    fn value(&self, u: f64) -> f64;
    fn derivative(&self, u: f64) -> f64;

    /// `Some(m)` when the cost is affine `m·u + n`; lets solvers use the
    /// closed form.
    fn linear_slope(&self) -> Option<f64> {
        None
    }
}

/// `c(u) = slope·u + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCost {
    pub slope: f64,
    pub intercept: f64,
}

impl ScalarCost for LinearCost {
    fn value(&self, u: f64) -> f64 {
        self.slope * u + self.intercept
    }

    fn derivative(&self, _u: f64) -> f64 {
        self.slope
    }

    fn linear_slope(&self) -> Option<f64> {
        Some(self.slope)
    }
}

/// `c(u) = quadratic·u² + slope·u + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCost {
    pub quadratic: f64,
    pub slope: f64,
    pub intercept: f64,
}

impl ScalarCost for QuadraticCost {
    fn value(&self, u: f64) -> f64 {
        (self.quadratic * u + self.slope) * u + self.intercept
    }

    fn derivative(&self, u: f64) -> f64 {
        2.0 * self.quadratic * u + self.slope
    }
}

impl<C: ScalarCost + ?Sized> ScalarCost for &C {
    fn value(&self, u: f64) -> f64 {
        (**self).value(u)
    }

    fn derivative(&self, u: f64) -> f64 {
        (**self).derivative(u)
    }

    fn linear_slope(&self) -> Option<f64> {
        (**self).linear_slope()
    }
}

/// All model constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub n_miners: usize,
    pub n_resources: usize,
    pub weights: Vec<f64>,
    pub epsilon: f64,
    /// Transactions per block (`V`).
    pub block_size: u64,
    pub reward_fixed: f64,
    pub reward_fees: f64,
    pub theta_max: ResourceVector,
    pub cost_slope: f64,
    pub cost_intercept: f64,
    pub a_max: u64,
    pub s_max: u64,
}

impl Default for SystemParams {
    /// Four miners with CPU (percent, cap 60, weight 3) and electricity
    /// (cap 3, weight 1), `ε = 0.5`, `V = 3`, `R = 3`, `M = 0`, linear cost
    /// `0.45·u`.
    fn default() -> Self {
        Self {
            n_miners: 4,
            n_resources: 2,
            weights: vec![3.0, 1.0],
            epsilon: 0.5,
            block_size: 3,
            reward_fixed: 3.0,
            reward_fees: 0.0,
            theta_max: ResourceVector::new(vec![60.0, 3.0]),
            cost_slope: 0.45,
            cost_intercept: 0.0,
            a_max: 200,
            s_max: 50,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_miners == 0 {
            return Err(invalid("n_miners", "must be positive"));
        }
        if self.n_resources == 0 {
            return Err(invalid("n_resources", "must be positive"));
        }
        if self.weights.len() != self.n_resources {
            return Err(Error::DimensionMismatch {
                expected: self.n_resources,
                got: self.weights.len(),
            });
        }
        if self.theta_max.len() != self.n_resources {
            return Err(Error::DimensionMismatch {
                expected: self.n_resources,
                got: self.theta_max.len(),
            });
        }
        if self.weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(invalid("weights", "all weights must be strictly positive"));
        }
        if self
            .theta_max
            .as_slice()
            .iter()
            .any(|&t| !(t >= 0.0 && t.is_finite()))
        {
            return Err(invalid(
                "theta_max",
                "bounds must be finite and non-negative",
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon", "must be in (0,1)"));
        }
        if self.block_size == 0 {
            return Err(invalid("block_size", "must be positive"));
        }
        if !(self.reward_fixed >= 0.0) || !(self.reward_fees >= 0.0) {
            return Err(invalid("reward", "rewards must be non-negative"));
        }
        if !(self.cost_slope >= 0.0) || !(self.cost_intercept >= 0.0) {
            return Err(invalid("cost", "cost coefficients must be non-negative"));
        }
        if self.a_max == 0 {
            return Err(invalid("a_max", "must be positive"));
        }
        if self.s_max == 0 {
            return Err(invalid("s_max", "must be positive"));
        }
        Ok(())
    }

    /// `R + M`.
    pub fn reward_total(&self) -> f64 {
        self.reward_fixed + self.reward_fees
    }

    /// `wᵀθ_max`, the largest weighted investment of one miner.
    pub fn u_max(&self) -> f64 {
        self.theta_max
            .as_slice()
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| t * w)
            .sum()
    }

    pub fn cost_model(&self) -> LinearCost {
        LinearCost {
            slope: self.cost_slope,
            intercept: self.cost_intercept,
        }
    }

    fn check_miners(&self, allocations: &[ResourceVector]) -> Result<()> {
        if allocations.len() != self.n_miners {
            return Err(Error::MinerCountMismatch {
                expected: self.n_miners,
                got: allocations.len(),
            });
        }
        Ok(())
    }
}

/// Transaction backlog `Q[t]` at slot `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QueueState {
    pub backlog: u64,
    pub slot: u64,
}

/// One slot of a simulation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: u64,
    pub backlog_before: u64,
    pub arrivals: u64,
    pub blocks_mined: u64,
    pub allocations: Vec<ResourceVector>,
    /// Sum of `wᵀθᵢ` over miners.
    pub u_total: f64,
    pub realized_cost: f64,
    pub expected_cost: f64,
    pub backlog_after: u64,
    /// The uncapped block draw exceeded `s_max`.
    pub clamped: bool,
}

/// `u^ε`, zero at `u = 0`.
pub fn rate_of_scalar(u: f64, epsilon: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        math::pow(u, epsilon)
    }
}

/// Mining rate `λ(θ) = (wᵀθ)^ε` of one miner.
pub fn mining_rate(theta: &ResourceVector, params: &SystemParams) -> Result<f64> {
    let u = theta.weighted(&params.weights)?;
    Ok(rate_of_scalar(u, params.epsilon))
}

/// `Σᵢ λ(θᵢ)`, the mean number of blocks mined in one slot.
pub fn total_rate(allocations: &[ResourceVector], params: &SystemParams) -> Result<f64> {
    params.check_miners(allocations)?;
    allocations
        .iter()
        .map(|theta| mining_rate(theta, params))
        .sum()
}

/// Uncapped Poisson draw with the given mean.
pub fn draw_poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> u64 {
    if !(rate > 0.0) {
        return 0;
    }
    match Poisson::new(rate) {
        Ok(law) => {
            let draw: f64 = law.sample(rng);
            draw as u64
        }
        // rate beyond the sampler's range; S is clamped to s_max anyway
        Err(_) => u64::MAX,
    }
}

/// Blocks mined in a unit slot: Poisson(rate) clamped to `[0, s_max]`.
pub fn sample_block_count<R: Rng + ?Sized>(rate: f64, s_max: u64, rng: &mut R) -> u64 {
    draw_poisson(rate, rng).min(s_max)
}

/// Mining cost `c(θ) = m·wᵀθ + n` of one miner.
pub fn cost(theta: &ResourceVector, params: &SystemParams) -> Result<f64> {
    let u = theta.weighted(&params.weights)?;
    Ok(params.cost_model().value(u))
}

fn total_cost(allocations: &[ResourceVector], params: &SystemParams) -> Result<f64> {
    params.check_miners(allocations)?;
    allocations.iter().map(|theta| cost(theta, params)).sum()
}

/// Realized net cost `Σ c(θᵢ) − S·(R+M)`.
pub fn slot_cost(
    allocations: &[ResourceVector],
    blocks_mined: u64,
    params: &SystemParams,
) -> Result<f64> {
    Ok(total_cost(allocations, params)? - blocks_mined as f64 * params.reward_total())
}

/// Expected net cost `Σ c(θᵢ) − (R+M)·Σ λ(θᵢ)`.
pub fn expected_slot_cost(allocations: &[ResourceVector], params: &SystemParams) -> Result<f64> {
    Ok(total_cost(allocations, params)? - params.reward_total() * total_rate(allocations, params)?)
}

/// `Q[t+1] = max(Q[t] − S·V + A, 0)` in exact integer arithmetic.
pub fn queue_step(
    q: QueueState,
    blocks_mined: u64,
    arrivals: u64,
    params: &SystemParams,
) -> QueueState {
    let served = blocks_mined.saturating_mul(params.block_size);
    let backlog = q.backlog.saturating_add(arrivals).saturating_sub(served);
    QueueState {
        backlog,
        slot: q.slot + 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn defaults() -> SystemParams {
        SystemParams::default()
    }

    /// θ with `wᵀθ = u` under weights (3, 1), all on the CPU component.
    fn with_u(u: f64) -> ResourceVector {
        ResourceVector::new(vec![u / 3.0, 0.0])
    }

    #[test]
    fn mining_rate_examples() {
        let p = defaults();
        assert_eq!(mining_rate(&ResourceVector::zeros(2), &p).unwrap(), 0.0);
        assert!((mining_rate(&with_u(100.0), &p).unwrap() - 10.0).abs() < 1e-12);
        // 60% CPU at weight 3 plus 3 electricity units at weight 1
        let full = ResourceVector::new(vec![60.0, 3.0]);
        let expected = 13.527_749_258_468_683; // mpmath, 30 digits
        assert!((mining_rate(&full, &p).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn mining_rate_rejects_wrong_dimension() {
        let p = defaults();
        let err = mining_rate(&ResourceVector::new(vec![1.0, 2.0, 3.0]), &p).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                got: 3
            }
        );
    }

    #[test]
    fn total_rate_examples() {
        let p = defaults();
        let four = vec![with_u(100.0); 4];
        assert!((total_rate(&four, &p).unwrap() - 40.0).abs() < 1e-12);

        let single = SystemParams {
            n_miners: 1,
            ..defaults()
        };
        assert_eq!(
            total_rate(&[ResourceVector::zeros(2)], &single).unwrap(),
            0.0
        );

        let pair = SystemParams {
            n_miners: 2,
            ..defaults()
        };
        let mixed = [with_u(100.0), ResourceVector::new(vec![60.0, 3.0])];
        assert!((total_rate(&mixed, &pair).unwrap() - 23.527_749_258_468_683).abs() < 1e-12);

        assert!(matches!(
            total_rate(&four[..3], &p),
            Err(Error::MinerCountMismatch {
                expected: 4,
                got: 3
            })
        ));
    }

    #[test]
    fn block_sampler_degenerate_and_clamped() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(sample_block_count(0.0, 50, &mut rng), 0);
        }
        for _ in 0..10_000 {
            assert!(sample_block_count(40.0, 5, &mut rng) <= 5);
        }
    }

    #[test]
    fn block_sampler_is_reproducible() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..1000)
                .map(|_| sample_block_count(41.3, 50, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn cost_examples() {
        let p = defaults();
        assert!((cost(&with_u(100.0), &p).unwrap() - 45.0).abs() < 1e-12);
        assert_eq!(cost(&ResourceVector::zeros(2), &p).unwrap(), 0.0);
        let with_intercept = SystemParams {
            cost_intercept: 1.0,
            ..defaults()
        };
        let full = ResourceVector::new(vec![60.0, 3.0]);
        assert!((cost(&full, &with_intercept).unwrap() - 83.35).abs() < 1e-12);
    }

    #[test]
    fn slot_cost_examples() {
        let p = defaults();
        let four = vec![with_u(100.0); 4];
        assert!((expected_slot_cost(&four, &p).unwrap() - 60.0).abs() < 1e-12);
        let idle = vec![ResourceVector::zeros(2); 4];
        assert_eq!(expected_slot_cost(&idle, &p).unwrap(), 0.0);
        assert!((slot_cost(&four, 50, &p).unwrap() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn queue_step_examples() {
        let p = defaults();
        let step = |backlog, s, a| queue_step(QueueState { backlog, slot: 4 }, s, a, &p);
        assert_eq!(
            step(100, 10, 20),
            QueueState {
                backlog: 90,
                slot: 5
            }
        );
        assert_eq!(step(5, 10, 0).backlog, 0);
        assert_eq!(step(0, 0, 200).backlog, 200);
    }

    #[test]
    fn box_check() {
        let upper = ResourceVector::new(vec![60.0, 3.0]);
        assert!(ResourceVector::new(vec![60.0, 0.0])
            .check_box(&upper)
            .is_ok());
        assert!(matches!(
            ResourceVector::new(vec![61.0, 0.0]).check_box(&upper),
            Err(Error::OutOfBox { index: 0, .. })
        ));
        assert!(ResourceVector::new(vec![1.0, -0.1])
            .check_box(&upper)
            .is_err());
        assert!(ResourceVector::new(vec![f64::NAN, 0.0])
            .check_box(&upper)
            .is_err());
    }

    #[test]
    fn params_validation() {
        assert!(defaults().validate().is_ok());
        for eps in [0.0, 1.0, 1.5, -0.2] {
            let p = SystemParams {
                epsilon: eps,
                ..defaults()
            };
            assert!(matches!(
                p.validate(),
                Err(Error::InvalidParam {
                    name: "epsilon",
                    ..
                })
            ));
        }
        let p = SystemParams {
            weights: vec![3.0, 0.0],
            ..defaults()
        };
        assert!(p.validate().is_err());
        assert_eq!(defaults().u_max(), 183.0);
    }

    #[test]
    fn quadratic_cost_derivative_matches_finite_difference() {
        let c = QuadraticCost {
            quadratic: 0.01,
            slope: 0.2,
            intercept: 1.0,
        };
        for &u in &[0.5, 3.0, 17.0, 150.0] {
            let h = 1e-5;
            let fd = (c.value(u + h) - c.value(u - h)) / (2.0 * h);
            assert!((fd - c.derivative(u)).abs() < 1e-6);
        }
    }
}
