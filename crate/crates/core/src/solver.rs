//! Per-slot drift-plus-penalty minimization.
//!
//! Given backlog `Q`, each miner minimizes
//!
//! ```text
//!   K·c(u) − G·u^ε,   G = K·(R+M) + Q·V,   u ∈ [0, wᵀθ_max]
//! ```
//!
//! The objective is convex in `u`. For linear cost the stationary point has a
//! closed form; any other increasing convex differentiable cost goes through
//! derivative bisection.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::math;
use crate::model::{rate_of_scalar, ResourceVector, ScalarCost, SystemParams};

/// Default absolute tolerance on `u` for [`solve_miner_bisection`].
pub const BISECTION_TOL: f64 = 1e-9;

/// One miner's scalar subproblem.
#[derive(Debug, Clone, Copy)]
pub struct SlotProblem<C> {
    /// Coefficient `G` multiplying the mining rate.
    pub gain: f64,
    /// Tradeoff weight `K` on the cost.
    pub k: f64,
    pub u_max: f64,
    pub cost: C,
    pub epsilon: f64,
}

impl<C: ScalarCost> SlotProblem<C> {
    /// `K·c(u) − G·u^ε`.
    pub fn objective(&self, u: f64) -> f64 {
        self.k * self.cost.value(u) - self.gain * rate_of_scalar(u, self.epsilon)
    }

    /// Derivative of [`objective`](Self::objective) for `u > 0`.
    pub fn objective_derivative(&self, u: f64) -> f64 {
        self.k * self.cost.derivative(u)
            - self.gain * self.epsilon * math::pow(u, self.epsilon - 1.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(invalid("k", "tradeoff parameter must be positive"));
        }
        if !(self.gain >= 0.0) {
            return Err(invalid("gain", "must be non-negative"));
        }
        if !(self.u_max >= 0.0 && self.u_max.is_finite()) {
            return Err(invalid("u_max", "must be finite and non-negative"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon", "must be in (0,1)"));
        }
        Ok(())
    }
}

/// Allocation for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSolution {
    pub u_star: Vec<f64>,
    pub theta_star: Vec<ResourceVector>,
    /// `K·Σc(θᵢ) − G·Σλ(θᵢ)` at the solution.
    pub objective: f64,
}

/// `G = K·(R+M) + Q·V`.
pub fn slot_gain(k: f64, reward_total: f64, backlog: u64, block_size: u64) -> f64 {
    k * reward_total + backlog as f64 * block_size as f64
}

/// Closed-form minimizer for linear cost with slope `m`:
/// `clamp((G·ε / (K·m))^(1/(1−ε)), 0, u_max)`.
///
/// With `m = 0` the objective is `−G·u^ε`, so any positive gain pushes the
/// miner to `u_max`.
pub fn solve_miner_closed_form<C: ScalarCost>(p: &SlotProblem<C>) -> Result<f64> {
    p.validate()?;
    let m = p
        .cost
        .linear_slope()
        .ok_or_else(|| invalid("cost_model", "closed form needs a linear cost"))?;
    if !(m >= 0.0) {
        return Err(invalid("cost_slope", "must be non-negative"));
    }
    if p.u_max == 0.0 || p.gain == 0.0 {
        return Ok(0.0);
    }
    if m == 0.0 {
        return Ok(p.u_max);
    }
    let stationary = math::pow(p.gain * p.epsilon / (p.k * m), 1.0 / (1.0 - p.epsilon));
    Ok(stationary.clamp(0.0, p.u_max))
}

/// Bisection on the derivative `K·c'(u) − G·ε·u^(ε−1)` for any increasing
/// convex differentiable cost.
///
/// The power term's derivative diverges to `−∞` at zero, so for `G > 0` the
/// minimizer is either interior or `u_max`. The bracket starts at
/// `min(1e-9, u_max/2)`.
pub fn solve_miner_bisection<C: ScalarCost>(p: &SlotProblem<C>, tol: f64) -> Result<f64> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    if p.u_max == 0.0 {
        return Ok(0.0);
    }
    if p.gain == 0.0 {
        // K·c(u) is nondecreasing
        return Ok(0.0);
    }

    let mut lo = f64::min(1e-9, p.u_max / 2.0);
    let mut hi = p.u_max;
    let mut c_lo = p.cost.derivative(lo);
    let mut c_hi = p.cost.derivative(hi);
    if c_lo > c_hi {
        return Err(Error::NonConvexCost { at: hi });
    }
    if p.objective_derivative(hi) <= 0.0 {
        return Ok(hi);
    }
    if p.objective_derivative(lo) >= 0.0 {
        return Ok(lo);
    }

    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let c_mid = p.cost.derivative(mid);
        let slack = 1e-12 * (1.0 + c_lo.abs().max(c_hi.abs()));
        if c_mid < c_lo - slack || c_mid > c_hi + slack {
            return Err(Error::NonConvexCost { at: mid });
        }
        if p.objective_derivative(mid) < 0.0 {
            lo = mid;
            c_lo = c_mid;
        } else {
            hi = mid;
            c_hi = c_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Splits a scalar investment across resources by scaling `θ_max`, so that
/// `wᵀθ = u` and the box holds.
pub fn expand_scalar(u: f64, params: &SystemParams) -> Result<ResourceVector> {
    let u_max = params.u_max();
    if !(u >= 0.0 && u <= u_max) {
        return Err(Error::Contract(alloc::format!(
            "scalar investment {u} outside [0, {u_max}]"
        )));
    }
    if u_max == 0.0 {
        return Ok(ResourceVector::zeros(params.n_resources));
    }
    if u == u_max {
        return Ok(params.theta_max.clone());
    }
    let scale = u / u_max;
    Ok(ResourceVector::new(
        params
            .theta_max
            .as_slice()
            .iter()
            .map(|t| t * scale)
            .collect(),
    ))
}

/// Minimizer of one miner's subproblem: closed form when the cost is linear,
/// bisection otherwise.
pub fn solve_miner<C: ScalarCost>(p: &SlotProblem<C>) -> Result<f64> {
    if p.cost.linear_slope().is_some() {
        solve_miner_closed_form(p)
    } else {
        solve_miner_bisection(p, BISECTION_TOL)
    }
}

/// Full-slot allocation under the parameters' linear cost.
///
/// The problem is separable and every miner shares the same cost, so one
/// scalar solve is replicated across the `N` miners.
pub fn solve_slot(k: f64, backlog: u64, params: &SystemParams) -> Result<SlotSolution> {
    solve_slot_with(k, backlog, params, params.cost_model())
}

/// [`solve_slot`] with an arbitrary scalar cost.
pub fn solve_slot_with<C: ScalarCost>(
    k: f64,
    backlog: u64,
    params: &SystemParams,
    cost: C,
) -> Result<SlotSolution> {
    let problem = SlotProblem {
        gain: slot_gain(k, params.reward_total(), backlog, params.block_size),
        k,
        u_max: params.u_max(),
        cost,
        epsilon: params.epsilon,
    };
    let u = solve_miner(&problem)?;
    let theta = expand_scalar(u, params)?;
    let n = params.n_miners;
    Ok(SlotSolution {
        u_star: vec![u; n],
        theta_star: vec![theta; n],
        objective: n as f64 * problem.objective(u),
    })
}

/// Exhaustive grid search over `{0, step, 2·step, …, u_max}` (with `u_max`
/// itself always evaluated). A test oracle, independent of the closed form and
/// bisection paths.
pub fn oracle_grid_search<C: ScalarCost>(p: &SlotProblem<C>, step: f64) -> f64 {
    assert!(step > 0.0, "grid step must be positive");
    let mut best_u = 0.0;
    let mut best = p.objective(0.0);
    let n = math::floor(p.u_max / step) as u64;
    for i in 1..=n {
        let u = i as f64 * step;
        let value = p.objective(u);
        if value < best {
            best = value;
            best_u = u;
        }
    }
    if p.objective(p.u_max) < best {
        best_u = p.u_max;
    }
    best_u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mining_rate, LinearCost, QuadraticCost};

    fn linear(gain: f64, u_max: f64) -> SlotProblem<LinearCost> {
        SlotProblem {
            gain,
            k: 20.0,
            u_max,
            cost: LinearCost {
                slope: 0.45,
                intercept: 0.0,
            },
            epsilon: 0.5,
        }
    }

    #[test]
    fn gain_examples() {
        assert_eq!(slot_gain(20.0, 3.0, 0, 3), 60.0);
        assert_eq!(slot_gain(20.0, 3.0, 100, 3), 360.0);
        assert_eq!(slot_gain(20.0, 3.0, 1000, 3), 3060.0);
    }

    #[test]
    fn closed_form_examples() {
        let interior = solve_miner_closed_form(&linear(60.0, 200.0)).unwrap();
        assert!((interior - 100.0 / 9.0).abs() < 1e-12);
        let oracle = oracle_grid_search(&linear(60.0, 200.0), 1e-4);
        assert!((interior - oracle).abs() <= 1e-4);

        let boundary = solve_miner_closed_form(&linear(360.0, 200.0)).unwrap();
        assert_eq!(boundary, 200.0);
        assert_eq!(oracle_grid_search(&linear(360.0, 200.0), 1e-3), 200.0);

        assert_eq!(solve_miner_closed_form(&linear(360.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_zero_slope_saturates() {
        let mut p = linear(60.0, 183.0);
        p.cost.slope = 0.0;
        assert_eq!(solve_miner_closed_form(&p).unwrap(), 183.0);
        assert_eq!(solve_miner_bisection(&p, 1e-9).unwrap(), 183.0);
    }

    #[test]
    fn closed_form_rejects_nonlinear() {
        let p = SlotProblem {
            gain: 60.0,
            k: 20.0,
            u_max: 183.0,
            cost: QuadraticCost {
                quadratic: 0.01,
                slope: 0.0,
                intercept: 0.0,
            },
            epsilon: 0.5,
        };
        assert!(solve_miner_closed_form(&p).is_err());
    }

    #[test]
    fn bisection_examples() {
        let lin = solve_miner_bisection(&linear(60.0, 200.0), 1e-9).unwrap();
        assert!((lin - 100.0 / 9.0).abs() < 1e-8);

        let quad = SlotProblem {
            gain: 60.0,
            k: 20.0,
            u_max: 183.0,
            cost: QuadraticCost {
                quadratic: 0.01,
                slope: 0.0,
                intercept: 0.0,
            },
            epsilon: 0.5,
        };
        // root of 0.4u − 30u^(−1/2), i.e. 75^(2/3); mpmath findroot
        let expected = 17.784_466_522_450_314;
        assert!((solve_miner_bisection(&quad, 1e-9).unwrap() - expected).abs() < 1e-8);

        assert_eq!(
            solve_miner_bisection(&linear(0.0, 200.0), 1e-9).unwrap(),
            0.0
        );
    }

    struct Concave;

    impl ScalarCost for Concave {
        fn value(&self, u: f64) -> f64 {
            libm::sqrt(u)
        }
        fn derivative(&self, u: f64) -> f64 {
            0.5 / libm::sqrt(u)
        }
    }

    #[test]
    fn bisection_detects_nonconvex_cost() {
        let p = SlotProblem {
            gain: 60.0,
            k: 1.0,
            u_max: 183.0,
            cost: Concave,
            epsilon: 0.5,
        };
        assert!(matches!(
            solve_miner_bisection(&p, 1e-9),
            Err(Error::NonConvexCost { .. })
        ));
    }

    #[test]
    fn expand_scalar_examples() {
        let p = SystemParams::default();
        assert_eq!(expand_scalar(183.0, &p).unwrap(), p.theta_max);
        assert_eq!(expand_scalar(0.0, &p).unwrap(), ResourceVector::zeros(2));
        let half = expand_scalar(91.5, &p).unwrap();
        assert_eq!(half.as_slice(), &[30.0, 1.5]);
        assert_eq!(half.weighted(&p.weights).unwrap(), 91.5);
        assert!(matches!(expand_scalar(183.5, &p), Err(Error::Contract(_))));
        assert!(expand_scalar(-1.0, &p).is_err());
    }

    #[test]
    fn solve_slot_defaults() {
        let p = SystemParams::default();
        let sol = solve_slot(20.0, 0, &p).unwrap();
        for u in &sol.u_star {
            assert!((u - 100.0 / 9.0).abs() < 1e-12);
        }
        assert!((sol.objective + 400.0).abs() < 1e-9);
        for theta in &sol.theta_star {
            theta.check_box(&p.theta_max).unwrap();
            let rel = (theta.weighted(&p.weights).unwrap() - 100.0 / 9.0).abs() / (100.0 / 9.0);
            assert!(rel < 1e-9);
        }
    }

    #[test]
    fn solve_slot_saturates_at_large_backlog() {
        let p = SystemParams::default();
        let sol = solve_slot(20.0, 100_000, &p).unwrap();
        assert!(sol.theta_star.iter().all(|t| *t == p.theta_max));
    }

    #[test]
    fn solve_slot_large_k_limit() {
        let p = SystemParams::default();
        let sol = solve_slot(1e6, 0, &p).unwrap();
        let limit = libm::pow(3.0 * 0.5 / 0.45, 2.0);
        assert!((sol.u_star[0] - limit).abs() < 1e-9 * limit);
    }

    #[test]
    fn expand_round_trip_rate() {
        let p = SystemParams::default();
        for i in 0..=183 {
            let u = i as f64;
            let theta = expand_scalar(u, &p).unwrap();
            let rate = mining_rate(&theta, &p).unwrap();
            let want = rate_of_scalar(u, p.epsilon);
            assert!((rate - want).abs() <= 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(oracle_grid_search(&linear(0.0, 200.0), 1e-3), 0.0);
    }
}
