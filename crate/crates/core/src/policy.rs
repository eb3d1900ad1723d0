//! Allocation policies: drift-plus-penalty control (fixed and growing `K`)
//! plus the full-power, random and static baselines.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::model::{ResourceVector, SystemParams};
use crate::solver::solve_slot;

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// Drift-plus-penalty with fixed tradeoff `k`.
    Dmra { k: f64 },
    /// Drift-plus-penalty with `K[t] = k0·(t+1)`.
    DmraVaryingK { k0: f64 },
    /// Every miner at `θ_max` every slot.
    MaxMining,
    /// Each component uniform on `[0, θ_max[k]]`, independently per miner and
    /// per slot.
    RandMining,
    /// The same fixed vector for every miner.
    Static { theta: ResourceVector },
}

impl PolicySpec {
    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        match self {
            PolicySpec::Dmra { k } if !(*k > 0.0 && k.is_finite()) => {
                Err(invalid("k", "must be positive"))
            }
            PolicySpec::DmraVaryingK { k0 } if !(*k0 > 0.0 && k0.is_finite()) => {
                Err(invalid("k0", "must be positive"))
            }
            PolicySpec::Static { theta } => theta.check_box(&params.theta_max),
            _ => Ok(()),
        }
    }

    /// Short label used in file names and summary rows.
    pub fn label(&self) -> &'static str {
        match self {
            PolicySpec::Dmra { .. } => "dmra",
            PolicySpec::DmraVaryingK { .. } => "dmra_varying",
            PolicySpec::MaxMining => "maxmining",
            PolicySpec::RandMining => "randmining",
            PolicySpec::Static { .. } => "static",
        }
    }

    /// The tradeoff parameter (`k` or `k0`) for the drift-plus-penalty kinds.
    pub fn tradeoff(&self) -> Option<f64> {
        match self {
            PolicySpec::Dmra { k } => Some(*k),
            PolicySpec::DmraVaryingK { k0 } => Some(*k0),
            _ => None,
        }
    }

    /// Effective `K` at `slot`, if the policy has one.
    pub fn effective_k(&self, slot: u64) -> Option<f64> {
        match self {
            PolicySpec::Dmra { k } => Some(*k),
            PolicySpec::DmraVaryingK { k0 } => Some(k0 * (slot as f64 + 1.0)),
            _ => None,
        }
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self, PolicySpec::RandMining)
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Dmra { k } => write!(f, "dmra({k})"),
            PolicySpec::DmraVaryingK { k0 } => write!(f, "dmra_varying({k0})"),
            PolicySpec::MaxMining => f.write_str("maxmining"),
            PolicySpec::RandMining => f.write_str("randmining"),
            PolicySpec::Static { theta } => {
                f.write_str("static(")?;
                for (i, x) in theta.as_slice().iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Allocations for all miners in one slot, given the observed backlog.
///
/// Only `RandMining` draws from `rng`.
pub fn decide<R: Rng + ?Sized>(
    policy: &PolicySpec,
    backlog: u64,
    slot: u64,
    params: &SystemParams,
    rng: &mut R,
) -> Result<Vec<ResourceVector>> {
    let n = params.n_miners;
    match policy {
        PolicySpec::Dmra { .. } | PolicySpec::DmraVaryingK { .. } => {
            let k = policy
                .effective_k(slot)
                .expect("drift-plus-penalty policy has K");
            Ok(solve_slot(k, backlog, params)?.theta_star)
        }
        PolicySpec::MaxMining => Ok(vec![params.theta_max.clone(); n]),
        PolicySpec::RandMining => Ok((0..n)
            .map(|_| {
                ResourceVector::new(
                    params
                        .theta_max
                        .as_slice()
                        .iter()
                        .map(|&hi| {
                            if hi > 0.0 {
                                rng.random_range(0.0..=hi)
                            } else {
                                0.0
                            }
                        })
                        .collect(),
                )
            })
            .collect()),
        PolicySpec::Static { theta } => Ok(vec![theta.clone(); n]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn maxmining_uses_full_box() {
        let p = SystemParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for q in [0, 10, 10_000] {
            let alloc = decide(&PolicySpec::MaxMining, q, 3, &p, &mut rng).unwrap();
            assert_eq!(alloc, vec![p.theta_max.clone(); 4]);
        }
    }

    #[test]
    fn dmra_at_empty_queue() {
        let p = SystemParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let alloc = decide(&PolicySpec::Dmra { k: 20.0 }, 0, 0, &p, &mut rng).unwrap();
        for theta in &alloc {
            let u = theta.weighted(&p.weights).unwrap();
            assert!((u - 100.0 / 9.0).abs() < 1e-9);
        }
    }

    #[test]
    fn varying_k_matches_fixed_at_slot_zero() {
        let p = SystemParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fixed = decide(&PolicySpec::Dmra { k: 20.0 }, 0, 0, &p, &mut rng).unwrap();
        let varying = decide(&PolicySpec::DmraVaryingK { k0: 20.0 }, 0, 0, &p, &mut rng).unwrap();
        assert_eq!(fixed, varying);
        assert_eq!(
            PolicySpec::DmraVaryingK { k0: 20.0 }.effective_k(9),
            Some(200.0)
        );
    }

    #[test]
    fn randmining_stays_in_box_and_is_seeded() {
        let p = SystemParams::default();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200)
                .map(|t| decide(&PolicySpec::RandMining, 0, t, &p, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        let a = run(5);
        for slot in &a {
            for theta in slot {
                theta.check_box(&p.theta_max).unwrap();
            }
        }
        assert_eq!(a, run(5));
        assert_ne!(a, run(6));
    }

    #[test]
    fn static_validation() {
        let p = SystemParams::default();
        let ok = PolicySpec::Static {
            theta: ResourceVector::new(vec![10.0, 1.0]),
        };
        assert!(ok.validate(&p).is_ok());
        let bad = PolicySpec::Static {
            theta: ResourceVector::new(vec![70.0, 1.0]),
        };
        assert!(bad.validate(&p).is_err());
        assert!(PolicySpec::Dmra { k: 0.0 }.validate(&p).is_err());
        assert!(PolicySpec::DmraVaryingK { k0: -1.0 }.validate(&p).is_err());
    }
}
