//! Seeded random instances for sweeps and property checks.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{EconomyParams, FirmBelief, Strategy};

pub type InstanceRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Economy constants drawn log-uniformly; about half the draws carry
/// exogenous carbon.
pub fn random_params<R: Rng>(rng: &mut R) -> EconomyParams {
    let demand_intercept = log_uniform(rng, 2.0, 20.0);
    let unit_cost = demand_intercept * rng.gen_range(0.02..0.6);
    let green_premium = log_uniform(rng, 0.05, 0.8 * demand_intercept);
    let tax_slope = log_uniform(rng, 0.1, 10.0);
    let exogenous_carbon = if rng.gen_bool(0.5) {
        0.0
    } else {
        log_uniform(rng, 0.01, 5.0)
    };
    EconomyParams {
        demand_intercept,
        tax_slope,
        unit_cost,
        green_premium,
        exogenous_carbon,
    }
}

/// Beliefs spread over five decades, with an occasional complete skeptic
/// when `allow_skeptics` is set.
pub fn random_beliefs<R: Rng>(rng: &mut R, n: usize, allow_skeptics: bool) -> Vec<FirmBelief> {
    (0..n)
        .map(|_| {
            if allow_skeptics && rng.gen_bool(0.05) {
                FirmBelief::new(0.0)
            } else {
                FirmBelief::new(log_uniform(rng, 1e-3, 1e2))
            }
        })
        .collect()
}

/// A feasible starting profile with `q ≤ (A − c)/2`.
pub fn random_start<R: Rng>(rng: &mut R, params: &EconomyParams, n: usize) -> Vec<Strategy> {
    let bound = params.margin().max(0.0) / 2.0;
    (0..n)
        .map(|_| {
            let q = rng.gen_range(0.0..=1.0) * bound;
            Strategy::from_qr(q, rng.gen_range(0.0..=1.0))
        })
        .collect()
}
