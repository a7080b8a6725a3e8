//! Symmetric interior equilibria when consumer utility is not quadratic.
//!
//! With inverse demand `u'(Q)` every interior solution has a common quantity
//! `q₀` solving `φ(q₀) = c + d` with `φ(x) = u''(nx) x + u'(nx)`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, CoreError, Result};
use crate::model::{EconomyParams, FirmBelief};

/// First three derivatives of a utility function on the positive reals.
pub trait MarginalUtility: Send + Sync {
    fn first(&self, x: f64) -> f64;
    fn second(&self, x: f64) -> f64;
    fn third(&self, x: f64) -> f64;

    /// Whether `u'(0⁺) = ∞` and `u'(∞) = 0`.
    fn inada(&self) -> bool {
        false
    }
}

#[derive(Clone)]
pub enum UtilitySpec {
    /// `u(x) = A x − x²/2`, the linear demand of the base model.
    Quadratic { intercept: f64 },
    /// `u'(x) = scale · x^(−γ)`.
    Crra { gamma: f64, scale: f64 },
    /// `u(x) = log x`.
    Log,
    Custom(Arc<dyn MarginalUtility>),
}

impl fmt::Debug for UtilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UtilitySpec::Quadratic { intercept } => {
                f.debug_struct("Quadratic").field("intercept", intercept).finish()
            }
            UtilitySpec::Crra { gamma, scale } => f
                .debug_struct("Crra")
                .field("gamma", gamma)
                .field("scale", scale)
                .finish(),
            UtilitySpec::Log => f.write_str("Log"),
            UtilitySpec::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl UtilitySpec {
    pub fn crra(gamma: f64) -> Self {
        UtilitySpec::Crra { gamma, scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            UtilitySpec::Quadratic { intercept } => {
                if !(intercept.is_finite() && intercept > 0.0) {
                    return Err(invalid("intercept", format!("must be finite and > 0, got {intercept}")));
                }
            }
            UtilitySpec::Crra { gamma, scale } => {
                if !(gamma.is_finite() && gamma > 0.0) {
                    return Err(invalid("gamma", format!("must be finite and > 0, got {gamma}")));
                }
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(invalid("scale", format!("must be finite and > 0, got {scale}")));
                }
            }
            UtilitySpec::Log | UtilitySpec::Custom(_) => {}
        }
        Ok(())
    }

    pub fn first(&self, x: f64) -> f64 {
        match self {
            UtilitySpec::Quadratic { intercept } => intercept - x,
            UtilitySpec::Crra { gamma, scale } => scale * x.powf(-gamma),
            UtilitySpec::Log => 1.0 / x,
            UtilitySpec::Custom(u) => u.first(x),
        }
    }

    pub fn second(&self, x: f64) -> f64 {
        match self {
            UtilitySpec::Quadratic { .. } => -1.0,
            UtilitySpec::Crra { gamma, scale } => -scale * gamma * x.powf(-gamma - 1.0),
            UtilitySpec::Log => -1.0 / (x * x),
            UtilitySpec::Custom(u) => u.second(x),
        }
    }

    pub fn third(&self, x: f64) -> f64 {
        match self {
            UtilitySpec::Quadratic { .. } => 0.0,
            UtilitySpec::Crra { gamma, scale } => {
                scale * gamma * (gamma + 1.0) * x.powf(-gamma - 2.0)
            }
            UtilitySpec::Log => 2.0 / (x * x * x),
            UtilitySpec::Custom(u) => u.third(x),
        }
    }

    /// Relative risk aversion `ρ(x) = −x u''(x) / u'(x)`.
    pub fn risk_aversion(&self, x: f64) -> f64 {
        -x * self.second(x) / self.first(x)
    }

    fn inada(&self) -> bool {
        match self {
            UtilitySpec::Quadratic { .. } => false,
            UtilitySpec::Crra { .. } | UtilitySpec::Log => true,
            UtilitySpec::Custom(u) => u.inada(),
        }
    }

    /// `q₀` in closed form where one is known: quadratic, log and CRRA.
    pub fn closed_form(&self, params: &EconomyParams, n: usize) -> Option<f64> {
        let n_f = n as f64;
        let cost = params.unit_cost + params.green_premium;
        match *self {
            UtilitySpec::Quadratic { intercept } => {
                let q = (intercept - cost) / (n_f + 1.0);
                (q > 0.0).then_some(q)
            }
            UtilitySpec::Crra { gamma, scale } => (gamma < n_f).then(|| {
                (scale * (n_f - gamma) / (cost * n_f.powf(gamma + 1.0))).powf(1.0 / gamma)
            }),
            UtilitySpec::Log => (n >= 2).then(|| (n_f - 1.0) / (cost * n_f * n_f)),
            UtilitySpec::Custom(_) => None,
        }
    }
}

fn check_symmetric_args(spec: &UtilitySpec, params: &EconomyParams, n: usize) -> Result<()> {
    spec.validate()?;
    params.validate()?;
    if n == 0 {
        return Err(CoreError::Precondition("the economy needs at least one firm".into()));
    }
    Ok(())
}

fn phi(spec: &UtilitySpec, n: f64, x: f64) -> f64 {
    spec.second(n * x) * x + spec.first(n * x)
}

/// `φ(q₀) − (c + d)`.
pub fn symmetric_foc_residual(spec: &UtilitySpec, params: &EconomyParams, n: usize, q0: f64) -> Result<f64> {
    check_symmetric_args(spec, params, n)?;
    if !(q0 > 0.0) {
        return Err(CoreError::Domain(format!("common quantity must be > 0, got {q0}")));
    }
    Ok(phi(spec, n as f64, q0) - (params.unit_cost + params.green_premium))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetricSolution {
    pub quantity: f64,
    pub residual: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    /// `φ' < 0` at every sampled point of the bracket.
    pub unique_verified: bool,
}

const DEFAULT_LOWER: f64 = 1e-12;
const UPPER_LIMIT: f64 = 1e300;
const UNIQUENESS_SAMPLES: usize = 256;

/// Root of a continuous `f` on `[lo, hi]` with `f(lo) > 0 > f(hi)`:
/// secant steps with a bisection fallback whenever the secant point leaves
/// the middle of the bracket. Runs until the bracket cannot shrink.
fn bracketed_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64, usize) {
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    let mut best = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    let mut iterations = 0;
    let mut bisect_next = false;
    while iterations < 2000 {
        iterations += 1;
        let width = hi - lo;
        let secant = lo + width * f_lo / (f_lo - f_hi);
        let x = if bisect_next
            || !secant.is_finite()
            || secant <= lo + 0.05 * width
            || secant >= hi - 0.05 * width
        {
            // Geometric midpoints when the bracket spans decades.
            if lo > 0.0 && hi / lo > 4.0 {
                (lo * hi).sqrt()
            } else {
                lo + 0.5 * width
            }
        } else {
            secant
        };
        if !(x > lo && x < hi) {
            break;
        }
        let fx = f(x);
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx == 0.0 {
            break;
        }
        let shrink_before = hi - lo;
        if fx > 0.0 {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }
        // Alternate with bisection when a secant step shrinks the bracket
        // too little.
        bisect_next = !bisect_next && (hi - lo) > 0.5 * shrink_before;
    }
    (best.0, best.1, iterations)
}

/// The common quantity of the symmetric interior equilibrium.
///
/// Returns `Ok(None)` when the residual does not change sign on the bracket
/// and the existence conditions (Inada, `ρ < n` near zero) do not promise a
/// root; a [`CoreError::Bracket`] when they do.
pub fn solve_symmetric(
    spec: &UtilitySpec,
    params: &EconomyParams,
    n: usize,
    bracket: Option<(f64, f64)>,
    tol: f64,
) -> Result<Option<SymmetricSolution>> {
    check_symmetric_args(spec, params, n)?;
    let n_f = n as f64;
    let cost = params.unit_cost + params.green_premium;
    let residual = |x: f64| phi(spec, n_f, x) - cost;

    let (lo, hi) = match bracket {
        Some((lo, hi)) => {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(CoreError::Bracket { lo, hi });
            }
            (lo, hi)
        }
        None => {
            let mut hi = 1.0;
            while residual(hi) >= 0.0 && hi < UPPER_LIMIT {
                hi *= 2.0;
            }
            (DEFAULT_LOWER, hi)
        }
    };
    let (r_lo, r_hi) = (residual(lo), residual(hi));
    if !(r_lo > 0.0 && r_hi < 0.0) {
        if r_lo == 0.0 || r_hi == 0.0 {
            let x = if r_lo == 0.0 { lo } else { hi };
            return Ok(Some(SymmetricSolution {
                quantity: x,
                residual: 0.0,
                bracket: (lo, hi),
                iterations: 0,
                unique_verified: uniqueness_holds(spec, n_f, lo, hi),
            }));
        }
        let near_zero = [1e-12, 1e-9, 1e-6].iter().all(|&x| spec.risk_aversion(n_f * x) < n_f);
        if spec.inada() && near_zero {
            return Err(CoreError::Bracket { lo, hi });
        }
        return Ok(None);
    }
    let (quantity, res, iterations) = bracketed_root(residual, lo, hi);
    if !(res.abs() < tol) {
        return Err(CoreError::NoConvergence {
            iterations,
            residual: res.abs(),
        });
    }
    Ok(Some(SymmetricSolution {
        quantity,
        residual: res,
        bracket: (lo, hi),
        iterations,
        unique_verified: uniqueness_holds(spec, n_f, lo, hi),
    }))
}

/// `n u'''(nx) x + (n + 1) u''(nx) < 0` on log-spaced samples of the bracket.
fn uniqueness_holds(spec: &UtilitySpec, n: f64, lo: f64, hi: f64) -> bool {
    let ratio = (hi / lo).ln();
    (0..=UNIQUENESS_SAMPLES).all(|i| {
        let x = lo * (ratio * i as f64 / UNIQUENESS_SAMPLES as f64).exp();
        n * spec.third(n * x) * x + (n + 1.0) * spec.second(n * x) < 0.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarbonProfile {
    /// Total carbon `K`, including the exogenous stock.
    pub carbon: f64,
    pub k: Vec<f64>,
    pub r: Vec<f64>,
}

/// Carbon choices `k_i = a_i − K` at common quantity `q₀`, with
/// `K = (Σ a_j + K_ex)/(n + 1)`. Fails with the offending firms when some
/// `k_i` falls outside `[0, q₀]`.
pub fn interior_carbon_profile(
    params: &EconomyParams,
    beliefs: &[FirmBelief],
    q0: f64,
) -> Result<CarbonProfile> {
    params.validate()?;
    if beliefs.is_empty() {
        return Err(CoreError::Precondition("the economy needs at least one firm".into()));
    }
    if !(q0 > 0.0 && q0.is_finite()) {
        return Err(CoreError::Domain(format!("common quantity must be > 0, got {q0}")));
    }
    let mut a = Vec::with_capacity(beliefs.len());
    for (i, b) in beliefs.iter().enumerate() {
        b.validate()?;
        let coeff = b.coeffs(params).a;
        if !coeff.is_finite() {
            return Err(CoreError::Precondition(format!(
                "firm {i} has an infinite coefficient (zero belief)"
            )));
        }
        a.push(coeff);
    }
    let carbon = (a.iter().sum::<f64>() + params.exogenous_carbon) / (a.len() as f64 + 1.0);
    let k: Vec<f64> = a.iter().map(|a| a - carbon).collect();
    let bad: Vec<usize> = k
        .iter()
        .enumerate()
        .filter(|(_, &k)| !(0.0..=q0).contains(&k))
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(CoreError::Infeasible { firms: bad });
    }
    let r = k.iter().map(|k| k / q0).collect();
    Ok(CarbonProfile { carbon, k, r })
}
