//! Domain types, the subjective expected profit and the exact single-firm
//! best response.
//!
//! Every firm chooses a quantity `q` and a technology intensity `r ∈ [0, 1]`,
//! emitting `k = r q` units of carbon. Given the aggregate quantity `Q₋ᵢ` and
//! carbon `K₋ᵢ` supplied by everybody else, firm `i` maximises
//!
//! ```text
//! (A − q − Q₋ᵢ) q − βᵢ (k + K₋ᵢ) k − (c + d − d r) q
//! ```
//!
//! where `βᵢ = bᵢ αᵢ²` collects the firm's belief. The maximiser is unique and
//! falls into one of four regimes, tracked by [`Color`].

use serde::Serialize;

use crate::error::{invalid, CoreError, Result};

/// Market and tax constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EconomyParams {
    /// Maximal inverse demand `A`.
    pub demand_intercept: f64,
    /// Tax per unit of carbon and per unit of temperature, `b`.
    pub tax_slope: f64,
    /// Unit cost of the business-as-usual technology, `c`.
    pub unit_cost: f64,
    /// Unit cost premium of the zero-emission technology, `d`.
    pub green_premium: f64,
    /// Carbon emitted by sources outside the economy, `K_ex`.
    pub exogenous_carbon: f64,
}

impl EconomyParams {
    pub fn new(
        demand_intercept: f64,
        tax_slope: f64,
        unit_cost: f64,
        green_premium: f64,
        exogenous_carbon: f64,
    ) -> Result<Self> {
        let params = Self {
            demand_intercept,
            tax_slope,
            unit_cost,
            green_premium,
            exogenous_carbon,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("A", self.demand_intercept),
            ("c", self.unit_cost),
            ("d", self.green_premium),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        let nonnegative = [("b", self.tax_slope), ("K_ex", self.exogenous_carbon)];
        for (name, value) in nonnegative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(invalid(name, format!("must be finite and >= 0, got {value}")));
            }
        }
        Ok(())
    }

    /// `z = A − c − d`, demand net of the green unit cost.
    pub fn z(&self) -> f64 {
        self.demand_intercept - self.unit_cost - self.green_premium
    }

    /// `A − c`, demand net of the business-as-usual unit cost.
    pub fn margin(&self) -> f64 {
        self.demand_intercept - self.unit_cost
    }

    pub fn with_exogenous_carbon(mut self, carbon: f64) -> Self {
        self.exogenous_carbon = carbon;
        self
    }
}

/// A firm's climate belief: the second moment `E[α²]` of the carbon-climate
/// response under its subjective distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirmBelief {
    pub alpha_sq: f64,
    /// Firm-specific replacement for the economy's tax slope `b`.
    pub risk_weight: Option<f64>,
}

impl FirmBelief {
    pub fn new(alpha_sq: f64) -> Self {
        Self {
            alpha_sq,
            risk_weight: None,
        }
    }

    pub fn with_risk_weight(alpha_sq: f64, risk_weight: f64) -> Self {
        Self {
            alpha_sq,
            risk_weight: Some(risk_weight),
        }
    }

    /// `α² = +∞` is accepted and models a firm that fears unbounded impacts.
    pub fn validate(&self) -> Result<()> {
        if self.alpha_sq.is_nan() || self.alpha_sq < 0.0 {
            return Err(invalid("alpha_sq", format!("must be >= 0, got {}", self.alpha_sq)));
        }
        if let Some(w) = self.risk_weight {
            if !(w.is_finite() && w >= 0.0) {
                return Err(invalid("risk_weight", format!("must be finite and >= 0, got {w}")));
            }
        }
        Ok(())
    }

    pub fn weight(&self, params: &EconomyParams) -> f64 {
        self.risk_weight.unwrap_or(params.tax_slope)
    }

    /// `β = b α²`, with `0 · ∞` read as `0`.
    pub fn beta(&self, params: &EconomyParams) -> f64 {
        let w = self.weight(params);
        if w == 0.0 || self.alpha_sq == 0.0 {
            0.0
        } else {
            w * self.alpha_sq
        }
    }

    pub fn coeffs(&self, params: &EconomyParams) -> FirmCoeffs {
        FirmCoeffs::from_beta(self.beta(params), params.green_premium)
    }

    /// Inverse of [`FirmBelief::coeffs`]: the belief giving coefficient `a`.
    pub fn from_coefficient(a: f64, weight: f64, params: &EconomyParams) -> Self {
        let beta = FirmCoeffs::from_a(a, params.green_premium).beta;
        Self::new(beta / weight)
    }
}

/// The pair `(β, a)` through which a belief enters every optimality condition.
///
/// `a = d / β`, with `β = 0 ↔ a = ∞` and `β = ∞ ↔ a = 0`. In both limits the
/// product `β a` is read as `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirmCoeffs {
    pub beta: f64,
    pub a: f64,
}

impl FirmCoeffs {
    pub fn from_beta(beta: f64, green_premium: f64) -> Self {
        let a = if beta == 0.0 {
            f64::INFINITY
        } else if beta.is_infinite() {
            0.0
        } else {
            green_premium / beta
        };
        Self { beta, a }
    }

    pub fn from_a(a: f64, green_premium: f64) -> Self {
        let beta = if a.is_infinite() {
            0.0
        } else if a == 0.0 {
            f64::INFINITY
        } else {
            green_premium / a
        };
        Self { beta, a }
    }

    /// `(1 + β)⁻¹`, the weight of a red firm in the aggregate system.
    pub fn red_weight(&self) -> f64 {
        1.0 / (1.0 + self.beta)
    }

    /// `β · x` with `∞ · 0 = 0`.
    pub fn times_beta(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            self.beta * x
        }
    }

    pub fn infinitely_concerned(&self) -> bool {
        self.beta.is_infinite()
    }

    /// `A − c − Q − β K`, which equals `z − Q + β (a − K)` via `β a = d`.
    pub fn red_drive(&self, params: &EconomyParams, quantity: f64, carbon: f64) -> f64 {
        params.margin() - quantity - self.times_beta(carbon)
    }
}

/// A firm's choice. `k = r q` holds exactly, and `q = 0` forces `r = k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Strategy {
    pub q: f64,
    pub r: f64,
    pub k: f64,
}

impl Strategy {
    pub const ZERO: Strategy = Strategy {
        q: 0.0,
        r: 0.0,
        k: 0.0,
    };

    pub fn from_qr(q: f64, r: f64) -> Self {
        if q <= 0.0 {
            return Self::ZERO;
        }
        let r = r.clamp(0.0, 1.0);
        Self { q, r, k: r * q }
    }

    /// Builds a strategy from quantity and carbon; `k` is clamped to `[0, q]`.
    pub fn from_qk(q: f64, k: f64) -> Self {
        if q <= 0.0 {
            return Self::ZERO;
        }
        Self::from_qr(q, k / q)
    }

    pub fn is_valid(&self) -> bool {
        self.q >= 0.0 && (0.0..=1.0).contains(&self.r) && self.k == self.r * self.q
    }

    /// Sup-norm distance in `(q, k)` coordinates.
    pub fn distance(&self, other: &Strategy) -> f64 {
        (self.q - other.q).abs().max((self.k - other.k).abs())
    }
}

/// The regime of a firm's optimal choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Color {
    /// No production.
    White,
    /// Zero-emission technology only.
    Green,
    /// Mixed technology, `0 < r < 1`.
    Orange,
    /// Business-as-usual technology only.
    Red,
}

impl Color {
    pub const ALL: [Color; 4] = [Color::White, Color::Green, Color::Orange, Color::Red];

    pub fn name(&self) -> &'static str {
        match self {
            Color::White => "white",
            Color::Green => "green",
            Color::Orange => "orange",
            Color::Red => "red",
        }
    }
}

impl std::fmt::Display for Color {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Quantity and carbon supplied by all other sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Environment {
    pub q_minus: f64,
    pub k_minus: f64,
}

impl Environment {
    pub fn new(params: &EconomyParams, q_minus: f64, k_minus: f64) -> Result<Self> {
        if !(0.0..=params.demand_intercept).contains(&q_minus) {
            return Err(CoreError::Domain(format!(
                "Q_minus = {q_minus} outside [0, A = {}]",
                params.demand_intercept
            )));
        }
        if !(k_minus >= 0.0 && k_minus.is_finite()) {
            return Err(CoreError::Domain(format!("K_minus = {k_minus} must be >= 0")));
        }
        Ok(Self { q_minus, k_minus })
    }
}

/// Subjective expected profit of one firm. Rejects `q + Q₋ᵢ > A`, where the
/// affine inverse demand no longer applies.
pub fn expected_profit(
    params: &EconomyParams,
    coeffs: FirmCoeffs,
    env: Environment,
    s: Strategy,
) -> Result<f64> {
    if s.q + env.q_minus > params.demand_intercept {
        return Err(CoreError::Domain(format!(
            "q + Q_minus = {} exceeds A = {}",
            s.q + env.q_minus,
            params.demand_intercept
        )));
    }
    let k = s.r * s.q;
    let revenue = (params.demand_intercept - s.q - env.q_minus) * s.q;
    let tax = if k == 0.0 {
        0.0
    } else {
        coeffs.beta * (k + env.k_minus) * k
    };
    let cost = (params.unit_cost + params.green_premium - params.green_premium * s.r) * s.q;
    Ok(revenue - tax - cost)
}

/// Color of the firm's best response against `env`, using the exact
/// strict and non-strict inequalities of the optimality conditions.
pub fn classify_color(params: &EconomyParams, coeffs: FirmCoeffs, env: Environment) -> Color {
    let z = params.z();
    let (qm, km) = (env.q_minus, env.k_minus);
    if coeffs.infinitely_concerned() {
        return if qm < z { Color::Green } else { Color::White };
    }
    let a = coeffs.a;
    if coeffs.red_drive(params, qm, km) <= 0.0 && qm >= z {
        Color::White
    } else if km >= a && qm < z {
        Color::Green
    } else if km < a && qm - km < z - a {
        Color::Orange
    } else {
        Color::Red
    }
}

/// The unique profit-maximising response to `env`.
pub fn best_response(params: &EconomyParams, coeffs: FirmCoeffs, env: Environment) -> Strategy {
    let z = params.z();
    let (qm, km) = (env.q_minus, env.k_minus);
    match classify_color(params, coeffs, env) {
        Color::White => Strategy::ZERO,
        Color::Green => Strategy::from_qr(0.5 * (z - qm), 0.0),
        Color::Orange => {
            let q = 0.5 * (z - qm);
            Strategy::from_qr(q, (coeffs.a - km) / (z - qm))
        }
        Color::Red => {
            let q = 0.5 * coeffs.red_drive(params, qm, km) / (1.0 + coeffs.beta);
            Strategy::from_qr(q, 1.0)
        }
    }
}

/// Strategy of a firm of the given color, written as feedback on the totals
/// `Q = Q₋ᵢ + qᵢ` and `K = K₋ᵢ + kᵢ`.
pub fn feedback_strategy(
    params: &EconomyParams,
    coeffs: FirmCoeffs,
    color: Color,
    quantity: f64,
    carbon: f64,
) -> Strategy {
    let z = params.z();
    match color {
        Color::White => Strategy::ZERO,
        Color::Green => Strategy::from_qr(z - quantity, 0.0),
        Color::Orange => Strategy::from_qk(z - quantity, coeffs.a - carbon),
        Color::Red => {
            let q = coeffs.red_drive(params, quantity, carbon) / (1.0 + coeffs.beta);
            Strategy::from_qr(q, 1.0)
        }
    }
}

/// How far the totals `(Q, K)` are from satisfying the membership conditions
/// of `color`. Zero when satisfied; strict inequalities are read as non-strict.
pub fn membership_violation(
    params: &EconomyParams,
    coeffs: FirmCoeffs,
    color: Color,
    quantity: f64,
    carbon: f64,
) -> f64 {
    let z = params.z();
    let a = coeffs.a;
    let pos = |x: f64| if x > 0.0 { x } else { 0.0 };
    if coeffs.infinitely_concerned() {
        return match color {
            Color::White => pos(z - quantity),
            Color::Green => pos(quantity - z),
            Color::Orange | Color::Red => f64::INFINITY,
        };
    }
    match color {
        Color::White => pos(coeffs.red_drive(params, quantity, carbon)).max(pos(z - quantity)),
        Color::Green => pos(a - carbon).max(pos(quantity - z)),
        Color::Orange => pos(carbon - a).max(pos((quantity - carbon) - (z - a))),
        Color::Red => {
            pos(-coeffs.red_drive(params, quantity, carbon)).max(pos((z - a) - (quantity - carbon)))
        }
    }
}
