//! Closed forms for two firms without exogenous carbon.
//!
//! Regimes are named by the colors of firm 1 and firm 2 in that order. The
//! inequality systems are written for `a₁ ≤ a₂`; the other half of the
//! quadrant is obtained by swapping the firms.

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{assemble_profile, Equilibrium};
use crate::error::{CoreError, Result};
use crate::model::{Color, EconomyParams, FirmCoeffs, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TwoFirmRegime {
    OrangeOrange,
    GreenOrange,
    OrangeGreen,
    GreenGreen,
    OrangeRed,
    RedOrange,
    GreenRed,
    RedGreen,
    RedRed,
    WhiteRed,
    RedWhite,
    AllWhite,
}

impl TwoFirmRegime {
    pub const ALL: [TwoFirmRegime; 12] = [
        TwoFirmRegime::OrangeOrange,
        TwoFirmRegime::GreenOrange,
        TwoFirmRegime::OrangeGreen,
        TwoFirmRegime::GreenGreen,
        TwoFirmRegime::OrangeRed,
        TwoFirmRegime::RedOrange,
        TwoFirmRegime::GreenRed,
        TwoFirmRegime::RedGreen,
        TwoFirmRegime::RedRed,
        TwoFirmRegime::WhiteRed,
        TwoFirmRegime::RedWhite,
        TwoFirmRegime::AllWhite,
    ];

    pub fn colors(&self) -> [Color; 2] {
        use Color::*;
        match self {
            TwoFirmRegime::OrangeOrange => [Orange, Orange],
            TwoFirmRegime::GreenOrange => [Green, Orange],
            TwoFirmRegime::OrangeGreen => [Orange, Green],
            TwoFirmRegime::GreenGreen => [Green, Green],
            TwoFirmRegime::OrangeRed => [Orange, Red],
            TwoFirmRegime::RedOrange => [Red, Orange],
            TwoFirmRegime::GreenRed => [Green, Red],
            TwoFirmRegime::RedGreen => [Red, Green],
            TwoFirmRegime::RedRed => [Red, Red],
            TwoFirmRegime::WhiteRed => [White, Red],
            TwoFirmRegime::RedWhite => [Red, White],
            TwoFirmRegime::AllWhite => [White, White],
        }
    }

    /// The same regime with the firms swapped.
    pub fn mirror(&self) -> Self {
        match self {
            TwoFirmRegime::GreenOrange => TwoFirmRegime::OrangeGreen,
            TwoFirmRegime::OrangeGreen => TwoFirmRegime::GreenOrange,
            TwoFirmRegime::OrangeRed => TwoFirmRegime::RedOrange,
            TwoFirmRegime::RedOrange => TwoFirmRegime::OrangeRed,
            TwoFirmRegime::GreenRed => TwoFirmRegime::RedGreen,
            TwoFirmRegime::RedGreen => TwoFirmRegime::GreenRed,
            TwoFirmRegime::WhiteRed => TwoFirmRegime::RedWhite,
            TwoFirmRegime::RedWhite => TwoFirmRegime::WhiteRed,
            symmetric => *symmetric,
        }
    }

    /// Whether the regime lives on the `a₁ ≤ a₂` side of the quadrant.
    pub fn is_sorted(&self) -> bool {
        !matches!(
            self,
            TwoFirmRegime::OrangeGreen
                | TwoFirmRegime::RedOrange
                | TwoFirmRegime::RedGreen
                | TwoFirmRegime::RedWhite
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            TwoFirmRegime::OrangeOrange => "orange-orange",
            TwoFirmRegime::GreenOrange => "green-orange",
            TwoFirmRegime::OrangeGreen => "orange-green",
            TwoFirmRegime::GreenGreen => "green-green",
            TwoFirmRegime::OrangeRed => "orange-red",
            TwoFirmRegime::RedOrange => "red-orange",
            TwoFirmRegime::GreenRed => "green-red",
            TwoFirmRegime::RedGreen => "red-green",
            TwoFirmRegime::RedRed => "red-red",
            TwoFirmRegime::WhiteRed => "white-red",
            TwoFirmRegime::RedWhite => "red-white",
            TwoFirmRegime::AllWhite => "white-white",
        }
    }
}

impl std::fmt::Display for TwoFirmRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn check_two_firm_params(params: &EconomyParams) -> Result<()> {
    params.validate()?;
    if params.exogenous_carbon != 0.0 {
        return Err(CoreError::Precondition(format!(
            "two-firm closed forms assume K_ex = 0, got {}",
            params.exogenous_carbon
        )));
    }
    Ok(())
}

/// `d a₂ / (a₂ + 2d)`: firm 1 stays out iff `a₁` is at most this.
fn white_red_cut(d: f64, a2: f64) -> f64 {
    if a2.is_infinite() {
        d
    } else {
        d * a2 / (a2 + 2.0 * d)
    }
}

/// `(z + 2d) a₂ / (3a₂ + 4d)`, the green-red / orange-red boundary.
fn green_red_cut(z: f64, d: f64, a2: f64) -> f64 {
    if a2.is_infinite() {
        (z + 2.0 * d) / 3.0
    } else {
        (z + 2.0 * d) * a2 / (3.0 * a2 + 4.0 * d)
    }
}

/// `(d − z) a₂ < 2zd`, which keeps firm 1 in the market.
fn green_red_admissible(z: f64, d: f64, a2: f64) -> bool {
    if d <= z {
        true
    } else {
        a2 < 2.0 * z * d / (d - z)
    }
}

fn classify_sorted(params: &EconomyParams, a1: f64, a2: f64) -> Option<TwoFirmRegime> {
    use TwoFirmRegime::*;
    let z = params.z();
    let d = params.green_premium;
    if params.margin() <= 0.0 {
        return Some(AllWhite);
    }
    let wr = white_red_cut(d, a2);
    if z <= 0.0 {
        // Nobody mitigates; the lone-firm response to Q = 0 is positive, so
        // the only alternatives are white-red and red-red.
        return Some(if a1 <= wr { WhiteRed } else { RedRed });
    }
    if a1 == 0.0 && a2 == 0.0 {
        return Some(GreenGreen);
    }
    let gr = green_red_cut(z, d, a2);
    if a1 > a2 / 2.0 && a2 < (z + a1) / 2.0 {
        Some(OrangeOrange)
    } else if a1 <= a2 / 2.0 && a2 < 2.0 * z / 3.0 {
        Some(GreenOrange)
    } else if gr < a1 && a1 < z && a2 >= (z + a1) / 2.0 {
        Some(OrangeRed)
    } else if a1 <= gr && a2 >= 2.0 * z / 3.0 && green_red_admissible(z, d, a2) {
        Some(GreenRed)
    } else if a1 >= z && a1 > wr {
        Some(RedRed)
    } else if !green_red_admissible(z, d, a2) && a1 <= wr {
        Some(WhiteRed)
    } else {
        None
    }
}

/// Regime of the two-firm equilibrium from the closed-form inequality systems.
pub fn classify_two_firm(params: &EconomyParams, coeffs: [FirmCoeffs; 2]) -> Result<TwoFirmRegime> {
    check_two_firm_params(params)?;
    let [c1, c2] = coeffs;
    let (regime, swapped) = if c1.a <= c2.a {
        (classify_sorted(params, c1.a, c2.a), false)
    } else {
        (classify_sorted(params, c2.a, c1.a), true)
    };
    let regime = regime.ok_or_else(|| {
        CoreError::Domain(format!("no two-firm regime matches a = ({}, {})", c1.a, c2.a))
    })?;
    Ok(if swapped { regime.mirror() } else { regime })
}

/// Raw `(q, k)` pairs of a sorted regime's formulas, evaluated regardless of
/// whether its conditions hold.
fn sorted_formula(
    params: &EconomyParams,
    c1: FirmCoeffs,
    c2: FirmCoeffs,
    regime: TwoFirmRegime,
) -> [(f64, f64); 2] {
    use TwoFirmRegime::*;
    let z = params.z();
    let d = params.green_premium;
    let margin = params.margin();
    let (a1, a2) = (c1.a, c2.a);
    match regime {
        OrangeOrange => [
            (z / 3.0, (2.0 * a1 - a2) / 3.0),
            (z / 3.0, (2.0 * a2 - a1) / 3.0),
        ],
        GreenOrange => [(z / 3.0, 0.0), (z / 3.0, a2 / 2.0)],
        GreenGreen => [(z / 3.0, 0.0), (z / 3.0, 0.0)],
        RedRed => {
            let third = margin / 3.0;
            let (b1, b2) = (c1.red_weight(), c2.red_weight());
            let q1 = third * (2.0 * b1 - b2);
            let q2 = third * (2.0 * b2 - b1);
            [(q1, q1), (q2, q2)]
        }
        GreenRed => {
            let beta2 = c2.beta;
            let den = 3.0 + 4.0 * beta2;
            let q2 = (z + 2.0 * d) / den;
            let q1 = ((1.0 + 2.0 * beta2) * z - d) / den;
            [(q1, 0.0), (q2, q2)]
        }
        OrangeRed => {
            let beta2 = c2.beta;
            // d a₁ / (2 a₂) written as β₂ a₁ / 2 so that a₂ = ∞ is harmless.
            let total = (margin - beta2 * a1 / 2.0 - z / 2.0) / (3.0 * (1.0 + beta2)) + z / 2.0;
            let q2 = 2.0 * total - z;
            [(z - total, (a1 + z) / 2.0 - total), (q2, q2)]
        }
        WhiteRed => {
            let q2 = margin / (2.0 * (1.0 + c2.beta));
            [(0.0, 0.0), (q2, q2)]
        }
        AllWhite => [(0.0, 0.0), (0.0, 0.0)],
        OrangeGreen | RedOrange | RedGreen | RedWhite => {
            unreachable!("mirrored regimes are evaluated by swapping the firms")
        }
    }
}

/// `(q, k)` of both firms from the closed form of `regime`, whether or not
/// the regime's conditions hold at these coefficients.
pub fn regime_formula(
    params: &EconomyParams,
    coeffs: [FirmCoeffs; 2],
    regime: TwoFirmRegime,
) -> [(f64, f64); 2] {
    let [c1, c2] = coeffs;
    if regime.is_sorted() {
        sorted_formula(params, c1, c2, regime)
    } else {
        let [second, first] = sorted_formula(params, c2, c1, regime.mirror());
        [first, second]
    }
}

/// Two-firm equilibrium from the closed form of the classified regime.
pub fn two_firm_equilibrium(params: &EconomyParams, coeffs: [FirmCoeffs; 2]) -> Result<Equilibrium> {
    let regime = classify_two_firm(params, coeffs)?;
    let strategies: Vec<Strategy> = regime_formula(params, coeffs, regime)
        .iter()
        .map(|&(q, k)| Strategy::from_qk(q, k))
        .collect();
    Ok(assemble_profile(params, &coeffs, strategies, regime.colors().to_vec()))
}

/// A rectangular grid over `(a₁, a₂)`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub a1_min: f64,
    pub a1_max: f64,
    pub a2_min: f64,
    pub a2_max: f64,
    pub a1_points: usize,
    pub a2_points: usize,
}

impl GridSpec {
    pub fn square(lo: f64, hi: f64, points: usize) -> Self {
        Self {
            a1_min: lo,
            a1_max: hi,
            a2_min: lo,
            a2_max: hi,
            a1_points: points,
            a2_points: points,
        }
    }

    fn axis(lo: f64, hi: f64, points: usize, i: usize) -> f64 {
        lo + (hi - lo) * i as f64 / (points - 1) as f64
    }

    pub fn a1(&self, i: usize) -> f64 {
        Self::axis(self.a1_min, self.a1_max, self.a1_points, i)
    }

    pub fn a2(&self, j: usize) -> f64 {
        Self::axis(self.a2_min, self.a2_max, self.a2_points, j)
    }
}

/// One grid point of a regime map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeCell {
    pub a1: f64,
    pub a2: f64,
    pub regime: TwoFirmRegime,
    pub quantity: f64,
    pub carbon: f64,
    pub q1: f64,
    pub q2: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Classifies every grid point, row-major in `a₁` then `a₂`.
pub fn regime_map(params: &EconomyParams, grid: &GridSpec) -> Result<Vec<RegimeCell>> {
    check_two_firm_params(params)?;
    if grid.a1_points < 2 || grid.a2_points < 2 {
        return Err(CoreError::Precondition(
            "regime map needs at least two points per axis".into(),
        ));
    }
    let valid_axis = |lo: f64, hi: f64| lo >= 0.0 && hi >= lo && hi.is_finite();
    if !valid_axis(grid.a1_min, grid.a1_max) || !valid_axis(grid.a2_min, grid.a2_max) {
        return Err(CoreError::Precondition(
            "grid ranges must satisfy 0 <= min <= max < inf".into(),
        ));
    }
    let d = params.green_premium;
    (0..grid.a1_points * grid.a2_points)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / grid.a2_points, idx % grid.a2_points);
            let (a1, a2) = (grid.a1(i), grid.a2(j));
            let coeffs = [FirmCoeffs::from_a(a1, d), FirmCoeffs::from_a(a2, d)];
            let regime = classify_two_firm(params, coeffs)?;
            let eq = two_firm_equilibrium(params, coeffs)?;
            Ok(RegimeCell {
                a1,
                a2,
                regime,
                quantity: eq.quantity,
                carbon: eq.carbon,
                q1: eq.strategies[0].q,
                q2: eq.strategies[1].q,
                k1: eq.strategies[0].k,
                k2: eq.strategies[1].k,
            })
        })
        .collect()
}
