//! Comparative statics inside a fixed regime.
//!
//! Inside a regime the totals are rational in `A_int = Σ_orange a_j`,
//! `B₁ = Σ_red b_j` with `b_j = (1 + β_j)⁻¹`, and `K_ex`. Orange beliefs act
//! through `a_j`, red beliefs through `b_j`, and green beliefs not at all.
//! Every analytic partial can be paired with a central finite difference of
//! re-solved equilibria; the difference is only taken when the color
//! assignment is the same at both ends of the stencil.

use serde::Serialize;

use crate::equilibrium::{solve_coeffs, Equilibrium, PartitionStats};
use crate::error::{CoreError, Result};
use crate::model::{Color, EconomyParams, FirmBelief, FirmCoeffs};

/// A quantity whose response is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Quantity {
    TotalCarbon,
    TotalQuantity,
    /// `K − K_ex`, the carbon emitted by the firms.
    EmittedCarbon,
    Output(usize),
    Carbon(usize),
    Technology(usize),
}

impl Quantity {
    pub fn label(&self) -> String {
        match self {
            Quantity::TotalCarbon => "K".into(),
            Quantity::TotalQuantity => "Q".into(),
            Quantity::EmittedCarbon => "K-K_ex".into(),
            Quantity::Output(i) => format!("q[{i}]"),
            Quantity::Carbon(i) => format!("k[{i}]"),
            Quantity::Technology(i) => format!("r[{i}]"),
        }
    }

    fn of(&self, params: &EconomyParams, eq: &Equilibrium) -> f64 {
        match *self {
            Quantity::TotalCarbon => eq.carbon,
            Quantity::TotalQuantity => eq.quantity,
            Quantity::EmittedCarbon => eq.carbon - params.exogenous_carbon,
            Quantity::Output(i) => eq.strategies[i].q,
            Quantity::Carbon(i) => eq.strategies[i].k,
            Quantity::Technology(i) => eq.strategies[i].r,
        }
    }
}

/// The coordinate being perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    /// `a_j` of an orange firm.
    OrangeCoefficient(usize),
    /// `b_j = (1 + β_j)⁻¹` of a red firm.
    RedWeight(usize),
    ExogenousCarbon,
    /// `α_j²` of any firm.
    Belief(usize),
}

impl Direction {
    pub fn label(&self) -> String {
        match self {
            Direction::OrangeCoefficient(j) => format!("a[{j}]"),
            Direction::RedWeight(j) => format!("b[{j}]"),
            Direction::ExogenousCarbon => "K_ex".into(),
            Direction::Belief(j) => format!("alpha_sq[{j}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateDerivative {
    pub carbon: f64,
    pub quantity: f64,
}

/// Derivatives of `(K, Q)` with respect to the partition sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregatePartials {
    /// With respect to `B₁`; `None` without red firms.
    pub red_weight_sum: Option<AggregateDerivative>,
    /// With respect to `A_int`; `None` without orange firms.
    pub orange_sum: Option<AggregateDerivative>,
    pub exogenous: AggregateDerivative,
    /// `∂(K − K_ex)/∂K_ex = (m + 1 + B₁ − N)/N`.
    pub emitted_wrt_exogenous: f64,
}

impl AggregatePartials {
    pub fn wrt_red_weight_sum(&self) -> Result<AggregateDerivative> {
        self.red_weight_sum
            .ok_or_else(|| CoreError::UndefinedDirection("B_1 with no red firms".into()))
    }

    pub fn wrt_orange_sum(&self) -> Result<AggregateDerivative> {
        self.orange_sum
            .ok_or_else(|| CoreError::UndefinedDirection("A_int with no orange firms".into()))
    }
}

fn check_preconditions(params: &EconomyParams, coeffs: &[FirmCoeffs], eq: &Equilibrium) -> Result<()> {
    params.validate()?;
    if coeffs.len() != eq.len() {
        return Err(CoreError::Precondition(format!(
            "{} beliefs for {} firms",
            coeffs.len(),
            eq.len()
        )));
    }
    if eq.stats.n_white > 0 {
        return Err(CoreError::Precondition(
            "comparative statics assume every firm produces (no white firms)".into(),
        ));
    }
    if let Some(i) = eq.strategies.iter().position(|s| s.q <= 0.0) {
        return Err(CoreError::Precondition(format!("firm {i} produces nothing")));
    }
    Ok(())
}

fn resolve(params: &EconomyParams, beliefs: &[FirmBelief]) -> Result<Vec<FirmCoeffs>> {
    beliefs
        .iter()
        .map(|b| {
            b.validate()?;
            Ok(b.coeffs(params))
        })
        .collect()
}

fn aggregates_from_stats(params: &EconomyParams, stats: &PartitionStats) -> AggregatePartials {
    let n = stats.denominator;
    let m = stats.m as f64;
    let n0 = stats.n_green as f64;
    let n_int = stats.n_orange as f64;
    let n1 = stats.n_red as f64;
    let b1 = stats.b1;
    let z = params.z();
    let d = params.green_premium;
    let margin = params.margin();
    let s = stats.a_int + params.exogenous_carbon;
    let n_all = n0 + n_int + n1;

    let wrt_sum = AggregateDerivative {
        carbon: (m + 1.0 + b1) / n,
        quantity: (b1 - n1) / n,
    };
    let red_weight_sum = (stats.n_red > 0).then(|| {
        let carbon =
            (m + 1.0) * (s * (n_all + 1.0) + (n_int + n1 + 1.0) * (z + (m + 1.0) * d)) / (n * n);
        // Quotient rule on Q − z = P / N with ∂P/∂B₁ = A − c + n_int d + S
        // and ∂N/∂B₁ = −n₀.
        let p = b1 * (margin + n_int * d) - (n_int + n1 + 1.0) * z + (b1 - n1) * s;
        let quantity = ((margin + n_int * d + s) * n + n0 * p) / (n * n);
        AggregateDerivative { carbon, quantity }
    });
    AggregatePartials {
        red_weight_sum,
        orange_sum: (stats.n_orange > 0).then_some(wrt_sum),
        exogenous: wrt_sum,
        emitted_wrt_exogenous: (m + 1.0 + b1 - n) / n,
    }
}

/// Partials of `K` and `Q` with respect to `B₁`, `A_int` and `K_ex`.
pub fn aggregate_partials(
    params: &EconomyParams,
    beliefs: &[FirmBelief],
    eq: &Equilibrium,
) -> Result<AggregatePartials> {
    let coeffs = resolve(params, beliefs)?;
    check_preconditions(params, &coeffs, eq)?;
    Ok(aggregates_from_stats(params, &eq.stats))
}

/// One analytic partial derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialRow {
    pub quantity: Quantity,
    pub direction: Direction,
    pub value: f64,
}

struct Context<'a> {
    params: &'a EconomyParams,
    coeffs: &'a [FirmCoeffs],
    beliefs: Option<&'a [FirmBelief]>,
    eq: &'a Equilibrium,
    agg: AggregatePartials,
}

impl Context<'_> {
    /// `(∂K, ∂Q)` along a coordinate direction.
    fn aggregate_step(&self, dir: Direction) -> Result<(f64, f64)> {
        let d = match dir {
            Direction::OrangeCoefficient(j) => {
                self.expect_color(j, Color::Orange)?;
                self.agg.wrt_orange_sum()?
            }
            Direction::RedWeight(j) => {
                self.expect_color(j, Color::Red)?;
                self.agg.wrt_red_weight_sum()?
            }
            Direction::ExogenousCarbon => self.agg.exogenous,
            Direction::Belief(_) => unreachable!("belief directions are chained"),
        };
        Ok((d.carbon, d.quantity))
    }

    fn expect_color(&self, j: usize, color: Color) -> Result<()> {
        match self.eq.colors.get(j) {
            Some(&c) if c == color => Ok(()),
            Some(&c) => Err(CoreError::UndefinedDirection(format!(
                "firm {j} is {c}, not {color}"
            ))),
            None => Err(CoreError::UndefinedDirection(format!("no firm {j}"))),
        }
    }

    fn coordinate(&self, quantity: Quantity, dir: Direction) -> Result<f64> {
        let (dk_total, dq_total) = self.aggregate_step(dir)?;
        let firm = |i: usize| -> Result<(f64, f64, f64)> {
            let s = self.eq.strategies.get(i).ok_or_else(|| {
                CoreError::UndefinedDirection(format!("no firm {i}"))
            })?;
            Ok(match self.eq.colors[i] {
                Color::White => (0.0, 0.0, 0.0),
                Color::Green => (-dq_total, 0.0, 0.0),
                Color::Orange => {
                    let own = if dir == Direction::OrangeCoefficient(i) { 1.0 } else { 0.0 };
                    let dk = own - dk_total;
                    let dq = -dq_total;
                    (dq, dk, (dk - s.r * dq) / s.q)
                }
                Color::Red => {
                    let b = self.coeffs[i].red_weight();
                    let own = if dir == Direction::RedWeight(i) {
                        self.params.margin() - self.eq.quantity + self.eq.carbon
                    } else {
                        0.0
                    };
                    let dq = -b * dq_total - (1.0 - b) * dk_total + own;
                    (dq, dq, 0.0)
                }
            })
        };
        Ok(match quantity {
            Quantity::TotalCarbon => dk_total,
            Quantity::TotalQuantity => dq_total,
            Quantity::EmittedCarbon => {
                dk_total - if dir == Direction::ExogenousCarbon { 1.0 } else { 0.0 }
            }
            Quantity::Output(i) => firm(i)?.0,
            Quantity::Carbon(i) => firm(i)?.1,
            Quantity::Technology(i) => firm(i)?.2,
        })
    }

    /// `(coordinate, d coordinate / d α_j²)` for a firm's belief, `None` for
    /// green firms whose belief moves nothing.
    fn belief_chain(&self, j: usize) -> Option<(Direction, f64)> {
        let c = self.coeffs[j];
        let beliefs = self.beliefs?;
        let w = beliefs[j].weight(self.params);
        match self.eq.colors[j] {
            Color::Orange => Some((
                Direction::OrangeCoefficient(j),
                -self.params.green_premium * w / (c.beta * c.beta),
            )),
            Color::Red => Some((Direction::RedWeight(j), -w / ((1.0 + c.beta) * (1.0 + c.beta)))),
            Color::Green | Color::White => None,
        }
    }

    fn partial(&self, quantity: Quantity, dir: Direction) -> Result<f64> {
        match dir {
            Direction::Belief(j) => {
                if j >= self.coeffs.len() {
                    return Err(CoreError::UndefinedDirection(format!("no firm {j}")));
                }
                match self.belief_chain(j) {
                    Some((coord, factor)) => Ok(self.coordinate(quantity, coord)? * factor),
                    None => Ok(0.0),
                }
            }
            _ => self.coordinate(quantity, dir),
        }
    }
}

fn quantities(n: usize) -> Vec<Quantity> {
    let mut out = vec![
        Quantity::TotalCarbon,
        Quantity::TotalQuantity,
        Quantity::EmittedCarbon,
    ];
    for i in 0..n {
        out.extend([Quantity::Output(i), Quantity::Carbon(i), Quantity::Technology(i)]);
    }
    out
}

fn coordinate_directions(eq: &Equilibrium) -> Vec<Direction> {
    let mut dirs: Vec<Direction> = eq
        .colors
        .iter()
        .enumerate()
        .filter_map(|(j, c)| match c {
            Color::Orange => Some(Direction::OrangeCoefficient(j)),
            Color::Red => Some(Direction::RedWeight(j)),
            _ => None,
        })
        .collect();
    dirs.push(Direction::ExogenousCarbon);
    dirs
}

/// Every partial of totals and firm choices with respect to the orange
/// coefficients `a_j`, the red weights `b_j` and `K_ex`.
pub fn firm_partials(
    params: &EconomyParams,
    beliefs: &[FirmBelief],
    eq: &Equilibrium,
) -> Result<Vec<PartialRow>> {
    let coeffs = resolve(params, beliefs)?;
    check_preconditions(params, &coeffs, eq)?;
    let ctx = Context {
        params,
        coeffs: &coeffs,
        beliefs: Some(beliefs),
        eq,
        agg: aggregates_from_stats(params, &eq.stats),
    };
    let mut rows = Vec::new();
    for dir in coordinate_directions(eq) {
        for q in quantities(eq.len()) {
            rows.push(PartialRow {
                quantity: q,
                direction: dir,
                value: ctx.partial(q, dir)?,
            });
        }
    }
    Ok(rows)
}

/// Partials with respect to each firm's belief `α_j²`.
pub fn belief_partials(
    params: &EconomyParams,
    beliefs: &[FirmBelief],
    eq: &Equilibrium,
) -> Result<Vec<PartialRow>> {
    let coeffs = resolve(params, beliefs)?;
    check_preconditions(params, &coeffs, eq)?;
    let ctx = Context {
        params,
        coeffs: &coeffs,
        beliefs: Some(beliefs),
        eq,
        agg: aggregates_from_stats(params, &eq.stats),
    };
    let mut rows = Vec::new();
    for j in 0..eq.len() {
        for q in quantities(eq.len()) {
            rows.push(PartialRow {
                quantity: q,
                direction: Direction::Belief(j),
                value: ctx.partial(q, Direction::Belief(j))?,
            });
        }
    }
    Ok(rows)
}

/// Qualitative response to an increase of a belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sign {
    Increasing,
    Decreasing,
    Unaffected,
    /// The color analysis leaves the sign open.
    Ambiguous,
}

impl Sign {
    pub fn of(x: f64, zero_tol: f64) -> Self {
        if x.abs() <= zero_tol {
            Sign::Unaffected
        } else if x > 0.0 {
            Sign::Increasing
        } else {
            Sign::Decreasing
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Sign::Increasing => "increasing",
            Sign::Decreasing => "decreasing",
            Sign::Unaffected => "unaffected",
            Sign::Ambiguous => "ambiguous",
        }
    }
}

/// Predicted response of `quantity` when firm `firm` raises `α²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignRow {
    pub quantity: Quantity,
    pub firm: usize,
    /// From the case analysis on colors alone.
    pub predicted: Sign,
    /// The predicted sign, with ambiguous cases settled by the analytic value.
    pub resolved: Sign,
    pub analytic: f64,
}

/// Sign of each response from the colors of the perturbed and responding
/// firms and the presence of red firms whose belief is positive.
fn predicted_sign(eq: &Equilibrium, coeffs: &[FirmCoeffs], quantity: Quantity, j: usize) -> Sign {
    use Sign::*;
    let colors = &eq.colors;
    // Red firms with β = 0 respond to nothing through the carbon term, so
    // only reds with a positive belief make Q react to orange beliefs.
    let concerned_reds = colors
        .iter()
        .zip(coeffs)
        .any(|(c, f)| *c == Color::Red && f.beta > 0.0);
    match colors[j] {
        Color::Green | Color::White => Unaffected,
        Color::Orange => {
            let q_moves = if concerned_reds { Increasing } else { Unaffected };
            let q_mirror = if concerned_reds { Decreasing } else { Unaffected };
            match quantity {
                Quantity::TotalCarbon | Quantity::EmittedCarbon => Decreasing,
                Quantity::TotalQuantity => q_moves,
                Quantity::Output(i) => match colors[i] {
                    Color::Green | Color::Orange => q_mirror,
                    Color::Red => red_response_to_orange(eq, coeffs, i, concerned_reds),
                    Color::White => Unaffected,
                },
                Quantity::Carbon(i) => match colors[i] {
                    Color::Orange if i == j => Decreasing,
                    Color::Orange => Increasing,
                    Color::Red => red_response_to_orange(eq, coeffs, i, concerned_reds),
                    _ => Unaffected,
                },
                Quantity::Technology(i) => match colors[i] {
                    Color::Orange if i == j => Decreasing,
                    Color::Orange => Increasing,
                    _ => Unaffected,
                },
            }
        }
        Color::Red => match quantity {
            Quantity::TotalCarbon | Quantity::EmittedCarbon | Quantity::TotalQuantity => Decreasing,
            Quantity::Output(i) | Quantity::Carbon(i) => match colors[i] {
                Color::Green => {
                    if matches!(quantity, Quantity::Output(_)) {
                        Increasing
                    } else {
                        Unaffected
                    }
                }
                Color::Orange => Increasing,
                Color::Red if i == j => Decreasing,
                Color::Red => Increasing,
                Color::White => Unaffected,
            },
            Quantity::Technology(i) => match colors[i] {
                Color::Orange => Increasing,
                _ => Unaffected,
            },
        },
    }
}

/// A red firm's reaction to a more concerned orange firm: in general
/// ambiguous, but settled for the least weighted red firm and for a red
/// firm that ignores the tax.
fn red_response_to_orange(
    eq: &Equilibrium,
    coeffs: &[FirmCoeffs],
    i: usize,
    concerned_reds: bool,
) -> Sign {
    if !concerned_reds {
        return Sign::Unaffected;
    }
    if coeffs[i].beta == 0.0 {
        return Sign::Decreasing;
    }
    let smallest = eq
        .colors
        .iter()
        .zip(coeffs)
        .filter(|(c, _)| **c == Color::Red)
        .map(|(_, f)| f.red_weight())
        .fold(f64::INFINITY, f64::min);
    if coeffs[i].red_weight() <= smallest {
        Sign::Increasing
    } else {
        Sign::Ambiguous
    }
}

/// Signs of every response to an increase of each firm's belief.
pub fn sign_report(
    params: &EconomyParams,
    beliefs: &[FirmBelief],
    eq: &Equilibrium,
) -> Result<Vec<SignRow>> {
    let coeffs = resolve(params, beliefs)?;
    let partials = belief_partials(params, beliefs, eq)?;
    let zero_tol = 1e-12 * (1.0 + params.demand_intercept);
    Ok(partials
        .iter()
        .map(|row| {
            let Direction::Belief(j) = row.direction else {
                unreachable!("belief partials only")
            };
            let predicted = predicted_sign(eq, &coeffs, row.quantity, j);
            let resolved = match predicted {
                Sign::Ambiguous => Sign::of(row.value, zero_tol),
                s => s,
            };
            SignRow {
                quantity: row.quantity,
                firm: j,
                predicted,
                resolved,
                analytic: row.value,
            }
        })
        .collect())
}

/// Settings of the finite-difference check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteDifferenceOptions {
    /// Initial step; in `a`, `b` and `K_ex` it is absolute, in `α²` relative.
    pub step: f64,
    /// Smallest step tried before the instance is declared regime-unstable.
    pub min_step: f64,
}

impl Default for FiniteDifferenceOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            min_step: 1e-8,
        }
    }
}

/// An analytic partial with its finite-difference estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckedPartial {
    pub quantity: Quantity,
    pub direction: Direction,
    pub analytic: f64,
    /// `None` when no step keeps the regime.
    pub finite_difference: Option<f64>,
    /// `f(x + h) − f(x − h)`, or `∓(3f(x) − 4f(x ± h) + f(x ± 2h))` at
    /// the edge of the coordinate's domain.
    pub difference: Option<f64>,
    /// The divisor `2h` of the difference.
    pub step: Option<f64>,
    pub abs_error: Option<f64>,
    pub rel_error: Option<f64>,
}

impl CheckedPartial {
    /// Relative error below `rel`, or absolute error below `abs`.
    pub fn agrees(&self, rel: f64, abs: f64) -> Option<bool> {
        Some(self.abs_error? < abs || self.rel_error? < rel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StaticsReport {
    pub equilibrium: Equilibrium,
    pub aggregates: AggregatePartials,
    pub partials: Vec<CheckedPartial>,
    pub signs: Vec<SignRow>,
    /// Directions in which no step kept the color assignment.
    pub unstable_directions: Vec<Direction>,
}

impl StaticsReport {
    /// Largest error over checked partials, taking for each the smaller of
    /// the relative and absolute error.
    pub fn worst_error(&self) -> f64 {
        self.partials
            .iter()
            .filter_map(|p| Some(p.rel_error?.min(p.abs_error?)))
            .fold(0.0, f64::max)
    }
}

/// Perturbed equilibria at both ends of the stencil, with their spacing.
/// Weighted equilibria whose weighted sum, divided by `width`, estimates
/// the derivative.
struct Stencil {
    nodes: Vec<(f64, EconomyParams, Equilibrium)>,
    width: f64,
}

impl Stencil {
    fn difference(&self, q: Quantity) -> f64 {
        self.nodes.iter().map(|(w, p, eq)| w * q.of(p, eq)).sum()
    }
}

fn perturbed(
    params: &EconomyParams,
    coeffs: &[FirmCoeffs],
    beliefs: &[FirmBelief],
    dir: Direction,
    delta: f64,
) -> Option<(EconomyParams, Vec<FirmCoeffs>)> {
    let mut p = *params;
    let mut c = coeffs.to_vec();
    let d = params.green_premium;
    match dir {
        Direction::OrangeCoefficient(j) => {
            let a = c[j].a + delta;
            if !(a > 0.0) {
                return None;
            }
            c[j] = FirmCoeffs::from_a(a, d);
        }
        Direction::RedWeight(j) => {
            let b = c[j].red_weight() + delta;
            if !(b > 0.0 && b <= 1.0) {
                return None;
            }
            c[j] = FirmCoeffs::from_beta(1.0 / b - 1.0, d);
        }
        Direction::ExogenousCarbon => {
            p.exogenous_carbon += delta;
            if p.exogenous_carbon < 0.0 {
                return None;
            }
        }
        Direction::Belief(j) => {
            let b = beliefs[j];
            let alpha_sq = b.alpha_sq + delta;
            if !(alpha_sq >= 0.0 && alpha_sq.is_finite()) {
                return None;
            }
            let moved = FirmBelief { alpha_sq, ..b };
            c[j] = moved.coeffs(params);
        }
    }
    Some((p, c))
}

fn stencil(
    params: &EconomyParams,
    coeffs: &[FirmCoeffs],
    beliefs: &[FirmBelief],
    eq: &Equilibrium,
    dir: Direction,
    options: FiniteDifferenceOptions,
) -> Result<Option<Stencil>> {
    let scale = match dir {
        Direction::Belief(j) if beliefs[j].alpha_sq > 0.0 => beliefs[j].alpha_sq,
        _ => 1.0,
    };
    if !scale.is_finite() {
        return Ok(None);
    }
    let solve_at = |delta: f64| -> Result<Option<(EconomyParams, Equilibrium)>> {
        match perturbed(params, coeffs, beliefs, dir, delta) {
            Some((p, c)) => Ok(Some((p, solve_coeffs(&p, &c)?))),
            None => Ok(None),
        }
    };
    let mut h = options.step;
    while h >= options.min_step * (1.0 - 1e-12) {
        let step = h * scale;
        // At the edge of a coordinate's domain (K_ex = 0, b = 1, α² = 0) the
        // stencil becomes the one-sided second-order one.
        let weighted = match (solve_at(step)?, solve_at(-step)?) {
            (Some(p), Some(m)) => Some(vec![(1.0, p), (-1.0, m)]),
            (Some(p), None) => solve_at(2.0 * step)?
                .map(|p2| vec![(-3.0, (*params, eq.clone())), (4.0, p), (-1.0, p2)]),
            (None, Some(m)) => solve_at(-2.0 * step)?
                .map(|m2| vec![(3.0, (*params, eq.clone())), (-4.0, m), (1.0, m2)]),
            (None, None) => None,
        };
        if let Some(nodes) = weighted {
            if nodes.iter().all(|(_, (_, e))| e.colors == eq.colors) {
                return Ok(Some(Stencil {
                    nodes: nodes.into_iter().map(|(w, (p, e))| (w, p, e)).collect(),
                    width: 2.0 * step,
                }));
            }
        }
        h /= 10.0;
    }
    Ok(None)
}

/// Analytic partials in all coordinate and belief directions, each paired
/// with a central finite difference of re-solved equilibria, plus the sign
/// table.
pub fn statics_report(
    params: &EconomyParams,
    beliefs: &[FirmBelief],
    options: FiniteDifferenceOptions,
) -> Result<StaticsReport> {
    let coeffs = resolve(params, beliefs)?;
    let eq = solve_coeffs(params, &coeffs)?;
    check_preconditions(params, &coeffs, &eq)?;
    let ctx = Context {
        params,
        coeffs: &coeffs,
        beliefs: Some(beliefs),
        eq: &eq,
        agg: aggregates_from_stats(params, &eq.stats),
    };
    let mut dirs = coordinate_directions(&eq);
    dirs.extend((0..eq.len()).map(Direction::Belief));

    let mut partials = Vec::new();
    let mut unstable_directions = Vec::new();
    for dir in dirs {
        let st = stencil(params, &coeffs, beliefs, &eq, dir, options)?;
        let is_green_belief = matches!(dir, Direction::Belief(j) if ctx.belief_chain(j).is_none());
        if st.is_none() && !is_green_belief {
            unstable_directions.push(dir);
        }
        for q in quantities(eq.len()) {
            let analytic = ctx.partial(q, dir)?;
            let (finite_difference, difference, step) = match &st {
                Some(s) => {
                    let diff = s.difference(q);
                    (Some(diff / s.width), Some(diff), Some(s.width))
                }
                None => (None, None, None),
            };
            let abs_error = finite_difference.map(|fd| (fd - analytic).abs());
            let rel_error = abs_error.map(|e| {
                if analytic == 0.0 {
                    if e == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    e / analytic.abs()
                }
            });
            partials.push(CheckedPartial {
                quantity: q,
                direction: dir,
                analytic,
                finite_difference,
                difference,
                step,
                abs_error,
                rel_error,
            });
        }
    }
    let signs = sign_report(params, beliefs, &eq)?;
    Ok(StaticsReport {
        aggregates: ctx.agg,
        equilibrium: eq,
        partials,
        signs,
        unstable_directions,
    })
}
