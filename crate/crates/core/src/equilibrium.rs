//! The n-firm Nash equilibrium.
//!
//! Colors are ordered in beliefs: in a green/orange/red equilibrium the green
//! firms have the smallest coefficients `a` and the red firms the largest, and
//! in a white/red equilibrium the white firms have the smallest `ξ`. [`solve`]
//! therefore only needs to try `O(n²)` threshold partitions. Each candidate
//! yields the totals `(Q, K)` in closed form, the strategies follow from the
//! feedback formulas, and the candidate is kept iff every firm satisfies the
//! membership conditions of its color.

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::model::{
    best_response, classify_color, feedback_strategy, membership_violation, Color,
    EconomyParams, Environment, FirmBelief, FirmCoeffs, Strategy,
};

/// Bucket counts and sums of a color assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionStats {
    pub colors: Vec<Color>,
    pub n_white: usize,
    pub n_green: usize,
    pub n_orange: usize,
    pub n_red: usize,
    /// Size of the mitigating group, `n_green + n_orange`.
    pub m: usize,
    /// `A_int`, the sum of `a_j` over orange firms.
    pub a_int: f64,
    /// `B₁`, the sum of `(1 + β_j)⁻¹` over red firms.
    pub b1: f64,
    /// `N = (n_int + n₁ + 1)(m + 1) − B₁ n₀`.
    pub denominator: f64,
}

impl PartitionStats {
    pub fn from_colors(coeffs: &[FirmCoeffs], colors: Vec<Color>) -> Self {
        assert_eq!(coeffs.len(), colors.len());
        let mut stats = PartitionStats {
            colors: Vec::new(),
            n_white: 0,
            n_green: 0,
            n_orange: 0,
            n_red: 0,
            m: 0,
            a_int: 0.0,
            b1: 0.0,
            denominator: 0.0,
        };
        for (c, color) in coeffs.iter().zip(&colors) {
            match color {
                Color::White => stats.n_white += 1,
                Color::Green => stats.n_green += 1,
                Color::Orange => {
                    stats.n_orange += 1;
                    stats.a_int += c.a;
                }
                Color::Red => {
                    stats.n_red += 1;
                    stats.b1 += c.red_weight();
                }
            }
        }
        stats.colors = colors;
        stats.m = stats.n_green + stats.n_orange;
        stats.denominator = ((stats.n_orange + stats.n_red + 1) * (stats.m + 1)) as f64
            - stats.b1 * stats.n_green as f64;
        stats
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    /// Both white and mitigating firms present, which no equilibrium allows.
    pub fn violates_exclusion(&self) -> bool {
        self.n_white > 0 && self.m > 0
    }
}

/// A strategy profile together with its aggregates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub strategies: Vec<Strategy>,
    pub colors: Vec<Color>,
    /// Total quantity `Q`.
    pub quantity: f64,
    /// Total carbon `K`, including the exogenous stock.
    pub carbon: f64,
    pub stats: PartitionStats,
    /// Largest distance of a strategy from its exact best response.
    pub residual: f64,
}

impl Equilibrium {
    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    /// Sup-norm distance between two profiles in `(q, k)` coordinates.
    pub fn distance(&self, other: &Equilibrium) -> f64 {
        profile_distance(&self.strategies, &other.strategies)
    }
}

pub fn profile_distance(a: &[Strategy], b: &[Strategy]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| x.distance(y))
        .fold(0.0, f64::max)
}

/// Totals `(Q, K)` of a green/orange/red partition.
pub fn aggregates_for_partition(
    params: &EconomyParams,
    stats: &PartitionStats,
) -> Result<(f64, f64)> {
    if stats.n_white > 0 {
        return Err(CoreError::Precondition(
            "aggregate closed form requires a partition without white firms".into(),
        ));
    }
    if !stats.a_int.is_finite() {
        return Err(CoreError::Precondition(
            "orange firms must have finite coefficients".into(),
        ));
    }
    let n = stats.denominator;
    assert!(n > 0.0, "partition denominator must be positive, got {n}");
    let z = params.z();
    let d = params.green_premium;
    let margin = params.margin();
    let m = stats.m as f64;
    let n_int = stats.n_orange as f64;
    let n1 = stats.n_red as f64;
    let b1 = stats.b1;
    let s = stats.a_int + params.exogenous_carbon;

    let carbon = (b1 * (margin + m * d) + (b1 + m + 1.0) * s) / n;
    let quantity = z + (b1 * (margin + n_int * d) - (n_int + n1 + 1.0) * z + (b1 - n1) * s) / n;
    Ok((quantity, carbon))
}

/// `ξ_j = (A − c − β_j K_ex) / (1 + β_j)`, the effective demand of a red firm
/// when nobody mitigates.
pub fn red_capacity(params: &EconomyParams, coeffs: FirmCoeffs) -> f64 {
    if coeffs.infinitely_concerned() {
        return -params.exogenous_carbon;
    }
    (params.margin() - coeffs.times_beta(params.exogenous_carbon)) * coeffs.red_weight()
}

/// A white/red candidate in which the `n_white` firms with the smallest `ξ`
/// stay out of the market.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteRedCandidate {
    pub quantity: f64,
    pub carbon: f64,
    /// In the caller's firm order.
    pub strategies: Vec<Strategy>,
    pub colors: Vec<Color>,
    /// Largest membership violation, or the most negative red quantity.
    pub violation: f64,
}

pub fn white_red_aggregates(
    params: &EconomyParams,
    coeffs: &[FirmCoeffs],
    n_white: usize,
) -> Result<WhiteRedCandidate> {
    let n = coeffs.len();
    if n_white > n {
        return Err(CoreError::Precondition(format!(
            "{n_white} white firms requested among {n}"
        )));
    }
    let xi: Vec<f64> = coeffs.iter().map(|c| red_capacity(params, *c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| xi[i].total_cmp(&xi[j]));

    let mut colors = vec![Color::White; n];
    for &i in &order[n_white..] {
        colors[i] = Color::Red;
    }
    let n_red = n - n_white;
    let quantity = order[n_white..].iter().map(|&i| xi[i]).sum::<f64>() / (n_red as f64 + 1.0);
    let carbon = quantity + params.exogenous_carbon;

    let mut violation: f64 = 0.0;
    let mut strategies = vec![Strategy::ZERO; n];
    for i in 0..n {
        if colors[i] == Color::Red {
            let q = xi[i] - quantity;
            violation = violation.max(-q);
            strategies[i] = Strategy::from_qr(q, 1.0);
        }
        violation =
            violation.max(membership_violation(params, coeffs[i], colors[i], quantity, carbon));
    }
    Ok(WhiteRedCandidate {
        quantity,
        carbon,
        strategies,
        colors,
        violation,
    })
}

struct Candidate {
    strategies: Vec<Strategy>,
    colors: Vec<Color>,
    violation: f64,
    n_red: usize,
}

fn scale_of(params: &EconomyParams, n: usize) -> f64 {
    1f64.max(params.demand_intercept)
        .max(params.exogenous_carbon + n as f64 * params.demand_intercept)
}

/// Membership slack relative to [`scale_of`]; absorbs rounding only.
const VALIDATION_SLACK: f64 = 1e-11;
/// Validated candidates must agree to this relative sup-norm distance.
const AGREEMENT_TOL: f64 = 1e-9;

fn evaluate_colors(params: &EconomyParams, coeffs: &[FirmCoeffs], colors: Vec<Color>) -> Candidate {
    let stats = PartitionStats::from_colors(coeffs, colors);
    let (quantity, carbon) =
        aggregates_for_partition(params, &stats).expect("family one has no white firms");
    let mut violation: f64 = 0.0;
    let mut strategies = Vec::with_capacity(coeffs.len());
    let (mut q_sum, mut k_sum) = (0.0, params.exogenous_carbon);
    for (c, &color) in coeffs.iter().zip(&stats.colors) {
        violation = violation.max(membership_violation(params, *c, color, quantity, carbon));
        let s = feedback_strategy(params, *c, color, quantity, carbon);
        q_sum += s.q;
        k_sum += s.k;
        strategies.push(s);
    }
    violation = violation
        .max((q_sum - quantity).abs())
        .max((k_sum - carbon).abs());
    if violation.is_nan() {
        violation = f64::INFINITY;
    }
    Candidate {
        strategies,
        n_red: stats.n_red,
        colors: stats.colors,
        violation,
    }
}

/// Unique equilibrium for the given beliefs.
pub fn solve(params: &EconomyParams, beliefs: &[FirmBelief]) -> Result<Equilibrium> {
    for b in beliefs {
        b.validate()?;
    }
    let coeffs: Vec<FirmCoeffs> = beliefs.iter().map(|b| b.coeffs(params)).collect();
    solve_coeffs(params, &coeffs)
}

/// [`solve`] on already resolved coefficients.
pub fn solve_coeffs(params: &EconomyParams, coeffs: &[FirmCoeffs]) -> Result<Equilibrium> {
    let candidates = candidates(params, coeffs)?;
    let scale = scale_of(params, coeffs.len());
    let smallest = candidates
        .iter()
        .map(|c| c.violation)
        .fold(f64::INFINITY, f64::min);
    let valid: Vec<&Candidate> = candidates
        .iter()
        .filter(|c| c.violation <= VALIDATION_SLACK * scale)
        .collect();
    let best = valid
        .iter()
        .min_by(|x, y| {
            x.violation
                .total_cmp(&y.violation)
                .then(x.n_red.cmp(&y.n_red))
        })
        .ok_or(CoreError::NoEquilibrium {
            smallest_violation: smallest,
        })?;
    for other in &valid {
        let gap = profile_distance(&best.strategies, &other.strategies);
        if gap > AGREEMENT_TOL * scale {
            return Err(CoreError::ConflictingEquilibria { gap });
        }
    }

    debug_assert!(equal_beliefs_equal_strategies(coeffs, best));
    Ok(assemble_profile(params, coeffs, best.strategies.clone(), best.colors.clone()))
}

/// Color assignments among the enumerated candidates that pass validation.
pub fn validated_partitions(params: &EconomyParams, coeffs: &[FirmCoeffs]) -> Result<Vec<Vec<Color>>> {
    let scale = scale_of(params, coeffs.len());
    let mut out: Vec<Vec<Color>> = Vec::new();
    for c in candidates(params, coeffs)? {
        if c.violation <= VALIDATION_SLACK * scale && !out.contains(&c.colors) {
            out.push(c.colors);
        }
    }
    Ok(out)
}

fn candidates(params: &EconomyParams, coeffs: &[FirmCoeffs]) -> Result<Vec<Candidate>> {
    params.validate()?;
    let n = coeffs.len();
    if n == 0 {
        return Err(CoreError::Precondition("the economy needs at least one firm".into()));
    }
    let mut candidates = Vec::with_capacity((n + 1) * (n + 2) / 2 + n + 1);

    // Green, orange, red by ascending a; skeptics with a = ∞ can only be red.
    let mut by_a: Vec<usize> = (0..n).collect();
    by_a.sort_by(|&i, &j| coeffs[i].a.total_cmp(&coeffs[j].a));
    let finite = coeffs.iter().filter(|c| c.a.is_finite()).count();
    for greens in 0..=finite {
        for oranges in 0..=(finite - greens) {
            let mut colors = vec![Color::Red; n];
            for (rank, &i) in by_a.iter().enumerate() {
                if rank < greens {
                    colors[i] = Color::Green;
                } else if rank < greens + oranges {
                    colors[i] = Color::Orange;
                }
            }
            candidates.push(evaluate_colors(params, coeffs, colors));
        }
    }

    for n_white in 0..=n {
        let wr = white_red_aggregates(params, coeffs, n_white)?;
        let violation = if wr.violation.is_nan() {
            f64::INFINITY
        } else {
            wr.violation
        };
        candidates.push(Candidate {
            strategies: wr.strategies,
            colors: wr.colors,
            violation,
            n_red: n - n_white,
        });
    }
    Ok(candidates)
}

fn equal_beliefs_equal_strategies(coeffs: &[FirmCoeffs], c: &Candidate) -> bool {
    for i in 0..coeffs.len() {
        for j in 0..i {
            let mitigating = matches!(c.colors[i], Color::Green | Color::Orange)
                && c.colors[i] == c.colors[j];
            if mitigating && coeffs[i] == coeffs[j] && c.strategies[i] != c.strategies[j] {
                return false;
            }
        }
    }
    true
}

fn totals(params: &EconomyParams, strategies: &[Strategy]) -> (f64, f64) {
    strategies.iter().fold((0.0, params.exogenous_carbon), |(q, k), s| {
        (q + s.q, k + s.k)
    })
}

/// The environment firm `i` faces given everybody's strategies.
pub fn environment_of(
    params: &EconomyParams,
    strategies: &[Strategy],
    quantity: f64,
    carbon: f64,
    i: usize,
) -> Environment {
    Environment {
        q_minus: (quantity - strategies[i].q).clamp(0.0, params.demand_intercept),
        k_minus: (carbon - strategies[i].k).max(0.0),
    }
}

fn best_response_gap(params: &EconomyParams, coeffs: &[FirmCoeffs], strategies: &[Strategy]) -> f64 {
    let (quantity, carbon) = totals(params, strategies);
    (0..strategies.len())
        .map(|i| {
            let env = environment_of(params, strategies, quantity, carbon, i);
            strategies[i].distance(&best_response(params, coeffs[i], env))
        })
        .fold(0.0, f64::max)
}

pub(crate) fn assemble_profile(
    params: &EconomyParams,
    coeffs: &[FirmCoeffs],
    strategies: Vec<Strategy>,
    colors: Vec<Color>,
) -> Equilibrium {
    let (quantity, carbon) = totals(params, &strategies);
    let residual = best_response_gap(params, coeffs, &strategies);
    Equilibrium {
        stats: PartitionStats::from_colors(coeffs, colors.clone()),
        strategies,
        colors,
        quantity,
        carbon,
        residual,
    }
}

/// Settings of the damped simultaneous best-response iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationOptions {
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iter: 1_000_000,
            tol: 1e-12,
        }
    }
}

impl IterationOptions {
    /// Defaults with the damping capped at `2 / (n + 1)`.
    ///
    /// Near an equilibrium the undamped map has an eigenvalue of about
    /// `−(n − 1)/2` along the aggregate direction, so the damped map is only
    /// stable for `λ < 4 / (n + 1)`.
    pub fn for_firms(n: usize) -> Self {
        Self {
            damping: 0.5f64.min(2.0 / (n as f64 + 1.0)),
            ..Self::default()
        }
    }
}

/// Damped simultaneous best-response iteration from `start`.
pub fn iterate_best_response(
    params: &EconomyParams,
    beliefs: &[FirmBelief],
    start: &[Strategy],
    options: IterationOptions,
) -> Result<Equilibrium> {
    params.validate()?;
    if beliefs.is_empty() || beliefs.len() != start.len() {
        return Err(CoreError::Precondition(format!(
            "{} beliefs but {} starting strategies",
            beliefs.len(),
            start.len()
        )));
    }
    if !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(CoreError::Precondition(format!(
            "damping {} outside (0, 1]",
            options.damping
        )));
    }
    let bound = params.margin().max(0.0) / 2.0;
    if start.iter().any(|s| !(s.q >= 0.0 && s.q <= bound + 1e-12 && s.is_valid())) {
        return Err(CoreError::Precondition(format!(
            "starting quantities must lie in [0, (A - c)/2 = {bound}]"
        )));
    }
    for b in beliefs {
        b.validate()?;
    }
    let coeffs: Vec<FirmCoeffs> = beliefs.iter().map(|b| b.coeffs(params)).collect();
    let lambda = options.damping;
    let mut current = start.to_vec();
    let mut next = current.clone();
    let mut change = f64::INFINITY;
    for _ in 0..options.max_iter {
        let (quantity, carbon) = totals(params, &current);
        change = 0.0;
        for i in 0..current.len() {
            let env = environment_of(params, &current, quantity, carbon, i);
            let target = best_response(params, coeffs[i], env);
            let s = &current[i];
            next[i] = Strategy::from_qk(
                (1.0 - lambda) * s.q + lambda * target.q,
                (1.0 - lambda) * s.k + lambda * target.k,
            );
            change = change.max(next[i].distance(s));
        }
        std::mem::swap(&mut current, &mut next);
        if change < options.tol {
            let (quantity, carbon) = totals(params, &current);
            let colors = (0..current.len())
                .map(|i| {
                    classify_color(
                        params,
                        coeffs[i],
                        environment_of(params, &current, quantity, carbon, i),
                    )
                })
                .collect();
            return Ok(assemble_profile(params, &coeffs, current, colors));
        }
    }
    Err(CoreError::NoConvergence {
        iterations: options.max_iter,
        residual: change.max(best_response_gap(params, &coeffs, &current)),
    })
}

/// Wraps an arbitrary profile, e.g. one read back from disk, as an
/// [`Equilibrium`] for [`verify_equilibrium`]. Each firm is colored by its
/// best response to the others.
pub fn profile_equilibrium(
    params: &EconomyParams,
    beliefs: &[FirmBelief],
    strategies: Vec<Strategy>,
) -> Result<Equilibrium> {
    params.validate()?;
    if beliefs.is_empty() || beliefs.len() != strategies.len() {
        return Err(CoreError::Precondition(format!(
            "{} beliefs but {} strategies",
            beliefs.len(),
            strategies.len()
        )));
    }
    for b in beliefs {
        b.validate()?;
    }
    if let Some(i) = strategies.iter().position(|s| !s.is_valid()) {
        return Err(CoreError::Domain(format!("strategy of firm {i} is not feasible")));
    }
    let coeffs: Vec<FirmCoeffs> = beliefs.iter().map(|b| b.coeffs(params)).collect();
    let (quantity, carbon) = totals(params, &strategies);
    let colors = (0..strategies.len())
        .map(|i| {
            classify_color(
                params,
                coeffs[i],
                environment_of(params, &strategies, quantity, carbon, i),
            )
        })
        .collect();
    Ok(assemble_profile(params, &coeffs, strategies, colors))
}

/// Largest violation per category; all zero for an exact equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerificationReport {
    /// Color membership conditions in terms of the totals `(Q, K)`.
    pub membership: f64,
    /// Distance of each strategy from its color's feedback formula.
    pub feedback: f64,
    /// Distance of each strategy from the exact best response to the others.
    pub best_response_gap: f64,
    /// `Q = Σq`, `K = K_ex + Σk` and equality of red quantity and carbon.
    pub aggregation: f64,
    /// One when white firms coexist with green or orange ones.
    pub exclusion: f64,
    /// Positive unless `Q < A`.
    pub excess_supply: f64,
}

impl VerificationReport {
    pub fn max_violation(&self) -> f64 {
        [
            self.membership,
            self.feedback,
            self.best_response_gap,
            self.aggregation,
            self.exclusion,
            self.excess_supply,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Checks `eq` against every equilibrium condition.
pub fn verify_equilibrium(
    params: &EconomyParams,
    beliefs: &[FirmBelief],
    eq: &Equilibrium,
) -> VerificationReport {
    assert_eq!(beliefs.len(), eq.strategies.len(), "one belief per strategy");
    let coeffs: Vec<FirmCoeffs> = beliefs.iter().map(|b| b.coeffs(params)).collect();
    let (q_sum, k_sum) = totals(params, &eq.strategies);
    let (quantity, carbon) = (eq.quantity, eq.carbon);

    let mut membership: f64 = 0.0;
    let mut feedback: f64 = 0.0;
    let mut red_gap = 0.0;
    for (i, s) in eq.strategies.iter().enumerate() {
        let color = eq.colors[i];
        membership = membership.max(membership_violation(params, coeffs[i], color, quantity, carbon));
        feedback =
            feedback.max(s.distance(&feedback_strategy(params, coeffs[i], color, quantity, carbon)));
        if color == Color::Red {
            red_gap += s.k - s.q;
        }
    }
    let aggregation = (quantity - q_sum)
        .abs()
        .max((carbon - k_sum).abs())
        .max(f64::abs(red_gap));
    let stats = PartitionStats::from_colors(&coeffs, eq.colors.clone());
    let a_max = params.demand_intercept;
    VerificationReport {
        membership,
        feedback,
        best_response_gap: best_response_gap(params, &coeffs, &eq.strategies),
        aggregation,
        exclusion: if stats.violates_exclusion() { 1.0 } else { 0.0 },
        excess_supply: if quantity < a_max {
            0.0
        } else {
            (quantity - a_max).max(f64::MIN_POSITIVE)
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k_ex: f64) -> EconomyParams {
        EconomyParams::new(10.0, 1.0, 1.0, 1.0, k_ex).unwrap()
    }

    fn beliefs_from_a(params: &EconomyParams, a: &[f64]) -> Vec<FirmBelief> {
        a.iter()
            .map(|&a| FirmBelief::from_coefficient(a, params.tax_slope, params))
            .collect()
    }

    #[test]
    fn all_orange_three_firms() {
        let p = params(0.0);
        let beliefs = beliefs_from_a(&p, &[2.0, 2.2, 2.4]);
        let eq = solve(&p, &beliefs).unwrap();
        assert!(eq.colors.iter().all(|c| *c == Color::Orange));
        assert!((eq.quantity - 6.0).abs() < 1e-12);
        assert!((eq.carbon - 1.65).abs() < 1e-12);
        let coeffs: Vec<_> = beliefs.iter().map(|b| b.coeffs(&p)).collect();
        let stats = PartitionStats::from_colors(&coeffs, vec![Color::Orange; 3]);
        let (q, k) = aggregates_for_partition(&p, &stats).unwrap();
        assert!((q - 6.0).abs() < 1e-12 && (k - 1.65).abs() < 1e-12);
    }

    #[test]
    fn two_orange_firms() {
        let p = params(0.0);
        let eq = solve(&p, &[FirmBelief::new(0.5), FirmBelief::new(0.4)]).unwrap();
        assert_eq!(eq.colors, vec![Color::Orange, Color::Orange]);
        assert!((eq.strategies[0].q - 8.0 / 3.0).abs() < 1e-12);
        assert!((eq.strategies[1].q - 8.0 / 3.0).abs() < 1e-12);
        assert!((eq.strategies[0].k - 0.5).abs() < 1e-12);
        assert!((eq.strategies[1].k - 1.0).abs() < 1e-12);
        assert!((eq.quantity - 16.0 / 3.0).abs() < 1e-12);
        assert!((eq.carbon - 1.5).abs() < 1e-12);
        assert!(verify_equilibrium(&p, &[FirmBelief::new(0.5), FirmBelief::new(0.4)], &eq)
            .max_violation()
            < 1e-10);
    }

    #[test]
    fn all_red_buckets_balance() {
        let p = params(0.7);
        let beliefs = [FirmBelief::new(0.01), FirmBelief::new(0.02), FirmBelief::new(0.0)];
        let eq = solve(&p, &beliefs).unwrap();
        assert!(eq.colors.iter().all(|c| *c == Color::Red));
        let (q, k) = aggregates_for_partition(&p, &eq.stats).unwrap();
        assert!((k - p.exogenous_carbon - q).abs() < 1e-12);
    }

    #[test]
    fn no_market_below_cost() {
        let p = EconomyParams::new(1.0, 1.0, 1.5, 1.0, 0.3).unwrap();
        let eq = solve(&p, &[FirmBelief::new(0.2), FirmBelief::new(0.0)]).unwrap();
        assert!(eq.colors.iter().all(|c| *c == Color::White));
        assert_eq!(eq.quantity, 0.0);
        assert_eq!(eq.carbon, 0.3);
    }

    #[test]
    fn identical_moderate_beliefs() {
        let p = params(0.0);
        let beliefs = vec![FirmBelief::new(0.5); 5];
        let eq = solve(&p, &beliefs).unwrap();
        let z = p.z();
        for s in &eq.strategies {
            assert!((s.q - z / 6.0).abs() < 1e-12);
        }
        assert!((eq.carbon - 5.0 * 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn white_red_candidate() {
        let p = EconomyParams::new(3.0, 1.0, 1.0, 5.0, 0.0).unwrap();
        let coeffs = [FirmCoeffs::from_beta(4.0, 5.0), FirmCoeffs::from_beta(0.2, 5.0)];
        assert!((red_capacity(&p, coeffs[0]) - 0.4).abs() < 1e-15);
        assert!((red_capacity(&p, coeffs[1]) - 5.0 / 3.0).abs() < 1e-15);
        let wr = white_red_aggregates(&p, &coeffs, 1).unwrap();
        assert!(wr.violation == 0.0);
        assert!((wr.quantity - 5.0 / 6.0).abs() < 1e-15);
        assert!((wr.strategies[1].q - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(wr.strategies[0], Strategy::ZERO);
        let eq = solve_coeffs(&p, &coeffs).unwrap();
        assert_eq!(eq.colors, vec![Color::White, Color::Red]);
    }

    #[test]
    fn identical_capacities_have_no_white_firm() {
        let p = EconomyParams::new(3.0, 1.0, 1.0, 5.0, 0.0).unwrap();
        let eq = solve(&p, &[FirmBelief::new(4.0); 3]).unwrap();
        assert_eq!(eq.stats.n_white, 0);
    }

    #[test]
    fn single_red_firm_against_exogenous_carbon() {
        let p = EconomyParams::new(4.0, 1.0, 1.0, 5.0, 0.5).unwrap();
        let belief = FirmBelief::new(0.3);
        let eq = solve(&p, &[belief]).unwrap();
        let beta = 0.3;
        let expected = (p.margin() - beta * 0.5) / (2.0 * (1.0 + beta));
        assert!((eq.quantity - expected).abs() < 1e-14);
    }

    #[test]
    fn iteration_reproduces_solver() {
        let p = params(0.2);
        let beliefs = [FirmBelief::new(0.5), FirmBelief::new(0.2), FirmBelief::new(0.05)];
        let eq = solve(&p, &beliefs).unwrap();
        let start = vec![Strategy::ZERO; 3];
        let it = iterate_best_response(&p, &beliefs, &start, IterationOptions::for_firms(3)).unwrap();
        assert!(it.distance(&eq) < 1e-10);
        assert_eq!(it.colors, eq.colors);
    }

    #[test]
    fn iteration_from_equilibrium_stays_put() {
        let p = params(0.0);
        let beliefs = [FirmBelief::new(0.5), FirmBelief::new(0.4)];
        let eq = solve(&p, &beliefs).unwrap();
        let it = iterate_best_response(&p, &beliefs, &eq.strategies, IterationOptions::default())
            .unwrap();
        assert!(it.distance(&eq) < 1e-14);
    }

    #[test]
    fn single_firm_converges_in_one_step() {
        let p = params(0.0);
        let opts = IterationOptions {
            damping: 1.0,
            max_iter: 2,
            tol: 1e-12,
        };
        let start = [Strategy::from_qk(4.0, 1.0)];
        let it = iterate_best_response(&p, &[FirmBelief::new(0.3)], &start, opts).unwrap();
        assert!(it.residual < 1e-14);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let p = params(0.0);
        let opts = IterationOptions {
            damping: 1e-3,
            max_iter: 5,
            tol: 1e-12,
        };
        let beliefs = [FirmBelief::new(0.5), FirmBelief::new(0.4)];
        let err = iterate_best_response(&p, &beliefs, &[Strategy::ZERO; 2], opts).unwrap_err();
        assert!(matches!(err, CoreError::NoConvergence { iterations: 5, .. }));
    }

    #[test]
    fn perturbed_profile_is_flagged() {
        let p = params(0.0);
        let beliefs = [FirmBelief::new(0.5), FirmBelief::new(0.4)];
        let mut eq = solve(&p, &beliefs).unwrap();
        eq.strategies[0] = Strategy::from_qr(eq.strategies[0].q + 0.1, eq.strategies[0].r);
        let report = verify_equilibrium(&p, &beliefs, &eq);
        assert!(report.best_response_gap > 0.01);
        assert!(report.aggregation > 0.05);
    }

    #[test]
    fn empty_economy_is_rejected() {
        assert!(matches!(solve(&params(0.0), &[]), Err(CoreError::Precondition(_))));
    }
}
