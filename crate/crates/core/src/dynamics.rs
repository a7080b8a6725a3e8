//! The repeated game: myopic firms play the one-shot equilibrium each round,
//! and the carbon they emit becomes exogenous carbon for the next round.

use serde::Serialize;

use crate::equilibrium::{solve_coeffs, Equilibrium};
use crate::error::{CoreError, Result};
use crate::model::{Color, EconomyParams, FirmBelief, FirmCoeffs};

/// Beliefs by round (rounds count from 1).
pub trait BeliefSchedule: Send + Sync {
    fn firms(&self) -> usize;

    fn beliefs(&self, round: usize) -> Vec<FirmBelief>;

    /// `limsup_m max_j a_j⁽ᵐ⁾`, if known.
    fn limit_coefficient(&self, _params: &EconomyParams) -> Option<f64> {
        None
    }

    /// `liminf_m min_j β_j⁽ᵐ⁾`, if known.
    fn limit_beta(&self, _params: &EconomyParams) -> Option<f64> {
        None
    }
}

fn max_coefficient(params: &EconomyParams, beliefs: &[FirmBelief]) -> f64 {
    beliefs
        .iter()
        .map(|b| b.coeffs(params).a)
        .fold(0.0, f64::max)
}

fn min_beta(params: &EconomyParams, beliefs: &[FirmBelief]) -> f64 {
    beliefs
        .iter()
        .map(|b| b.beta(params))
        .fold(f64::INFINITY, f64::min)
}

/// The same beliefs every round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantBeliefs(pub Vec<FirmBelief>);

impl BeliefSchedule for ConstantBeliefs {
    fn firms(&self) -> usize {
        self.0.len()
    }

    fn beliefs(&self, _round: usize) -> Vec<FirmBelief> {
        self.0.clone()
    }

    fn limit_coefficient(&self, params: &EconomyParams) -> Option<f64> {
        Some(max_coefficient(params, &self.0))
    }

    fn limit_beta(&self, params: &EconomyParams) -> Option<f64> {
        Some(min_beta(params, &self.0))
    }
}

/// `α_j²(m) = limit_j + (start_j − limit_j) ρ^(m−1)`; risk weights come from
/// `limit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricBeliefs {
    pub start: Vec<f64>,
    pub limit: Vec<FirmBelief>,
    pub ratio: f64,
}

impl GeometricBeliefs {
    pub fn new(start: Vec<f64>, limit: Vec<FirmBelief>, ratio: f64) -> Result<Self> {
        if start.len() != limit.len() {
            return Err(CoreError::Precondition(format!(
                "{} starting beliefs for {} firms",
                start.len(),
                limit.len()
            )));
        }
        if !(0.0..1.0).contains(&ratio) {
            return Err(crate::error::invalid("ratio", format!("must lie in [0, 1), got {ratio}")));
        }
        for (s, l) in start.iter().zip(&limit) {
            l.validate()?;
            if !(s.is_finite() && *s >= 0.0 && l.alpha_sq.is_finite()) {
                return Err(crate::error::invalid(
                    "alpha_sq",
                    format!("geometric schedules need finite beliefs, got {s} -> {}", l.alpha_sq),
                ));
            }
        }
        Ok(Self { start, limit, ratio })
    }
}

impl BeliefSchedule for GeometricBeliefs {
    fn firms(&self) -> usize {
        self.limit.len()
    }

    fn beliefs(&self, round: usize) -> Vec<FirmBelief> {
        let decay = self.ratio.powi(round.saturating_sub(1).min(i32::MAX as usize) as i32);
        self.start
            .iter()
            .zip(&self.limit)
            .map(|(&s, l)| FirmBelief {
                alpha_sq: l.alpha_sq + (s - l.alpha_sq) * decay,
                ..*l
            })
            .collect()
    }

    fn limit_coefficient(&self, params: &EconomyParams) -> Option<f64> {
        Some(max_coefficient(params, &self.limit))
    }

    fn limit_beta(&self, params: &EconomyParams) -> Option<f64> {
        Some(min_beta(params, &self.limit))
    }
}

type BeliefFn = dyn Fn(usize) -> Vec<FirmBelief> + Send + Sync;

/// Beliefs from a closure, with optionally declared limits.
pub struct FnSchedule {
    pub firms: usize,
    pub generator: Box<BeliefFn>,
    pub limit_coefficient: Option<f64>,
    pub limit_beta: Option<f64>,
}

impl BeliefSchedule for FnSchedule {
    fn firms(&self) -> usize {
        self.firms
    }

    fn beliefs(&self, round: usize) -> Vec<FirmBelief> {
        (self.generator)(round)
    }

    fn limit_coefficient(&self, _params: &EconomyParams) -> Option<f64> {
        self.limit_coefficient
    }

    fn limit_beta(&self, _params: &EconomyParams) -> Option<f64> {
        self.limit_beta
    }
}

/// One round of the repeated game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub beliefs: Vec<FirmBelief>,
    pub equilibrium: Equilibrium,
    /// `K_m`, the accumulated carbon after the round.
    pub carbon: f64,
    pub quantity: f64,
    /// `α_true K_m` when a true climate response is given.
    pub temperature: Option<f64>,
    /// Smallest `k_i − λ_i (a_i − K₋ᵢ)` over firms; only when `Q < z`.
    pub floor_slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamicsTrace {
    /// `K₀ = K_ex`.
    pub initial_carbon: f64,
    pub rounds: Vec<RoundRecord>,
}

/// `min_i k_i − (d − β_i K₋ᵢ) / (2(1 + β_i))` over firms, the slack in the
/// lower bound on carbon that holds whenever `Q < z`.
fn minimal_carbon_slack(params: &EconomyParams, coeffs: &[FirmCoeffs], eq: &Equilibrium) -> Option<f64> {
    if eq.quantity >= params.z() {
        return None;
    }
    let slack = coeffs
        .iter()
        .zip(&eq.strategies)
        .map(|(c, s)| {
            if c.infinitely_concerned() {
                // a = 0: the bound is non-positive.
                return s.k;
            }
            let k_minus = eq.carbon - s.k;
            let bound =
                (params.green_premium - c.times_beta(k_minus)) / (2.0 * (1.0 + c.beta));
            s.k - bound
        })
        .fold(f64::INFINITY, f64::min);
    Some(slack)
}

fn play_round(
    params: &EconomyParams,
    beliefs: &[FirmBelief],
    carbon: f64,
    round: usize,
) -> Result<(Vec<FirmCoeffs>, Equilibrium)> {
    let wrap = |e: CoreError| CoreError::Round {
        round,
        source: Box::new(e),
    };
    let coeffs = beliefs
        .iter()
        .map(|b| {
            b.validate()?;
            Ok(b.coeffs(params))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(wrap)?;
    let eq = solve_coeffs(&params.with_exogenous_carbon(carbon), &coeffs).map_err(wrap)?;
    Ok((coeffs, eq))
}

fn check_schedule(schedule: &dyn BeliefSchedule, round: usize, beliefs: &[FirmBelief]) -> Result<()> {
    if beliefs.len() != schedule.firms() || beliefs.is_empty() {
        return Err(CoreError::Round {
            round,
            source: Box::new(CoreError::Precondition(format!(
                "schedule produced {} beliefs for {} firms",
                beliefs.len(),
                schedule.firms()
            ))),
        });
    }
    Ok(())
}

/// Plays `rounds` rounds starting from the economy's exogenous carbon.
pub fn simulate(
    params: &EconomyParams,
    schedule: &dyn BeliefSchedule,
    rounds: usize,
    alpha_true: Option<f64>,
) -> Result<DynamicsTrace> {
    params.validate()?;
    if rounds == 0 {
        return Err(CoreError::Precondition("at least one round is needed".into()));
    }
    let mut carbon = params.exogenous_carbon;
    let mut records = Vec::with_capacity(rounds);
    for round in 1..=rounds {
        let beliefs = schedule.beliefs(round);
        check_schedule(schedule, round, &beliefs)?;
        let (coeffs, eq) = play_round(params, &beliefs, carbon, round)?;
        let round_params = params.with_exogenous_carbon(carbon);
        carbon = eq.carbon;
        records.push(RoundRecord {
            round,
            floor_slack: minimal_carbon_slack(&round_params, &coeffs, &eq),
            beliefs,
            carbon,
            quantity: eq.quantity,
            temperature: alpha_true.map(|t| t * carbon),
            equilibrium: eq,
        });
    }
    Ok(DynamicsTrace {
        initial_carbon: params.exogenous_carbon,
        rounds: records,
    })
}

/// Settings of the long-run checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitOptions {
    pub tol: f64,
    pub max_rounds: usize,
    /// Carbon above which the run is declared divergent; defaults to
    /// `10⁶ · max(finite limit, 1)`.
    pub divergence_bound: Option<f64>,
    pub alpha_true: Option<f64>,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_rounds: 100_000,
            divergence_bound: None,
            alpha_true: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LimitVerdict {
    Converged { round: usize, gap: f64 },
    NotConverged { rounds: usize, gap: f64 },
    Diverged { round: usize, carbon: f64 },
    /// Carbon at or beyond the limit with nobody emitting; it stays put.
    Stalled { round: usize, carbon: f64 },
}

impl LimitVerdict {
    pub fn converged(&self) -> bool {
        matches!(self, LimitVerdict::Converged { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitReport {
    pub verdict: LimitVerdict,
    /// The predicted limit of `K_m` (possibly infinite).
    pub target: f64,
    pub rounds_played: usize,
    pub final_carbon: f64,
    pub final_quantity: f64,
    /// Largest `K_m − bound_m` over rounds, where the bound is the limit
    /// (with green firms) or `(A − c)/β_i` of the most concerned producer
    /// (without). Negative when the strict bound held throughout.
    pub max_bound_excess: f64,
    /// Smallest minimal-carbon slack over rounds with `Q < z`.
    pub min_floor_slack: Option<f64>,
    /// Whether `K_m` never decreased.
    pub monotone: bool,
    pub final_temperature: Option<f64>,
    /// `α_true · target`, equal to `d / (b α_true)` when the firms' beliefs
    /// converge to the true response.
    pub limit_temperature: Option<f64>,
}

type RoundBound<'a> = dyn Fn(usize, &[FirmCoeffs], &Equilibrium) -> Result<f64> + 'a;

struct LimitRun<'a> {
    params: &'a EconomyParams,
    schedule: &'a dyn BeliefSchedule,
    options: LimitOptions,
    target: f64,
    /// Returns the round's bound on `K_m` and checks the hypothesis.
    round_bound: &'a RoundBound<'a>,
}

impl LimitRun<'_> {
    fn run(&self) -> Result<LimitReport> {
        let params = self.params;
        let opts = self.options;
        let default_bound = 1e6 * if self.target.is_finite() { self.target.max(1.0) } else { 1.0 };
        let divergence = opts.divergence_bound.unwrap_or(default_bound);
        let mut carbon = params.exogenous_carbon;
        let mut quantity = 0.0;
        let mut max_bound_excess = f64::NEG_INFINITY;
        let mut min_floor_slack: Option<f64> = None;
        let mut monotone = true;
        let mut verdict = None;
        let mut played = 0;
        for round in 1..=opts.max_rounds {
            let beliefs = self.schedule.beliefs(round);
            check_schedule(self.schedule, round, &beliefs)?;
            let (coeffs, eq) = play_round(params, &beliefs, carbon, round)?;
            let round_params = params.with_exogenous_carbon(carbon);
            if let Some(s) = minimal_carbon_slack(&round_params, &coeffs, &eq) {
                min_floor_slack = Some(min_floor_slack.map_or(s, |m| m.min(s)));
            }
            let bound = (self.round_bound)(round, &coeffs, &eq)?;
            monotone &= eq.carbon >= carbon;
            let emitted = eq.carbon > carbon;
            carbon = eq.carbon;
            quantity = eq.quantity;
            played = round;
            max_bound_excess = max_bound_excess.max(carbon - bound);

            let gap = (carbon - self.target).abs();
            if gap < opts.tol {
                verdict = Some(LimitVerdict::Converged { round, gap });
                break;
            }
            if carbon > divergence {
                verdict = Some(LimitVerdict::Diverged { round, carbon });
                break;
            }
            if !emitted && carbon >= self.target {
                verdict = Some(LimitVerdict::Stalled { round, carbon });
                break;
            }
        }
        let verdict = verdict.unwrap_or(LimitVerdict::NotConverged {
            rounds: played,
            gap: (carbon - self.target).abs(),
        });
        Ok(LimitReport {
            verdict,
            target: self.target,
            rounds_played: played,
            final_carbon: carbon,
            final_quantity: quantity,
            max_bound_excess,
            min_floor_slack,
            monotone,
            final_temperature: opts.alpha_true.map(|t| t * carbon),
            limit_temperature: opts.alpha_true.map(|t| t * self.target),
        })
    }
}

fn check_options(options: &LimitOptions) -> Result<()> {
    if !(options.tol > 0.0) {
        return Err(crate::error::invalid("tol", format!("must be positive, got {}", options.tol)));
    }
    if options.max_rounds == 0 {
        return Err(crate::error::invalid("max_rounds", "must be at least 1"));
    }
    Ok(())
}

/// Hypothesis slack for comparing schedule values with declared limits.
const LIMIT_SLACK: f64 = 1e-12;

/// Long run with mitigation available (`c + d < A`): `K_m` approaches the
/// largest long-run coefficient `a` from below.
pub fn check_limit_green(
    params: &EconomyParams,
    schedule: &dyn BeliefSchedule,
    options: LimitOptions,
) -> Result<LimitReport> {
    params.validate()?;
    check_options(&options)?;
    if params.z() <= 0.0 {
        return Err(CoreError::Precondition(format!(
            "mitigation needs c + d < A, got c + d = {} and A = {}",
            params.unit_cost + params.green_premium,
            params.demand_intercept
        )));
    }
    let target = schedule.limit_coefficient(params).ok_or_else(|| {
        CoreError::Precondition("schedule does not declare its limiting coefficient".into())
    })?;
    let bound = |round: usize, coeffs: &[FirmCoeffs], _: &Equilibrium| -> Result<f64> {
        for (firm, c) in coeffs.iter().enumerate() {
            if c.a > target * (1.0 + LIMIT_SLACK) {
                return Err(CoreError::Hypothesis {
                    round,
                    firm,
                    detail: format!("coefficient {} exceeds the declared limit {target}", c.a),
                });
            }
        }
        Ok(target)
    };
    LimitRun {
        params,
        schedule,
        options,
        target,
        round_bound: &bound,
    }
    .run()
}

/// Long run without mitigation (`c < A ≤ c + d`): `K_m` approaches
/// `(A − c)/β` with `β` the smallest long-run concern.
pub fn check_limit_no_green(
    params: &EconomyParams,
    schedule: &dyn BeliefSchedule,
    options: LimitOptions,
) -> Result<LimitReport> {
    params.validate()?;
    check_options(&options)?;
    let margin = params.margin();
    if !(margin > 0.0 && params.z() <= 0.0) {
        return Err(CoreError::Precondition(format!(
            "expected c < A <= c + d, got A = {}, c = {}, d = {}",
            params.demand_intercept, params.unit_cost, params.green_premium
        )));
    }
    let beta = schedule.limit_beta(params).ok_or_else(|| {
        CoreError::Precondition("schedule does not declare its limiting concern".into())
    })?;
    let target = if beta == 0.0 { f64::INFINITY } else { margin / beta };
    let bound = |round: usize, coeffs: &[FirmCoeffs], eq: &Equilibrium| -> Result<f64> {
        for (firm, c) in coeffs.iter().enumerate() {
            if c.beta < beta * (1.0 - LIMIT_SLACK) {
                return Err(CoreError::Hypothesis {
                    round,
                    firm,
                    detail: format!("concern {} is below the declared limit {beta}", c.beta),
                });
            }
        }
        // Every producer is red, so K_m < (A − c)/β_i for each of them.
        let producers = coeffs
            .iter()
            .zip(&eq.colors)
            .filter(|(_, col)| **col == Color::Red)
            .map(|(c, _)| if c.beta == 0.0 { f64::INFINITY } else { margin / c.beta });
        Ok(producers.fold(f64::INFINITY, f64::min))
    };
    LimitRun {
        params,
        schedule,
        options,
        target,
        round_bound: &bound,
    }
    .run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve;

    fn params() -> EconomyParams {
        EconomyParams::new(10.0, 1.0, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn one_round_is_the_one_shot_game() {
        let p = params();
        let beliefs = vec![FirmBelief::new(0.5), FirmBelief::new(0.4)];
        let trace = simulate(&p, &ConstantBeliefs(beliefs.clone()), 1, None).unwrap();
        assert_eq!(trace.rounds[0].equilibrium, solve(&p, &beliefs).unwrap());
    }

    #[test]
    fn constant_beliefs_approach_largest_coefficient_from_below() {
        let p = params();
        let schedule = ConstantBeliefs(vec![FirmBelief::new(0.5), FirmBelief::new(0.4)]);
        let trace = simulate(&p, &schedule, 200, None).unwrap();
        let mut prev = 0.0;
        for r in &trace.rounds {
            assert!(r.carbon >= prev && r.carbon < 2.5);
            prev = r.carbon;
        }
        assert!(2.5 - prev < 1e-9);
        let report = check_limit_green(&p, &schedule, LimitOptions::default()).unwrap();
        assert!(report.verdict.converged());
        assert!(report.max_bound_excess < 0.0);
    }

    #[test]
    fn skeptics_diverge() {
        let p = params();
        let schedule = ConstantBeliefs(vec![FirmBelief::new(0.0), FirmBelief::new(0.5)]);
        let trace = simulate(&p, &schedule, 50, None).unwrap();
        for w in trace.rounds.windows(2) {
            assert!(w[1].carbon - w[0].carbon >= p.margin() / 3.0 - 1e-12);
        }
        let options = LimitOptions {
            divergence_bound: Some(1e3),
            ..LimitOptions::default()
        };
        let report = check_limit_green(&p, &schedule, options).unwrap();
        assert!(matches!(report.verdict, LimitVerdict::Diverged { .. }));
    }

    #[test]
    fn infinitely_concerned_firms_emit_nothing() {
        let p = params().with_exogenous_carbon(0.7);
        let schedule = ConstantBeliefs(vec![FirmBelief::new(f64::INFINITY); 2]);
        let trace = simulate(&p, &schedule, 5, None).unwrap();
        assert!(trace.rounds.iter().all(|r| r.carbon == 0.7));
    }

    #[test]
    fn no_mitigation_limit() {
        // A − c = 2 < d = 3 and β = 1.
        let p = EconomyParams::new(3.0, 1.0, 1.0, 3.0, 0.0).unwrap();
        let schedule = ConstantBeliefs(vec![FirmBelief::new(1.0), FirmBelief::new(2.0)]);
        let report = check_limit_no_green(&p, &schedule, LimitOptions::default()).unwrap();
        assert!(report.verdict.converged(), "{report:?}");
        assert!(report.max_bound_excess < 0.0);
        assert!((report.final_carbon - 2.0).abs() < 1e-6);
    }

    #[test]
    fn saturated_stock_stalls() {
        let p = EconomyParams::new(3.0, 1.0, 1.0, 3.0, 5.0).unwrap();
        let schedule = ConstantBeliefs(vec![FirmBelief::new(1.0)]);
        let report = check_limit_no_green(&p, &schedule, LimitOptions::default()).unwrap();
        assert!(matches!(report.verdict, LimitVerdict::Stalled { .. }));
        assert_eq!(report.final_carbon, 5.0);
    }

    #[test]
    fn hypothesis_breach_names_round_and_firm() {
        let p = params();
        let schedule = FnSchedule {
            firms: 2,
            generator: Box::new(|m| {
                let late = if m >= 3 { 0.1 } else { 0.5 };
                vec![FirmBelief::new(0.5), FirmBelief::new(late)]
            }),
            limit_coefficient: Some(2.0),
            limit_beta: None,
        };
        let err = check_limit_green(&p, &schedule, LimitOptions::default()).unwrap_err();
        assert!(matches!(err, CoreError::Hypothesis { round: 3, firm: 1, .. }), "{err:?}");
    }

    #[test]
    fn geometric_schedule_reaches_limit() {
        let p = params();
        let limit = vec![FirmBelief::new(1.0 / 3.0), FirmBelief::new(0.5)];
        let schedule = GeometricBeliefs::new(vec![2.0, 1.0], limit, 0.9).unwrap();
        let options = LimitOptions {
            alpha_true: Some((1.0f64 / 3.0).sqrt()),
            ..LimitOptions::default()
        };
        let report = check_limit_green(&p, &schedule, options).unwrap();
        assert!(report.verdict.converged());
        assert!((report.target - 3.0).abs() < 1e-12);
        assert!(report.min_floor_slack.unwrap() >= -1e-12);
    }
}
