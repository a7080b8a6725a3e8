use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use cournot_core::dynamics::{
    check_limit_green, check_limit_no_green, simulate, BeliefSchedule, ConstantBeliefs,
    GeometricBeliefs, LimitOptions,
};
use cournot_core::statics::{statics_report, FiniteDifferenceOptions};
use cournot_core::two_firm::{regime_map, GridSpec};
use cournot_core::utility::{interior_carbon_profile, solve_symmetric};
use cournot_core::{
    iterate_best_response, profile_equilibrium, solve, verify_equilibrium, EconomyParams,
    Equilibrium, FirmBelief, IterationOptions, Strategy, VerificationReport,
};

use crate::config::{LimitCheck, RunConfig, ScheduleBlock, CONFIG_VERSION};
use crate::output::{json_bytes, num, opt_num, sibling_json, Outputs, Table};
use crate::{CliError, Format, Settings};

#[derive(Debug, Serialize)]
struct EconomyOut {
    #[serde(rename = "A")]
    demand_intercept: f64,
    b: f64,
    c: f64,
    d: f64,
    #[serde(rename = "K_ex")]
    exogenous_carbon: f64,
}

impl From<&EconomyParams> for EconomyOut {
    fn from(p: &EconomyParams) -> Self {
        Self {
            demand_intercept: p.demand_intercept,
            b: p.tax_slope,
            c: p.unit_cost,
            d: p.green_premium,
            exogenous_carbon: p.exogenous_carbon,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FirmRow {
    pub firm_id: usize,
    pub alpha_sq: Option<f64>,
    pub beta: Option<f64>,
    pub a: Option<f64>,
    pub color: String,
    pub q: f64,
    pub r: f64,
    pub k: f64,
}

#[derive(Debug, Serialize)]
struct Aggregates {
    quantity: f64,
    carbon: f64,
    emitted_carbon: f64,
    n_white: usize,
    n_green: usize,
    n_orange: usize,
    n_red: usize,
    best_response_gap: f64,
}

#[derive(Debug, Serialize)]
struct SolveOut<'a> {
    version: u32,
    seed: u64,
    economy: EconomyOut,
    aggregates: Aggregates,
    firms: &'a [FirmRow],
}

/// The part of a `solve` JSON that `verify` reads back.
#[derive(Debug, Deserialize)]
struct SavedProfile {
    firms: Vec<FirmRow>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn firm_rows(params: &EconomyParams, beliefs: &[FirmBelief], eq: &Equilibrium) -> Vec<FirmRow> {
    beliefs
        .iter()
        .zip(eq.strategies.iter().zip(&eq.colors))
        .enumerate()
        .map(|(i, (b, (s, color)))| {
            let c = b.coeffs(params);
            FirmRow {
                firm_id: i,
                alpha_sq: finite(b.alpha_sq),
                beta: finite(c.beta),
                a: finite(c.a),
                color: color.name().to_string(),
                q: s.q,
                r: s.r,
                k: s.k,
            }
        })
        .collect()
}

fn firm_table(rows: &[FirmRow]) -> Result<Vec<u8>, CliError> {
    let mut table = Table::new(["firm_id", "alpha_sq", "beta", "a", "color", "q", "r", "k"])?;
    for f in rows {
        table.row([
            f.firm_id.to_string(),
            opt_num(f.alpha_sq),
            opt_num(f.beta),
            opt_num(f.a),
            f.color.clone(),
            num(f.q),
            num(f.r),
            num(f.k),
        ])?;
    }
    table.into_bytes()
}

pub fn run_solve(config: &RunConfig, settings: &Settings, out: &Path) -> Result<Outputs, CliError> {
    let params = config.params()?;
    let beliefs = config.beliefs(settings.seed)?;
    let eq = solve(&params, &beliefs).map_err(CliError::from_core)?;
    let rows = firm_rows(&params, &beliefs, &eq);
    let s = &eq.stats;
    let summary = SolveOut {
        version: CONFIG_VERSION,
        seed: settings.seed,
        economy: (&params).into(),
        aggregates: Aggregates {
            quantity: eq.quantity,
            carbon: eq.carbon,
            emitted_carbon: eq.carbon - params.exogenous_carbon,
            n_white: s.n_white,
            n_green: s.n_green,
            n_orange: s.n_orange,
            n_red: s.n_red,
            best_response_gap: eq.residual,
        },
        firms: &rows,
    };
    let mut outputs = Outputs::default();
    match settings.table_format() {
        Format::Json => outputs.add(out.to_path_buf(), json_bytes(&summary)?),
        Format::Csv => {
            outputs.add(out.to_path_buf(), firm_table(&rows)?);
            outputs.add(sibling_json(out), json_bytes(&summary)?);
        }
    }
    Ok(outputs)
}

#[derive(Debug, Serialize)]
struct IterationCheck {
    /// Sup-norm distance between the iterated and the checked profile.
    distance: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct VerifyOut {
    version: u32,
    seed: u64,
    tol: f64,
    source: String,
    report: VerificationReport,
    max_violation: f64,
    passed: bool,
    colors: Vec<String>,
    iteration: IterationCheck,
}

/// Checks a saved profile (or a fresh solve) against the equilibrium
/// conditions. The report is written either way; a failed check exits as a
/// solver error.
pub fn run_verify(
    config: &RunConfig,
    settings: &Settings,
    profile: Option<&Path>,
    out: &Path,
) -> Result<(Outputs, bool), CliError> {
    if settings.format == Some(Format::Csv) {
        return Err(CliError::Config("verify writes JSON only".into()));
    }
    let params = config.params()?;
    let beliefs = config.beliefs(settings.seed)?;
    let (eq, source) = match profile {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let saved: SavedProfile = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if saved.firms.len() != beliefs.len() {
                return Err(CliError::Config(format!(
                    "{}: {} firms in the profile, {} in the config",
                    path.display(),
                    saved.firms.len(),
                    beliefs.len()
                )));
            }
            let strategies = saved.firms.iter().map(|f| Strategy::from_qk(f.q, f.k)).collect();
            let eq = profile_equilibrium(&params, &beliefs, strategies).map_err(CliError::from_core)?;
            (eq, path.display().to_string())
        }
        None => (solve(&params, &beliefs).map_err(CliError::from_core)?, "solve".to_string()),
    };
    let report = verify_equilibrium(&params, &beliefs, &eq);
    let tol = settings.tol.unwrap_or(1e-10);
    let options = IterationOptions {
        max_iter: settings.max_iter.unwrap_or(100_000),
        ..IterationOptions::for_firms(beliefs.len())
    };
    let start = vec![Strategy::ZERO; beliefs.len()];
    let iteration = match iterate_best_response(&params, &beliefs, &start, options) {
        Ok(it) => IterationCheck {
            distance: Some(it.distance(&eq)),
            error: None,
        },
        Err(e) => IterationCheck {
            distance: None,
            error: Some(e.to_string()),
        },
    };
    let max_violation = report.max_violation();
    let passed = max_violation < tol;
    let summary = VerifyOut {
        version: CONFIG_VERSION,
        seed: settings.seed,
        tol,
        source,
        report,
        max_violation,
        passed,
        colors: eq.colors.iter().map(|c| c.name().to_string()).collect(),
        iteration,
    };
    let mut outputs = Outputs::default();
    outputs.add(out.to_path_buf(), json_bytes(&summary)?);
    Ok((outputs, passed))
}

pub fn run_two_firm_map(
    config: &RunConfig,
    settings: &Settings,
    out: &Path,
) -> Result<Outputs, CliError> {
    let params = config.params()?;
    let g = config
        .two_firm_map
        .ok_or_else(|| CliError::Config("two_firm_map: missing".into()))?;
    let grid = GridSpec {
        a1_min: g.a1_min,
        a1_max: g.a1_max,
        a2_min: g.a2_min,
        a2_max: g.a2_max,
        a1_points: g.a1_points,
        a2_points: g.a2_points,
    };
    let cells = regime_map(&params, &grid).map_err(CliError::from_core)?;
    let mut outputs = Outputs::default();
    let bytes = match settings.table_format() {
        Format::Json => json_bytes(&cells)?,
        Format::Csv => {
            let mut table = Table::new(["a1", "a2", "regime", "Q", "K", "q1", "q2", "k1", "k2"])?;
            for c in &cells {
                table.row([
                    num(c.a1),
                    num(c.a2),
                    c.regime.name().to_string(),
                    num(c.quantity),
                    num(c.carbon),
                    num(c.q1),
                    num(c.q2),
                    num(c.k1),
                    num(c.k2),
                ])?;
            }
            table.into_bytes()?
        }
    };
    outputs.add(out.to_path_buf(), bytes);
    Ok(outputs)
}

pub fn run_statics(config: &RunConfig, settings: &Settings, out: &Path) -> Result<Outputs, CliError> {
    let params = config.params()?;
    let beliefs = config.beliefs(settings.seed)?;
    let block = config.statics.unwrap_or_default();
    let defaults = FiniteDifferenceOptions::default();
    let options = FiniteDifferenceOptions {
        step: block.step.unwrap_or(defaults.step),
        min_step: block.min_step.unwrap_or(defaults.min_step),
    };
    let report = statics_report(&params, &beliefs, options).map_err(CliError::from_core)?;
    let mut outputs = Outputs::default();
    let bytes = match settings.table_format() {
        Format::Json => json_bytes(&report)?,
        Format::Csv => {
            let mut table = Table::new([
                "quantity",
                "direction",
                "analytic",
                "finite_difference",
                "abs_error",
                "rel_error",
                "predicted_sign",
                "resolved_sign",
            ])?;
            for p in &report.partials {
                let sign = match p.direction {
                    cournot_core::statics::Direction::Belief(j) => report
                        .signs
                        .iter()
                        .find(|s| s.firm == j && s.quantity == p.quantity),
                    _ => None,
                };
                table.row([
                    p.quantity.label(),
                    p.direction.label(),
                    num(p.analytic),
                    opt_num(p.finite_difference),
                    opt_num(p.abs_error),
                    opt_num(p.rel_error),
                    sign.map(|s| s.predicted.name().to_string()).unwrap_or_default(),
                    sign.map(|s| s.resolved.name().to_string()).unwrap_or_default(),
                ])?;
            }
            table.into_bytes()?
        }
    };
    outputs.add(out.to_path_buf(), bytes);
    Ok(outputs)
}

#[derive(Debug, Serialize)]
struct DynamicsOut<'a, T: Serialize> {
    version: u32,
    seed: u64,
    rounds: Option<&'a T>,
    limit: Option<cournot_core::dynamics::LimitReport>,
}

pub fn run_dynamics(config: &RunConfig, settings: &Settings, out: &Path) -> Result<Outputs, CliError> {
    let params = config.params()?;
    let beliefs = config.beliefs(settings.seed)?;
    let block = config
        .dynamics
        .as_ref()
        .ok_or_else(|| CliError::Config("dynamics: missing".into()))?;
    let schedule: Box<dyn BeliefSchedule> = match &block.schedule {
        ScheduleBlock::Constant => Box::new(ConstantBeliefs(beliefs.clone())),
        ScheduleBlock::Geometric { start, ratio } => {
            if start.len() != beliefs.len() {
                return Err(CliError::Config(format!(
                    "dynamics.schedule.start: {} entries for {} firms",
                    start.len(),
                    beliefs.len()
                )));
            }
            Box::new(
                GeometricBeliefs::new(start.clone(), beliefs.clone(), *ratio)
                    .map_err(|e| CliError::Config(format!("dynamics.schedule: {e}")))?,
            )
        }
    };
    let trace =
        simulate(&params, schedule.as_ref(), block.rounds, block.alpha_true).map_err(CliError::from_core)?;
    let limit = match block.limit {
        None => None,
        Some(check) => {
            let defaults = LimitOptions::default();
            let options = LimitOptions {
                tol: settings.tol.unwrap_or(defaults.tol),
                max_rounds: settings.max_iter.unwrap_or(defaults.max_rounds),
                divergence_bound: block.divergence_bound,
                alpha_true: block.alpha_true,
            };
            let report = match check {
                LimitCheck::Green => check_limit_green(&params, schedule.as_ref(), options),
                LimitCheck::NoGreen => check_limit_no_green(&params, schedule.as_ref(), options),
            };
            Some(report.map_err(CliError::from_core)?)
        }
    };

    let mut outputs = Outputs::default();
    match settings.table_format() {
        Format::Json => {
            let summary = DynamicsOut {
                version: CONFIG_VERSION,
                seed: settings.seed,
                rounds: Some(&trace.rounds),
                limit,
            };
            outputs.add(out.to_path_buf(), json_bytes(&summary)?);
        }
        Format::Csv => {
            let n = beliefs.len();
            let mut header = vec!["round".to_string(), "K".into(), "Q".into(), "T".into()];
            for i in 0..n {
                header.extend([format!("q{i}"), format!("r{i}"), format!("k{i}")]);
            }
            let mut table = Table::new(&header)?;
            for r in &trace.rounds {
                let mut row = vec![
                    r.round.to_string(),
                    num(r.carbon),
                    num(r.quantity),
                    opt_num(r.temperature),
                ];
                for s in &r.equilibrium.strategies {
                    row.extend([num(s.q), num(s.r), num(s.k)]);
                }
                table.row(&row)?;
            }
            outputs.add(out.to_path_buf(), table.into_bytes()?);
            if limit.is_some() {
                let summary: DynamicsOut<'_, ()> = DynamicsOut {
                    version: CONFIG_VERSION,
                    seed: settings.seed,
                    rounds: None,
                    limit,
                };
                outputs.add(sibling_json(out), json_bytes(&summary)?);
            }
        }
    }
    Ok(outputs)
}

#[derive(Debug, Serialize)]
struct UtilityOut {
    version: u32,
    function: String,
    n: usize,
    closed_form: Option<f64>,
    solution: Option<cournot_core::utility::SymmetricSolution>,
    carbon_profile: Option<cournot_core::utility::CarbonProfile>,
    carbon_profile_error: Option<String>,
}

pub fn run_utility(config: &RunConfig, settings: &Settings, out: &Path) -> Result<Outputs, CliError> {
    if settings.format == Some(Format::Csv) {
        return Err(CliError::Config("utility writes JSON only".into()));
    }
    let params = config.params()?;
    let block = config
        .utility
        .as_ref()
        .ok_or_else(|| CliError::Config("utility: missing".into()))?;
    let beliefs = if config.firms.is_some() || config.random_firms.is_some() {
        Some(config.beliefs(settings.seed)?)
    } else {
        None
    };
    let n = match (block.n, &beliefs) {
        (Some(n), _) => n,
        (None, Some(b)) => b.len(),
        (None, None) => return Err(CliError::Config("utility.n: missing and no firms given".into())),
    };
    let spec = config.utility_spec(block);
    let solution = solve_symmetric(&spec, &params, n, block.bracket, settings.tol.unwrap_or(1e-12))
        .map_err(CliError::from_core)?;

    let (mut carbon_profile, mut carbon_profile_error) = (None, None);
    if let (Some(sol), Some(beliefs)) = (&solution, &beliefs) {
        if beliefs.len() == n {
            match interior_carbon_profile(&params, beliefs, sol.quantity) {
                Ok(p) => carbon_profile = Some(p),
                Err(e) => carbon_profile_error = Some(e.to_string()),
            }
        }
    }
    let summary = UtilityOut {
        version: CONFIG_VERSION,
        function: format!("{spec:?}"),
        n,
        closed_form: spec.closed_form(&params, n),
        solution,
        carbon_profile,
        carbon_profile_error,
    };
    let mut outputs = Outputs::default();
    outputs.add(out.to_path_buf(), json_bytes(&summary)?);
    Ok(outputs)
}
