//! The JSON run configuration.
//!
//! ```json
//! {
//!   "version": 1,
//!   "economy": { "A": 10, "b": 1, "c": 1, "d": 1, "K_ex": 0 },
//!   "firms": [ { "alpha_sq": 0.5 }, { "alpha_sq": 0.4, "risk_weight": 2 } ],
//!   "dynamics": { "rounds": 50, "schedule": { "kind": "constant" } }
//! }
//! ```
//!
//! Everything is checked before any solver runs, so a bad file never leaves
//! output behind.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use cournot_core::utility::UtilitySpec;
use cournot_core::{CoreError, EconomyParams, FirmBelief};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub economy: EconomyBlock,
    #[serde(default)]
    pub firms: Option<Vec<FirmBlock>>,
    #[serde(default)]
    pub random_firms: Option<RandomFirms>,
    #[serde(default)]
    pub two_firm_map: Option<GridBlock>,
    #[serde(default)]
    pub statics: Option<StaticsBlock>,
    #[serde(default)]
    pub dynamics: Option<DynamicsBlock>,
    #[serde(default)]
    pub utility: Option<UtilityBlock>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomyBlock {
    #[serde(rename = "A")]
    pub demand_intercept: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    #[serde(rename = "K_ex", default)]
    pub exogenous_carbon: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirmBlock {
    /// `null` stands for an infinite belief.
    pub alpha_sq: Option<f64>,
    #[serde(default)]
    pub risk_weight: Option<f64>,
}

/// Beliefs drawn from the seeded generator instead of listed.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomFirms {
    pub count: usize,
    #[serde(default)]
    pub allow_skeptics: bool,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub a1_min: f64,
    pub a1_max: f64,
    pub a2_min: f64,
    pub a2_max: f64,
    pub a1_points: usize,
    pub a2_points: usize,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticsBlock {
    pub step: Option<f64>,
    pub min_step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsBlock {
    pub rounds: usize,
    #[serde(default)]
    pub alpha_true: Option<f64>,
    #[serde(default)]
    pub schedule: ScheduleBlock,
    /// Which long-run check to run after the trace, if any.
    #[serde(default)]
    pub limit: Option<LimitCheck>,
    #[serde(default)]
    pub divergence_bound: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleBlock {
    /// The firms' beliefs every round.
    #[default]
    Constant,
    /// Beliefs start at `start` and approach the firms' beliefs geometrically.
    Geometric { start: Vec<f64>, ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitCheck {
    Green,
    NoGreen,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityBlock {
    pub function: UtilityFunction,
    /// Number of firms; defaults to the length of the firm list.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub bracket: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilityFunction {
    /// The linear demand `A − Q`, with `A` from the economy block.
    Quadratic,
    Crra {
        gamma: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Log,
}

fn one() -> f64 {
    1.0
}

fn field_error(prefix: &str, err: CoreError) -> CliError {
    match err {
        CoreError::InvalidParameter { name, reason } => {
            CliError::Config(format!("{prefix}.{name}: {reason}"))
        }
        other => CliError::Config(format!("{prefix}: {other}")),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "version: expected {CONFIG_VERSION}, got {}",
                self.version
            )));
        }
        self.params()?;
        if self.firms.is_some() && self.random_firms.is_some() {
            return Err(CliError::Config(
                "firms and random_firms are mutually exclusive".into(),
            ));
        }
        for (i, f) in self.firms.iter().flatten().enumerate() {
            belief(f).validate().map_err(|e| field_error(&format!("firms[{i}]"), e))?;
        }
        if let Some(r) = self.random_firms {
            if r.count == 0 {
                return Err(CliError::Config("random_firms.count: must be at least 1".into()));
            }
        }
        if let Some(g) = &self.two_firm_map {
            for (name, v) in [
                ("a1_min", g.a1_min),
                ("a1_max", g.a1_max),
                ("a2_min", g.a2_min),
                ("a2_max", g.a2_max),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(CliError::Config(format!(
                        "two_firm_map.{name}: must be finite and >= 0, got {v}"
                    )));
                }
            }
            if g.a1_points < 2 || g.a2_points < 2 {
                return Err(CliError::Config(
                    "two_firm_map: at least two points per axis are needed".into(),
                ));
            }
            if g.a1_max < g.a1_min || g.a2_max < g.a2_min {
                return Err(CliError::Config("two_firm_map: max below min".into()));
            }
        }
        if let Some(s) = self.statics {
            for (name, v) in [("step", s.step), ("min_step", s.min_step)] {
                if let Some(v) = v {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(CliError::Config(format!(
                            "statics.{name}: must be finite and > 0, got {v}"
                        )));
                    }
                }
            }
        }
        if let Some(d) = &self.dynamics {
            if d.rounds == 0 {
                return Err(CliError::Config("dynamics.rounds: must be at least 1".into()));
            }
            if let Some(t) = d.alpha_true {
                if !(t.is_finite() && t >= 0.0) {
                    return Err(CliError::Config(format!(
                        "dynamics.alpha_true: must be finite and >= 0, got {t}"
                    )));
                }
            }
            if let ScheduleBlock::Geometric { start, ratio } = &d.schedule {
                if !(0.0..1.0).contains(ratio) {
                    return Err(CliError::Config(format!(
                        "dynamics.schedule.ratio: must lie in [0, 1), got {ratio}"
                    )));
                }
                if let Some(i) = start.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
                    return Err(CliError::Config(format!(
                        "dynamics.schedule.start[{i}]: must be finite and >= 0"
                    )));
                }
            }
        }
        if let Some(u) = &self.utility {
            self.utility_spec(u)
                .validate()
                .map_err(|e| field_error("utility.function", e))?;
            if u.n == Some(0) {
                return Err(CliError::Config("utility.n: must be at least 1".into()));
            }
            if let Some((lo, hi)) = u.bracket {
                if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                    return Err(CliError::Config(format!(
                        "utility.bracket: need 0 < lo < hi < inf, got [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<EconomyParams, CliError> {
        let e = self.economy;
        let params = EconomyParams {
            demand_intercept: e.demand_intercept,
            tax_slope: e.b,
            unit_cost: e.c,
            green_premium: e.d,
            exogenous_carbon: e.exogenous_carbon,
        };
        params.validate().map_err(|err| field_error("economy", err))?;
        Ok(params)
    }

    /// The listed firms, or `random_firms.count` draws from `seed`.
    pub fn beliefs(&self, seed: u64) -> Result<Vec<FirmBelief>, CliError> {
        if let Some(firms) = &self.firms {
            if firms.is_empty() {
                return Err(CliError::Config("firms: at least one firm is needed".into()));
            }
            return Ok(firms.iter().map(belief).collect());
        }
        if let Some(r) = self.random_firms {
            let mut rng = cournot_core::sampling::seeded_rng(seed);
            return Ok(cournot_core::sampling::random_beliefs(&mut rng, r.count, r.allow_skeptics));
        }
        Err(CliError::Config("firms: missing (or give random_firms)".into()))
    }

    pub fn utility_spec(&self, block: &UtilityBlock) -> UtilitySpec {
        match block.function {
            UtilityFunction::Quadratic => UtilitySpec::Quadratic {
                intercept: self.economy.demand_intercept,
            },
            UtilityFunction::Crra { gamma, scale } => UtilitySpec::Crra { gamma, scale },
            UtilityFunction::Log => UtilitySpec::Log,
        }
    }
}

fn belief(f: &FirmBlock) -> FirmBelief {
    FirmBelief {
        alpha_sq: f.alpha_sq.unwrap_or(f64::INFINITY),
        risk_weight: f.risk_weight,
    }
}

/// Reads `COURNOT_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var("COURNOT_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Config(format!("COURNOT_THREADS: {e}"))),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "COURNOT_THREADS: expected a positive integer, got {v:?}"
            ))),
        },
    }
}
