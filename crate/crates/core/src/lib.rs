//! Cournot competition with an endogenous emission technology, where firms
//! disagree about the climate impact of carbon and face a temperature-linked
//! carbon tax.
//!
//! The crate provides
//!
//! - the single-firm best response and its regime ([`model`]),
//! - the unique n-firm equilibrium by regime enumeration, with an iterative
//!   cross-check ([`equilibrium`]),
//! - closed forms and regime maps for two firms ([`two_firm`]),
//! - analytic comparative statics with finite-difference checks ([`statics`]),
//! - the repeated game with accumulating carbon ([`dynamics`]),
//! - symmetric equilibria under non-quadratic utility ([`utility`]).

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod sampling;
pub mod statics;
pub mod two_firm;
pub mod utility;

pub use equilibrium::{
    iterate_best_response, profile_equilibrium, solve, solve_coeffs, validated_partitions, verify_equilibrium, Equilibrium,
    IterationOptions, PartitionStats, VerificationReport,
};
pub use error::{CoreError, Result};
pub use model::{
    best_response, classify_color, expected_profit, Color, EconomyParams, Environment,
    FirmBelief, FirmCoeffs, Strategy,
};
