//! Flexibility analysis for decision makers with constant absolute risk
//! aversion.
//!
//! Prospects are valued by their certain equivalent `CE(X|r)`. Distorting the
//! risk aversion to `k·r` and sweeping `k ≥ 1` yields a flexibility curve;
//! comparing curves orders prospects, plans and decision-tree nodes by how
//! well they hold up under uncertainty the model left out.

pub mod cli;
pub mod error;
pub mod models;
pub mod orders;
pub mod prospects;
pub mod valuation;

pub use error::{Error, ErrorKind, Result};
pub use models::{
    adaptive_template, enumerate_policies, node_curve, policy_prospect, rollback, rollback_from,
    stigler_scenario, AdaptiveSpec, Commitment, DecisionTree, Node, Policy, Rollback, StiglerSpec,
    TreeBuilder,
};
pub use orders::{
    compare, find_threshold, tail_order, upper_envelope, Classification, EnvelopeSegment,
    FlexibilityVerdict, KRange, TailRationale, TailRelation, TailVerdict,
};
pub use prospects::{Discrete, Gaussian, Prospect, ProspectStats};
pub use valuation::{
    certain_equivalent, flexibility_curve, geometric_grid, mean_variance_approximation,
    money_of_utility, utility_of_money, CurvePoint, FlexibilityCurve, RiskAversion,
};
