//! Finite beables models of Bell experiments.
//!
//! A beables model assigns, to every joint choice of measurement settings
//! `(a, b, c)`, an exact finite joint distribution over the two outcomes
//! `A`, `B` and three hidden variables: `lambda` (local to the A wing),
//! `mu` (local to the B wing), and `nu` (shared common past). On top of
//! that representation the crate provides:
//!
//! * exact marginalization, conditioning, and conditional-independence
//!   deviation measures ([`prob`]);
//! * CHSH correlators and their maximization over setting quadruples
//!   ([`model`]);
//! * checkers for the factorization and no-conspiracy assumptions that
//!   together force the CHSH bound of 2, with the bound of 4 when any of
//!   them is dropped ([`assumptions`]);
//! * the quantum singlet reference sitting strictly between the two at
//!   `2*sqrt(2)` ([`quantum`]);
//! * enumeration, coordinate ascent, local-polytope membership, and
//!   hidden-variable completions of observed statistics ([`optimizer`]);
//! * a canonical model file format and report serialization ([`format`]).

pub mod assumptions;
pub mod format;
pub mod model;
pub mod optimizer;
pub mod prob;
pub mod quantum;

/// Joint distributions must sum to 1 within this slack. Inputs are exact
/// decimal data, so anything looser than accumulated rounding is a bug.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Default tolerance for distribution equality and checker verdicts.
/// Every entry point that compares probabilities accepts an explicit
/// override; this is the value used when none is given.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

pub use assumptions::{AssumptionKind, AssumptionReport, AssumptionSet};
pub use model::{
    BeablesModel, ChshResult, CorrelatorTable, SettingCoupling, SettingsPrior, SignChoice,
};
pub use optimizer::{ObservedJoint, OptimizationProblem, OptimizationResult};
pub use prob::{CiDeviation, ConditionalTable, FiniteSpace, JointDistribution, Variable};
pub use quantum::QuantumScenario;
