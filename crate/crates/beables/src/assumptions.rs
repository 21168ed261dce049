//! The assumptions that force the CHSH bound of 2, as checkable
//! conditional-independence statements over a model's full joint.
//!
//! With settings mixed in by a strictly positive prior, the full joint
//! ranges over `(a, b, c, A, B, lambda, mu, nu)`. Each assumption asserts
//! one conditional independence:
//!
//! * outcome factorization: `A ⫫ (b, mu, B) | (a, c, lambda, nu)` and
//!   symmetrically for `B`;
//! * no correlation: `lambda ⫫ mu | (nu, a, b, c)`;
//! * no nonlocal conspiracy: `lambda ⫫ b | (nu, a, c)` and
//!   `mu ⫫ a | (nu, b, c)`;
//! * no conspiracy: `nu ⫫ (a, b) | c`;
//! * no contextuality: every setting triple is available (structural, not
//!   probabilistic).
//!
//! When all hold the CHSH quantity cannot exceed 2; dropping any one of
//! them reopens the algebraic maximum of 4. Quantum mechanics sits
//! strictly between at `2*sqrt(2)` without satisfying the full set.

use std::fmt;

use thiserror::Error;

use crate::model::{BeablesModel, ModelError, SettingsPrior};
use crate::prob::{CiDeviation, JointDistribution, ProbError};
use crate::quantum::tsirelson_bound;

#[derive(Debug, Error)]
pub enum AssumptionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

// ── Assumption vocabulary ───────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AssumptionKind {
    BellFactorizationA,
    BellFactorizationB,
    NoCorrelation,
    NoNonlocalConspiracyA,
    NoNonlocalConspiracyB,
    NoConspiracy,
    NoContextuality,
}

impl AssumptionKind {
    pub const ALL: [AssumptionKind; 7] = [
        AssumptionKind::BellFactorizationA,
        AssumptionKind::BellFactorizationB,
        AssumptionKind::NoCorrelation,
        AssumptionKind::NoNonlocalConspiracyA,
        AssumptionKind::NoNonlocalConspiracyB,
        AssumptionKind::NoConspiracy,
        AssumptionKind::NoContextuality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AssumptionKind::BellFactorizationA => "bell_factorization_a",
            AssumptionKind::BellFactorizationB => "bell_factorization_b",
            AssumptionKind::NoCorrelation => "no_correlation",
            AssumptionKind::NoNonlocalConspiracyA => "no_nonlocal_conspiracy_a",
            AssumptionKind::NoNonlocalConspiracyB => "no_nonlocal_conspiracy_b",
            AssumptionKind::NoConspiracy => "no_conspiracy",
            AssumptionKind::NoContextuality => "no_contextuality",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        Self::ALL.into_iter().find(|k| k.name() == lower)
    }
}

impl fmt::Display for AssumptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which assumptions are enforced. The optimizer widens the dependency
/// structure of the hidden beables exactly where a flag is relaxed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssumptionSet {
    pub bell_factorization_a: bool,
    pub bell_factorization_b: bool,
    pub no_correlation: bool,
    pub no_nonlocal_conspiracy_a: bool,
    pub no_nonlocal_conspiracy_b: bool,
    pub no_conspiracy: bool,
    pub no_contextuality: bool,
}

impl AssumptionSet {
    pub fn all_enforced() -> Self {
        Self {
            bell_factorization_a: true,
            bell_factorization_b: true,
            no_correlation: true,
            no_nonlocal_conspiracy_a: true,
            no_nonlocal_conspiracy_b: true,
            no_conspiracy: true,
            no_contextuality: true,
        }
    }

    pub fn relax(mut self, kind: AssumptionKind) -> Self {
        *self.flag_mut(kind) = false;
        self
    }

    pub fn is_enforced(&self, kind: AssumptionKind) -> bool {
        match kind {
            AssumptionKind::BellFactorizationA => self.bell_factorization_a,
            AssumptionKind::BellFactorizationB => self.bell_factorization_b,
            AssumptionKind::NoCorrelation => self.no_correlation,
            AssumptionKind::NoNonlocalConspiracyA => self.no_nonlocal_conspiracy_a,
            AssumptionKind::NoNonlocalConspiracyB => self.no_nonlocal_conspiracy_b,
            AssumptionKind::NoConspiracy => self.no_conspiracy,
            AssumptionKind::NoContextuality => self.no_contextuality,
        }
    }

    fn flag_mut(&mut self, kind: AssumptionKind) -> &mut bool {
        match kind {
            AssumptionKind::BellFactorizationA => &mut self.bell_factorization_a,
            AssumptionKind::BellFactorizationB => &mut self.bell_factorization_b,
            AssumptionKind::NoCorrelation => &mut self.no_correlation,
            AssumptionKind::NoNonlocalConspiracyA => &mut self.no_nonlocal_conspiracy_a,
            AssumptionKind::NoNonlocalConspiracyB => &mut self.no_nonlocal_conspiracy_b,
            AssumptionKind::NoConspiracy => &mut self.no_conspiracy,
            AssumptionKind::NoContextuality => &mut self.no_contextuality,
        }
    }

    pub fn relaxed(&self) -> Vec<AssumptionKind> {
        AssumptionKind::ALL
            .into_iter()
            .filter(|&k| !self.is_enforced(k))
            .collect()
    }
}

impl Default for AssumptionSet {
    fn default() -> Self {
        Self::all_enforced()
    }
}

// ── Checkers ────────────────────────────────────────────────────────────

fn full_joint(
    model: &BeablesModel,
    prior: &SettingsPrior,
) -> Result<JointDistribution, AssumptionError> {
    Ok(model.full_joint(prior)?)
}

/// Deviation of the outcome factorizations: `A` screened from
/// `(b, mu, B)` by `(a, c, lambda, nu)`, and the mirror statement for `B`.
pub fn check_bell_factorization(
    model: &BeablesModel,
    prior: &SettingsPrior,
) -> Result<(CiDeviation, CiDeviation), AssumptionError> {
    let joint = full_joint(model, prior)?;
    bell_factorization_of(&joint)
}

fn bell_factorization_of(
    joint: &JointDistribution,
) -> Result<(CiDeviation, CiDeviation), AssumptionError> {
    let dev_a = joint.ci_deviation(&["A"], &["b", "mu", "B"], &["a", "c", "lambda", "nu"])?;
    let dev_b = joint.ci_deviation(&["B"], &["a", "lambda", "A"], &["b", "c", "mu", "nu"])?;
    Ok((dev_a, dev_b))
}

/// Deviation of `lambda ⫫ mu | (nu, a, b, c)`: correlations between the
/// wings' hidden beables not screened by the common past.
pub fn check_no_correlation(
    model: &BeablesModel,
    prior: &SettingsPrior,
) -> Result<CiDeviation, AssumptionError> {
    let joint = full_joint(model, prior)?;
    Ok(joint.ci_deviation(&["lambda"], &["mu"], &["nu", "a", "b", "c"])?)
}

/// Deviations of `lambda ⫫ b | (nu, a, c)` and `mu ⫫ a | (nu, b, c)`:
/// each wing's hidden beable ignoring the remote setting.
pub fn check_no_nonlocal_conspiracy(
    model: &BeablesModel,
    prior: &SettingsPrior,
) -> Result<(CiDeviation, CiDeviation), AssumptionError> {
    let joint = full_joint(model, prior)?;
    let dev_a = joint.ci_deviation(&["lambda"], &["b"], &["nu", "a", "c"])?;
    let dev_b = joint.ci_deviation(&["mu"], &["a"], &["nu", "b", "c"])?;
    Ok((dev_a, dev_b))
}

/// Deviation of `nu ⫫ (a, b) | c`: the common-past beable ignoring the
/// wing settings. With a single `c` label this is the unconditional
/// statement `p(nu | a, b) = p(nu)`.
pub fn check_no_conspiracy(
    model: &BeablesModel,
    prior: &SettingsPrior,
) -> Result<CiDeviation, AssumptionError> {
    let joint = full_joint(model, prior)?;
    Ok(joint.ci_deviation(&["nu"], &["a", "b"], &["c"])?)
}

/// Structural check that every setting triple is available. A coupling
/// equal to the full product passes; anything smaller lists its missing
/// triples.
#[derive(Debug, Clone)]
pub struct ContextualityCheck {
    pub passed: bool,
    pub missing: Vec<(String, String, String)>,
}

pub fn check_no_contextuality(model: &BeablesModel) -> ContextualityCheck {
    let spaces = model.spaces();
    let mut missing = Vec::new();
    if let Some(coupling) = model.coupling() {
        for a in spaces.a().labels() {
            for b in spaces.b().labels() {
                for c in spaces.c().labels() {
                    if !coupling.allows(a, b, c) {
                        missing.push((a.clone(), b.clone(), c.clone()));
                    }
                }
            }
        }
    }
    ContextualityCheck {
        passed: missing.is_empty(),
        missing,
    }
}

// ── Reports ─────────────────────────────────────────────────────────────

/// Verdict for one assumption. For the probabilistic assumptions the
/// deviations come from [`CiDeviation`]; the structural contextuality
/// check reports 0 or 1 with its missing triples.
#[derive(Debug, Clone)]
pub struct AssumptionFinding {
    pub kind: AssumptionKind,
    pub max_dev: f64,
    pub weighted_dev: f64,
    pub passed: bool,
    /// `(variable, label)` pairs of the worst offending context, when one
    /// deviates at all.
    pub worst_context: Option<Vec<(String, String)>>,
    /// Missing setting triples; only ever non-empty for contextuality.
    pub missing_triples: Vec<(String, String, String)>,
}

/// All seven verdicts plus the CHSH bound they imply: 2 when every
/// assumption passes, 4 otherwise, with the quantum reference `2*sqrt(2)`
/// alongside for comparison.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub tolerance: f64,
    pub findings: Vec<AssumptionFinding>,
    pub bound: f64,
    pub quantum_reference: f64,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.findings.iter().all(|f| f.passed)
    }

    pub fn finding(&self, kind: AssumptionKind) -> &AssumptionFinding {
        self.findings
            .iter()
            .find(|f| f.kind == kind)
            .expect("report carries every assumption kind")
    }
}

fn finding_from_deviation(
    kind: AssumptionKind,
    dev: &CiDeviation,
    tolerance: f64,
) -> AssumptionFinding {
    AssumptionFinding {
        kind,
        max_dev: dev.max_dev,
        weighted_dev: dev.weighted_dev,
        passed: dev.max_dev <= tolerance,
        worst_context: if dev.max_dev > 0.0 {
            dev.worst_context().map(|c| c.context.clone())
        } else {
            None
        },
        missing_triples: Vec::new(),
    }
}

/// Run every checker at the given tolerance. The full joint is assembled
/// once; a strictly positive prior guarantees every setting context is
/// represented in it.
pub fn full_report(
    model: &BeablesModel,
    prior: &SettingsPrior,
    tolerance: f64,
) -> Result<AssumptionReport, AssumptionError> {
    let joint = full_joint(model, prior)?;
    let (fact_a, fact_b) = bell_factorization_of(&joint)?;
    let correlation = joint.ci_deviation(&["lambda"], &["mu"], &["nu", "a", "b", "c"])?;
    let nonlocal_a = joint.ci_deviation(&["lambda"], &["b"], &["nu", "a", "c"])?;
    let nonlocal_b = joint.ci_deviation(&["mu"], &["a"], &["nu", "b", "c"])?;
    let conspiracy = joint.ci_deviation(&["nu"], &["a", "b"], &["c"])?;
    let contextuality = check_no_contextuality(model);

    let mut findings = vec![
        finding_from_deviation(AssumptionKind::BellFactorizationA, &fact_a, tolerance),
        finding_from_deviation(AssumptionKind::BellFactorizationB, &fact_b, tolerance),
        finding_from_deviation(AssumptionKind::NoCorrelation, &correlation, tolerance),
        finding_from_deviation(
            AssumptionKind::NoNonlocalConspiracyA,
            &nonlocal_a,
            tolerance,
        ),
        finding_from_deviation(
            AssumptionKind::NoNonlocalConspiracyB,
            &nonlocal_b,
            tolerance,
        ),
        finding_from_deviation(AssumptionKind::NoConspiracy, &conspiracy, tolerance),
    ];
    let structural = if contextuality.passed { 0.0 } else { 1.0 };
    findings.push(AssumptionFinding {
        kind: AssumptionKind::NoContextuality,
        max_dev: structural,
        weighted_dev: structural,
        passed: contextuality.passed,
        worst_context: None,
        missing_triples: contextuality.missing,
    });

    let bound = if findings.iter().all(|f| f.passed) {
        2.0
    } else {
        4.0
    };
    Ok(AssumptionReport {
        tolerance,
        findings,
        bound,
        quantum_reference: tsirelson_bound(),
    })
}
