//! Beables models of a two-wing Bell experiment and their CHSH
//! functionals.
//!
//! A model fixes eight spaces: settings `a`, `b`, `c`, hidden beables
//! `lambda` (A wing), `mu` (B wing), `nu` (shared past), and outcomes `A`,
//! `B`. For every allowed setting triple it stores one exact joint
//! distribution over `(A, B, lambda, mu, nu)`. Settings may be restricted
//! to a subset of triples through a [`SettingCoupling`], the degenerate
//! case in which one setting is a function of the others.
//!
//! Outcome labels carry real values in `[-1, 1]`; the mean product
//! `M(a, b, c) = E[value(A) * value(B)]` is the correlator entering the
//! CHSH quantity `|M(a,b,c) - M(a,b',c)| + |M(a',b,c) + M(a',b',c)|` and
//! its sign variants.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::prob::{strides_of, FiniteSpace, JointDistribution, ProbError, Variable};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown {role} label {label:?}")]
    UnknownLabel { role: &'static str, label: String },
    #[error("setting triple ({a}, {b}, {c}) is not allowed by the coupling")]
    DisallowedTriple { a: String, b: String, c: String },
    #[error("no context joint stored for ({a}, {b}, {c})")]
    MissingContext { a: String, b: String, c: String },
    #[error("context joint for ({a}, {b}, {c}) must range over (A, B, lambda, mu, nu) with the model's spaces")]
    ContextVariablesMismatch { a: String, b: String, c: String },
    #[error("value map for outcome {side} has {actual} entries, space has {expected}")]
    ValueMapLength {
        side: char,
        expected: usize,
        actual: usize,
    },
    #[error(
        "outcome space {side} has {cardinality} labels; a default value map exists only for 2"
    )]
    NoDefaultValues { side: char, cardinality: usize },
    #[error("coupling lists no setting triples")]
    EmptyCoupling,
    #[error("CHSH quadruple needs two distinct labels per side")]
    DegenerateQuadruple,
    #[error("table has several c labels; pass the context explicitly")]
    AmbiguousContext,
    #[error("coupling maps ({a}, {b}) to more than one c; CHSH over coupled triples is undefined")]
    NonFunctionalCoupling { a: String, b: String },
    #[error("coupling has no c for ({a}, {b})")]
    UncoupledPair { a: String, b: String },
    #[error("side {side} needs at least two setting labels")]
    TooFewSettings { side: char },
    #[error("no CHSH quadruple has all four coupled correlators")]
    NoEvaluableQuadruple,
    #[error("correlator table misses entry ({a}, {b}, {c})")]
    TableIncomplete { a: String, b: String, c: String },
    #[error("correlator {value} at ({a}, {b}, {c}) lies outside [-1, 1]")]
    EntryOutOfRange {
        a: String,
        b: String,
        c: String,
        value: f64,
    },
    #[error("product-form deviation requires the full setting product, not a coupled table")]
    CoupledTable,
    #[error("settings prior must cover exactly the allowed triples with positive weight")]
    BadPrior,
    #[error(transparent)]
    Prob(#[from] ProbError),
}

// ── Spaces ──────────────────────────────────────────────────────────────

/// The eight spaces of a model. Space names are fixed by role so that
/// joint-distribution variables line up across every context.
#[derive(Debug, Clone)]
pub struct ModelSpaces {
    a: FiniteSpace,
    b: FiniteSpace,
    c: FiniteSpace,
    lambda: FiniteSpace,
    mu: FiniteSpace,
    nu: FiniteSpace,
    outcome_a: FiniteSpace,
    outcome_b: FiniteSpace,
}

impl ModelSpaces {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: Vec<String>,
        b: Vec<String>,
        c: Vec<String>,
        lambda: Vec<String>,
        mu: Vec<String>,
        nu: Vec<String>,
        outcome_a: Vec<String>,
        outcome_b: Vec<String>,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            a: FiniteSpace::new("a", a)?,
            b: FiniteSpace::new("b", b)?,
            c: FiniteSpace::new("c", c)?,
            lambda: FiniteSpace::new("lambda", lambda)?,
            mu: FiniteSpace::new("mu", mu)?,
            nu: FiniteSpace::new("nu", nu)?,
            outcome_a: FiniteSpace::new("A", outcome_a)?,
            outcome_b: FiniteSpace::new("B", outcome_b)?,
        })
    }

    pub fn a(&self) -> &FiniteSpace {
        &self.a
    }
    pub fn b(&self) -> &FiniteSpace {
        &self.b
    }
    pub fn c(&self) -> &FiniteSpace {
        &self.c
    }
    pub fn lambda(&self) -> &FiniteSpace {
        &self.lambda
    }
    pub fn mu(&self) -> &FiniteSpace {
        &self.mu
    }
    pub fn nu(&self) -> &FiniteSpace {
        &self.nu
    }
    pub fn outcome_a(&self) -> &FiniteSpace {
        &self.outcome_a
    }
    pub fn outcome_b(&self) -> &FiniteSpace {
        &self.outcome_b
    }

    /// Variables of a context joint, in the canonical order
    /// `(A, B, lambda, mu, nu)`.
    pub fn context_variables(&self) -> Vec<Variable> {
        vec![
            Variable::new("A", self.outcome_a.clone()),
            Variable::new("B", self.outcome_b.clone()),
            Variable::new("lambda", self.lambda.clone()),
            Variable::new("mu", self.mu.clone()),
            Variable::new("nu", self.nu.clone()),
        ]
    }
}

// ── Setting couplings ───────────────────────────────────────────────────

/// Restriction of the settings to a subset of `(a, b, c)` triples. The
/// experimentally central case is `c = f(a, b)`: every `(a, b)` pair maps
/// to exactly one `c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SettingCoupling {
    triples: BTreeSet<(String, String, String)>,
}

impl SettingCoupling {
    pub fn from_triples(
        triples: impl IntoIterator<Item = (String, String, String)>,
    ) -> Result<Self, ModelError> {
        let triples: BTreeSet<_> = triples.into_iter().collect();
        if triples.is_empty() {
            return Err(ModelError::EmptyCoupling);
        }
        Ok(Self { triples })
    }

    /// Coupling from an explicit `c = f(a, b)` table.
    pub fn from_function(
        map: impl IntoIterator<Item = ((String, String), String)>,
    ) -> Result<Self, ModelError> {
        Self::from_triples(map.into_iter().map(|((a, b), c)| (a, b, c)))
    }

    pub fn allows(&self, a: &str, b: &str, c: &str) -> bool {
        self.triples
            .contains(&(a.to_owned(), b.to_owned(), c.to_owned()))
    }

    pub fn triples(&self) -> impl Iterator<Item = &(String, String, String)> {
        self.triples.iter()
    }

    /// The unique `c` coupled to `(a, b)`, if the coupling is functional
    /// there.
    pub fn context_of(&self, a: &str, b: &str) -> Result<&str, ModelError> {
        let mut found = None;
        for (ta, tb, tc) in &self.triples {
            if ta == a && tb == b {
                if found.is_some() {
                    return Err(ModelError::NonFunctionalCoupling {
                        a: a.to_owned(),
                        b: b.to_owned(),
                    });
                }
                found = Some(tc.as_str());
            }
        }
        found.ok_or_else(|| ModelError::UncoupledPair {
            a: a.to_owned(),
            b: b.to_owned(),
        })
    }

    /// Whether the coupling is the full Cartesian product of the given
    /// label lists, i.e. no restriction at all.
    pub fn is_full_product(&self, a: &[String], b: &[String], c: &[String]) -> bool {
        self.triples.len() == a.len() * b.len() * c.len()
    }
}

// ── Beables models ──────────────────────────────────────────────────────

/// One exact joint distribution over `(A, B, lambda, mu, nu)` per allowed
/// setting triple, plus outcome value maps and an optional coupling.
///
/// Construction enforces structure (labels exist, context joints range
/// over the right variables); [`BeablesModel::validate`] reports the
/// remaining invariants, so that ill-formed data can be described rather
/// than merely rejected.
#[derive(Debug, Clone)]
pub struct BeablesModel {
    spaces: ModelSpaces,
    value_map_a: Vec<f64>,
    value_map_b: Vec<f64>,
    coupling: Option<SettingCoupling>,
    context_joints: BTreeMap<(String, String, String), JointDistribution>,
}

impl BeablesModel {
    pub fn new(
        spaces: ModelSpaces,
        value_map_a: Vec<f64>,
        value_map_b: Vec<f64>,
        coupling: Option<SettingCoupling>,
        context_joints: BTreeMap<(String, String, String), JointDistribution>,
    ) -> Result<Self, ModelError> {
        if value_map_a.len() != spaces.outcome_a.cardinality() {
            return Err(ModelError::ValueMapLength {
                side: 'A',
                expected: spaces.outcome_a.cardinality(),
                actual: value_map_a.len(),
            });
        }
        if value_map_b.len() != spaces.outcome_b.cardinality() {
            return Err(ModelError::ValueMapLength {
                side: 'B',
                expected: spaces.outcome_b.cardinality(),
                actual: value_map_b.len(),
            });
        }
        if let Some(coupling) = &coupling {
            for (a, b, c) in coupling.triples() {
                check_label(&spaces.a, a, "a")?;
                check_label(&spaces.b, b, "b")?;
                check_label(&spaces.c, c, "c")?;
            }
        }
        let expected_vars = spaces.context_variables();
        for ((a, b, c), joint) in &context_joints {
            check_label(&spaces.a, a, "a")?;
            check_label(&spaces.b, b, "b")?;
            check_label(&spaces.c, c, "c")?;
            if joint.variables() != expected_vars.as_slice() {
                return Err(ModelError::ContextVariablesMismatch {
                    a: a.clone(),
                    b: b.clone(),
                    c: c.clone(),
                });
            }
        }
        Ok(Self {
            spaces,
            value_map_a,
            value_map_b,
            coupling,
            context_joints,
        })
    }

    /// The default value map for a binary outcome space: first label `+1`,
    /// second label `-1`.
    pub fn default_values(space: &FiniteSpace, side: char) -> Result<Vec<f64>, ModelError> {
        if space.cardinality() == 2 {
            Ok(vec![1.0, -1.0])
        } else {
            Err(ModelError::NoDefaultValues {
                side,
                cardinality: space.cardinality(),
            })
        }
    }

    pub fn spaces(&self) -> &ModelSpaces {
        &self.spaces
    }

    pub fn coupling(&self) -> Option<&SettingCoupling> {
        self.coupling.as_ref()
    }

    pub fn value_map_a(&self) -> &[f64] {
        &self.value_map_a
    }

    pub fn value_map_b(&self) -> &[f64] {
        &self.value_map_b
    }

    pub fn context_joint(&self, a: &str, b: &str, c: &str) -> Option<&JointDistribution> {
        self.context_joints
            .get(&(a.to_owned(), b.to_owned(), c.to_owned()))
    }

    /// Allowed setting triples in declared label order (`a` outermost,
    /// `c` innermost), restricted by the coupling when one is present.
    pub fn allowed_triples(&self) -> Vec<(String, String, String)> {
        let mut triples = Vec::new();
        for a in self.spaces.a.labels() {
            for b in self.spaces.b.labels() {
                for c in self.spaces.c.labels() {
                    let allowed = match &self.coupling {
                        Some(coupling) => coupling.allows(a, b, c),
                        None => true,
                    };
                    if allowed {
                        triples.push((a.clone(), b.clone(), c.clone()));
                    }
                }
            }
        }
        triples
    }

    /// Every invariant violation, with the offending labels. An empty
    /// report means the model is well-formed.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (label, &value) in self.spaces.outcome_a.labels().iter().zip(&self.value_map_a) {
            if !(-1.0..=1.0).contains(&value) || !value.is_finite() {
                violations.push(Violation::ValueOutOfRange {
                    side: 'A',
                    label: label.clone(),
                    value,
                });
            }
        }
        for (label, &value) in self.spaces.outcome_b.labels().iter().zip(&self.value_map_b) {
            if !(-1.0..=1.0).contains(&value) || !value.is_finite() {
                violations.push(Violation::ValueOutOfRange {
                    side: 'B',
                    label: label.clone(),
                    value,
                });
            }
        }
        let allowed: BTreeSet<(String, String, String)> =
            self.allowed_triples().into_iter().collect();
        for triple in &allowed {
            if !self.context_joints.contains_key(triple) {
                violations.push(Violation::MissingContext(triple.clone()));
            }
        }
        for triple in self.context_joints.keys() {
            if !allowed.contains(triple) {
                violations.push(Violation::ExtraContext(triple.clone()));
            }
        }
        // Context joints are normalized by construction; re-derive the sums
        // anyway so a report stands on its own.
        for (triple, joint) in &self.context_joints {
            let sum: f64 = joint.weights().iter().sum();
            if (sum - 1.0).abs() > crate::NORMALIZATION_TOLERANCE {
                violations.push(Violation::NotNormalized {
                    triple: triple.clone(),
                    sum,
                });
            }
        }
        ValidationReport { violations }
    }

    /// `M(a, b, c) = E[value(A) * value(B)]` under the context joint.
    pub fn mean_product(&self, a: &str, b: &str, c: &str) -> Result<f64, ModelError> {
        check_label(&self.spaces.a, a, "a")?;
        check_label(&self.spaces.b, b, "b")?;
        check_label(&self.spaces.c, c, "c")?;
        if let Some(coupling) = &self.coupling {
            if !coupling.allows(a, b, c) {
                return Err(ModelError::DisallowedTriple {
                    a: a.to_owned(),
                    b: b.to_owned(),
                    c: c.to_owned(),
                });
            }
        }
        let joint = self
            .context_joint(a, b, c)
            .ok_or_else(|| ModelError::MissingContext {
                a: a.to_owned(),
                b: b.to_owned(),
                c: c.to_owned(),
            })?;
        let shape = joint.shape();
        let strides = strides_of(&shape);
        let mut sum = 0.0;
        for (flat, &w) in joint.weights().iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let ia = flat / strides[0] % shape[0];
            let ib = flat / strides[1] % shape[1];
            sum += w * self.value_map_a[ia] * self.value_map_b[ib];
        }
        Ok(sum)
    }

    /// Correlators for every allowed triple.
    pub fn correlator_table(&self) -> Result<CorrelatorTable, ModelError> {
        let mut entries = BTreeMap::new();
        for (a, b, c) in self.allowed_triples() {
            let value = self.mean_product(&a, &b, &c)?;
            entries.insert((a, b, c), value);
        }
        CorrelatorTable::new(
            self.spaces.a.labels().to_vec(),
            self.spaces.b.labels().to_vec(),
            self.spaces.c.labels().to_vec(),
            entries,
            self.coupling.clone(),
        )
    }

    /// Joint distribution over `(a, b, c, A, B, lambda, mu, nu)` obtained
    /// by mixing the context joints with a settings prior.
    pub fn full_joint(&self, prior: &SettingsPrior) -> Result<JointDistribution, ModelError> {
        prior.check_against(self)?;
        let mut variables = vec![
            Variable::new("a", self.spaces.a.clone()),
            Variable::new("b", self.spaces.b.clone()),
            Variable::new("c", self.spaces.c.clone()),
        ];
        variables.extend(self.spaces.context_variables());
        let context_size: usize = self
            .spaces
            .context_variables()
            .iter()
            .map(|v| v.space().cardinality())
            .product();
        let mut weights = vec![
            0.0;
            self.spaces.a.cardinality()
                * self.spaces.b.cardinality()
                * self.spaces.c.cardinality()
                * context_size
        ];
        let mut offset = 0;
        for a in self.spaces.a.labels() {
            for b in self.spaces.b.labels() {
                for c in self.spaces.c.labels() {
                    if let Some(&p) = prior.weight(a, b, c) {
                        let joint = self.context_joint(a, b, c).ok_or_else(|| {
                            ModelError::MissingContext {
                                a: a.clone(),
                                b: b.clone(),
                                c: c.clone(),
                            }
                        })?;
                        for (i, &w) in joint.weights().iter().enumerate() {
                            weights[offset + i] = p * w;
                        }
                    }
                    offset += context_size;
                }
            }
        }
        Ok(JointDistribution::new(variables, weights)?)
    }
}

fn check_label(space: &FiniteSpace, label: &str, role: &'static str) -> Result<(), ModelError> {
    if space.index_of(label).is_none() {
        return Err(ModelError::UnknownLabel {
            role,
            label: label.to_owned(),
        });
    }
    Ok(())
}

// ── Validation reports ──────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    MissingContext((String, String, String)),
    ExtraContext((String, String, String)),
    NotNormalized {
        triple: (String, String, String),
        sum: f64,
    },
    ValueOutOfRange {
        side: char,
        label: String,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingContext((a, b, c)) => {
                write!(f, "no context joint for ({a}, {b}, {c})")
            }
            Violation::ExtraContext((a, b, c)) => {
                write!(f, "context joint for disallowed triple ({a}, {b}, {c})")
            }
            Violation::NotNormalized {
                triple: (a, b, c),
                sum,
            } => {
                write!(
                    f,
                    "context joint for ({a}, {b}, {c}) sums to {sum}, expected 1"
                )
            }
            Violation::ValueOutOfRange { side, label, value } => {
                write!(
                    f,
                    "outcome {side} label {label:?} has value {value} outside [-1, 1]"
                )
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

// ── Settings priors ─────────────────────────────────────────────────────

/// Distribution over the allowed setting triples. Checkers require it to
/// be strictly positive so that every context is represented.
#[derive(Debug, Clone)]
pub struct SettingsPrior {
    weights: BTreeMap<(String, String, String), f64>,
}

impl SettingsPrior {
    pub fn uniform(model: &BeablesModel) -> Self {
        let triples = model.allowed_triples();
        let p = 1.0 / triples.len() as f64;
        Self {
            weights: triples.into_iter().map(|t| (t, p)).collect(),
        }
    }

    pub fn new(
        model: &BeablesModel,
        weights: BTreeMap<(String, String, String), f64>,
    ) -> Result<Self, ModelError> {
        let prior = Self { weights };
        prior.check_against(model)?;
        Ok(prior)
    }

    fn check_against(&self, model: &BeablesModel) -> Result<(), ModelError> {
        let allowed: BTreeSet<_> = model.allowed_triples().into_iter().collect();
        if self.weights.len() != allowed.len() {
            return Err(ModelError::BadPrior);
        }
        let mut sum = 0.0;
        for (triple, &w) in &self.weights {
            if !allowed.contains(triple) || w <= 0.0 || !w.is_finite() {
                return Err(ModelError::BadPrior);
            }
            sum += w;
        }
        if (sum - 1.0).abs() > crate::NORMALIZATION_TOLERANCE {
            return Err(ModelError::BadPrior);
        }
        Ok(())
    }

    pub fn weight(&self, a: &str, b: &str, c: &str) -> Option<&f64> {
        self.weights
            .get(&(a.to_owned(), b.to_owned(), c.to_owned()))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(String, String, String), &f64)> {
        self.weights.iter()
    }
}

// ── Correlator tables and CHSH ──────────────────────────────────────────

/// Sign variant of the CHSH quantity.
///
/// `MinusPlus` is `|M(a,b,c) - M(a,b',c)| + |M(a',b,c) + M(a',b',c)|`;
/// `PlusMinus` swaps the inner signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignChoice {
    MinusPlus,
    PlusMinus,
}

impl SignChoice {
    pub const BOTH: [SignChoice; 2] = [SignChoice::MinusPlus, SignChoice::PlusMinus];

    pub fn combine(self, m1: f64, m2: f64, m3: f64, m4: f64) -> f64 {
        match self {
            SignChoice::MinusPlus => (m1 - m2).abs() + (m3 + m4).abs(),
            SignChoice::PlusMinus => (m1 + m2).abs() + (m3 - m4).abs(),
        }
    }
}

impl fmt::Display for SignChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignChoice::MinusPlus => write!(f, "(-,+)"),
            SignChoice::PlusMinus => write!(f, "(+,-)"),
        }
    }
}

/// A CHSH evaluation: the quadruple, the sign variant, and the value.
/// `context` is `None` when the table is coupled and each pair `(x, y)`
/// uses its own `c = f(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChshResult {
    pub a: String,
    pub a_prime: String,
    pub b: String,
    pub b_prime: String,
    pub context: Option<String>,
    pub sign: SignChoice,
    pub value: f64,
}

impl fmt::Display for ChshResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.9} at a={}, a'={}, b={}, b'={}, sign {}",
            self.value, self.a, self.a_prime, self.b, self.b_prime, self.sign
        )?;
        if let Some(c) = &self.context {
            write!(f, ", c={c}")?;
        }
        Ok(())
    }
}

/// Correlators `M(a, b, c)` for every allowed setting triple, all within
/// `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct CorrelatorTable {
    a_labels: Vec<String>,
    b_labels: Vec<String>,
    c_labels: Vec<String>,
    entries: BTreeMap<(String, String, String), f64>,
    coupling: Option<SettingCoupling>,
}

/// Slack for the `[-1, 1]` entry bound: correlators computed from valid
/// models can exceed it only by accumulated rounding.
const ENTRY_SLACK: f64 = 1e-9;

impl CorrelatorTable {
    pub fn new(
        a_labels: Vec<String>,
        b_labels: Vec<String>,
        c_labels: Vec<String>,
        entries: BTreeMap<(String, String, String), f64>,
        coupling: Option<SettingCoupling>,
    ) -> Result<Self, ModelError> {
        let table = Self {
            a_labels,
            b_labels,
            c_labels,
            entries,
            coupling,
        };
        for a in &table.a_labels {
            for b in &table.b_labels {
                for c in &table.c_labels {
                    let allowed = match &table.coupling {
                        Some(coupling) => coupling.allows(a, b, c),
                        None => true,
                    };
                    if !allowed {
                        continue;
                    }
                    match table.entries.get(&(a.clone(), b.clone(), c.clone())) {
                        None => {
                            return Err(ModelError::TableIncomplete {
                                a: a.clone(),
                                b: b.clone(),
                                c: c.clone(),
                            })
                        }
                        Some(&value) if value.abs() > 1.0 + ENTRY_SLACK || !value.is_finite() => {
                            return Err(ModelError::EntryOutOfRange {
                                a: a.clone(),
                                b: b.clone(),
                                c: c.clone(),
                                value,
                            })
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(table)
    }

    pub fn a_labels(&self) -> &[String] {
        &self.a_labels
    }
    pub fn b_labels(&self) -> &[String] {
        &self.b_labels
    }
    pub fn c_labels(&self) -> &[String] {
        &self.c_labels
    }
    pub fn coupling(&self) -> Option<&SettingCoupling> {
        self.coupling.as_ref()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(String, String, String), &f64)> {
        self.entries.iter()
    }

    pub fn value(&self, a: &str, b: &str, c: &str) -> Result<f64, ModelError> {
        self.entries
            .get(&(a.to_owned(), b.to_owned(), c.to_owned()))
            .copied()
            .ok_or_else(|| ModelError::TableIncomplete {
                a: a.to_owned(),
                b: b.to_owned(),
                c: c.to_owned(),
            })
    }

    fn four(
        &self,
        a: &str,
        a_prime: &str,
        b: &str,
        b_prime: &str,
        c: Option<&str>,
    ) -> Result<([f64; 4], Option<String>), ModelError> {
        if a == a_prime || b == b_prime {
            return Err(ModelError::DegenerateQuadruple);
        }
        match &self.coupling {
            // Coupled table: each pair brings its own context, the
            // caller's c is irrelevant by construction.
            Some(coupling) if !self.is_effectively_full() => {
                let m1 = self.value(a, b, coupling.context_of(a, b)?)?;
                let m2 = self.value(a, b_prime, coupling.context_of(a, b_prime)?)?;
                let m3 = self.value(a_prime, b, coupling.context_of(a_prime, b)?)?;
                let m4 = self.value(a_prime, b_prime, coupling.context_of(a_prime, b_prime)?)?;
                Ok(([m1, m2, m3, m4], None))
            }
            _ => {
                let c = match c {
                    Some(c) => c,
                    None if self.c_labels.len() == 1 => &self.c_labels[0],
                    None => return Err(ModelError::AmbiguousContext),
                };
                if !self.c_labels.iter().any(|l| l == c) {
                    return Err(ModelError::UnknownLabel {
                        role: "c",
                        label: c.to_owned(),
                    });
                }
                let m1 = self.value(a, b, c)?;
                let m2 = self.value(a, b_prime, c)?;
                let m3 = self.value(a_prime, b, c)?;
                let m4 = self.value(a_prime, b_prime, c)?;
                Ok(([m1, m2, m3, m4], Some(c.to_owned())))
            }
        }
    }

    fn is_effectively_full(&self) -> bool {
        match &self.coupling {
            Some(coupling) => {
                coupling.is_full_product(&self.a_labels, &self.b_labels, &self.c_labels)
            }
            None => true,
        }
    }

    /// One CHSH evaluation. `c` may be omitted when the table has a single
    /// context or is coupled.
    pub fn chsh(
        &self,
        a: &str,
        a_prime: &str,
        b: &str,
        b_prime: &str,
        c: Option<&str>,
        sign: SignChoice,
    ) -> Result<ChshResult, ModelError> {
        for (label, labels, role) in [
            (a, &self.a_labels, "a"),
            (a_prime, &self.a_labels, "a"),
            (b, &self.b_labels, "b"),
            (b_prime, &self.b_labels, "b"),
        ] {
            if !labels.iter().any(|l| l == label) {
                return Err(ModelError::UnknownLabel {
                    role,
                    label: label.to_owned(),
                });
            }
        }
        let ([m1, m2, m3, m4], context) = self.four(a, a_prime, b, b_prime, c)?;
        Ok(ChshResult {
            a: a.to_owned(),
            a_prime: a_prime.to_owned(),
            b: b.to_owned(),
            b_prime: b_prime.to_owned(),
            context,
            sign,
            value: sign.combine(m1, m2, m3, m4),
        })
    }

    /// Maximum CHSH over all quadruples of distinct settings, contexts,
    /// and sign variants. Swapping `a` with `a'` only exchanges the two
    /// sign variants and swapping `b` with `b'` leaves both unchanged, so
    /// unordered pairs suffice. Iteration runs over lexicographically
    /// sorted labels with strict improvement, which makes the reported
    /// quadruple the lexicographically smallest among maximizers.
    pub fn max_chsh(&self) -> Result<ChshResult, ModelError> {
        if self.a_labels.len() < 2 {
            return Err(ModelError::TooFewSettings { side: 'a' });
        }
        if self.b_labels.len() < 2 {
            return Err(ModelError::TooFewSettings { side: 'b' });
        }
        let mut a_sorted = self.a_labels.clone();
        let mut b_sorted = self.b_labels.clone();
        let mut c_sorted = self.c_labels.clone();
        a_sorted.sort();
        b_sorted.sort();
        c_sorted.sort();
        let coupled = !self.is_effectively_full();
        let contexts: Vec<Option<&str>> = if coupled {
            vec![None]
        } else {
            c_sorted.iter().map(|c| Some(c.as_str())).collect()
        };

        let mut best: Option<ChshResult> = None;
        for (i, a) in a_sorted.iter().enumerate() {
            for a_prime in &a_sorted[i + 1..] {
                for (j, b) in b_sorted.iter().enumerate() {
                    for b_prime in &b_sorted[j + 1..] {
                        for c in &contexts {
                            for sign in SignChoice::BOTH {
                                let result = match self.chsh(a, a_prime, b, b_prime, *c, sign) {
                                    Ok(result) => result,
                                    // Coupled tables may not cover every
                                    // pair; those quadruples are simply
                                    // not part of the search space.
                                    Err(ModelError::UncoupledPair { .. }) => continue,
                                    Err(e) => return Err(e),
                                };
                                if best.as_ref().is_none_or(|b| result.value > b.value) {
                                    best = Some(result);
                                }
                            }
                        }
                    }
                }
            }
        }
        best.ok_or(ModelError::NoEvaluableQuadruple)
    }

    /// How far the table is from the rank-one form
    /// `M(a, b, c) = f_A(a, c) * f_B(b, c)` with factors in `[-1, 1]`:
    /// the maximum absolute residual of the best fit found by alternating
    /// least squares with clamping, over 10 seeded restarts per `c` slice
    /// plus a refinement pass. Requires the full setting product.
    pub fn product_form_deviation(&self, tol: f64) -> Result<f64, ModelError> {
        if !self.is_effectively_full() {
            return Err(ModelError::CoupledTable);
        }
        let na = self.a_labels.len();
        let nb = self.b_labels.len();
        let mut worst: f64 = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0xbea_b1e5);
        for c in &self.c_labels {
            let mut m = vec![0.0; na * nb];
            for (i, a) in self.a_labels.iter().enumerate() {
                for (j, b) in self.b_labels.iter().enumerate() {
                    m[i * nb + j] = self.value(a, b, c)?;
                }
            }
            let mut slice_best = f64::INFINITY;
            for restart in 0..10 {
                // The all-ones start solves every non-negative separable
                // slice immediately; the rest explore.
                let g0: Vec<f64> = if restart == 0 {
                    vec![1.0; nb]
                } else {
                    (0..nb).map(|_| rng.gen_range(-1.0..=1.0)).collect()
                };
                let residual = als_fit(&m, na, nb, g0, tol);
                slice_best = slice_best.min(residual);
            }
            // Refinement: restart from scratch at a tighter threshold.
            let g0: Vec<f64> = (0..nb).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            slice_best = slice_best.min(als_fit(&m, na, nb, g0, tol * 1e-3));
            worst = worst.max(slice_best);
        }
        Ok(worst)
    }
}

/// One alternating-least-squares fit of `m ≈ f ⊗ g` with both factors
/// clamped to `[-1, 1]`; returns the maximum absolute residual.
fn als_fit(m: &[f64], na: usize, nb: usize, mut g: Vec<f64>, tol: f64) -> f64 {
    let mut f = vec![0.0; na];
    for _ in 0..500 {
        let mut change: f64 = 0.0;
        for i in 0..na {
            let num: f64 = (0..nb).map(|j| m[i * nb + j] * g[j]).sum();
            let den: f64 = g.iter().map(|x| x * x).sum();
            let new = if den > 0.0 {
                (num / den).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            change = change.max((new - f[i]).abs());
            f[i] = new;
        }
        for j in 0..nb {
            let num: f64 = (0..na).map(|i| m[i * nb + j] * f[i]).sum();
            let den: f64 = f.iter().map(|x| x * x).sum();
            let new = if den > 0.0 {
                (num / den).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            change = change.max((new - g[j]).abs());
            g[j] = new;
        }
        if change < tol {
            break;
        }
    }
    let mut residual: f64 = 0.0;
    for i in 0..na {
        for j in 0..nb {
            residual = residual.max((m[i * nb + j] - f[i] * g[j]).abs());
        }
    }
    residual
}
