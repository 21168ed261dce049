//! Canonical on-disk documents: models, observed statistics, correlator
//! tables, and machine-readable reports.
//!
//! Documents are JSON with an explicit `format_version`. Every
//! probability, weight, and correlator in an input document is a decimal
//! string converted with correctly rounded decimal-to-binary parsing,
//! and canonical serialization writes the shortest decimal that parses
//! back to the same value, so a value survives any number of round trips
//! bit for bit. Arrays are dense in declared label order with the last
//! index fastest; together with versioning this pins the byte-level form
//! of a document, which is what the golden-file tests rely on.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assumptions::AssumptionReport;
use crate::model::{
    BeablesModel, ChshResult, CorrelatorTable, ModelError, ModelSpaces, SettingCoupling,
    SettingsPrior, SignChoice, ValidationReport,
};
use crate::prob::{FiniteSpace, JointDistribution, ProbError, Variable};

/// Version written by this build and the only one it reads.
pub const FORMAT_VERSION: u32 = 1;

// ── Errors ──────────────────────────────────────────────────────────────

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed document at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported format_version {found}; this reader understands {expected}")]
    Version { found: u32, expected: u32 },
    #[error("{field}: `{value}` is not a finite decimal number")]
    Number { field: String, value: String },
    #[error("{field}: probability `{value}` is negative")]
    NegativeProbability { field: String, value: String },
    #[error("context joint ({a}, {b}, {c}): {source}")]
    ContextJoint {
        a: String,
        b: String,
        c: String,
        #[source]
        source: Box<ProbError>,
    },
    #[error("{section}: ({a}, {b}, {c}) declared twice")]
    DuplicateEntry {
        section: &'static str,
        a: String,
        b: String,
        c: String,
    },
    #[error("observed documents need variables (A, s_A, B, s_B); found ({found})")]
    ObservedVariables { found: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

// ── Decimal strings ─────────────────────────────────────────────────────

/// Shortest decimal string that parses back to exactly `x`.
pub fn format_decimal(x: f64) -> String {
    format!("{x}")
}

fn parse_decimal(field: String, text: &str) -> Result<f64, FormatError> {
    match text.trim().parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(FormatError::Number {
            field,
            value: text.to_owned(),
        }),
    }
}

fn parse_probability(field: String, text: &str) -> Result<f64, FormatError> {
    let x = parse_decimal(field.clone(), text)?;
    if x < 0.0 {
        return Err(FormatError::NegativeProbability {
            field,
            value: text.to_owned(),
        });
    }
    Ok(x)
}

// ── Generic document plumbing ───────────────────────────────────────────

/// Parse any document type from JSON text, mapping syntax errors to a
/// line and column.
pub fn document_from_str<T: DeserializeOwned>(text: &str) -> Result<T, FormatError> {
    serde_json::from_str(text).map_err(|e| FormatError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Read and parse a document file.
pub fn read_document<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T, FormatError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })?;
    document_from_str(&text)
}

/// Canonical serialization: pretty JSON, declaration field order, one
/// trailing newline. Identical documents produce identical bytes.
pub fn canonical_json<T: Serialize>(doc: &T) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("documents are plain trees");
    text.push('\n');
    text
}

/// Write a document in canonical form.
pub fn write_document<T: Serialize>(path: impl AsRef<Path>, doc: &T) -> Result<(), FormatError> {
    let path = path.as_ref();
    std::fs::write(path, canonical_json(doc)).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

// ── Model documents ─────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacesDocument {
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub c: Vec<String>,
    pub lambda: Vec<String>,
    pub mu: Vec<String>,
    pub nu: Vec<String>,
    pub outcome_a: Vec<String>,
    pub outcome_b: Vec<String>,
}

/// Either an explicit allowed-triple list or the rows `(a, b, c)` of a
/// total function `c = f(a, b)`. Canonical serialization always writes
/// `triples`; `function` is accepted on input as a convenience.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingDocument {
    Triples(Vec<[String; 3]>),
    Function(Vec<[String; 3]>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextJointDocument {
    pub a: String,
    pub b: String,
    pub c: String,
    /// Dense over `(A, B, lambda, mu, nu)` in declared label order, last
    /// index fastest.
    pub probabilities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorEntryDocument {
    pub a: String,
    pub b: String,
    pub c: String,
    pub weight: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u32,
    pub spaces: SpacesDocument,
    /// Outcome values, one decimal per `outcome_a` label.
    pub value_map_a: Vec<String>,
    pub value_map_b: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingDocument>,
    pub context_joints: Vec<ContextJointDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings_prior: Option<Vec<PriorEntryDocument>>,
}

fn coupling_to_document(coupling: &SettingCoupling) -> CouplingDocument {
    CouplingDocument::Triples(
        coupling
            .triples()
            .map(|(a, b, c)| [a.clone(), b.clone(), c.clone()])
            .collect(),
    )
}

fn coupling_from_document(doc: &CouplingDocument) -> Result<SettingCoupling, FormatError> {
    match doc {
        CouplingDocument::Triples(rows) => Ok(SettingCoupling::from_triples(
            rows.iter()
                .map(|[a, b, c]| (a.clone(), b.clone(), c.clone())),
        )?),
        CouplingDocument::Function(rows) => {
            let mut map = BTreeMap::new();
            for [a, b, c] in rows {
                let prior = map.insert((a.clone(), b.clone()), c.clone());
                if prior.is_some_and(|p| &p != c) {
                    return Err(FormatError::Model(ModelError::NonFunctionalCoupling {
                        a: a.clone(),
                        b: b.clone(),
                    }));
                }
            }
            Ok(SettingCoupling::from_function(map)?)
        }
    }
}

impl ModelDocument {
    /// Canonical document of a model: couplings as sorted triples,
    /// context joints and prior entries in declared label order.
    pub fn from_model(model: &BeablesModel, prior: Option<&SettingsPrior>) -> Self {
        let spaces = model.spaces();
        let doc_spaces = SpacesDocument {
            a: spaces.a().labels().to_vec(),
            b: spaces.b().labels().to_vec(),
            c: spaces.c().labels().to_vec(),
            lambda: spaces.lambda().labels().to_vec(),
            mu: spaces.mu().labels().to_vec(),
            nu: spaces.nu().labels().to_vec(),
            outcome_a: spaces.outcome_a().labels().to_vec(),
            outcome_b: spaces.outcome_b().labels().to_vec(),
        };
        let mut context_joints = Vec::new();
        let mut prior_entries = Vec::new();
        for (a, b, c) in model.allowed_triples() {
            if let Some(joint) = model.context_joint(&a, &b, &c) {
                context_joints.push(ContextJointDocument {
                    a: a.clone(),
                    b: b.clone(),
                    c: c.clone(),
                    probabilities: joint
                        .weights()
                        .iter()
                        .copied()
                        .map(format_decimal)
                        .collect(),
                });
            }
            if let Some(prior) = prior {
                if let Some(&w) = prior.weight(&a, &b, &c) {
                    prior_entries.push(PriorEntryDocument {
                        a,
                        b,
                        c,
                        weight: format_decimal(w),
                    });
                }
            }
        }
        Self {
            format_version: FORMAT_VERSION,
            spaces: doc_spaces,
            value_map_a: model
                .value_map_a()
                .iter()
                .copied()
                .map(format_decimal)
                .collect(),
            value_map_b: model
                .value_map_b()
                .iter()
                .copied()
                .map(format_decimal)
                .collect(),
            coupling: model.coupling().map(coupling_to_document),
            context_joints,
            settings_prior: prior.map(|_| prior_entries),
        }
    }

    pub fn to_model(&self) -> Result<(BeablesModel, Option<SettingsPrior>), FormatError> {
        if self.format_version != FORMAT_VERSION {
            return Err(FormatError::Version {
                found: self.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let spaces = ModelSpaces::new(
            self.spaces.a.clone(),
            self.spaces.b.clone(),
            self.spaces.c.clone(),
            self.spaces.lambda.clone(),
            self.spaces.mu.clone(),
            self.spaces.nu.clone(),
            self.spaces.outcome_a.clone(),
            self.spaces.outcome_b.clone(),
        )?;
        let parse_values = |name: &str, texts: &[String]| -> Result<Vec<f64>, FormatError> {
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| parse_decimal(format!("{name}[{i}]"), t))
                .collect()
        };
        let value_map_a = parse_values("value_map_a", &self.value_map_a)?;
        let value_map_b = parse_values("value_map_b", &self.value_map_b)?;
        let coupling = self
            .coupling
            .as_ref()
            .map(coupling_from_document)
            .transpose()?;
        let vars = spaces.context_variables();
        let mut joints = BTreeMap::new();
        for (i, entry) in self.context_joints.iter().enumerate() {
            let weights: Vec<f64> = entry
                .probabilities
                .iter()
                .enumerate()
                .map(|(j, t)| {
                    parse_probability(format!("context_joints[{i}].probabilities[{j}]"), t)
                })
                .collect::<Result<_, _>>()?;
            let joint = JointDistribution::new(vars.clone(), weights).map_err(|source| {
                FormatError::ContextJoint {
                    a: entry.a.clone(),
                    b: entry.b.clone(),
                    c: entry.c.clone(),
                    source: Box::new(source),
                }
            })?;
            let key = (entry.a.clone(), entry.b.clone(), entry.c.clone());
            if joints.insert(key, joint).is_some() {
                return Err(FormatError::DuplicateEntry {
                    section: "context_joints",
                    a: entry.a.clone(),
                    b: entry.b.clone(),
                    c: entry.c.clone(),
                });
            }
        }
        let model = BeablesModel::new(spaces, value_map_a, value_map_b, coupling, joints)?;
        let prior = match &self.settings_prior {
            None => None,
            Some(entries) => {
                let mut weights = BTreeMap::new();
                for (i, entry) in entries.iter().enumerate() {
                    let w =
                        parse_probability(format!("settings_prior[{i}].weight"), &entry.weight)?;
                    let key = (entry.a.clone(), entry.b.clone(), entry.c.clone());
                    if weights.insert(key, w).is_some() {
                        return Err(FormatError::DuplicateEntry {
                            section: "settings_prior",
                            a: entry.a.clone(),
                            b: entry.b.clone(),
                            c: entry.c.clone(),
                        });
                    }
                }
                Some(SettingsPrior::new(&model, weights)?)
            }
        };
        Ok((model, prior))
    }
}

/// Parse a model file: read, decode, and build the in-memory model plus
/// its optional settings prior.
pub fn parse_model(
    path: impl AsRef<Path>,
) -> Result<(BeablesModel, Option<SettingsPrior>), FormatError> {
    read_document::<ModelDocument>(path)?.to_model()
}

// ── Observed-statistics documents ───────────────────────────────────────

/// Joint statistics of a two-wing experiment: outcomes and settings with
/// a dense probability array over `(A, s_A, B, s_B)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservedDocument {
    pub format_version: u32,
    pub outcomes_a: Vec<String>,
    pub settings_a: Vec<String>,
    pub outcomes_b: Vec<String>,
    pub settings_b: Vec<String>,
    /// Dense over `(A, s_A, B, s_B)`, last index fastest.
    pub probabilities: Vec<String>,
}

impl ObservedDocument {
    pub fn to_joint(&self) -> Result<JointDistribution, FormatError> {
        if self.format_version != FORMAT_VERSION {
            return Err(FormatError::Version {
                found: self.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let variables = vec![
            Variable::new("A", FiniteSpace::new("A", self.outcomes_a.clone())?),
            Variable::new("s_A", FiniteSpace::new("s_A", self.settings_a.clone())?),
            Variable::new("B", FiniteSpace::new("B", self.outcomes_b.clone())?),
            Variable::new("s_B", FiniteSpace::new("s_B", self.settings_b.clone())?),
        ];
        let weights: Vec<f64> = self
            .probabilities
            .iter()
            .enumerate()
            .map(|(i, t)| parse_probability(format!("probabilities[{i}]"), t))
            .collect::<Result<_, _>>()?;
        Ok(JointDistribution::new(variables, weights)?)
    }

    /// Canonical document of a joint over `(A, s_A, B, s_B)`; the
    /// variables may come in any order.
    pub fn from_joint(joint: &JointDistribution) -> Result<Self, FormatError> {
        let mut names: Vec<&str> = joint.variables().iter().map(|v| v.name()).collect();
        names.sort_unstable();
        if names != ["A", "B", "s_A", "s_B"] {
            return Err(FormatError::ObservedVariables {
                found: names.join(", "),
            });
        }
        let labels = |name: &str| -> Vec<String> {
            joint
                .variables()
                .iter()
                .find(|v| v.name() == name)
                .expect("checked above")
                .space()
                .labels()
                .to_vec()
        };
        let (outcomes_a, settings_a) = (labels("A"), labels("s_A"));
        let (outcomes_b, settings_b) = (labels("B"), labels("s_B"));
        let mut probabilities = Vec::new();
        for out_a in &outcomes_a {
            for s_a in &settings_a {
                for out_b in &outcomes_b {
                    for s_b in &settings_b {
                        let p = joint.prob(&[
                            ("A", out_a.as_str()),
                            ("s_A", s_a.as_str()),
                            ("B", out_b.as_str()),
                            ("s_B", s_b.as_str()),
                        ])?;
                        probabilities.push(format_decimal(p));
                    }
                }
            }
        }
        Ok(Self {
            format_version: FORMAT_VERSION,
            outcomes_a,
            settings_a,
            outcomes_b,
            settings_b,
            probabilities,
        })
    }
}

// ── Correlator-table documents ──────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntryDocument {
    pub a: String,
    pub b: String,
    pub c: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDocument {
    pub format_version: u32,
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub c: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingDocument>,
    pub entries: Vec<TableEntryDocument>,
}

impl TableDocument {
    pub fn from_table(table: &CorrelatorTable) -> Self {
        let mut entries = Vec::new();
        for a in table.a_labels() {
            for b in table.b_labels() {
                for c in table.c_labels() {
                    if let Ok(value) = table.value(a, b, c) {
                        entries.push(TableEntryDocument {
                            a: a.clone(),
                            b: b.clone(),
                            c: c.clone(),
                            value: format_decimal(value),
                        });
                    }
                }
            }
        }
        Self {
            format_version: FORMAT_VERSION,
            a: table.a_labels().to_vec(),
            b: table.b_labels().to_vec(),
            c: table.c_labels().to_vec(),
            coupling: table.coupling().map(coupling_to_document),
            entries,
        }
    }

    pub fn to_table(&self) -> Result<CorrelatorTable, FormatError> {
        if self.format_version != FORMAT_VERSION {
            return Err(FormatError::Version {
                found: self.format_version,
                expected: FORMAT_VERSION,
            });
        }
        let mut entries = BTreeMap::new();
        for (i, entry) in self.entries.iter().enumerate() {
            let value = parse_decimal(format!("entries[{i}].value"), &entry.value)?;
            let key = (entry.a.clone(), entry.b.clone(), entry.c.clone());
            if entries.insert(key, value).is_some() {
                return Err(FormatError::DuplicateEntry {
                    section: "entries",
                    a: entry.a.clone(),
                    b: entry.b.clone(),
                    c: entry.c.clone(),
                });
            }
        }
        let coupling = self
            .coupling
            .as_ref()
            .map(coupling_from_document)
            .transpose()?;
        Ok(CorrelatorTable::new(
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
            entries,
            coupling,
        )?)
    }
}

// ── Report documents ────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FindingDocument {
    pub assumption: String,
    pub max_deviation: f64,
    pub weighted_deviation: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_context: Option<Vec<[String; 2]>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_triples: Vec<[String; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionsSection {
    pub tolerance: f64,
    pub bound: f64,
    pub quantum_reference: f64,
    pub findings: Vec<FindingDocument>,
}

impl From<&AssumptionReport> for AssumptionsSection {
    fn from(report: &AssumptionReport) -> Self {
        Self {
            tolerance: report.tolerance,
            bound: report.bound,
            quantum_reference: report.quantum_reference,
            findings: report
                .findings
                .iter()
                .map(|f| FindingDocument {
                    assumption: f.kind.name().to_owned(),
                    max_deviation: f.max_dev,
                    weighted_deviation: f.weighted_dev,
                    passed: f.passed,
                    worst_context: f.worst_context.as_ref().map(|ctx| {
                        ctx.iter()
                            .map(|(var, label)| [var.clone(), label.clone()])
                            .collect()
                    }),
                    missing_triples: f
                        .missing_triples
                        .iter()
                        .map(|(a, b, c)| [a.clone(), b.clone(), c.clone()])
                        .collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChshDocument {
    pub value: f64,
    pub a: String,
    pub a_prime: String,
    pub b: String,
    pub b_prime: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    pub sign: String,
}

impl From<&ChshResult> for ChshDocument {
    fn from(result: &ChshResult) -> Self {
        Self {
            value: result.value,
            a: result.a.clone(),
            a_prime: result.a_prime.clone(),
            b: result.b.clone(),
            b_prime: result.b_prime.clone(),
            context: result.context.clone(),
            sign: match result.sign {
                SignChoice::MinusPlus => "minus_plus".to_owned(),
                SignChoice::PlusMinus => "plus_minus".to_owned(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatorEntryDocument {
    pub a: String,
    pub b: String,
    pub c: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelatorsSection {
    pub entries: Vec<CorrelatorEntryDocument>,
}

impl From<&CorrelatorTable> for CorrelatorsSection {
    fn from(table: &CorrelatorTable) -> Self {
        let mut entries = Vec::new();
        for a in table.a_labels() {
            for b in table.b_labels() {
                for c in table.c_labels() {
                    if let Ok(value) = table.value(a, b, c) {
                        entries.push(CorrelatorEntryDocument {
                            a: a.clone(),
                            b: b.clone(),
                            c: c.clone(),
                            value,
                        });
                    }
                }
            }
        }
        Self { entries }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationSection {
    /// `(a, b, c, lambda, mu, nu)` cardinalities of the search space.
    pub cardinalities: [usize; 6],
    pub relaxed: Vec<String>,
    pub seed: u64,
    pub chsh: f64,
    pub certificate: String,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanDocument {
    pub resolution: usize,
    pub value: f64,
    pub angles: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumSection {
    pub angles_a: Vec<f64>,
    pub angles_b: Vec<f64>,
    pub reference: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_chsh: Option<ChshDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionSection {
    pub reproduction_error: f64,
    pub assumptions: AssumptionsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_chsh: Option<ChshDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeSection {
    pub realizable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<ChshDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    pub valid: bool,
    pub violations: Vec<String>,
}

impl From<&ValidationReport> for ValidationSection {
    fn from(report: &ValidationReport) -> Self {
        Self {
            valid: report.is_ok(),
            violations: report.violations.iter().map(|v| v.to_string()).collect(),
        }
    }
}

/// Machine-readable run report. Which sections are present depends on
/// what was computed; every number in a section is recomputable by
/// calling the corresponding library operation directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub format_version: u32,
    /// What produced the report, e.g. the CLI subcommand name.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<AssumptionsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlators: Option<CorrelatorsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_chsh: Option<ChshDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimization: Option<OptimizationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum: Option<QuantumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion: Option<CompletionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polytope: Option<PolytopeSection>,
}

impl ReportDocument {
    pub fn new(source: impl Into<String>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            source: source.into(),
            validation: None,
            assumptions: None,
            correlators: None,
            max_chsh: None,
            optimization: None,
            quantum: None,
            completion: None,
            polytope: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assumptions::AssumptionSet;
    use crate::optimizer::{factorized_sampler, Cardinalities, OptimizationProblem};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_model(seed: u64) -> (BeablesModel, SettingsPrior) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let assumptions = AssumptionSet {
            no_conspiracy: rng.gen_bool(0.7),
            no_nonlocal_conspiracy_a: rng.gen_bool(0.7),
            no_correlation: rng.gen_bool(0.7),
            ..AssumptionSet::all_enforced()
        };
        let problem = if rng.gen_bool(0.3) {
            let cards = Cardinalities {
                a: 2,
                b: 3,
                c: 2,
                lambda: 2,
                mu: 3,
                nu: 2,
            };
            OptimizationProblem::new(cards, assumptions, None).unwrap()
        } else {
            OptimizationProblem::binary(assumptions)
        };
        let model = factorized_sampler(&problem, rng.gen()).unwrap();
        let prior = SettingsPrior::uniform(&model);
        (model, prior)
    }

    #[test]
    fn canonical_round_trip_is_the_identity_on_random_models() {
        for seed in 0..100 {
            let (model, prior) = sample_model(seed);
            let doc = ModelDocument::from_model(&model, Some(&prior));
            let text = canonical_json(&doc);
            let reparsed: ModelDocument = document_from_str(&text).unwrap();
            let (model2, prior2) = reparsed.to_model().unwrap();
            let doc2 = ModelDocument::from_model(&model2, prior2.as_ref());
            assert_eq!(text, canonical_json(&doc2));
            for (a, b, c) in model.allowed_triples() {
                let w1 = model.context_joint(&a, &b, &c).unwrap().weights();
                let w2 = model2.context_joint(&a, &b, &c).unwrap().weights();
                assert_eq!(w1, w2, "weights must survive bit for bit");
            }
        }
    }

    #[test]
    fn decimal_strings_convert_exactly_in_both_directions() {
        assert_eq!(format_decimal(0.1), "0.1");
        assert_eq!("0.1".parse::<f64>().unwrap(), 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(0.0..1.0);
            let text = format_decimal(x);
            assert_eq!(text.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn negative_probability_reports_its_field_path() {
        let (model, _) = sample_model(3);
        let mut doc = ModelDocument::from_model(&model, None);
        doc.context_joints[0].probabilities[3] = "-0.25".to_owned();
        match doc.to_model() {
            Err(FormatError::NegativeProbability { field, value }) => {
                assert_eq!(field, "context_joints[0].probabilities[3]");
                assert_eq!(value, "-0.25");
            }
            other => panic!("expected a field-path error, got {other:?}"),
        }
    }

    #[test]
    fn broken_normalization_names_the_offending_triple() {
        let (model, _) = sample_model(4);
        let mut doc = ModelDocument::from_model(&model, None);
        let entry = &mut doc.context_joints[0];
        let expected = (entry.a.clone(), entry.b.clone(), entry.c.clone());
        let scaled: Vec<String> = entry
            .probabilities
            .iter()
            .map(|t| format_decimal(t.parse::<f64>().unwrap() * 0.99))
            .collect();
        entry.probabilities = scaled;
        match doc.to_model() {
            Err(FormatError::ContextJoint { a, b, c, .. }) => {
                assert_eq!((a, b, c), expected);
            }
            other => panic!("expected the triple to be named, got {other:?}"),
        }
    }

    #[test]
    fn malformed_syntax_reports_line_and_column() {
        let err =
            document_from_str::<ModelDocument>("{\n  \"format_version\": oops\n}").unwrap_err();
        match err {
            FormatError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("expected a syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_version_is_rejected() {
        let (model, _) = sample_model(5);
        let mut doc = ModelDocument::from_model(&model, None);
        doc.format_version = 2;
        assert!(matches!(
            doc.to_model(),
            Err(FormatError::Version {
                found: 2,
                expected: 1
            })
        ));
    }

    #[test]
    fn function_couplings_canonicalize_to_triples() {
        let assumptions = AssumptionSet {
            no_contextuality: false,
            ..AssumptionSet::all_enforced()
        };
        let problem = OptimizationProblem::binary(assumptions);
        let model = factorized_sampler(&problem, 11).unwrap();
        let mut doc = ModelDocument::from_model(&model, None);
        let triples = match doc.coupling.clone().unwrap() {
            CouplingDocument::Triples(t) => t,
            CouplingDocument::Function(_) => panic!("canonical form must use triples"),
        };
        doc.coupling = Some(CouplingDocument::Function(triples.clone()));
        let (model2, _) = doc.to_model().unwrap();
        let doc2 = ModelDocument::from_model(&model2, None);
        assert_eq!(doc2.coupling, Some(CouplingDocument::Triples(triples)));

        let conflicting = CouplingDocument::Function(vec![
            ["a0".into(), "b0".into(), "c0".into()],
            ["a0".into(), "b0".into(), "c1".into()],
        ]);
        doc.coupling = Some(conflicting);
        assert!(matches!(
            doc.to_model(),
            Err(FormatError::Model(ModelError::NonFunctionalCoupling { .. }))
        ));
    }

    #[test]
    fn observed_documents_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut weights: Vec<f64> = (0..16).map(|_| rng.gen_range(0.01..1.0)).collect();
        let sum: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= sum;
        }
        let variables = vec![
            Variable::new("A", FiniteSpace::new("A", vec!["+1", "-1"]).unwrap()),
            Variable::new("s_A", FiniteSpace::new("s_A", vec!["a0", "a1"]).unwrap()),
            Variable::new("B", FiniteSpace::new("B", vec!["+1", "-1"]).unwrap()),
            Variable::new("s_B", FiniteSpace::new("s_B", vec!["b0", "b1"]).unwrap()),
        ];
        let joint = JointDistribution::new(variables, weights).unwrap();
        let doc = ObservedDocument::from_joint(&joint).unwrap();
        let joint2 = doc.to_joint().unwrap();
        assert_eq!(joint.weights(), joint2.weights());
        let doc2 = ObservedDocument::from_joint(&joint2).unwrap();
        assert_eq!(canonical_json(&doc), canonical_json(&doc2));
    }

    #[test]
    fn table_documents_round_trip_and_accept_negative_correlators() {
        let mut entries = BTreeMap::new();
        for (a, b, value) in [
            ("a0", "b0", 0.5),
            ("a0", "b1", -0.5),
            ("a1", "b0", 1.0),
            ("a1", "b1", -1.0),
        ] {
            entries.insert((a.to_owned(), b.to_owned(), "c0".to_owned()), value);
        }
        let table = CorrelatorTable::new(
            vec!["a0".into(), "a1".into()],
            vec!["b0".into(), "b1".into()],
            vec!["c0".into()],
            entries,
            None,
        )
        .unwrap();
        let doc = TableDocument::from_table(&table);
        let table2 = doc.to_table().unwrap();
        assert_eq!(table2.value("a0", "b1", "c0").unwrap(), -0.5);
        let doc2 = TableDocument::from_table(&table2);
        assert_eq!(canonical_json(&doc), canonical_json(&doc2));
    }

    #[test]
    fn identical_reports_serialize_to_identical_bytes() {
        let build = || {
            let (model, prior) = sample_model(8);
            let report = crate::assumptions::full_report(&model, &prior, 1e-9).unwrap();
            let table = model.correlator_table().unwrap();
            let mut doc = ReportDocument::new("check");
            doc.assumptions = Some((&report).into());
            doc.correlators = Some((&table).into());
            doc.max_chsh = Some((&table.max_chsh().unwrap()).into());
            canonical_json(&doc)
        };
        let first = build();
        assert_eq!(first, build());
        let parsed: ReportDocument = document_from_str(&first).unwrap();
        assert_eq!(canonical_json(&parsed), first);
    }
}
