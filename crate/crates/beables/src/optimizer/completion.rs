//! Hidden-beable completion of observed bipartite statistics.
//!
//! Any observed joint `p(A, s_A, B, s_B)` extends to a beables model by
//! pure bookkeeping: `lambda` carries a copy of `A`'s record, `mu` a
//! copy of `B`'s, and `c`, `nu` stay null. The extension reproduces the
//! observation exactly, which is precisely why it proves nothing by
//! itself: running the checkers on it exhibits which independence
//! assumptions the bookkeeping had to give up. For genuinely correlated
//! statistics the lambda-mu no-correlation check is the one that fails;
//! for no-signaling statistics the setting-independence checks survive.

use std::collections::BTreeMap;

use crate::assumptions::{full_report, AssumptionReport};
use crate::model::{BeablesModel, ModelSpaces, SettingsPrior};
use crate::prob::JointDistribution;

use super::OptimizerError;

/// Observed statistics of a two-wing experiment: a joint distribution
/// over exactly the variables `(A, s_A, B, s_B)` whose settings
/// marginal is strictly positive.
#[derive(Debug, Clone)]
pub struct ObservedJoint {
    joint: JointDistribution,
    outcome_a: Vec<String>,
    outcome_b: Vec<String>,
    settings_a: Vec<String>,
    settings_b: Vec<String>,
    settings: BTreeMap<(String, String), f64>,
}

impl ObservedJoint {
    pub fn new(joint: JointDistribution) -> Result<Self, OptimizerError> {
        let mut names: Vec<&str> = joint.variables().iter().map(|v| v.name()).collect();
        names.sort_unstable();
        if names != ["A", "B", "s_A", "s_B"] {
            return Err(OptimizerError::ObservedVariables);
        }
        let labels_of = |name: &str| -> Vec<String> {
            joint
                .variables()
                .iter()
                .find(|v| v.name() == name)
                .expect("checked above")
                .space()
                .labels()
                .to_vec()
        };
        let outcome_a = labels_of("A");
        let outcome_b = labels_of("B");
        let settings_a = labels_of("s_A");
        let settings_b = labels_of("s_B");
        let marginal = joint.marginalize(&["s_A", "s_B"])?;
        let mut settings = BTreeMap::new();
        for s_a in &settings_a {
            for s_b in &settings_b {
                let p = marginal.prob(&[("s_A", s_a.as_str()), ("s_B", s_b.as_str())])?;
                if p <= 0.0 {
                    return Err(OptimizerError::ZeroProbabilitySettings {
                        s_a: s_a.clone(),
                        s_b: s_b.clone(),
                    });
                }
                settings.insert((s_a.clone(), s_b.clone()), p);
            }
        }
        Ok(Self {
            joint,
            outcome_a,
            outcome_b,
            settings_a,
            settings_b,
            settings,
        })
    }

    pub fn joint(&self) -> &JointDistribution {
        &self.joint
    }
}

/// A completion: the bookkeeping model, the settings prior read off the
/// observation, and the checker report exhibiting which assumptions the
/// completion violates.
#[derive(Debug, Clone)]
pub struct HiddenCompletion {
    pub model: BeablesModel,
    pub prior: SettingsPrior,
    pub report: AssumptionReport,
}

impl HiddenCompletion {
    /// Largest absolute difference between the observed joint and the
    /// model's own settings-outcomes marginal; bookkeeping makes this
    /// rounding-level.
    pub fn reproduction_error(&self, observed: &ObservedJoint) -> Result<f64, OptimizerError> {
        let marginal = self
            .model
            .full_joint(&self.prior)?
            .marginalize(&["a", "b", "A", "B"])?;
        let mut worst = 0.0f64;
        for s_a in &observed.settings_a {
            for s_b in &observed.settings_b {
                for out_a in &observed.outcome_a {
                    for out_b in &observed.outcome_b {
                        let ours = marginal.prob(&[
                            ("a", s_a.as_str()),
                            ("b", s_b.as_str()),
                            ("A", out_a.as_str()),
                            ("B", out_b.as_str()),
                        ])?;
                        let theirs = observed.joint.prob(&[
                            ("A", out_a.as_str()),
                            ("s_A", s_a.as_str()),
                            ("B", out_b.as_str()),
                            ("s_B", s_b.as_str()),
                        ])?;
                        worst = worst.max((ours - theirs).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Build the bookkeeping completion of an observation: binary outcomes,
/// `lambda = A`, `mu = B`, null `c` and `nu`, context joints equal to
/// the observed outcome conditionals, settings prior equal to the
/// observed settings marginal. The checker report runs at the library
/// default tolerance.
pub fn hidden_completion(observed: &ObservedJoint) -> Result<HiddenCompletion, OptimizerError> {
    let spaces = ModelSpaces::new(
        observed.settings_a.clone(),
        observed.settings_b.clone(),
        vec!["c0".to_owned()],
        observed.outcome_a.clone(),
        observed.outcome_b.clone(),
        vec!["n0".to_owned()],
        observed.outcome_a.clone(),
        observed.outcome_b.clone(),
    )?;
    let values_a = BeablesModel::default_values(spaces.outcome_a(), 'A')?;
    let values_b = BeablesModel::default_values(spaces.outcome_b(), 'B')?;
    let vars = spaces.context_variables();
    let n_a = observed.outcome_a.len();
    let n_b = observed.outcome_b.len();

    let mut joints = BTreeMap::new();
    let mut prior_weights = BTreeMap::new();
    for s_a in &observed.settings_a {
        for s_b in &observed.settings_b {
            let p_settings = observed.settings[&(s_a.clone(), s_b.clone())];
            let mut w = vec![0.0; n_a * n_b * n_a * n_b];
            for (i, out_a) in observed.outcome_a.iter().enumerate() {
                for (j, out_b) in observed.outcome_b.iter().enumerate() {
                    let p = observed.joint.prob(&[
                        ("A", out_a.as_str()),
                        ("s_A", s_a.as_str()),
                        ("B", out_b.as_str()),
                        ("s_B", s_b.as_str()),
                    ])?;
                    // (A, B, lambda, mu, nu) with lambda = A, mu = B.
                    let flat = ((i * n_b + j) * n_a + i) * n_b + j;
                    w[flat] = p / p_settings;
                }
            }
            joints.insert(
                (s_a.clone(), s_b.clone(), "c0".to_owned()),
                JointDistribution::new(vars.clone(), w)?,
            );
            prior_weights.insert((s_a.clone(), s_b.clone(), "c0".to_owned()), p_settings);
        }
    }
    let model = BeablesModel::new(spaces, values_a, values_b, None, joints)?;
    let prior = SettingsPrior::new(&model, prior_weights)?;
    let report = full_report(&model, &prior, crate::DEFAULT_TOLERANCE)?;
    Ok(HiddenCompletion {
        model,
        prior,
        report,
    })
}
