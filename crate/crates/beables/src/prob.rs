//! Exact finite discrete probability: spaces, joint distributions over
//! named variables, conditionals, and conditional-independence deviations.
//!
//! Everything is dense `f64` over explicitly ordered labels. Distributions
//! are validated at construction (shape, non-negativity, normalization to
//! within [`NORMALIZATION_TOLERANCE`]), so downstream code never needs to
//! renormalize. Conditioning contexts of probability zero are *undefined*,
//! not zero: conditional tables mark them as such and deviation maxima
//! skip them.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::NORMALIZATION_TOLERANCE;

#[derive(Debug, Error)]
pub enum ProbError {
    #[error("space {space:?} has no labels")]
    EmptySpace { space: String },
    #[error("space {space:?} repeats label {label:?}")]
    DuplicateLabel { space: String, label: String },
    #[error("variable {name:?} appears more than once")]
    DuplicateVariable { name: String },
    #[error("weight tensor has {actual} entries, shape requires {expected}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("negative weight {value} at flat index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1 within {tolerance}")]
    NotNormalized { sum: f64, tolerance: f64 },
    #[error("unknown variable {name:?}")]
    UnknownVariable { name: String },
    #[error("variable {name:?} appears in more than one subset")]
    OverlappingSubsets { name: String },
    #[error("unknown label {label:?} for variable {variable:?}")]
    UnknownLabel { variable: String, label: String },
    #[error("distributions range over different variables or labels")]
    MismatchedSpaces,
    #[error("index list is not a permutation of 0..{len}")]
    BadPermutation { len: usize },
}

// ── Spaces and variables ────────────────────────────────────────────────

/// A named finite set of outcome labels. Label order is significant: it
/// fixes the axis order of every tensor built over the space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteSpace {
    name: String,
    labels: Vec<String>,
}

impl FiniteSpace {
    pub fn new(
        name: impl Into<String>,
        labels: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self, ProbError> {
        let name = name.into();
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(ProbError::EmptySpace { space: name });
        }
        let mut seen = BTreeSet::new();
        for label in &labels {
            if !seen.insert(label.clone()) {
                return Err(ProbError::DuplicateLabel {
                    space: name,
                    label: label.clone(),
                });
            }
        }
        Ok(Self { name, labels })
    }

    /// Cardinality-1 space: how null (integrated-out or absent) beables are
    /// represented. No separate code path exists for them.
    pub fn point(name: impl Into<String>, label: impl Into<String>) -> Self {
        let name = name.into();
        let label = label.into();
        Self {
            name,
            labels: vec![label],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn cardinality(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// A variable of a joint distribution: a name bound to a space. Several
/// variables may share one space under different names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    name: String,
    space: FiniteSpace,
}

impl Variable {
    pub fn new(name: impl Into<String>, space: FiniteSpace) -> Self {
        Self {
            name: name.into(),
            space,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }
}

// ── Joint distributions ─────────────────────────────────────────────────

/// A normalized joint distribution over an ordered list of variables,
/// stored as a dense row-major tensor (last variable varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    variables: Vec<Variable>,
    weights: Vec<f64>,
}

impl JointDistribution {
    pub fn new(variables: Vec<Variable>, weights: Vec<f64>) -> Result<Self, ProbError> {
        let mut seen = BTreeSet::new();
        for v in &variables {
            if !seen.insert(v.name().to_owned()) {
                return Err(ProbError::DuplicateVariable {
                    name: v.name().to_owned(),
                });
            }
        }
        let expected: usize = variables.iter().map(|v| v.space.cardinality()).product();
        if weights.len() != expected {
            return Err(ProbError::ShapeMismatch {
                expected,
                actual: weights.len(),
            });
        }
        for (index, &value) in weights.iter().enumerate() {
            if value < 0.0 || !value.is_finite() {
                return Err(ProbError::NegativeWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(ProbError::NotNormalized {
                sum,
                tolerance: NORMALIZATION_TOLERANCE,
            });
        }
        Ok(Self { variables, weights })
    }

    pub fn uniform(variables: Vec<Variable>) -> Result<Self, ProbError> {
        let n: usize = variables.iter().map(|v| v.space.cardinality()).product();
        let weights = vec![1.0 / n as f64; n];
        Self::new(variables, weights)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shape(&self) -> Vec<usize> {
        self.variables
            .iter()
            .map(|v| v.space.cardinality())
            .collect()
    }

    fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape())
    }

    fn position(&self, name: &str) -> Result<usize, ProbError> {
        self.variables
            .iter()
            .position(|v| v.name() == name)
            .ok_or_else(|| ProbError::UnknownVariable {
                name: name.to_owned(),
            })
    }

    /// Probability of one full assignment, given as `(variable, label)`
    /// pairs in any order.
    pub fn prob(&self, assignment: &[(&str, &str)]) -> Result<f64, ProbError> {
        if assignment.len() != self.variables.len() {
            return Err(ProbError::ShapeMismatch {
                expected: self.variables.len(),
                actual: assignment.len(),
            });
        }
        let strides = self.strides();
        let mut flat = 0usize;
        let mut seen = BTreeSet::new();
        for &(name, label) in assignment {
            let pos = self.position(name)?;
            if !seen.insert(pos) {
                return Err(ProbError::DuplicateVariable {
                    name: name.to_owned(),
                });
            }
            let idx = self.variables[pos].space.index_of(label).ok_or_else(|| {
                ProbError::UnknownLabel {
                    variable: name.to_owned(),
                    label: label.to_owned(),
                }
            })?;
            flat += idx * strides[pos];
        }
        Ok(self.weights[flat])
    }

    /// Sum out every variable not named in `keep`. The kept variables
    /// retain their original relative order, so the result is independent
    /// of the order `keep` lists them in.
    pub fn marginalize(&self, keep: &[&str]) -> Result<JointDistribution, ProbError> {
        let keep_pos = self.subset_positions(keep)?;
        let keep_set: BTreeSet<usize> = keep_pos.iter().copied().collect();
        let kept: Vec<usize> = (0..self.variables.len())
            .filter(|p| keep_set.contains(p))
            .collect();
        let out_vars: Vec<Variable> = kept.iter().map(|&p| self.variables[p].clone()).collect();
        let out_shape: Vec<usize> = kept
            .iter()
            .map(|&p| self.variables[p].space.cardinality())
            .collect();
        let out_strides = strides_of(&out_shape);
        let mut out = vec![0.0; out_shape.iter().product::<usize>().max(1)];
        let shape = self.shape();
        for (flat, &w) in self.weights.iter().enumerate() {
            let idx = unflatten(flat, &shape);
            let mut out_flat = 0;
            for (axis, &p) in kept.iter().enumerate() {
                out_flat += idx[p] * out_strides[axis];
            }
            out[out_flat] += w;
        }
        // Sums of an already-validated tensor; renormalization would mask bugs.
        Ok(JointDistribution {
            variables: out_vars,
            weights: out,
        })
    }

    /// Conditional distribution of `targets` given every assignment of
    /// `givens`, with zero-probability contexts marked undefined. Variables
    /// in neither subset are summed out first.
    pub fn conditional_table(
        &self,
        targets: &[&str],
        givens: &[&str],
    ) -> Result<ConditionalTable, ProbError> {
        self.check_disjoint(&[targets, givens])?;
        let mut keep: Vec<&str> = targets.to_vec();
        keep.extend_from_slice(givens);
        let marginal = self.marginalize(&keep)?;

        let target_set: BTreeSet<&str> = targets.iter().copied().collect();
        let target_vars: Vec<Variable> = marginal
            .variables
            .iter()
            .filter(|v| target_set.contains(v.name()))
            .cloned()
            .collect();
        let given_vars: Vec<Variable> = marginal
            .variables
            .iter()
            .filter(|v| !target_set.contains(v.name()))
            .cloned()
            .collect();

        let t_shape: Vec<usize> = target_vars.iter().map(|v| v.space.cardinality()).collect();
        let g_shape: Vec<usize> = given_vars.iter().map(|v| v.space.cardinality()).collect();
        let t_size: usize = t_shape.iter().product::<usize>().max(1);
        let g_size: usize = g_shape.iter().product::<usize>().max(1);

        // Map each cell of the marginal onto (given index, target index).
        let m_shape = marginal.shape();
        let t_strides = strides_of(&t_shape);
        let g_strides = strides_of(&g_shape);
        let mut joint = vec![0.0; g_size * t_size];
        for (flat, &w) in marginal.weights.iter().enumerate() {
            let idx = unflatten(flat, &m_shape);
            let mut t_flat = 0;
            let mut g_flat = 0;
            let mut t_axis = 0;
            let mut g_axis = 0;
            for (pos, v) in marginal.variables.iter().enumerate() {
                if target_set.contains(v.name()) {
                    t_flat += idx[pos] * t_strides[t_axis];
                    t_axis += 1;
                } else {
                    g_flat += idx[pos] * g_strides[g_axis];
                    g_axis += 1;
                }
            }
            joint[g_flat * t_size + t_flat] += w;
        }

        let slices = (0..g_size)
            .map(|g| {
                let row = &joint[g * t_size..(g + 1) * t_size];
                let mass: f64 = row.iter().sum();
                if mass > 0.0 {
                    Some(row.iter().map(|w| w / mass).collect())
                } else {
                    None
                }
            })
            .collect();
        Ok(ConditionalTable {
            target_vars,
            given_vars,
            slices,
        })
    }

    /// Total variation distance `(1/2) * sum |p - q|`. Requires the same
    /// variables over the same labels in the same order.
    pub fn tv_distance(&self, other: &JointDistribution) -> Result<f64, ProbError> {
        if self.variables != other.variables {
            return Err(ProbError::MismatchedSpaces);
        }
        Ok(tv(&self.weights, &other.weights))
    }

    /// Deviation from the conditional independence `X ⫫ Y | Z`: for every
    /// positive-probability `(y, z)` context, the total variation between
    /// `p(X | y, z)` and `p(X | z)`. Exact independence holds iff
    /// `max_dev == 0`.
    pub fn ci_deviation(
        &self,
        x: &[&str],
        y: &[&str],
        z: &[&str],
    ) -> Result<CiDeviation, ProbError> {
        self.check_disjoint(&[x, y, z])?;
        let mut keep: Vec<&str> = x.to_vec();
        keep.extend_from_slice(y);
        keep.extend_from_slice(z);
        let marginal = self.marginalize(&keep)?;

        let mut yz: Vec<&str> = y.to_vec();
        yz.extend_from_slice(z);
        let cond_yz = marginal.conditional_table(x, &yz)?;
        let cond_z = marginal.conditional_table(x, z)?;
        let p_yz = marginal.marginalize(&yz)?;

        // Walk (y, z) contexts in the conditional table's own given order.
        let g_vars = cond_yz.givens().to_vec();
        let g_shape: Vec<usize> = g_vars.iter().map(|v| v.space.cardinality()).collect();
        let g_size: usize = g_shape.iter().product::<usize>().max(1);
        let z_set: BTreeSet<&str> = z.iter().copied().collect();

        let mut per_context = Vec::new();
        for g_flat in 0..g_size {
            let g_idx = unflatten(g_flat, &g_shape);
            let labels: Vec<(&Variable, &str)> = g_vars
                .iter()
                .zip(&g_idx)
                .map(|(v, &i)| (v, v.space.labels()[i].as_str()))
                .collect();
            let assignment: Vec<(&str, &str)> =
                labels.iter().map(|(v, l)| (v.name(), *l)).collect();
            let weight = p_yz.prob(&assignment)?;
            if weight <= 0.0 {
                continue;
            }
            let p_x_yz = cond_yz
                .slice(&assignment)?
                .expect("positive-mass context must have a defined conditional");
            let z_assignment: Vec<(&str, &str)> = assignment
                .iter()
                .copied()
                .filter(|(name, _)| z_set.contains(name))
                .collect();
            let p_x_z = cond_z
                .slice(&z_assignment)?
                .expect("positive-mass context must have a defined conditional");
            let deviation = tv(p_x_yz, p_x_z);
            per_context.push(CiContext {
                context: assignment
                    .iter()
                    .map(|(n, l)| ((*n).to_owned(), (*l).to_owned()))
                    .collect(),
                weight,
                deviation,
            });
        }

        let max_dev = per_context.iter().map(|c| c.deviation).fold(0.0, f64::max);
        let weighted_dev = per_context.iter().map(|c| c.weight * c.deviation).sum();
        Ok(CiDeviation {
            max_dev,
            weighted_dev,
            per_context,
        })
    }

    /// Conditioning a variable on its own value is trivial: `p(v | v, Z)`
    /// must put all mass on the conditioned value in every positive
    /// context. Returns whether the machinery reproduces that, checked at
    /// tolerance `tol`.
    pub fn self_conditioning_check(
        &self,
        v: &str,
        z: &[&str],
        tol: f64,
    ) -> Result<bool, ProbError> {
        self.check_disjoint(&[&[v], z])?;
        let pos = self.position(v)?;
        let space = self.variables[pos].space.clone();
        let copy_name = format!("{}__copy", v);
        if self.variables.iter().any(|w| w.name() == copy_name) {
            return Err(ProbError::DuplicateVariable { name: copy_name });
        }

        // Augment with a duplicate of v placed on the diagonal, then
        // condition v on the duplicate through the ordinary code path.
        let card = space.cardinality();
        let mut variables = self.variables.clone();
        variables.push(Variable::new(copy_name.clone(), space));
        let shape = self.shape();
        let mut weights = vec![0.0; self.weights.len() * card];
        for (flat, &w) in self.weights.iter().enumerate() {
            let idx = unflatten(flat, &shape);
            weights[flat * card + idx[pos]] = w;
        }
        let augmented = JointDistribution::new(variables, weights)?;

        let mut givens: Vec<&str> = vec![&copy_name];
        givens.extend_from_slice(z);
        let table = augmented.conditional_table(&[v], &givens)?;

        let g_vars = table.givens().to_vec();
        let g_shape: Vec<usize> = g_vars.iter().map(|w| w.space.cardinality()).collect();
        let g_size: usize = g_shape.iter().product::<usize>().max(1);
        let copy_axis = g_vars
            .iter()
            .position(|w| w.name() == copy_name)
            .expect("copy variable is a given");
        for g_flat in 0..g_size {
            let g_idx = unflatten(g_flat, &g_shape);
            if let Some(slice) = table.slice_by_index(&g_idx) {
                for (value, &p) in slice.iter().enumerate() {
                    let want = if value == g_idx[copy_axis] { 1.0 } else { 0.0 };
                    if (p - want).abs() > tol {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Same distribution with the labels of one variable's space reordered:
    /// new label `i` is old label `perm[i]`. Pure relabeling; every
    /// probability statement is preserved.
    pub fn with_permuted_labels(
        &self,
        var: &str,
        perm: &[usize],
    ) -> Result<JointDistribution, ProbError> {
        let pos = self.position(var)?;
        let space = &self.variables[pos].space;
        let card = space.cardinality();
        let mut seen = vec![false; card];
        if perm.len() != card
            || perm
                .iter()
                .any(|&i| i >= card || std::mem::replace(&mut seen[i], true))
        {
            return Err(ProbError::BadPermutation { len: card });
        }
        let labels: Vec<String> = perm.iter().map(|&i| space.labels()[i].clone()).collect();
        let new_space = FiniteSpace::new(space.name(), labels)?;
        let mut variables = self.variables.clone();
        variables[pos] = Variable::new(var, new_space);

        let shape = self.shape();
        let strides = strides_of(&shape);
        let mut weights = vec![0.0; self.weights.len()];
        for (flat, &w) in self.weights.iter().enumerate() {
            let idx = unflatten(flat, &shape);
            let new_value = perm.iter().position(|&i| i == idx[pos]).unwrap();
            let new_flat = flat - idx[pos] * strides[pos] + new_value * strides[pos];
            weights[new_flat] = w;
        }
        Ok(JointDistribution { variables, weights })
    }

    fn subset_positions(&self, names: &[&str]) -> Result<Vec<usize>, ProbError> {
        let mut seen = BTreeSet::new();
        names
            .iter()
            .map(|&n| {
                let p = self.position(n)?;
                if !seen.insert(p) {
                    return Err(ProbError::OverlappingSubsets { name: n.to_owned() });
                }
                Ok(p)
            })
            .collect()
    }

    fn check_disjoint(&self, subsets: &[&[&str]]) -> Result<(), ProbError> {
        let mut seen = BTreeSet::new();
        for subset in subsets {
            for &name in *subset {
                self.position(name)?;
                if !seen.insert(name) {
                    return Err(ProbError::OverlappingSubsets {
                        name: name.to_owned(),
                    });
                }
            }
        }
        Ok(())
    }
}

// ── Conditional tables ──────────────────────────────────────────────────

/// `p(targets | givens)`: one normalized slice over the target assignments
/// per given assignment, or `None` where the conditioning context has
/// probability zero.
#[derive(Debug, Clone)]
pub struct ConditionalTable {
    target_vars: Vec<Variable>,
    given_vars: Vec<Variable>,
    slices: Vec<Option<Vec<f64>>>,
}

impl ConditionalTable {
    pub fn targets(&self) -> &[Variable] {
        &self.target_vars
    }

    pub fn givens(&self) -> &[Variable] {
        &self.given_vars
    }

    /// The slice for a given assignment, provided as `(variable, label)`
    /// pairs in any order. Target assignments are indexed row-major in
    /// target-variable order.
    pub fn slice(&self, given: &[(&str, &str)]) -> Result<Option<&[f64]>, ProbError> {
        if given.len() != self.given_vars.len() {
            return Err(ProbError::ShapeMismatch {
                expected: self.given_vars.len(),
                actual: given.len(),
            });
        }
        let mut idx = vec![0usize; self.given_vars.len()];
        for &(name, label) in given {
            let pos = self
                .given_vars
                .iter()
                .position(|v| v.name() == name)
                .ok_or_else(|| ProbError::UnknownVariable {
                    name: name.to_owned(),
                })?;
            idx[pos] = self.given_vars[pos].space.index_of(label).ok_or_else(|| {
                ProbError::UnknownLabel {
                    variable: name.to_owned(),
                    label: label.to_owned(),
                }
            })?;
        }
        Ok(self.slice_by_index(&idx))
    }

    fn slice_by_index(&self, idx: &[usize]) -> Option<&[f64]> {
        let shape: Vec<usize> = self
            .given_vars
            .iter()
            .map(|v| v.space.cardinality())
            .collect();
        let strides = strides_of(&shape);
        let flat: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.slices[flat].as_deref()
    }

    /// Number of undefined (zero-probability) conditioning contexts.
    pub fn undefined_contexts(&self) -> usize {
        self.slices.iter().filter(|s| s.is_none()).count()
    }

    /// Rebuild the joint `p(targets, givens)` from this table and a
    /// marginal over the givens. Inverse of `conditional_table` up to the
    /// variable order (givens after targets) wherever the marginal is
    /// positive.
    pub fn join(&self, given_marginal: &JointDistribution) -> Result<JointDistribution, ProbError> {
        if given_marginal.variables() != self.given_vars.as_slice() {
            return Err(ProbError::MismatchedSpaces);
        }
        let t_size: usize = self
            .target_vars
            .iter()
            .map(|v| v.space.cardinality())
            .product::<usize>()
            .max(1);
        let mut variables = self.target_vars.clone();
        variables.extend(self.given_vars.iter().cloned());
        let g_size = self.slices.len();
        let mut weights = vec![0.0; t_size * g_size];
        for (g_flat, slice) in self.slices.iter().enumerate() {
            let mass = given_marginal.weights()[g_flat];
            if mass == 0.0 {
                continue;
            }
            let slice = slice.as_ref().ok_or(ProbError::MismatchedSpaces)?;
            for (t_flat, &p) in slice.iter().enumerate() {
                weights[t_flat * g_size + g_flat] = p * mass;
            }
        }
        JointDistribution::new(variables, weights)
    }
}

// ── Conditional-independence deviations ─────────────────────────────────

/// One positive-probability `(y, z)` context of a deviation measurement.
#[derive(Debug, Clone)]
pub struct CiContext {
    /// `(variable, label)` pairs for the `(y, z)` assignment.
    pub context: Vec<(String, String)>,
    /// `p(y, z)`.
    pub weight: f64,
    /// `tv(p(X | y, z), p(X | z))`.
    pub deviation: f64,
}

/// Result of [`JointDistribution::ci_deviation`]. Zero-probability contexts
/// are excluded throughout; the weights of the included contexts sum to 1.
#[derive(Debug, Clone)]
pub struct CiDeviation {
    pub max_dev: f64,
    pub weighted_dev: f64,
    pub per_context: Vec<CiContext>,
}

impl CiDeviation {
    /// First context attaining `max_dev`, if any context exists.
    pub fn worst_context(&self) -> Option<&CiContext> {
        self.per_context
            .iter()
            .find(|c| c.deviation == self.max_dev)
    }
}

impl fmt::Display for CiDeviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "max_dev {:.6}, weighted {:.6}",
            self.max_dev, self.weighted_dev
        )
    }
}

// ── Shared tensor helpers ───────────────────────────────────────────────

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * shape[i + 1];
    }
    strides
}

pub(crate) fn unflatten(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0usize; shape.len()];
    for i in (0..shape.len()).rev() {
        idx[i] = flat % shape[i];
        flat /= shape[i];
    }
    idx
}

pub(crate) fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(name: &str, n: usize) -> FiniteSpace {
        let labels: Vec<String> = (0..n).map(|i| format!("{name}{i}")).collect();
        FiniteSpace::new(name, labels).unwrap()
    }

    fn var(name: &str, n: usize) -> Variable {
        Variable::new(name, space(name, n))
    }

    fn joint(names: &[(&str, usize)], weights: Vec<f64>) -> JointDistribution {
        let vars = names.iter().map(|&(n, c)| var(n, c)).collect();
        JointDistribution::new(vars, weights).unwrap()
    }

    /// Independent recomputation of ci_deviation from raw cell sums,
    /// sharing no code with the implementation. Assignments are keyed by
    /// label tuples accumulated straight off the weight tensor.
    fn ci_oracle(dist: &JointDistribution, x: &[&str], y: &[&str], z: &[&str]) -> (f64, f64) {
        use std::collections::BTreeMap;
        let shape = dist.shape();
        let names: Vec<&str> = dist.variables().iter().map(|v| v.name()).collect();
        type Key = Vec<usize>;
        let key = |idx: &[usize], subset: &[&str]| -> Key {
            subset
                .iter()
                .map(|n| idx[names.iter().position(|m| m == n).unwrap()])
                .collect()
        };
        let mut p_xyz: BTreeMap<(Key, Key, Key), f64> = BTreeMap::new();
        let mut p_yz: BTreeMap<(Key, Key), f64> = BTreeMap::new();
        let mut p_xz: BTreeMap<(Key, Key), f64> = BTreeMap::new();
        let mut p_z: BTreeMap<Key, f64> = BTreeMap::new();
        for (flat, &w) in dist.weights().iter().enumerate() {
            let idx = unflatten(flat, &shape);
            let (kx, ky, kz) = (key(&idx, x), key(&idx, y), key(&idx, z));
            *p_xyz
                .entry((kx.clone(), ky.clone(), kz.clone()))
                .or_default() += w;
            *p_yz.entry((ky.clone(), kz.clone())).or_default() += w;
            *p_xz.entry((kx, kz.clone())).or_default() += w;
            *p_z.entry(kz).or_default() += w;
        }
        let x_cards: Vec<usize> = x
            .iter()
            .map(|n| shape[names.iter().position(|m| m == n).unwrap()])
            .collect();
        let mut x_keys = vec![vec![]];
        for &c in &x_cards {
            x_keys = x_keys
                .iter()
                .flat_map(|k: &Vec<usize>| {
                    (0..c).map(move |i| {
                        let mut k = k.clone();
                        k.push(i);
                        k
                    })
                })
                .collect();
        }
        let mut max_dev: f64 = 0.0;
        let mut weighted = 0.0;
        for ((ky, kz), &wyz) in &p_yz {
            if wyz <= 0.0 {
                continue;
            }
            let wz = p_z[kz];
            let dev: f64 = 0.5
                * x_keys
                    .iter()
                    .map(|kx| {
                        let a = p_xyz
                            .get(&(kx.clone(), ky.clone(), kz.clone()))
                            .copied()
                            .unwrap_or(0.0)
                            / wyz;
                        let b = p_xz.get(&(kx.clone(), kz.clone())).copied().unwrap_or(0.0) / wz;
                        (a - b).abs()
                    })
                    .sum::<f64>();
            max_dev = max_dev.max(dev);
            weighted += wyz * dev;
        }
        (max_dev, weighted)
    }

    #[test]
    fn space_rejects_duplicates_and_empties() {
        assert!(matches!(
            FiniteSpace::new("s", ["x", "x"]),
            Err(ProbError::DuplicateLabel { .. })
        ));
        assert!(matches!(
            FiniteSpace::new("s", Vec::<String>::new()),
            Err(ProbError::EmptySpace { .. })
        ));
    }

    #[test]
    fn construction_validates_weights() {
        let vars = vec![var("x", 2)];
        assert!(matches!(
            JointDistribution::new(vars.clone(), vec![0.5, 0.5, 0.0]),
            Err(ProbError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            JointDistribution::new(vars.clone(), vec![-0.1, 1.1]),
            Err(ProbError::NegativeWeight { .. })
        ));
        assert!(matches!(
            JointDistribution::new(vars, vec![0.5, 0.49]),
            Err(ProbError::NotNormalized { .. })
        ));
    }

    #[test]
    fn marginalize_sums_rows() {
        let d = joint(&[("x", 2), ("y", 2)], vec![0.1, 0.2, 0.3, 0.4]);
        let m = d.marginalize(&["x"]).unwrap();
        assert!((m.weights()[0] - 0.3).abs() < 1e-12);
        assert!((m.weights()[1] - 0.7).abs() < 1e-12);
        let u = joint(&[("x", 2), ("y", 2)], vec![0.25; 4]);
        let mu = u.marginalize(&["x"]).unwrap();
        assert!((mu.weights()[0] - 0.5).abs() < 1e-12);
        assert!(matches!(
            d.marginalize(&["w"]),
            Err(ProbError::UnknownVariable { .. })
        ));
    }

    #[test]
    fn marginalize_is_order_insensitive_and_total() {
        let d = joint(&[("x", 2), ("y", 3)], vec![0.1, 0.1, 0.1, 0.2, 0.2, 0.3]);
        let a = d.marginalize(&["x", "y"]).unwrap();
        let b = d.marginalize(&["y", "x"]).unwrap();
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.variables(), d.variables());
        let none = d.marginalize(&[]).unwrap();
        assert_eq!(none.variables().len(), 0);
        assert_eq!(none.weights().len(), 1);
        assert!((none.weights()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_slices_divide_by_context_mass() {
        let d = joint(&[("x", 2), ("y", 2)], vec![0.1, 0.2, 0.3, 0.4]);
        let t = d.conditional_table(&["y"], &["x"]).unwrap();
        let s = t.slice(&[("x", "x0")]).unwrap().unwrap();
        assert!((s[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((s[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            d.conditional_table(&["x"], &["x"]),
            Err(ProbError::OverlappingSubsets { .. })
        ));
    }

    #[test]
    fn conditional_marks_zero_contexts_undefined() {
        let d = joint(&[("x", 2), ("y", 2)], vec![0.5, 0.5, 0.0, 0.0]);
        let t = d.conditional_table(&["y"], &["x"]).unwrap();
        assert!(t.slice(&[("x", "x0")]).unwrap().is_some());
        assert!(t.slice(&[("x", "x1")]).unwrap().is_none());
        assert_eq!(t.undefined_contexts(), 1);
    }

    #[test]
    fn independent_product_conditionals_equal_marginal() {
        let d = joint(&[("x", 2), ("y", 2)], vec![0.12, 0.28, 0.18, 0.42]);
        let t = d.conditional_table(&["x"], &["y"]).unwrap();
        for label in ["y0", "y1"] {
            let s = t.slice(&[("y", label)]).unwrap().unwrap();
            assert!((s[0] - 0.4).abs() < 1e-12);
            assert!((s[1] - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn tv_distance_matches_hand_values() {
        let p = joint(&[("x", 2)], vec![0.5, 0.5]);
        let q = joint(&[("x", 2)], vec![0.75, 0.25]);
        assert!((p.tv_distance(&q).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(p.tv_distance(&p).unwrap(), 0.0);
        let r = joint(&[("x", 2)], vec![1.0, 0.0]);
        let s = joint(&[("x", 2)], vec![0.0, 1.0]);
        assert_eq!(r.tv_distance(&s).unwrap(), 1.0);
        let other = joint(&[("y", 2)], vec![0.5, 0.5]);
        assert!(matches!(
            p.tv_distance(&other),
            Err(ProbError::MismatchedSpaces)
        ));
    }

    #[test]
    fn ci_deviation_zero_for_product() {
        let d = joint(&[("x", 2), ("y", 2)], vec![0.12, 0.28, 0.18, 0.42]);
        let r = d.ci_deviation(&["x"], &["y"], &[]).unwrap();
        assert!(r.max_dev < 1e-15);
        assert!(r.weighted_dev < 1e-15);
    }

    /// Perfect correlation x = y on uniform bits: p(x | y) is a point mass
    /// while p(x) is uniform, so every context deviates by tv = 1/2.
    /// Frozen from the brute-force oracle below.
    #[test]
    fn ci_deviation_perfect_correlation() {
        let d = joint(&[("x", 2), ("y", 2)], vec![0.5, 0.0, 0.0, 0.5]);
        let r = d.ci_deviation(&["x"], &["y"], &[]).unwrap();
        assert!((r.max_dev - 0.5).abs() < 1e-12);
        assert!((r.weighted_dev - 0.5).abs() < 1e-12);
        let (om, ow) = ci_oracle(&d, &["x"], &["y"], &[]);
        assert!((r.max_dev - om).abs() < 1e-15);
        assert!((r.weighted_dev - ow).abs() < 1e-15);
    }

    /// Noisy copy y = x with probability 0.9: p(x | y) = (0.9, 0.1) against
    /// p(x) = (0.5, 0.5), tv = 0.4. Frozen from the brute-force oracle.
    #[test]
    fn ci_deviation_noisy_copy() {
        let d = joint(&[("x", 2), ("y", 2)], vec![0.45, 0.05, 0.05, 0.45]);
        let r = d.ci_deviation(&["x"], &["y"], &[]).unwrap();
        assert!((r.max_dev - 0.4).abs() < 1e-12);
        assert!((r.weighted_dev - 0.4).abs() < 1e-12);
        let (om, ow) = ci_oracle(&d, &["x"], &["y"], &[]);
        assert!((r.max_dev - om).abs() < 1e-15);
        assert!((r.weighted_dev - ow).abs() < 1e-15);
        let worst = r.worst_context().unwrap();
        assert_eq!(worst.context.len(), 1);
        assert!((worst.weight - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ci_deviation_skips_zero_contexts() {
        // y1 never occurs; only the y0 context is measured.
        let d = joint(&[("x", 2), ("y", 2)], vec![0.4, 0.0, 0.6, 0.0]);
        let r = d.ci_deviation(&["x"], &["y"], &[]).unwrap();
        assert_eq!(r.per_context.len(), 1);
        assert!(r.max_dev < 1e-15);
    }

    #[test]
    fn ci_deviation_agrees_with_oracle_on_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut w: Vec<f64> = (0..24).map(|_| rng.gen::<f64>()).collect();
            // Sprinkle zeros so undefined contexts get exercised.
            for v in w.iter_mut() {
                if rng.gen_bool(0.25) {
                    *v = 0.0;
                }
            }
            let sum: f64 = w.iter().sum();
            if sum <= 0.0 {
                continue;
            }
            for v in w.iter_mut() {
                *v /= sum;
            }
            let d = joint(&[("x", 2), ("y", 3), ("z", 4)], w);
            let r = d.ci_deviation(&["x"], &["y"], &["z"]).unwrap();
            let (om, ow) = ci_oracle(&d, &["x"], &["y"], &["z"]);
            assert!((r.max_dev - om).abs() < 1e-12);
            assert!((r.weighted_dev - ow).abs() < 1e-12);
        }
    }

    #[test]
    fn ci_deviation_invariant_under_relabeling() {
        let d = joint(
            &[("x", 2), ("y", 2), ("z", 2)],
            vec![0.2, 0.05, 0.1, 0.15, 0.05, 0.2, 0.15, 0.1],
        );
        let base = d.ci_deviation(&["x"], &["y"], &["z"]).unwrap();
        for (v, perm) in [("x", [1, 0]), ("y", [1, 0]), ("z", [1, 0])] {
            let p = d.with_permuted_labels(v, &perm).unwrap();
            let r = p.ci_deviation(&["x"], &["y"], &["z"]).unwrap();
            assert!((r.max_dev - base.max_dev).abs() < 1e-12);
            assert!((r.weighted_dev - base.weighted_dev).abs() < 1e-12);
        }
    }

    #[test]
    fn self_conditioning_holds_on_randomized_distributions() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for round in 0..1000 {
            let cards = [
                ("v", rng.gen_range(2..4usize)),
                ("w", rng.gen_range(1..3usize)),
                ("z", rng.gen_range(2..3usize)),
            ];
            let n: usize = cards.iter().map(|&(_, c)| c).product();
            let mut w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            if round % 3 == 0 {
                // Force zero-probability values of v to hit the skip path.
                for v in w.iter_mut().take(n / cards[0].1) {
                    *v = 0.0;
                }
            }
            let sum: f64 = w.iter().sum();
            for v in w.iter_mut() {
                *v /= sum;
            }
            let d = joint(&cards, w);
            assert!(d.self_conditioning_check("v", &["z"], 1e-9).unwrap());
            assert!(d.self_conditioning_check("v", &[], 1e-9).unwrap());
        }
    }

    #[test]
    fn join_round_trips_conditional_table() {
        let d = joint(&[("x", 2), ("y", 2)], vec![0.1, 0.2, 0.3, 0.4]);
        let t = d.conditional_table(&["x"], &["y"]).unwrap();
        let g = d.marginalize(&["y"]).unwrap();
        let back = t.join(&g).unwrap();
        for (x, y) in [("x0", "y0"), ("x0", "y1"), ("x1", "y0"), ("x1", "y1")] {
            let orig = d.prob(&[("x", x), ("y", y)]).unwrap();
            let got = back.prob(&[("x", x), ("y", y)]).unwrap();
            assert!((orig - got).abs() < 1e-12);
        }
    }
}
