//! Exhaustive walk of the deterministic strategies of a problem.
//!
//! The CHSH quantity is multilinear in the conditional factors, so its
//! maximum over the stochastic family is attained at deterministic
//! tables. Deterministic strategies collapse further: all that reaches
//! the correlators is the class structure of the `nu` assignment (which
//! setting contexts share a `nu` value) together with the composite
//! responses `A = f(a, c, nu)` and `B = g(b, c, nu)`. When the `lambda`
//! factor may depend on `b` (flag relaxed, at least two `lambda`
//! labels), `lambda` can ferry an arbitrary extra bit, so `f` widens to
//! `f(a, b, c)`; the mirror holds for `g`. A relaxed no-correlation
//! flag adds nothing here: a deterministic shared seed is a constant,
//! so the joint `(lambda, mu)` assignment is the same product of
//! point masses it would be anyway.
//!
//! `nu` assignments are enumerated as restricted-growth strings, one
//! canonical representative per relabeling class, over signatures
//! `(c)` (no-conspiracy enforced) or `(a, b, c)` (relaxed), capped at
//! the `nu` cardinality. Response tables are bitmasks over the cells
//! actually reachable from the allowed setting triples.

use std::collections::BTreeMap;

use crate::model::{BeablesModel, ModelError};
use crate::prob::JointDistribution;

use super::{
    labels, CertificateKind, ChshScorer, Layout, OptimizationProblem, OptimizationResult,
    OptimizerError,
};

/// Exact maximum CHSH over the deterministic strategies consistent with
/// the assumption set, certified `enumeration-exact`. Ties resolve to
/// the lexicographically smallest strategy encoding (partition string,
/// then Alice's bitmask, then Bob's).
pub fn enumerate_deterministic(
    problem: &OptimizationProblem,
) -> Result<OptimizationResult, OptimizerError> {
    problem.validate()?;
    let layout = Layout::of(problem)?;
    let scorer = ChshScorer::new(&layout)?;
    let space = StrategySpace::new(&layout);
    let max_blocks = layout.nn.min(space.domain);

    // The partition count alone already lower-bounds the strategy count,
    // and is cheap to compute, so oversized signature domains bail out
    // before any streaming.
    let partitions = partitions_at_most(space.domain, max_blocks);
    if partitions > u128::from(problem.enumeration_cap) {
        return Err(OptimizerError::CapExceeded {
            strategies: partitions,
            cap: problem.enumeration_cap,
        });
    }
    let mut total: u128 = 0;
    for_each_partition(space.domain, max_blocks, |classes| {
        let cells = space.cells(&layout, classes);
        let bits = (cells.bits_f + cells.bits_g).min(126);
        total = total.saturating_add(1u128 << bits);
    });
    if total > u128::from(problem.enumeration_cap) {
        return Err(OptimizerError::CapExceeded {
            strategies: total,
            cap: problem.enumeration_cap,
        });
    }

    struct Best {
        value: f64,
        classes: Vec<usize>,
        f_mask: u64,
        g_mask: u64,
    }
    let mut best: Option<Best> = None;
    let mut trace = Vec::new();
    let n_triples = layout.triples.len();
    let mut f_val = vec![1.0f64; n_triples];
    let mut m = vec![0.0f64; n_triples];
    for_each_partition(space.domain, max_blocks, |classes| {
        let cells = space.cells(&layout, classes);
        for f_mask in 0..(1u64 << cells.bits_f) {
            for (t, &cell) in cells.f_cell.iter().enumerate() {
                f_val[t] = if f_mask >> cell & 1 == 1 { -1.0 } else { 1.0 };
            }
            for g_mask in 0..(1u64 << cells.bits_g) {
                for (t, &cell) in cells.g_cell.iter().enumerate() {
                    let g = if g_mask >> cell & 1 == 1 { -1.0 } else { 1.0 };
                    m[t] = f_val[t] * g;
                }
                let value = scorer.score(&m);
                if best.as_ref().is_none_or(|b| value > b.value) {
                    trace.push(value);
                    best = Some(Best {
                        value,
                        classes: classes.to_vec(),
                        f_mask,
                        g_mask,
                    });
                }
            }
        }
    });

    let best = best.expect("every problem has at least one strategy");
    let cells = space.cells(&layout, &best.classes);
    let model = build_model(&layout, &space, &cells, best.f_mask, best.g_mask)?;
    let chsh = model.correlator_table()?.max_chsh()?;
    Ok(OptimizationResult {
        model,
        chsh,
        certificate: CertificateKind::EnumerationExact,
        trace,
    })
}

// ── Strategy space geometry ─────────────────────────────────────────────

struct StrategySpace {
    /// Signature point of each allowed triple: its position among the
    /// distinct `c` values (no-conspiracy enforced) or the triple itself
    /// (relaxed).
    sig_of_triple: Vec<usize>,
    domain: usize,
    /// Whether the composite responses may read the remote setting.
    widen_f: bool,
    widen_g: bool,
}

struct CellMaps {
    k_of_triple: Vec<usize>,
    f_cell: Vec<usize>,
    bits_f: u32,
    g_cell: Vec<usize>,
    bits_g: u32,
}

impl StrategySpace {
    fn new(layout: &Layout) -> Self {
        let sig_of_triple;
        let domain;
        if layout.nu_on_ab {
            sig_of_triple = (0..layout.triples.len()).collect();
            domain = layout.triples.len();
        } else {
            let mut cs: Vec<usize> = layout.triples.iter().map(|t| t.2).collect();
            cs.sort_unstable();
            cs.dedup();
            sig_of_triple = layout
                .triples
                .iter()
                .map(|t| cs.binary_search(&t.2).expect("own element"))
                .collect();
            domain = cs.len();
        }
        Self {
            sig_of_triple,
            domain,
            // A single lambda label cannot ferry the remote setting even
            // when the flag allows the dependence.
            widen_f: layout.lam_on_b && layout.nl >= 2,
            widen_g: layout.mu_on_a && layout.nm >= 2,
        }
    }

    /// Dense bit indices for the response cells reachable under one
    /// partition, in first-reached order over the allowed triples.
    fn cells(&self, layout: &Layout, classes: &[usize]) -> CellMaps {
        let k_of_triple: Vec<usize> = self.sig_of_triple.iter().map(|&s| classes[s]).collect();
        let assign = |widened: bool, own_side_a: bool| -> (Vec<usize>, u32) {
            let mut seen = BTreeMap::new();
            let mut cell = Vec::with_capacity(layout.triples.len());
            for (t, &(ia, ib, ic)) in layout.triples.iter().enumerate() {
                let key = if widened {
                    (ia, ib, ic)
                } else if own_side_a {
                    (ia, usize::MAX, ic * layout.nn + k_of_triple[t])
                } else {
                    (ib, usize::MAX, ic * layout.nn + k_of_triple[t])
                };
                let next = seen.len();
                cell.push(*seen.entry(key).or_insert(next));
            }
            (cell, seen.len() as u32)
        };
        let (f_cell, bits_f) = assign(self.widen_f, true);
        let (g_cell, bits_g) = assign(self.widen_g, false);
        CellMaps {
            k_of_triple,
            f_cell,
            bits_f,
            g_cell,
            bits_g,
        }
    }
}

/// One deterministic model realizing a strategy: point-mass context
/// joints with `nu` set to the class index, `lambda`/`mu` carrying the
/// response bit exactly when widened, and outcomes matching the
/// composite responses.
fn build_model(
    layout: &Layout,
    space: &StrategySpace,
    cells: &CellMaps,
    f_mask: u64,
    g_mask: u64,
) -> Result<BeablesModel, ModelError> {
    let spaces = layout.spaces()?;
    let vars = spaces.context_variables();
    let a_labels = labels("a", layout.na);
    let b_labels = labels("b", layout.nb);
    let c_labels = labels("c", layout.nc);
    let mut joints = BTreeMap::new();
    for (t, &(ia, ib, ic)) in layout.triples.iter().enumerate() {
        let f_bit = (f_mask >> cells.f_cell[t] & 1) as usize;
        let g_bit = (g_mask >> cells.g_cell[t] & 1) as usize;
        let il = if space.widen_f { f_bit } else { 0 };
        let im = if space.widen_g { g_bit } else { 0 };
        let inn = cells.k_of_triple[t];
        let mut w = vec![0.0; 4 * layout.nl * layout.nm * layout.nn];
        let flat = (((f_bit * 2 + g_bit) * layout.nl + il) * layout.nm + im) * layout.nn + inn;
        w[flat] = 1.0;
        joints.insert(
            (
                a_labels[ia].clone(),
                b_labels[ib].clone(),
                c_labels[ic].clone(),
            ),
            JointDistribution::new(vars.clone(), w)?,
        );
    }
    BeablesModel::new(
        spaces,
        vec![1.0, -1.0],
        vec![1.0, -1.0],
        layout.coupling.clone(),
        joints,
    )
}

// ── Set partitions as restricted-growth strings ─────────────────────────

/// Number of partitions of `n` points into at most `max_blocks` blocks,
/// saturating.
fn partitions_at_most(n: usize, max_blocks: usize) -> u128 {
    // stirling[k] = S(i, k) while iterating i upward.
    let mut stirling = vec![0u128; max_blocks + 1];
    stirling[0] = 1;
    for _ in 0..n {
        for k in (1..=max_blocks).rev() {
            stirling[k] = (k as u128)
                .saturating_mul(stirling[k])
                .saturating_add(stirling[k - 1]);
        }
        stirling[0] = 0;
    }
    stirling.iter().fold(0u128, |acc, &s| acc.saturating_add(s))
}

/// Visit every restricted-growth string of length `n` with fewer than
/// `max_blocks + 1` distinct values, in lexicographic order.
fn for_each_partition(n: usize, max_blocks: usize, mut visit: impl FnMut(&[usize])) {
    fn recurse(
        buf: &mut Vec<usize>,
        n: usize,
        max_blocks: usize,
        used: usize,
        visit: &mut impl FnMut(&[usize]),
    ) {
        if buf.len() == n {
            visit(buf);
            return;
        }
        let limit = (used + 1).min(max_blocks);
        for class in 0..limit {
            buf.push(class);
            recurse(buf, n, max_blocks, used.max(class + 1), visit);
            buf.pop();
        }
    }
    let mut buf = Vec::with_capacity(n);
    recurse(&mut buf, n, max_blocks, 0, &mut visit);
}
