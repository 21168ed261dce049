//! Membership of a 2x2 correlator table in the local polytope.
//!
//! The local polytope is the convex hull of the 16 deterministic
//! strategy tables `M(a, b) = alpha(a) * beta(b)` with `alpha, beta` in
//! `{+1, -1}`. Membership is decided by a phase-1 simplex over the
//! mixing weights; on this scenario the polytope's nontrivial facets
//! are exactly the 8 sign variants of the CHSH inequality, so a failed
//! membership always comes with a violated variant as witness. That
//! facet completeness is verified empirically in the tests rather than
//! assumed.

use crate::model::{ChshResult, CorrelatorTable, SignChoice};

use super::OptimizerError;

/// The 16 deterministic strategy tables in the fixed encoding: index
/// bit 3 is `alpha(a0)`, bit 2 `alpha(a1)`, bit 1 `beta(b0)`, bit 0
/// `beta(b1)`, with a zero bit meaning `+1`; entries are in row-major
/// `(a, b)` order.
pub fn deterministic_tables() -> [[f64; 4]; 16] {
    let sign = |bit: usize| if bit == 0 { 1.0 } else { -1.0 };
    let mut out = [[0.0; 4]; 16];
    for (k, table) in out.iter_mut().enumerate() {
        let alpha = [sign(k >> 3 & 1), sign(k >> 2 & 1)];
        let beta = [sign(k >> 1 & 1), sign(k & 1)];
        for i in 0..2 {
            for j in 0..2 {
                table[i * 2 + j] = alpha[i] * beta[j];
            }
        }
    }
    out
}

/// Outcome of the membership test: mixing weights over
/// [`deterministic_tables`] when the table is locally realizable, the
/// most violated CHSH variant when it is not.
#[derive(Debug, Clone)]
pub struct Realizability {
    pub realizable: bool,
    pub weights: Option<Vec<f64>>,
    pub witness: Option<ChshResult>,
}

const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Decide whether a single-context 2x2 table is a convex combination of
/// deterministic strategies.
pub fn decide_local_realizability(
    table: &CorrelatorTable,
) -> Result<Realizability, OptimizerError> {
    let (na, nb, nc) = (
        table.a_labels().len(),
        table.b_labels().len(),
        table.c_labels().len(),
    );
    let coupled = table.coupling().is_some_and(|coupling| {
        !coupling.is_full_product(table.a_labels(), table.b_labels(), table.c_labels())
    });
    if na != 2 || nb != 2 || nc != 1 || coupled {
        return Err(OptimizerError::WrongScenario {
            a: na,
            b: nb,
            c: nc,
        });
    }
    let c = &table.c_labels()[0];
    let mut m = [0.0f64; 4];
    for (i, a) in table.a_labels().iter().enumerate() {
        for (j, b) in table.b_labels().iter().enumerate() {
            m[i * 2 + j] = table.value(a, b, c)?;
        }
    }

    let strategies = deterministic_tables();
    let mut rows = vec![vec![0.0; 16]; 5];
    let mut rhs = vec![0.0; 5];
    for entry in 0..4 {
        for k in 0..16 {
            rows[entry][k] = strategies[k][entry];
        }
        rhs[entry] = m[entry];
    }
    rows[4] = vec![1.0; 16];
    rhs[4] = 1.0;

    match phase_one_simplex(&rows, &rhs, FEASIBILITY_TOLERANCE)? {
        Some(weights) => Ok(Realizability {
            realizable: true,
            weights: Some(weights),
            witness: None,
        }),
        None => {
            let mut witness: Option<ChshResult> = None;
            for sign in SignChoice::BOTH {
                let result = table.chsh(
                    &table.a_labels()[0],
                    &table.a_labels()[1],
                    &table.b_labels()[0],
                    &table.b_labels()[1],
                    None,
                    sign,
                )?;
                if witness.as_ref().is_none_or(|w| result.value > w.value) {
                    witness = Some(result);
                }
            }
            Ok(Realizability {
                realizable: false,
                weights: None,
                witness,
            })
        }
    }
}

// ── Phase-1 simplex ─────────────────────────────────────────────────────

/// Find `w >= 0` with `A w = b`, or report infeasibility, by minimizing
/// the sum of artificial variables with Bland's rule (no cycling).
/// Sized for this module's tiny systems; dense arithmetic throughout.
fn phase_one_simplex(
    a: &[Vec<f64>],
    b: &[f64],
    tol: f64,
) -> Result<Option<Vec<f64>>, OptimizerError> {
    let m = a.len();
    let n = a[0].len();
    let width = n + m + 1;
    let mut t = vec![vec![0.0f64; width]; m];
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = flip * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = flip * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let mut finished = false;
    for _ in 0..10_000 {
        // Reduced cost under the phase-1 objective (artificials cost 1):
        // pick the smallest improving column index.
        let mut entering = None;
        for j in 0..n + m {
            if basis.contains(&j) {
                continue;
            }
            let cost = if j >= n { 1.0 } else { 0.0 };
            let mut reduced = cost;
            for (row, &basic) in t.iter().zip(&basis) {
                if basic >= n {
                    reduced -= row[j];
                }
            }
            if reduced < -tol {
                entering = Some(j);
                break;
            }
        }
        let Some(e) = entering else {
            finished = true;
            break;
        };
        // Ratio test, ties to the smallest basic index.
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][e] > 1e-12 {
                let ratio = t[i][width - 1] / t[i][e];
                let better = match leaving {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - 1e-12 || ((ratio - lr).abs() <= 1e-12 && basis[i] < basis[li])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
        }
        let Some((l, _)) = leaving else {
            // The phase-1 objective is bounded below by zero, so an
            // unbounded ray cannot occur; bail out defensively.
            finished = true;
            break;
        };
        let pivot = t[l][e];
        for x in t[l].iter_mut() {
            *x /= pivot;
        }
        let pivot_row = t[l].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != l && row[e] != 0.0 {
                let factor = row[e];
                for (x, &p) in row.iter_mut().zip(&pivot_row) {
                    *x -= factor * p;
                }
            }
        }
        basis[l] = e;
    }
    if !finished {
        return Err(OptimizerError::LpStalled);
    }

    let objective: f64 = (0..m)
        .filter(|&i| basis[i] >= n)
        .map(|i| t[i][width - 1])
        .sum();
    if objective > tol {
        return Ok(None);
    }
    let mut w = vec![0.0; n];
    for i in 0..m {
        if basis[i] < n {
            w[basis[i]] = t[i][width - 1].max(0.0);
        }
    }
    Ok(Some(w))
}
