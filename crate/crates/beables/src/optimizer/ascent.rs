//! Coordinate ascent over the factor tables, for problems whose
//! strategy count is past the enumeration cap.
//!
//! With every factor but one frozen, the correlators are linear in the
//! remaining table row by row, so each row's subproblem is maximized at
//! a vertex of its simplex. The sweep tries every vertex of every row
//! of every factor, keeps strict improvements, and stops at a fixpoint;
//! multiple seeded restarts guard against poor basins. The incumbent
//! never exceeds the exact enumeration value because every visited
//! point lies inside the same family.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    CertificateKind, ChshScorer, Factor, FactorTables, Layout, OptimizationProblem,
    OptimizationResult, OptimizerError,
};

/// Locally maximal CHSH via restarted per-row vertex ascent, certified
/// `ascent-local`. Deterministic given the problem's seed: restart `r`
/// draws from stream `r` of the seeded generator.
pub fn coordinate_ascent(
    problem: &OptimizationProblem,
) -> Result<OptimizationResult, OptimizerError> {
    problem.validate()?;
    let layout = Layout::of(problem)?;
    let scorer = ChshScorer::new(&layout)?;

    let mut best: Option<(f64, FactorTables)> = None;
    let mut trace = Vec::new();
    for restart in 0..problem.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
        rng.set_stream(restart as u64);
        let mut tables = FactorTables::random_vertices(&layout, &mut rng);
        let mut current = scorer.score(&tables.correlators(&layout));
        for _sweep in 0..problem.max_iterations {
            let mut improved = false;
            for factor in Factor::ALL {
                let rows = factor.rows(&layout);
                let cols = factor.cols(&layout);
                for r in 0..rows {
                    let original = tables.row(factor, &layout, r).to_vec();
                    let mut best_move: Option<(f64, usize)> = None;
                    let mut candidate = vec![0.0; cols];
                    for col in 0..cols {
                        candidate.fill(0.0);
                        candidate[col] = 1.0;
                        if candidate == original {
                            continue;
                        }
                        tables.set_row(factor, &layout, r, &candidate);
                        let value = scorer.score(&tables.correlators(&layout));
                        if value > current && best_move.is_none_or(|(v, _)| value > v) {
                            best_move = Some((value, col));
                        }
                    }
                    match best_move {
                        Some((value, col)) => {
                            candidate.fill(0.0);
                            candidate[col] = 1.0;
                            tables.set_row(factor, &layout, r, &candidate);
                            current = value;
                            improved = true;
                        }
                        None => tables.set_row(factor, &layout, r, &original),
                    }
                }
            }
            if !improved {
                break;
            }
        }
        if best.as_ref().is_none_or(|(v, _)| current > *v) {
            trace.push(current);
            best = Some((current, tables));
        }
    }

    let (_, tables) = best.expect("restart budget is at least 1");
    let model = tables.to_model(&layout)?;
    let chsh = model.correlator_table()?.max_chsh()?;
    Ok(OptimizationResult {
        model,
        chsh,
        certificate: CertificateKind::AscentLocal,
        trace,
    })
}
