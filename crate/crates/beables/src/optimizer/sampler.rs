//! Random models in the factorized family of a problem.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::BeablesModel;

use super::{FactorTables, Layout, OptimizationProblem, OptimizerError};

/// A random model drawn from the widened factorized family: every
/// conditional factor gets an independent flat Dirichlet row, so each
/// checker whose flag is enforced passes exactly (the factor simply has
/// no slot for the forbidden dependence), while relaxed flags open real
/// dependence. Deterministic given the seed.
pub fn factorized_sampler(
    problem: &OptimizationProblem,
    seed: u64,
) -> Result<BeablesModel, OptimizerError> {
    problem.validate()?;
    let layout = Layout::of(problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(FactorTables::random(&layout, &mut rng).to_model(&layout)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assumptions::{full_report, AssumptionKind, AssumptionSet};
    use crate::model::SettingsPrior;
    use crate::optimizer::Cardinalities;

    fn report_of(model: &BeablesModel) -> crate::assumptions::AssumptionReport {
        let prior = SettingsPrior::uniform(model);
        full_report(model, &prior, 1e-12).unwrap()
    }

    #[test]
    fn all_enforced_passes_every_checker() {
        for seed in 0..25 {
            let problem = OptimizationProblem::binary(AssumptionSet::all_enforced());
            let model = factorized_sampler(&problem, seed).unwrap();
            let report = report_of(&model);
            assert!(
                report.all_passed(),
                "seed {seed}: {:?}",
                report
                    .findings
                    .iter()
                    .filter(|f| !f.passed)
                    .map(|f| (f.kind, f.max_dev))
                    .collect::<Vec<_>>()
            );
            assert!(model.validate().is_ok());
        }
    }

    #[test]
    fn each_relaxation_opens_exactly_its_own_checker() {
        let cases = [
            AssumptionKind::NoConspiracy,
            AssumptionKind::NoCorrelation,
            AssumptionKind::NoNonlocalConspiracyA,
            AssumptionKind::NoNonlocalConspiracyB,
        ];
        for kind in cases {
            let problem = OptimizationProblem::binary(AssumptionSet::all_enforced().relax(kind));
            let mut saw_deviation = false;
            for seed in 0..10 {
                let model = factorized_sampler(&problem, seed).unwrap();
                let report = report_of(&model);
                for finding in &report.findings {
                    if finding.kind == kind {
                        saw_deviation |= finding.max_dev > 1e-6;
                    } else {
                        assert!(
                            finding.passed,
                            "relaxing {kind} leaked into {} (dev {})",
                            finding.kind, finding.max_dev
                        );
                    }
                }
            }
            assert!(saw_deviation, "{kind} never deviated over 10 seeds");
        }
    }

    #[test]
    fn contextuality_relaxation_restricts_triples() {
        let problem = OptimizationProblem::binary(
            AssumptionSet::all_enforced().relax(AssumptionKind::NoContextuality),
        );
        let model = factorized_sampler(&problem, 3).unwrap();
        assert_eq!(model.allowed_triples().len(), 4);
        let report = report_of(&model);
        let contextuality = report.finding(AssumptionKind::NoContextuality);
        assert!(!contextuality.passed);
        assert_eq!(contextuality.missing_triples.len(), 12);
        for finding in &report.findings {
            if finding.kind != AssumptionKind::NoContextuality {
                assert!(finding.passed, "{} deviated", finding.kind);
            }
        }
    }

    #[test]
    fn same_seed_reproduces_the_model_exactly() {
        let problem = OptimizationProblem::binary(
            AssumptionSet::all_enforced().relax(AssumptionKind::NoCorrelation),
        );
        let m1 = factorized_sampler(&problem, 42).unwrap();
        let m2 = factorized_sampler(&problem, 42).unwrap();
        for (a, b, c) in m1.allowed_triples() {
            let w1 = m1.context_joint(&a, &b, &c).unwrap().weights();
            let w2 = m2.context_joint(&a, &b, &c).unwrap().weights();
            assert_eq!(w1, w2);
        }
        let m3 = factorized_sampler(&problem, 43).unwrap();
        let (a, b, c) = m1.allowed_triples()[0].clone();
        assert_ne!(
            m1.context_joint(&a, &b, &c).unwrap().weights(),
            m3.context_joint(&a, &b, &c).unwrap().weights()
        );
    }

    #[test]
    fn nonbinary_cardinalities_are_supported() {
        let cards = Cardinalities {
            a: 3,
            b: 2,
            c: 2,
            lambda: 3,
            mu: 2,
            nu: 2,
        };
        let problem = OptimizationProblem::new(cards, AssumptionSet::all_enforced(), None).unwrap();
        let model = factorized_sampler(&problem, 0).unwrap();
        assert_eq!(model.allowed_triples().len(), 12);
        assert!(report_of(&model).all_passed());
    }
}
