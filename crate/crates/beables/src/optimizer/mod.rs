//! Constrained maximization of the CHSH quantity over beables models.
//!
//! A problem fixes the cardinality of every space and an assumption set;
//! the searchable family is the factorized form
//! `p(A|a,c,lambda,nu) p(B|b,c,mu,nu) p(lambda|nu,a,c) p(mu|nu,b,c) p(nu|c)`,
//! with each hidden factor's dependencies widened exactly
//! where a flag is relaxed: `nu` gains `(a, b)` when no-conspiracy is
//! relaxed, `lambda` gains `b` and `mu` gains `a` when the respective
//! no-nonlocal-conspiracy flag is relaxed, a shared latent seed couples
//! `lambda` to `mu` when no-correlation is relaxed, and a setting
//! coupling restricts the triples when no-contextuality is relaxed.
//!
//! Two search strategies share that family. [`enumerate_deterministic`]
//! walks every deterministic strategy (the objective is multilinear in
//! the factors, so vertices attain the exact maximum) and certifies the
//! bound ladder: 2 with everything enforced, 4 as soon as one
//! setting-independence assumption goes. [`coordinate_ascent`] climbs
//! factor by factor for problems past the enumeration cap. Alongside
//! live an LP membership test for the local correlation polytope and the
//! hidden-beable completion of observed bipartite statistics.

use std::collections::BTreeMap;

use rand::Rng;
use thiserror::Error;

use crate::assumptions::{AssumptionError, AssumptionSet};
use crate::model::{BeablesModel, ChshResult, ModelError, ModelSpaces, SettingCoupling};
use crate::prob::{JointDistribution, ProbError};

mod ascent;
mod completion;
mod enumerate;
mod polytope;
mod sampler;

pub use ascent::coordinate_ascent;
pub use completion::{hidden_completion, HiddenCompletion, ObservedJoint};
pub use enumerate::enumerate_deterministic;
pub use polytope::{decide_local_realizability, deterministic_tables, Realizability};
pub use sampler::factorized_sampler;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("cardinality of {role} must be at least 1")]
    ZeroCardinality { role: &'static str },
    #[error("restart and iteration budgets must be at least 1")]
    ZeroBudget,
    #[error("a setting coupling is only meaningful when no_contextuality is relaxed")]
    CouplingWithoutRelaxation,
    #[error("coupling must assign exactly one c to every (a, b) pair; ({a}, {b}) breaks that")]
    PartialCoupling { a: String, b: String },
    #[error(
        "{strategies} deterministic strategies exceed the enumeration cap of {cap}; \
         raise the cap or switch to coordinate ascent"
    )]
    CapExceeded { strategies: u128, cap: u64 },
    #[error(
        "local realizability expects a 2x2 single-context uncoupled table, \
         got {a} a-labels, {b} b-labels, {c} context(s)"
    )]
    WrongScenario { a: usize, b: usize, c: usize },
    #[error("the simplex pivot loop failed to terminate")]
    LpStalled,
    #[error("observed joint must range over exactly the variables (A, s_A, B, s_B)")]
    ObservedVariables,
    #[error("observed joint gives zero probability to the settings pair ({s_a}, {s_b})")]
    ZeroProbabilitySettings { s_a: String, s_b: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Assumption(#[from] AssumptionError),
}

// ── Problems and results ────────────────────────────────────────────────

/// Cardinality of every space in a problem; outcomes are always the
/// binary `{+1, -1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cardinalities {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub lambda: usize,
    pub mu: usize,
    pub nu: usize,
}

impl Cardinalities {
    /// Binary settings with one preparation context and hidden spaces
    /// sized so that `nu` can encode any `(a, b)` pair.
    pub fn binary() -> Self {
        Self {
            a: 2,
            b: 2,
            c: 1,
            lambda: 2,
            mu: 2,
            nu: 4,
        }
    }
}

/// A maximization instance: spaces, flags, optional coupling, and
/// search budgets. The coupling must be a total function `c = f(a, b)`
/// and is only accepted when no_contextuality is relaxed.
#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    pub cardinalities: Cardinalities,
    pub assumptions: AssumptionSet,
    pub coupling: Option<SettingCoupling>,
    pub seed: u64,
    pub restarts: usize,
    pub max_iterations: usize,
    pub enumeration_cap: u64,
}

pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

impl OptimizationProblem {
    pub fn new(
        cardinalities: Cardinalities,
        assumptions: AssumptionSet,
        coupling: Option<SettingCoupling>,
    ) -> Result<Self, OptimizerError> {
        let problem = Self {
            cardinalities,
            assumptions,
            coupling,
            seed: 0,
            restarts: 20,
            max_iterations: 200,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// The canonical binary instance. When no_contextuality is relaxed
    /// the context space grows to one `c` per `(a, b)` pair and the
    /// matching coupling is installed; otherwise a single context.
    pub fn binary(assumptions: AssumptionSet) -> Self {
        let mut cardinalities = Cardinalities::binary();
        let mut coupling = None;
        if !assumptions.no_contextuality {
            cardinalities.c = cardinalities.a * cardinalities.b;
            let mut map = Vec::new();
            for ia in 0..cardinalities.a {
                for ib in 0..cardinalities.b {
                    map.push((
                        (format!("a{ia}"), format!("b{ib}")),
                        format!("c{}", ia * cardinalities.b + ib),
                    ));
                }
            }
            coupling = Some(SettingCoupling::from_function(map).expect("nonempty map"));
        }
        Self::new(cardinalities, assumptions, coupling).expect("canonical instance is valid")
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        for (n, role) in [
            (self.cardinalities.a, "a"),
            (self.cardinalities.b, "b"),
            (self.cardinalities.c, "c"),
            (self.cardinalities.lambda, "lambda"),
            (self.cardinalities.mu, "mu"),
            (self.cardinalities.nu, "nu"),
        ] {
            if n == 0 {
                return Err(OptimizerError::ZeroCardinality { role });
            }
        }
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(OptimizerError::ZeroBudget);
        }
        if let Some(coupling) = &self.coupling {
            if self.assumptions.no_contextuality {
                return Err(OptimizerError::CouplingWithoutRelaxation);
            }
            let a_labels = labels("a", self.cardinalities.a);
            let b_labels = labels("b", self.cardinalities.b);
            let c_labels = labels("c", self.cardinalities.c);
            for (a, b, c) in coupling.triples() {
                for (label, list, role) in [
                    (a, &a_labels, "a"),
                    (b, &b_labels, "b"),
                    (c, &c_labels, "c"),
                ] {
                    if !list.contains(label) {
                        return Err(OptimizerError::Model(ModelError::UnknownLabel {
                            role,
                            label: label.clone(),
                        }));
                    }
                }
            }
            for a in &a_labels {
                for b in &b_labels {
                    coupling
                        .context_of(a, b)
                        .map_err(|_| OptimizerError::PartialCoupling {
                            a: a.clone(),
                            b: b.clone(),
                        })?;
                }
            }
        }
        Ok(())
    }
}

/// How a result's value is certified: an exhaustive walk of the
/// deterministic strategies is exact, coordinate ascent only locally
/// maximal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    EnumerationExact,
    AscentLocal,
}

impl std::fmt::Display for CertificateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CertificateKind::EnumerationExact => write!(f, "enumeration-exact"),
            CertificateKind::AscentLocal => write!(f, "ascent-local"),
        }
    }
}

/// Best model found, its CHSH evaluation recomputed from the model
/// itself, the certificate kind, and the monotone trace of incumbents.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub model: BeablesModel,
    pub chsh: ChshResult,
    pub certificate: CertificateKind,
    pub trace: Vec<f64>,
}

// ── Shared search machinery ─────────────────────────────────────────────

pub(crate) fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Index geometry of a problem: cardinalities, which factors are
/// widened, the allowed setting triples, and the `(a, b) -> c` map when
/// coupled.
pub(crate) struct Layout {
    pub na: usize,
    pub nb: usize,
    pub nc: usize,
    pub nl: usize,
    pub nm: usize,
    pub nn: usize,
    /// Latent seed cardinality; 1 when no_correlation is enforced.
    pub ns: usize,
    pub nu_on_ab: bool,
    pub lam_on_b: bool,
    pub mu_on_a: bool,
    pub triples: Vec<(usize, usize, usize)>,
    pub ctx_of: Option<Vec<usize>>,
    pub coupling: Option<SettingCoupling>,
}

impl Layout {
    pub fn of(problem: &OptimizationProblem) -> Result<Self, OptimizerError> {
        let Cardinalities {
            a: na,
            b: nb,
            c: nc,
            lambda: nl,
            mu: nm,
            nu: nn,
        } = problem.cardinalities;
        let correlated = !problem.assumptions.no_correlation;
        let (triples, ctx_of) = match &problem.coupling {
            Some(coupling) => {
                let a_labels = labels("a", na);
                let b_labels = labels("b", nb);
                let c_labels = labels("c", nc);
                let mut triples = Vec::new();
                let mut ctx = vec![0usize; na * nb];
                for (ia, a) in a_labels.iter().enumerate() {
                    for (ib, b) in b_labels.iter().enumerate() {
                        let c = coupling.context_of(a, b)?;
                        let ic = c_labels.iter().position(|l| l == c).expect("validated");
                        triples.push((ia, ib, ic));
                        ctx[ia * nb + ib] = ic;
                    }
                }
                (triples, Some(ctx))
            }
            None => {
                let mut triples = Vec::new();
                for ia in 0..na {
                    for ib in 0..nb {
                        for ic in 0..nc {
                            triples.push((ia, ib, ic));
                        }
                    }
                }
                (triples, None)
            }
        };
        Ok(Self {
            na,
            nb,
            nc,
            nl,
            nm,
            nn,
            ns: if correlated { nl * nm } else { 1 },
            nu_on_ab: !problem.assumptions.no_conspiracy,
            lam_on_b: !problem.assumptions.no_nonlocal_conspiracy_a,
            mu_on_a: !problem.assumptions.no_nonlocal_conspiracy_b,
            triples,
            ctx_of,
            coupling: problem.coupling.clone(),
        })
    }

    pub fn spaces(&self) -> Result<ModelSpaces, ModelError> {
        ModelSpaces::new(
            labels("a", self.na),
            labels("b", self.nb),
            labels("c", self.nc),
            labels("l", self.nl),
            labels("m", self.nm),
            labels("n", self.nn),
            vec!["+1".into(), "-1".into()],
            vec!["+1".into(), "-1".into()],
        )
    }

    // Row indices of each conditional factor, in a fixed parent order.

    pub fn nu_rows(&self) -> usize {
        if self.nu_on_ab {
            self.na * self.nb * self.nc
        } else {
            self.nc
        }
    }
    pub fn nu_row(&self, ia: usize, ib: usize, ic: usize) -> usize {
        if self.nu_on_ab {
            (ia * self.nb + ib) * self.nc + ic
        } else {
            ic
        }
    }

    pub fn seed_rows(&self) -> usize {
        self.nn * self.nc
    }
    pub fn seed_row(&self, inn: usize, ic: usize) -> usize {
        inn * self.nc + ic
    }

    pub fn lam_rows(&self) -> usize {
        self.ns * self.nn * self.na * if self.lam_on_b { self.nb } else { 1 } * self.nc
    }
    pub fn lam_row(&self, is: usize, inn: usize, ia: usize, ib: usize, ic: usize) -> usize {
        let b_part = if self.lam_on_b { ib } else { 0 };
        let b_card = if self.lam_on_b { self.nb } else { 1 };
        (((is * self.nn + inn) * self.na + ia) * b_card + b_part) * self.nc + ic
    }

    pub fn mu_rows(&self) -> usize {
        self.ns * self.nn * if self.mu_on_a { self.na } else { 1 } * self.nb * self.nc
    }
    pub fn mu_row(&self, is: usize, inn: usize, ia: usize, ib: usize, ic: usize) -> usize {
        let a_part = if self.mu_on_a { ia } else { 0 };
        let a_card = if self.mu_on_a { self.na } else { 1 };
        (((is * self.nn + inn) * a_card + a_part) * self.nb + ib) * self.nc + ic
    }

    pub fn out_a_rows(&self) -> usize {
        self.na * self.nc * self.nl * self.nn
    }
    pub fn out_a_row(&self, ia: usize, ic: usize, il: usize, inn: usize) -> usize {
        ((ia * self.nc + ic) * self.nl + il) * self.nn + inn
    }

    pub fn out_b_rows(&self) -> usize {
        self.nb * self.nc * self.nm * self.nn
    }
    pub fn out_b_row(&self, ib: usize, ic: usize, im: usize, inn: usize) -> usize {
        ((ib * self.nc + ic) * self.nm + im) * self.nn + inn
    }
}

/// The six stochastic factor tables of the widened family, stored as
/// row-major `rows x cols` slabs. The seed table is a 1-row identity
/// when no_correlation is enforced.
#[derive(Debug, Clone)]
pub(crate) struct FactorTables {
    pub nu: Vec<f64>,
    pub seed: Vec<f64>,
    pub lam: Vec<f64>,
    pub mu: Vec<f64>,
    pub out_a: Vec<f64>,
    pub out_b: Vec<f64>,
}

/// Identifies one factor table; used by ascent to sweep rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Factor {
    Nu,
    Seed,
    Lam,
    Mu,
    OutA,
    OutB,
}

impl Factor {
    pub const ALL: [Factor; 6] = [
        Factor::Nu,
        Factor::Seed,
        Factor::Lam,
        Factor::Mu,
        Factor::OutA,
        Factor::OutB,
    ];

    pub fn rows(self, layout: &Layout) -> usize {
        match self {
            Factor::Nu => layout.nu_rows(),
            Factor::Seed => {
                if layout.ns > 1 {
                    layout.seed_rows()
                } else {
                    0
                }
            }
            Factor::Lam => layout.lam_rows(),
            Factor::Mu => layout.mu_rows(),
            Factor::OutA => layout.out_a_rows(),
            Factor::OutB => layout.out_b_rows(),
        }
    }

    pub fn cols(self, layout: &Layout) -> usize {
        match self {
            Factor::Nu => layout.nn,
            Factor::Seed => layout.ns,
            Factor::Lam => layout.nl,
            Factor::Mu => layout.nm,
            Factor::OutA | Factor::OutB => 2,
        }
    }
}

impl FactorTables {
    fn table(&self, factor: Factor) -> &Vec<f64> {
        match factor {
            Factor::Nu => &self.nu,
            Factor::Seed => &self.seed,
            Factor::Lam => &self.lam,
            Factor::Mu => &self.mu,
            Factor::OutA => &self.out_a,
            Factor::OutB => &self.out_b,
        }
    }

    pub fn table_mut(&mut self, factor: Factor) -> &mut Vec<f64> {
        match factor {
            Factor::Nu => &mut self.nu,
            Factor::Seed => &mut self.seed,
            Factor::Lam => &mut self.lam,
            Factor::Mu => &mut self.mu,
            Factor::OutA => &mut self.out_a,
            Factor::OutB => &mut self.out_b,
        }
    }

    pub fn row(&self, factor: Factor, layout: &Layout, r: usize) -> &[f64] {
        let cols = factor.cols(layout);
        &self.table(factor)[r * cols..(r + 1) * cols]
    }

    pub fn set_row(&mut self, factor: Factor, layout: &Layout, r: usize, row: &[f64]) {
        let cols = factor.cols(layout);
        self.table_mut(factor)[r * cols..(r + 1) * cols].copy_from_slice(row);
    }

    /// Every row an independent flat Dirichlet draw.
    pub fn random(layout: &Layout, rng: &mut impl Rng) -> Self {
        let fill = |rows: usize, cols: usize, rng: &mut dyn FnMut() -> f64| -> Vec<f64> {
            let mut t = vec![0.0; rows * cols];
            for row in t.chunks_mut(cols) {
                let mut sum = 0.0;
                for x in row.iter_mut() {
                    *x = rng();
                    sum += *x;
                }
                for x in row.iter_mut() {
                    *x /= sum;
                }
            }
            t
        };
        let mut draw = || -> f64 {
            // Exponential variates make the normalized rows uniform on
            // the simplex.
            -(1.0 - rng.gen::<f64>()).ln()
        };
        Self {
            nu: fill(layout.nu_rows(), layout.nn, &mut draw),
            seed: if layout.ns > 1 {
                fill(layout.seed_rows(), layout.ns, &mut draw)
            } else {
                vec![1.0; layout.seed_rows()]
            },
            lam: fill(layout.lam_rows(), layout.nl, &mut draw),
            mu: fill(layout.mu_rows(), layout.nm, &mut draw),
            out_a: fill(layout.out_a_rows(), 2, &mut draw),
            out_b: fill(layout.out_b_rows(), 2, &mut draw),
        }
    }

    /// Every row a point mass on a random column: a random deterministic
    /// strategy, the natural start for vertex-to-vertex ascent.
    pub fn random_vertices(layout: &Layout, rng: &mut impl Rng) -> Self {
        let fill = |rows: usize, cols: usize, rng: &mut dyn FnMut(usize) -> usize| -> Vec<f64> {
            let mut t = vec![0.0; rows * cols];
            for row in t.chunks_mut(cols) {
                row[rng(cols)] = 1.0;
            }
            t
        };
        let mut pick = |n: usize| rng.gen_range(0..n);
        Self {
            nu: fill(layout.nu_rows(), layout.nn, &mut pick),
            seed: if layout.ns > 1 {
                fill(layout.seed_rows(), layout.ns, &mut pick)
            } else {
                vec![1.0; layout.seed_rows()]
            },
            lam: fill(layout.lam_rows(), layout.nl, &mut pick),
            mu: fill(layout.mu_rows(), layout.nm, &mut pick),
            out_a: fill(layout.out_a_rows(), 2, &mut pick),
            out_b: fill(layout.out_b_rows(), 2, &mut pick),
        }
    }

    /// Mean products `M` per allowed triple, in `layout.triples` order.
    pub fn correlators(&self, layout: &Layout) -> Vec<f64> {
        let mut m = Vec::with_capacity(layout.triples.len());
        for &(ia, ib, ic) in &layout.triples {
            let mut total = 0.0;
            let nu_row = layout.nu_row(ia, ib, ic);
            for inn in 0..layout.nn {
                let p_nu = self.nu[nu_row * layout.nn + inn];
                if p_nu == 0.0 {
                    continue;
                }
                let seed_row = layout.seed_row(inn, ic);
                for is in 0..layout.ns {
                    let p_s = self.seed[seed_row * layout.ns + is];
                    if p_s == 0.0 {
                        continue;
                    }
                    let mut e_a = 0.0;
                    for il in 0..layout.nl {
                        let p_l = self.lam[layout.lam_row(is, inn, ia, ib, ic) * layout.nl + il];
                        if p_l == 0.0 {
                            continue;
                        }
                        let row = layout.out_a_row(ia, ic, il, inn);
                        e_a += p_l * (self.out_a[row * 2] - self.out_a[row * 2 + 1]);
                    }
                    let mut e_b = 0.0;
                    for im in 0..layout.nm {
                        let p_m = self.mu[layout.mu_row(is, inn, ia, ib, ic) * layout.nm + im];
                        if p_m == 0.0 {
                            continue;
                        }
                        let row = layout.out_b_row(ib, ic, im, inn);
                        e_b += p_m * (self.out_b[row * 2] - self.out_b[row * 2 + 1]);
                    }
                    total += p_nu * p_s * e_a * e_b;
                }
            }
            m.push(total);
        }
        m
    }

    /// Materialize the factors as a full beables model: one context
    /// joint per allowed triple, the latent seed summed out.
    pub fn to_model(&self, layout: &Layout) -> Result<BeablesModel, ModelError> {
        let spaces = layout.spaces()?;
        let vars = spaces.context_variables();
        let a_labels = labels("a", layout.na);
        let b_labels = labels("b", layout.nb);
        let c_labels = labels("c", layout.nc);
        let mut joints = BTreeMap::new();
        for &(ia, ib, ic) in &layout.triples {
            let mut w = vec![0.0; 4 * layout.nl * layout.nm * layout.nn];
            let nu_row = layout.nu_row(ia, ib, ic);
            for inn in 0..layout.nn {
                let p_nu = self.nu[nu_row * layout.nn + inn];
                for is in 0..layout.ns {
                    let p_s = self.seed[layout.seed_row(inn, ic) * layout.ns + is];
                    for il in 0..layout.nl {
                        let p_l = self.lam[layout.lam_row(is, inn, ia, ib, ic) * layout.nl + il];
                        for im in 0..layout.nm {
                            let p_m = self.mu[layout.mu_row(is, inn, ia, ib, ic) * layout.nm + im];
                            let base = p_nu * p_s * p_l * p_m;
                            if base == 0.0 {
                                continue;
                            }
                            for out_a in 0..2 {
                                let p_a = self.out_a[layout.out_a_row(ia, ic, il, inn) * 2 + out_a];
                                for out_b in 0..2 {
                                    let p_b =
                                        self.out_b[layout.out_b_row(ib, ic, im, inn) * 2 + out_b];
                                    let flat = (((out_a * 2 + out_b) * layout.nl + il) * layout.nm
                                        + im)
                                        * layout.nn
                                        + inn;
                                    w[flat] += base * p_a * p_b;
                                }
                            }
                        }
                    }
                }
            }
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
}

/// Fast CHSH maximum over a correlator vector indexed by
/// `layout.triples`, mirroring `CorrelatorTable::max_chsh`: all setting
/// quadruples, all contexts (one effective context per pair when
/// coupled), both sign variants.
pub(crate) struct ChshScorer {
    quads: Vec<[usize; 4]>,
}

impl ChshScorer {
    pub fn new(layout: &Layout) -> Result<Self, OptimizerError> {
        if layout.na < 2 {
            return Err(OptimizerError::Model(ModelError::TooFewSettings {
                side: 'a',
            }));
        }
        if layout.nb < 2 {
            return Err(OptimizerError::Model(ModelError::TooFewSettings {
                side: 'b',
            }));
        }
        let index_of = |ia: usize, ib: usize, ic: usize| -> usize {
            layout
                .triples
                .iter()
                .position(|&t| t == (ia, ib, ic))
                .expect("quadruples range over allowed triples")
        };
        let mut quads = Vec::new();
        for ia in 0..layout.na {
            for ia2 in ia + 1..layout.na {
                for ib in 0..layout.nb {
                    for ib2 in ib + 1..layout.nb {
                        match &layout.ctx_of {
                            Some(ctx) => quads.push([
                                index_of(ia, ib, ctx[ia * layout.nb + ib]),
                                index_of(ia, ib2, ctx[ia * layout.nb + ib2]),
                                index_of(ia2, ib, ctx[ia2 * layout.nb + ib]),
                                index_of(ia2, ib2, ctx[ia2 * layout.nb + ib2]),
                            ]),
                            None => {
                                for ic in 0..layout.nc {
                                    quads.push([
                                        index_of(ia, ib, ic),
                                        index_of(ia, ib2, ic),
                                        index_of(ia2, ib, ic),
                                        index_of(ia2, ib2, ic),
                                    ]);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(Self { quads })
    }

    pub fn score(&self, m: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for q in &self.quads {
            let (m1, m2, m3, m4) = (m[q[0]], m[q[1]], m[q[2]], m[q[3]]);
            let minus_plus = (m1 - m2).abs() + (m3 + m4).abs();
            let plus_minus = (m1 + m2).abs() + (m3 - m4).abs();
            best = best.max(minus_plus).max(plus_minus);
        }
        best
    }
}
