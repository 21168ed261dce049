//! Command-line front end for finite beables models: validate model
//! files, run the assumption checkers, evaluate CHSH quantities,
//! maximize over model families, compute the quantum singlet reference,
//! complete observed statistics with copying hidden variables, and
//! decide local-polytope membership of correlator tables.
//!
//! Exit codes: 0 success, 1 a check failed (an assumption deviates
//! beyond tolerance, a model violates an invariant, a table lies outside
//! the local polytope), 2 usage or parse errors.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use beables::assumptions::{full_report, AssumptionKind, AssumptionReport, AssumptionSet};
use beables::format::{
    parse_model, read_document, write_document, ObservedDocument, OptimizationSection,
    PolytopeSection, QuantumSection, ReportDocument, ScanDocument, TableDocument,
};
use beables::model::{CorrelatorTable, SettingsPrior};
use beables::optimizer::{
    coordinate_ascent, decide_local_realizability, enumerate_deterministic, hidden_completion,
    Cardinalities, ObservedJoint, OptimizationProblem,
};
use beables::quantum::{tsirelson_bound, tsirelson_gap_scan, QuantumScenario};

#[derive(Parser)]
#[command(
    name = "beables",
    version,
    about = "Finite beables models of Bell experiments: checkers, bounds, completions"
)]
struct Cli {
    /// Write a machine-readable report document to this path.
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PriorChoice {
    /// Uniform over the allowed setting triples.
    Uniform,
    /// The settings_prior embedded in the model file.
    File,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model file and check its structural invariants.
    Validate { file: PathBuf },
    /// Run every assumption checker and report the implied CHSH bound.
    Check {
        file: PathBuf,
        /// Deviation above this is a failed check.
        #[arg(long, default_value_t = beables::DEFAULT_TOLERANCE)]
        tolerance: f64,
        /// Settings prior; defaults to the file's prior when it has one,
        /// uniform otherwise.
        #[arg(long, value_enum)]
        prior: Option<PriorChoice>,
    },
    /// Print a model's correlator table and CHSH quantities.
    Chsh {
        file: PathBuf,
        /// Evaluate every setting quadruple instead of only the maximum.
        #[arg(long, conflicts_with = "quad")]
        all: bool,
        /// Evaluate one quadruple: a a' b b' [c].
        #[arg(long, num_args = 4..=5, value_name = "LABEL")]
        quad: Option<Vec<String>>,
    },
    /// Maximize CHSH over the family of models with the given
    /// cardinalities and enforced assumptions.
    Optimize {
        /// `all`, or `relax:<assumption>[,<assumption>...]`.
        #[arg(long, default_value = "all")]
        flags: String,
        /// `binary`, or six comma-separated cardinalities
        /// `a,b,c,lambda,mu,nu`.
        #[arg(long, default_value = "binary")]
        cards: String,
        /// Exhaustive strategy enumeration, exact (the default).
        #[arg(long, conflicts_with = "ascend")]
        enumerate: bool,
        /// Random-restart coordinate ascent, a lower bound.
        #[arg(long)]
        ascend: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ascent restarts.
        #[arg(long, default_value_t = 20)]
        restarts: usize,
    },
    /// Singlet correlators at measurement angles, against `2*sqrt(2)`.
    Quantum {
        /// Even count of angles in radians: first half wing a, second
        /// half wing b. Default: 0 pi/2 pi/4 3pi/4.
        #[arg(long, num_args = 2.., value_name = "RADIANS", allow_negative_numbers = true, conflicts_with = "scan")]
        angles: Option<Vec<f64>>,
        /// Scan a uniform angle grid of this resolution instead.
        #[arg(long, value_name = "N")]
        scan: Option<usize>,
    },
    /// Extend an observed joint with hidden variables that copy the
    /// outcomes, and report which assumptions the extension violates.
    Complete { file: PathBuf },
    /// Decide whether a 2x2 correlator table is a mixture of local
    /// deterministic strategies.
    Polytope { file: PathBuf },
}

fn main() -> ExitCode {
    // Die quietly on a closed pipe, like every other line-oriented tool.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

type CliError = Box<dyn std::error::Error>;

fn run(cli: Cli) -> Result<u8, CliError> {
    let (code, report) = match cli.command {
        Command::Validate { file } => validate(&file)?,
        Command::Check {
            file,
            tolerance,
            prior,
        } => check(&file, tolerance, prior)?,
        Command::Chsh { file, all, quad } => chsh(&file, all, quad.as_deref())?,
        Command::Optimize {
            flags,
            cards,
            enumerate: _,
            ascend,
            seed,
            restarts,
        } => optimize(&flags, &cards, ascend, seed, restarts)?,
        Command::Quantum { angles, scan } => quantum(angles.as_deref(), scan)?,
        Command::Complete { file } => complete(&file)?,
        Command::Polytope { file } => polytope(&file)?,
    };
    if let Some(path) = &cli.json {
        write_document(path, &report)?;
    }
    Ok(code)
}

// ── Subcommands ─────────────────────────────────────────────────────────

fn validate(file: &PathBuf) -> Result<(u8, ReportDocument), CliError> {
    let (model, _) = parse_model(file)?;
    let validation = model.validate();
    let mut report = ReportDocument::new("validate");
    report.validation = Some((&validation).into());
    if validation.is_ok() {
        println!("ok: model satisfies all structural invariants");
        Ok((0, report))
    } else {
        for violation in &validation.violations {
            println!("violation: {violation}");
        }
        Ok((1, report))
    }
}

fn check(
    file: &PathBuf,
    tolerance: f64,
    prior_choice: Option<PriorChoice>,
) -> Result<(u8, ReportDocument), CliError> {
    let (model, embedded) = parse_model(file)?;
    let prior = match (prior_choice, embedded) {
        (Some(PriorChoice::Uniform), _) | (None, None) => SettingsPrior::uniform(&model),
        (Some(PriorChoice::File), None) => {
            return Err("the model file carries no settings_prior".into())
        }
        (Some(PriorChoice::File), Some(p)) | (None, Some(p)) => p,
    };
    let assumption_report = full_report(&model, &prior, tolerance)?;
    print_findings(&assumption_report);
    let table = model.correlator_table()?;
    let mut report = ReportDocument::new("check");
    report.assumptions = Some((&assumption_report).into());
    report.correlators = Some((&table).into());
    if let Ok(max) = table.max_chsh() {
        println!("max CHSH = {max}");
        report.max_chsh = Some((&max).into());
    }
    Ok((u8::from(!assumption_report.all_passed()), report))
}

fn chsh(
    file: &PathBuf,
    all: bool,
    quad: Option<&[String]>,
) -> Result<(u8, ReportDocument), CliError> {
    let (model, _) = parse_model(file)?;
    let table = model.correlator_table()?;
    print_correlators(&table);
    let mut report = ReportDocument::new("chsh");
    report.correlators = Some((&table).into());
    if let Some(labels) = quad {
        let context = labels.get(4).map(String::as_str);
        for sign in beables::model::SignChoice::BOTH {
            let result = table.chsh(
                &labels[0], &labels[1], &labels[2], &labels[3], context, sign,
            )?;
            println!("CHSH = {result}");
            let better = report
                .max_chsh
                .as_ref()
                .is_none_or(|held| result.value > held.value);
            if better {
                report.max_chsh = Some((&result).into());
            }
        }
        return Ok((0, report));
    }
    if all {
        print_all_quadruples(&table);
    }
    let max = table.max_chsh()?;
    println!("max CHSH = {max}");
    report.max_chsh = Some((&max).into());
    Ok((0, report))
}

fn optimize(
    flags: &str,
    cards: &str,
    ascend: bool,
    seed: u64,
    restarts: usize,
) -> Result<(u8, ReportDocument), CliError> {
    let assumptions = parse_flags(flags)?;
    let mut problem = if cards == "binary" {
        OptimizationProblem::binary(assumptions)
    } else {
        OptimizationProblem::new(parse_cards(cards)?, assumptions, None)?
    };
    problem.seed = seed;
    problem.restarts = restarts;
    let result = if ascend {
        coordinate_ascent(&problem)?
    } else {
        enumerate_deterministic(&problem)?
    };
    println!(
        "max CHSH = {:.9} ({})",
        result.chsh.value, result.certificate
    );
    let relaxed: Vec<String> = assumptions
        .relaxed()
        .iter()
        .map(|k| k.name().to_owned())
        .collect();
    println!(
        "relaxed assumptions: {}",
        if relaxed.is_empty() {
            "none".to_owned()
        } else {
            relaxed.join(", ")
        }
    );
    println!("attained {}", result.chsh);
    let c = problem.cardinalities;
    let mut report = ReportDocument::new("optimize");
    report.optimization = Some(OptimizationSection {
        cardinalities: [c.a, c.b, c.c, c.lambda, c.mu, c.nu],
        relaxed,
        seed,
        chsh: result.chsh.value,
        certificate: result.certificate.to_string(),
        trace: result.trace.clone(),
    });
    report.max_chsh = Some((&result.chsh).into());
    Ok((0, report))
}

fn quantum(angles: Option<&[f64]>, scan: Option<usize>) -> Result<(u8, ReportDocument), CliError> {
    let mut report = ReportDocument::new("quantum");
    if let Some(resolution) = scan {
        let result = tsirelson_gap_scan(resolution)?;
        println!(
            "scan maximum = {:.9} at angles [{:.6}, {:.6}, {:.6}, {:.6}] (resolution {resolution})",
            result.value, result.angles[0], result.angles[1], result.angles[2], result.angles[3]
        );
        println!("quantum reference = {:.9} (2*sqrt(2))", tsirelson_bound());
        println!("gap = {:.3e}", tsirelson_bound() - result.value);
        report.quantum = Some(QuantumSection {
            angles_a: Vec::new(),
            angles_b: Vec::new(),
            reference: tsirelson_bound(),
            max_chsh: None,
            scan: Some(ScanDocument {
                resolution,
                value: result.value,
                angles: result.angles,
            }),
        });
        return Ok((0, report));
    }
    let default_angles = [0.0, FRAC_PI_2, FRAC_PI_4, 3.0 * PI / 4.0];
    let angles = angles.unwrap_or(&default_angles);
    if angles.len() < 4 || !angles.len().is_multiple_of(2) {
        return Err("--angles needs an even count of at least four values".into());
    }
    let (angles_a, angles_b) = angles.split_at(angles.len() / 2);
    let scenario = QuantumScenario::from_angles(angles_a, angles_b)?;
    let table = scenario.quantum_table()?;
    print_correlators(&table);
    let max = table.max_chsh()?;
    println!("max CHSH = {max}");
    println!("quantum reference = {:.9} (2*sqrt(2))", tsirelson_bound());
    report.correlators = Some((&table).into());
    report.max_chsh = Some((&max).into());
    report.quantum = Some(QuantumSection {
        angles_a: angles_a.to_vec(),
        angles_b: angles_b.to_vec(),
        reference: tsirelson_bound(),
        max_chsh: Some((&max).into()),
        scan: None,
    });
    Ok((0, report))
}

fn complete(file: &PathBuf) -> Result<(u8, ReportDocument), CliError> {
    let document: ObservedDocument = read_document(file)?;
    let observed = ObservedJoint::new(document.to_joint()?)?;
    let completion = hidden_completion(&observed)?;
    let reproduction_error = completion.reproduction_error(&observed)?;
    println!("completion constructed: lambda copies A, mu copies B, c and nu null");
    println!("reproduction error = {:.3e}", reproduction_error);
    print_findings(&completion.report);
    let mut report = ReportDocument::new("complete");
    let mut section = beables::format::CompletionSection {
        reproduction_error,
        assumptions: (&completion.report).into(),
        max_chsh: None,
    };
    if let Ok(max) = completion.model.correlator_table()?.max_chsh() {
        println!("max CHSH of the completion = {max}");
        section.max_chsh = Some((&max).into());
    }
    report.completion = Some(section);
    Ok((0, report))
}

fn polytope(file: &PathBuf) -> Result<(u8, ReportDocument), CliError> {
    let document: TableDocument = read_document(file)?;
    let table = document.to_table()?;
    let decision = decide_local_realizability(&table)?;
    let mut report = ReportDocument::new("polytope");
    report.polytope = Some(PolytopeSection {
        realizable: decision.realizable,
        weights: decision.weights.clone(),
        witness: decision.witness.as_ref().map(Into::into),
    });
    if decision.realizable {
        println!("locally realizable: mixture over deterministic strategies found");
        if let Some(weights) = &decision.weights {
            for (i, w) in weights.iter().enumerate() {
                if *w > 1e-12 {
                    println!("  strategy {i:2}  weight {w:.9}");
                }
            }
        }
        Ok((0, report))
    } else {
        if let Some(witness) = &decision.witness {
            println!("not locally realizable: CHSH witness = {witness}");
        }
        Ok((1, report))
    }
}

// ── Shared rendering and argument parsing ───────────────────────────────

fn print_findings(report: &AssumptionReport) {
    println!("assumption checks (tolerance {:e}):", report.tolerance);
    for finding in &report.findings {
        let verdict = if finding.passed { "pass" } else { "FAIL" };
        let mut line = format!(
            "  {:<26} {}  max dev {:.3e}  weighted {:.3e}",
            finding.kind.name(),
            verdict,
            finding.max_dev,
            finding.weighted_dev
        );
        if !finding.passed {
            if let Some(context) = &finding.worst_context {
                let pairs: Vec<String> = context.iter().map(|(v, l)| format!("{v}={l}")).collect();
                line.push_str(&format!("  at {}", pairs.join(", ")));
            }
            if !finding.missing_triples.is_empty() {
                line.push_str(&format!(
                    "  ({} setting triples never occur)",
                    finding.missing_triples.len()
                ));
            }
        }
        println!("{line}");
    }
    println!("implied CHSH bound = {}", report.bound);
    println!("quantum reference = {:.9}", report.quantum_reference);
}

fn print_correlators(table: &CorrelatorTable) {
    println!("correlators:");
    for a in table.a_labels() {
        for b in table.b_labels() {
            for c in table.c_labels() {
                if let Ok(value) = table.value(a, b, c) {
                    println!("  M({a}, {b} | {c}) = {value:+.9}");
                }
            }
        }
    }
}

fn print_all_quadruples(table: &CorrelatorTable) {
    let a_labels = table.a_labels();
    let b_labels = table.b_labels();
    for (i, a) in a_labels.iter().enumerate() {
        for a_prime in &a_labels[i + 1..] {
            for (j, b) in b_labels.iter().enumerate() {
                for b_prime in &b_labels[j + 1..] {
                    for sign in beables::model::SignChoice::BOTH {
                        match table.chsh(a, a_prime, b, b_prime, None, sign) {
                            Ok(result) => println!("CHSH = {result}"),
                            Err(beables::model::ModelError::AmbiguousContext) => {
                                for c in table.c_labels() {
                                    if let Ok(result) =
                                        table.chsh(a, a_prime, b, b_prime, Some(c), sign)
                                    {
                                        println!("CHSH = {result}");
                                    }
                                }
                            }
                            Err(_) => {}
                        }
                    }
                }
            }
        }
    }
}

fn parse_flags(text: &str) -> Result<AssumptionSet, CliError> {
    if text == "all" {
        return Ok(AssumptionSet::all_enforced());
    }
    let Some(list) = text.strip_prefix("relax:") else {
        return Err(
            format!("--flags must be `all` or `relax:<assumption>[,...]`; got `{text}`").into(),
        );
    };
    let mut assumptions = AssumptionSet::all_enforced();
    for name in list.split(',') {
        let kind = AssumptionKind::parse(name.trim()).ok_or_else(|| {
            let known: Vec<&str> = AssumptionKind::ALL.iter().map(|k| k.name()).collect();
            format!("unknown assumption `{name}`; known: {}", known.join(", "))
        })?;
        assumptions = assumptions.relax(kind);
    }
    Ok(assumptions)
}

fn parse_cards(text: &str) -> Result<Cardinalities, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 6 {
        return Err(format!(
            "--cards must be `binary` or six comma-separated sizes a,b,c,lambda,mu,nu; got `{text}`"
        )
        .into());
    }
    let mut sizes = [0usize; 6];
    for (slot, part) in sizes.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("`{part}` is not a cardinality"))?;
    }
    Ok(Cardinalities {
        a: sizes[0],
        b: sizes[1],
        c: sizes[2],
        lambda: sizes[3],
        mu: sizes[4],
        nu: sizes[5],
    })
}
