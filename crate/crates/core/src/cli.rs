//! Command-line front end: `verify`, `sweep`, `minimize` and `perturb-check`.
//!
//! Every report embeds the tolerances it was judged against. Work is spread
//! over threads but records are always ordered by index, so a given command
//! line and seed always produce the same bytes.
//!
//! Exit codes: 0 when every check passes, 1 on a mathematical violation or
//! non-convergence, 2 on usage or input errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::conditions::{check_state, ConditionReport};
use crate::error::Error;
use crate::minimizer::{
    enumerate_patterns, minimize_f, oracle_scan, perturbation_delta, random_admissible_transfer, richardson_ladder,
    FeasibleRegionSpec, LadderReport, MassTransfer, MinimizationResult, OracleResult, PerturbationOutcome,
    SupportPattern, DECAY_RATIO_RANGE, DEFAULT_ORACLE_SAMPLES, DEFAULT_RESTARTS,
    DEFAULT_SUPPORT_FLOOR,
};
use crate::spectra::{DEFAULT_RANK_THRESHOLD, MAJORIZATION_TOL};
use crate::stategen::{derive_seed, generate, FactorKind, GeneratorKind, GeneratorSpec};
use crate::tensor::{read_density, TripartiteDims};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Lower bound on minima used by `minimize`.
pub const DEFAULT_MINIMUM_BOUND: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "ssalab", version, about = "Spectral checks and entropy minimization for strong subadditivity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check majorization relations, zero counts and entropy gaps state by state.
    Verify(VerifyArgs),
    /// Summaries of `verify` over several dimension triples.
    Sweep(SweepArgs),
    /// Minimize the entropy functional per support pattern, with a random-search oracle.
    Minimize(MinimizeArgs),
    /// Compare first-order and exact changes of the functional under mass transfers.
    PerturbCheck(PerturbArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Master seed; per-item seeds are derived from it.
    #[arg(long, env = "SSALAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<TripartiteDims>,
    #[arg(long, default_value_t = 100, value_parser = parse_count)]
    pub states: usize,
    /// ginibre_full, ginibre_rank=K, pure_random, ghz, w,
    /// product=F,F,F (maximally_mixed|ginibre|pure) or lemma2_construct=S.
    #[arg(long, default_value = "ginibre_full", value_parser = parse_generator)]
    pub generator: GeneratorKind,
    /// Density matrix file to check instead of generated states.
    #[arg(long, conflicts_with_all = ["states", "generator"])]
    pub input: Option<PathBuf>,
    /// Eigenvalues at or below this count as zero.
    #[arg(long, default_value_t = DEFAULT_RANK_THRESHOLD, value_parser = parse_positive)]
    pub threshold: f64,
    /// Margins and gaps below minus this are violations.
    #[arg(long, default_value_t = MAJORIZATION_TOL, value_parser = parse_positive)]
    pub tolerance: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Dimension triples separated by ';' or given repeatedly.
    #[arg(long, value_delimiter = ';', value_parser = parse_dims,
          default_value = "2,2,2;2,3,2;3,2,2")]
    pub dims: Vec<TripartiteDims>,
    #[arg(long, default_value_t = 1000, value_parser = parse_count)]
    pub states: usize,
    #[arg(long, default_value = "ginibre_full", value_parser = parse_generator)]
    pub generator: GeneratorKind,
    #[arg(long, default_value_t = DEFAULT_RANK_THRESHOLD, value_parser = parse_positive)]
    pub threshold: f64,
    #[arg(long, default_value_t = MAJORIZATION_TOL, value_parser = parse_positive)]
    pub tolerance: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct MinimizeArgs {
    #[arg(long, default_value = "2,2,2", value_parser = parse_dims)]
    pub dims: TripartiteDims,
    #[arg(long, default_value_t = DEFAULT_RESTARTS, value_parser = parse_count)]
    pub restarts: usize,
    /// Oracle samples per pattern.
    #[arg(long, default_value_t = DEFAULT_ORACLE_SAMPLES, value_parser = parse_count)]
    pub oracle: usize,
    /// `all`, `full`, or zero counts like `abc=4,ab=2,bc=2,b=1`; separate with ';' or repeat.
    #[arg(long, value_delimiter = ';', default_value = "all")]
    pub patterns: Vec<String>,
    /// Majorization tolerance recorded with each feasible region.
    #[arg(long, default_value_t = MAJORIZATION_TOL, value_parser = parse_positive)]
    pub tolerance: f64,
    /// Smallest value allowed on a support entry.
    #[arg(long, default_value_t = DEFAULT_SUPPORT_FLOOR, value_parser = parse_positive)]
    pub support_floor: f64,
    /// Minima below minus this are violations.
    #[arg(long, default_value_t = DEFAULT_MINIMUM_BOUND, value_parser = parse_positive)]
    pub bound: f64,
    /// Oracle minima below minus this are violations.
    #[arg(long, default_value_t = MAJORIZATION_TOL, value_parser = parse_positive)]
    pub oracle_bound: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long, default_value = "2,2,2", value_parser = parse_dims)]
    pub dims: TripartiteDims,
    /// Number of random configurations.
    #[arg(long, default_value_t = 100, value_parser = parse_count)]
    pub states: usize,
    /// Transfer masses, each half of the previous.
    #[arg(long, value_delimiter = ',', value_parser = parse_positive,
          default_value = "1e-4,5e-5,2.5e-5,1.25e-5")]
    pub ladder: Vec<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

fn parse_dims(s: &str) -> std::result::Result<TripartiteDims, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("count must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_positive(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("{v} is not a positive finite number")),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_factor(s: &str) -> std::result::Result<FactorKind, String> {
    match s.trim() {
        "maximally_mixed" | "mixed" => Ok(FactorKind::MaximallyMixed),
        "ginibre" => Ok(FactorKind::Ginibre),
        "pure" => Ok(FactorKind::Pure),
        other => Err(format!("unknown factor '{other}'")),
    }
}

fn parse_generator(s: &str) -> std::result::Result<GeneratorKind, String> {
    let (name, arg) = match s.split_once('=') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (s.trim(), None),
    };
    let number = |a: Option<&str>| -> std::result::Result<usize, String> {
        a.ok_or_else(|| format!("{name} needs a value, e.g. {name}=1"))?
            .parse()
            .map_err(|e| format!("{name}: {e}"))
    };
    match name {
        "ginibre_full" => Ok(GeneratorKind::GinibreFull),
        "ginibre_rank" => Ok(GeneratorKind::GinibreRank { rank: number(arg)? }),
        "pure_random" => Ok(GeneratorKind::PureRandom),
        "ghz" => Ok(GeneratorKind::Ghz),
        "w" => Ok(GeneratorKind::W),
        "lemma2_construct" => Ok(GeneratorKind::Lemma2Construct { s: number(arg)? }),
        "product" => {
            let factors: Vec<FactorKind> = arg
                .ok_or("product needs three factors, e.g. product=ginibre,pure,maximally_mixed")?
                .split(',')
                .map(parse_factor)
                .collect::<std::result::Result<_, _>>()?;
            let factors: [FactorKind; 3] = factors
                .try_into()
                .map_err(|_| "product needs exactly three factors".to_string())?;
            Ok(GeneratorKind::Product { factors })
        }
        other => Err(format!("unknown generator '{other}'")),
    }
}

fn parse_patterns(specs: &[String], dims: TripartiteDims) -> Result<Vec<SupportPattern>, Error> {
    let mut out = Vec::new();
    for spec in specs {
        if spec.trim().eq_ignore_ascii_case("all") {
            out.extend(enumerate_patterns(dims));
        } else {
            out.push(spec.parse()?);
        }
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|p| seen.insert(*p));
    Ok(out)
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoConvergence { .. } | Error::SamplerFailure { .. } => EXIT_VIOLATION,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// A finished report: serialized bytes plus the exit code they imply.
pub struct Outcome {
    pub code: i32,
    pub summary: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateRecord {
    pub index: usize,
    /// Generator seed; absent for states read from a file.
    pub seed: Option<u64>,
    pub passes: bool,
    pub lemma1_min_margin: f64,
    #[serde(flatten)]
    pub report: ConditionReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub states: usize,
    pub violations: usize,
    pub min_lemma1_margin: f64,
    pub min_ssa_gap: f64,
    pub min_subadd_gap: f64,
    pub lemma2_applicable: usize,
    pub lemma2_failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckTolerances {
    pub threshold: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub dims: TripartiteDims,
    pub generator: Option<GeneratorKind>,
    pub input: Option<String>,
    pub seed: u64,
    pub tolerances: CheckTolerances,
    pub summary: VerifySummary,
    pub records: Vec<StateRecord>,
}

fn summarize(records: &[StateRecord]) -> VerifySummary {
    let fold = |f: &dyn Fn(&StateRecord) -> f64| records.iter().map(f).fold(f64::INFINITY, f64::min);
    VerifySummary {
        states: records.len(),
        violations: records.iter().filter(|r| !r.passes).count(),
        min_lemma1_margin: fold(&|r| r.lemma1_min_margin),
        min_ssa_gap: fold(&|r| r.report.ssa_gap),
        min_subadd_gap: fold(&|r| r.report.subadd_gap),
        lemma2_applicable: records.iter().filter(|r| r.report.lemma2.applicable).count(),
        lemma2_failures: records.iter().filter(|r| !r.report.lemma2.holds).count(),
    }
}

fn record(index: usize, seed: Option<u64>, report: ConditionReport, tolerance: f64) -> StateRecord {
    StateRecord {
        index,
        seed,
        passes: report.passes(tolerance),
        lemma1_min_margin: report.lemma1.min_margin(),
        report,
    }
}

fn generated_records(
    dims: TripartiteDims,
    kind: &GeneratorKind,
    states: usize,
    seed: u64,
    threshold: f64,
    tolerance: f64,
) -> Result<Vec<StateRecord>, Error> {
    GeneratorSpec::new(dims, kind.clone(), seed).validate()?;
    (0..states)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, i as u64);
            let rho = generate(&GeneratorSpec::new(dims, kind.clone(), s))?;
            Ok(record(i, Some(s), check_state(&rho, threshold)?, tolerance))
        })
        .collect()
}

pub fn run_verify(args: &VerifyArgs) -> Result<Outcome, Failure> {
    let (dims, records, generator, input) = match &args.input {
        Some(path) => {
            let rho = read_density(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            let dims = rho.require_tripartite()?;
            if let Some(given) = args.dims {
                if given != dims {
                    return Err(Failure::usage(format!(
                        "--dims {given} does not match {dims} in {}",
                        path.display()
                    )));
                }
            }
            let rec = record(0, None, check_state(&rho, args.threshold)?, args.tolerance);
            (dims, vec![rec], None, Some(path.display().to_string()))
        }
        None => {
            let dims = args.dims.ok_or_else(|| Failure::usage("verify needs --dims or --input"))?;
            let recs = generated_records(dims, &args.generator, args.states, args.out.seed, args.threshold, args.tolerance)?;
            (dims, recs, Some(args.generator.clone()), None)
        }
    };
    let summary = summarize(&records);
    let code = if summary.violations == 0 { EXIT_OK } else { EXIT_VIOLATION };
    let line = format!(
        "verify {dims}: {} states, {} violations, min ssa gap {:e}, min majorization margin {:e}",
        summary.states, summary.violations, summary.min_ssa_gap, summary.min_lemma1_margin
    );
    let report = VerifyReport {
        command: "verify",
        dims,
        generator,
        input,
        seed: args.out.seed,
        tolerances: CheckTolerances {
            threshold: args.threshold,
            tolerance: args.tolerance,
        },
        summary,
        records,
    };
    let bytes = match args.out.format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => csv_bytes(report.records.iter().map(|r| VerifyRow {
            index: r.index,
            seed: r.seed,
            passes: r.passes,
            lemma1_min_margin: r.lemma1_min_margin,
            ab_by_abc_blocks: r.report.lemma1.ab_by_abc_blocks.margin,
            bc_by_abc_blocks: r.report.lemma1.bc_by_abc_blocks.margin,
            b_by_bc_blocks: r.report.lemma1.b_by_bc_blocks.margin,
            b_by_ab_blocks: r.report.lemma1.b_by_ab_blocks.margin,
            lemma2_applicable: r.report.lemma2.applicable,
            lemma2_holds: r.report.lemma2.holds,
            r: r.report.lemma2.r,
            s: r.report.lemma2.s,
            t: r.report.lemma2.t,
            ssa_gap: r.report.ssa_gap,
            subadd_gap: r.report.subadd_gap,
        }))?,
    };
    Ok(Outcome { code, summary: line, bytes })
}

#[derive(Serialize)]
struct VerifyRow {
    index: usize,
    seed: Option<u64>,
    passes: bool,
    lemma1_min_margin: f64,
    ab_by_abc_blocks: f64,
    bc_by_abc_blocks: f64,
    b_by_bc_blocks: f64,
    b_by_ab_blocks: f64,
    lemma2_applicable: bool,
    lemma2_holds: bool,
    r: usize,
    s: usize,
    t: usize,
    ssa_gap: f64,
    subadd_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub dims: TripartiteDims,
    /// Index of the state with the smallest majorization margin.
    pub worst_index: usize,
    #[serde(flatten)]
    pub summary: VerifySummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub command: &'static str,
    pub generator: GeneratorKind,
    pub seed: u64,
    pub tolerances: CheckTolerances,
    pub entries: Vec<SweepEntry>,
}

pub fn run_sweep(args: &SweepArgs) -> Result<Outcome, Failure> {
    let mut entries = Vec::with_capacity(args.dims.len());
    for (k, &dims) in args.dims.iter().enumerate() {
        let seed = derive_seed(args.out.seed, k as u64);
        let records = generated_records(dims, &args.generator, args.states, seed, args.threshold, args.tolerance)?;
        let worst_index = records
            .iter()
            .min_by(|a, b| a.lemma1_min_margin.total_cmp(&b.lemma1_min_margin))
            .map_or(0, |r| r.index);
        entries.push(SweepEntry {
            dims,
            worst_index,
            summary: summarize(&records),
        });
    }
    let violations: usize = entries.iter().map(|e| e.summary.violations).sum();
    let code = if violations == 0 { EXIT_OK } else { EXIT_VIOLATION };
    let line = format!("sweep: {} dims triples, {violations} violations", entries.len());
    let report = SweepReport {
        command: "sweep",
        generator: args.generator.clone(),
        seed: args.out.seed,
        tolerances: CheckTolerances {
            threshold: args.threshold,
            tolerance: args.tolerance,
        },
        entries,
    };
    let bytes = match args.out.format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => csv_bytes(report.entries.iter().map(|e| SweepRow {
            dims: e.dims.to_string(),
            states: e.summary.states,
            violations: e.summary.violations,
            min_lemma1_margin: e.summary.min_lemma1_margin,
            min_ssa_gap: e.summary.min_ssa_gap,
            min_subadd_gap: e.summary.min_subadd_gap,
            lemma2_applicable: e.summary.lemma2_applicable,
            lemma2_failures: e.summary.lemma2_failures,
            worst_index: e.worst_index,
        }))?,
    };
    Ok(Outcome { code, summary: line, bytes })
}

#[derive(Serialize)]
struct SweepRow {
    dims: String,
    states: usize,
    violations: usize,
    min_lemma1_margin: f64,
    min_ssa_gap: f64,
    min_subadd_gap: f64,
    lemma2_applicable: usize,
    lemma2_failures: usize,
    worst_index: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizeTolerances {
    pub majorization: f64,
    pub support_floor: f64,
    pub bound: f64,
    pub oracle_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PatternRecord {
    pub index: usize,
    pub pattern: SupportPattern,
    pub minimize_seed: u64,
    pub oracle_seed: u64,
    pub minimization: Option<MinimizationResult>,
    pub minimization_error: Option<String>,
    pub oracle: Option<OracleResult>,
    pub oracle_error: Option<String>,
    /// Minimum or oracle value fell below its bound.
    pub negative: bool,
    pub nonconverged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizeSummary {
    pub patterns: usize,
    pub negative_patterns: usize,
    pub nonconverged_patterns: usize,
    pub sampler_failures: usize,
    pub min_objective: Option<f64>,
    pub min_oracle: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizeReport {
    pub command: &'static str,
    pub dims: TripartiteDims,
    pub restarts: usize,
    pub oracle_samples: usize,
    pub seed: u64,
    pub tolerances: MinimizeTolerances,
    pub summary: MinimizeSummary,
    pub patterns: Vec<PatternRecord>,
}

pub fn run_minimize(args: &MinimizeArgs) -> Result<Outcome, Failure> {
    let patterns = parse_patterns(&args.patterns, args.dims)?;
    if patterns.is_empty() {
        return Err(Failure::usage("no support patterns selected"));
    }
    let specs: Vec<FeasibleRegionSpec> = patterns
        .iter()
        .map(|&p| FeasibleRegionSpec::with_options(args.dims, p, args.tolerance, args.support_floor))
        .collect::<Result<_, _>>()?;

    let records: Vec<PatternRecord> = specs
        .iter()
        .enumerate()
        .map(|(index, spec)| {
            let minimize_seed = derive_seed(args.out.seed, 2 * index as u64);
            let oracle_seed = derive_seed(args.out.seed, 2 * index as u64 + 1);
            let minimized = minimize_f(spec, args.restarts, minimize_seed);
            let oracle = oracle_scan(spec, args.oracle, oracle_seed);
            let nonconverged = matches!(minimized, Err(Error::NoConvergence { .. }));
            let negative = minimized.as_ref().is_ok_and(|m| m.objective < -args.bound)
                || oracle.as_ref().is_ok_and(|o| o.min_objective < -args.oracle_bound);
            let (minimization, minimization_error) = split(minimized);
            let (oracle, oracle_error) = split(oracle);
            PatternRecord {
                index,
                pattern: spec.pattern,
                minimize_seed,
                oracle_seed,
                minimization,
                minimization_error,
                oracle,
                oracle_error,
                negative,
                nonconverged,
            }
        })
        .collect();

    let min_of = |vals: Vec<f64>| vals.into_iter().reduce(f64::min);
    let summary = MinimizeSummary {
        patterns: records.len(),
        negative_patterns: records.iter().filter(|r| r.negative).count(),
        nonconverged_patterns: records.iter().filter(|r| r.nonconverged).count(),
        sampler_failures: records
            .iter()
            .filter(|r| r.minimization_error.is_some() && !r.nonconverged || r.oracle_error.is_some())
            .count(),
        min_objective: min_of(records.iter().filter_map(|r| r.minimization.as_ref().map(|m| m.objective)).collect()),
        min_oracle: min_of(records.iter().filter_map(|r| r.oracle.as_ref().map(|o| o.min_objective)).collect()),
    };
    let code = if summary.negative_patterns == 0 && summary.nonconverged_patterns == 0 {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    };
    let line = format!(
        "minimize {}: {} patterns, {} below bound, {} not converged, min F {}, oracle min {}",
        args.dims,
        summary.patterns,
        summary.negative_patterns,
        summary.nonconverged_patterns,
        fmt_opt(summary.min_objective),
        fmt_opt(summary.min_oracle)
    );
    let report = MinimizeReport {
        command: "minimize",
        dims: args.dims,
        restarts: args.restarts,
        oracle_samples: args.oracle,
        seed: args.out.seed,
        tolerances: MinimizeTolerances {
            majorization: args.tolerance,
            support_floor: args.support_floor,
            bound: args.bound,
            oracle_bound: args.oracle_bound,
        },
        summary,
        patterns: records,
    };
    let bytes = match args.out.format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => csv_bytes(report.patterns.iter().map(|r| MinimizeRow {
            pattern: r.pattern.to_string(),
            objective: r.minimization.as_ref().map(|m| m.objective),
            feasibility_residual: r.minimization.as_ref().map(|m| m.feasibility_residual),
            uniformity_deviation: r.minimization.as_ref().map(|m| m.uniformity_deviation),
            converged_restarts: r.minimization.as_ref().map(|m| m.converged_restarts),
            oracle_min: r.oracle.as_ref().map(|o| o.min_objective),
            negative: r.negative,
            error: r.minimization_error.clone().or_else(|| r.oracle_error.clone()),
        }))?,
    };
    Ok(Outcome { code, summary: line, bytes })
}

#[derive(Serialize)]
struct MinimizeRow {
    pattern: String,
    objective: Option<f64>,
    feasibility_residual: Option<f64>,
    uniformity_deviation: Option<f64>,
    converged_restarts: Option<usize>,
    oracle_min: Option<f64>,
    negative: bool,
    error: Option<String>,
}

fn split<T>(r: Result<T, Error>) -> (Option<T>, Option<String>) {
    match r {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.6}"))
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbRecord {
    pub index: usize,
    pub seed: u64,
    pub transfer: MassTransfer,
    pub zero: PerturbationOutcome,
    pub ladder: LadderReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbSummary {
    pub configurations: usize,
    pub failures: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbReport {
    pub command: &'static str,
    pub dims: TripartiteDims,
    pub seed: u64,
    pub ladder: Vec<f64>,
    pub ratio_range: (f64, f64),
    pub summary: PerturbSummary,
    pub records: Vec<PerturbRecord>,
}

pub fn run_perturb_check(args: &PerturbArgs) -> Result<Outcome, Failure> {
    if args.ladder.len() < 2 {
        return Err(Failure::usage("--ladder needs at least two values"));
    }
    if args.ladder.windows(2).any(|w| (w[1] * 2.0 - w[0]).abs() > 1e-12 * w[0]) {
        return Err(Failure::usage("--ladder values must halve at each step"));
    }
    let records: Vec<PerturbRecord> = (0..args.states)
        .into_par_iter()
        .map(|index| {
            let seed = derive_seed(args.out.seed, index as u64);
            let (tuple, transfer) = random_admissible_transfer(args.dims, seed)?;
            Ok(PerturbRecord {
                index,
                seed,
                transfer,
                zero: perturbation_delta(&tuple, &transfer, 0.0)?,
                ladder: richardson_ladder(&tuple, &transfer, &args.ladder)?,
            })
        })
        .collect::<Result<_, Error>>()
        .map_err(|e| Failure {
            code: EXIT_VIOLATION,
            message: format!("no admissible configuration: {e}"),
        })?;
    let summary = PerturbSummary {
        configurations: records.len(),
        failures: records.iter().filter(|r| !r.ladder.holds).count(),
        min_ratio: records.iter().map(|r| r.ladder.min_ratio).fold(f64::INFINITY, f64::min),
        max_ratio: records.iter().map(|r| r.ladder.max_ratio).fold(f64::NEG_INFINITY, f64::max),
    };
    let code = if summary.failures == 0 { EXIT_OK } else { EXIT_VIOLATION };
    let line = format!(
        "perturb-check {}: {} configurations, {} outside [{}, {}], ratios {:.4}..{:.4}",
        args.dims,
        summary.configurations,
        summary.failures,
        DECAY_RATIO_RANGE.0,
        DECAY_RATIO_RANGE.1,
        summary.min_ratio,
        summary.max_ratio
    );
    let report = PerturbReport {
        command: "perturb-check",
        dims: args.dims,
        seed: args.out.seed,
        ladder: args.ladder.clone(),
        ratio_range: DECAY_RATIO_RANGE,
        summary,
        records,
    };
    let bytes = match args.out.format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => csv_bytes(report.records.iter().flat_map(|r| {
            std::iter::once((r, &r.zero, None)).chain(r.ladder.rows.iter().map(move |row| (r, &row.outcome, row.ratio)))
        })
        .map(|(r, o, ratio)| PerturbRow {
            index: r.index,
            seed: r.seed,
            delta: o.delta,
            predicted: o.predicted,
            direct: o.direct,
            error: o.error(),
            ratio,
        }))?,
    };
    Ok(Outcome { code, summary: line, bytes })
}

#[derive(Serialize)]
struct PerturbRow {
    index: usize,
    seed: u64,
    delta: f64,
    predicted: f64,
    direct: f64,
    error: f64,
    ratio: Option<f64>,
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes<T: Serialize>(rows: impl Iterator<Item = T>) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Failure::usage(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Failure::usage(e.to_string()))
}

fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    match &cli.command {
        Command::Verify(a) => run_verify(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Minimize(a) => run_minimize(a),
        Command::PerturbCheck(a) => run_perturb_check(a),
    }
}

fn output_path(cli: &Cli) -> Option<&PathBuf> {
    match &cli.command {
        Command::Verify(a) => a.out.output.as_ref(),
        Command::Sweep(a) => a.out.output.as_ref(),
        Command::Minimize(a) => a.out.output.as_ref(),
        Command::PerturbCheck(a) => a.out.output.as_ref(),
    }
}

/// Parses `args` (program name first), runs the command, writes the report
/// and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match dispatch(&cli) {
        Ok(o) => o,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return f.code;
        }
    };
    let written = match output_path(&cli) {
        Some(path) => std::fs::write(path, &outcome.bytes).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(&outcome.bytes).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    eprintln!("{}", outcome.summary);
    outcome.code
}
