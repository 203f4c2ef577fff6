//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input or criterion
//! error, 3 internal sentinel (a fixer or simulator invariant broke).
//! Errors are printed to stderr as one JSON object
//! `{"error": kind, "message": text, ...}`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};
use serde_json::{json, Value};

use crate::fixer::{run_sequential_with, CheckLevel, FixConfig, FixError};
use crate::format::{self, LoadError};
use crate::generators::{Family, GenError, GenSpec};
use crate::instance::{InstanceError, LllInstance};
use crate::local_sim::{run_parallel_r2_with, run_parallel_r3_with, SimError, SimOptions, SimOutcome};
use crate::order::OrderKind;
use crate::rational::format_rational;
use crate::representable::{convexity_certificate, incurvedness_spotcheck, surface_mesh, ReprError};
use crate::trace::{
    assignment_to_json, parse_assignment, parse_trace_jsonl, resolve_trace, roundlog_to_jsonl, trace_to_jsonl,
};
use crate::verify::{replay_trace, verify_assignment, ReplayOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lllfix", version, about = "Deterministic LLL variable fixing under p < 2^-d")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fix every variable of an instance and write the assignment and trace.
    Run(RunArgs),
    /// Check an assignment, or replay a trace checking P* at every step.
    Verify(VerifyArgs),
    /// Write a generated instance.
    Gen(GenArgs),
    /// Run a round-based simulation and write the round log.
    Simulate(SimulateArgs),
    /// Run the convexity certificate and the incurvedness spot check.
    Certify(CertifyArgs),
    /// Representable-set utilities.
    Srep {
        #[command(subcommand)]
        command: SrepCommand,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Sequential,
    ParallelR2,
    ParallelR3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Order {
    Declaration,
    Reverse,
    SeededShuffle,
    AdaptiveAdversary,
}

impl From<Order> for OrderKind {
    fn from(o: Order) -> Self {
        match o {
            Order::Declaration => OrderKind::Declaration,
            Order::Reverse => OrderKind::Reverse,
            Order::SeededShuffle => OrderKind::SeededShuffle,
            Order::AdaptiveAdversary => OrderKind::AdaptiveAdversary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Check {
    EveryStep,
    Sampled,
}

impl From<Check> for CheckLevel {
    fn from(c: Check) -> Self {
        match c {
            Check::EveryStep => CheckLevel::EveryStep,
            Check::Sampled => CheckLevel::Sampled,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value = "sequential")]
    pub mode: Mode,
    #[arg(long, value_enum, default_value = "declaration")]
    pub order: Order,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "every-step")]
    pub check: Check,
    /// Output directory; created if missing.
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["assignment", "trace"])))]
pub struct VerifyArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub assignment: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    HypergraphOrientation,
    WeakSplittingRelaxed,
    RandomRank3,
    RandomRank2,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::HypergraphOrientation => Family::HypergraphOrientation,
            FamilyArg::WeakSplittingRelaxed => Family::WeakSplittingRelaxed,
            FamilyArg::RandomRank3 => Family::RandomRank3,
            FamilyArg::RandomRank2 => Family::RandomRank2,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Events (random families), design copies (orientation) or V-nodes
    /// (weak splitting).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Degree bound (random), hyperedges per node (orientation: 3 for the
    /// Fano plane, 4 for the affine plane) or V-degree (weak splitting).
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub domain: Option<usize>,
    #[arg(long)]
    pub colors: Option<usize>,
    #[arg(long)]
    pub coverage: Option<usize>,
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMode {
    ParallelR2,
    ParallelR3,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value = "parallel-r3")]
    pub mode: SimMode,
    /// Shuffle the acting nodes inside each round with this seed.
    #[arg(long)]
    pub permute_seed: Option<u64>,
    #[arg(long, value_enum, default_value = "every-step")]
    pub check: Check,
    #[arg(short = 'o', long = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub grid: u64,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum SrepCommand {
    /// CSV mesh `a,b,f` of the surface bounding the representable set.
    Mesh {
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
}

/// A failure with its exit code and JSON error record.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub record: Value,
}

impl CliError {
    fn new(code: i32, kind: &str, message: impl Into<String>) -> Self {
        CliError {
            code,
            record: json!({"error": kind, "message": message.into()}),
        }
    }

    fn with(mut self, key: &str, value: Value) -> Self {
        self.record[key] = value;
        self
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(EXIT_INPUT, "Io", format!("{}: {e}", path.display()))
}

fn instance_error(e: &InstanceError) -> CliError {
    let kind = match e {
        InstanceError::CriterionViolated { .. } => "CriterionViolated",
        InstanceError::RankExceeded { .. } => "RankExceeded",
        InstanceError::InvalidDistribution { .. } => "InvalidDistribution",
        InstanceError::MalformedTable { .. } => "MalformedTable",
        _ => "InvalidInstance",
    };
    let err = CliError::new(EXIT_INPUT, kind, e.to_string());
    match e {
        InstanceError::CriterionViolated { event, prob, d } => err
            .with("event", json!(event))
            .with("prob", json!(format_rational(prob)))
            .with("d", json!(d)),
        _ => err,
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match &e {
            LoadError::Instance(inner) => instance_error(inner),
            LoadError::Io { .. } => CliError::new(EXIT_INPUT, "Io", e.to_string()),
            _ => CliError::new(EXIT_INPUT, "ParseError", e.to_string()),
        }
    }
}

impl From<FixError> for CliError {
    fn from(e: FixError) -> Self {
        let kind = match &e {
            FixError::PStarViolatedPre { .. } => "PStarViolatedPre",
            FixError::PStarViolatedPost { .. } => "PStarViolatedPost",
            FixError::NoGoodValue { .. } => "NoGoodValue",
            FixError::AllValuesEvil { .. } => "AllValuesEvil",
            FixError::NotRankTwo { .. } => "NotRankTwo",
            FixError::InvalidOrder(_) => "InvalidOrder",
            FixError::FinalBoundTooLarge { .. } => "FinalBoundTooLarge",
            FixError::FinalEventOccurred(_) => "FinalEventOccurred",
            FixError::Decompose(_) => "DecomposeFailed",
            FixError::Prob(_) => "ProbError",
        };
        let code = if matches!(e, FixError::NotRankTwo { .. }) { EXIT_INPUT } else { EXIT_INTERNAL };
        CliError::new(code, kind, e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Fix(f) => f.into(),
            SimError::DisjointnessViolation { .. } => CliError::new(EXIT_INTERNAL, "DisjointnessViolation", e.to_string()),
            SimError::NotRankTwo { .. } => CliError::new(EXIT_INPUT, "NotRankTwo", e.to_string()),
        }
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match &e {
            GenError::Instance(inner) => instance_error(inner),
            _ => CliError::new(EXIT_INPUT, "GeneratorError", e.to_string()),
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn write_sim(dir: &Path, inst: &LllInstance, sim: &SimOutcome) -> Result<(), CliError> {
    out_dir(dir)?;
    write_file(&dir.join("assignment.json"), &assignment_to_json(inst, &sim.assignment))?;
    write_file(&dir.join("trace.jsonl"), &trace_to_jsonl(inst, &sim.trace))?;
    write_file(&dir.join("roundlog.jsonl"), &roundlog_to_jsonl(inst, &sim.log))
}

fn simulate(inst: &LllInstance, mode: SimMode, opts: SimOptions) -> Result<SimOutcome, CliError> {
    Ok(match mode {
        SimMode::ParallelR2 => run_parallel_r2_with(inst, opts)?,
        SimMode::ParallelR3 => run_parallel_r3_with(inst, opts)?,
    })
}

fn cmd_run(args: &RunArgs) -> Result<String, CliError> {
    let inst = format::load(&args.instance)?;
    info!(
        "loaded {} variables, {} events, d = {}",
        inst.num_variables(),
        inst.num_events(),
        inst.dependency_degree()
    );
    let sim_mode = match args.mode {
        Mode::Sequential => None,
        Mode::ParallelR2 => Some(SimMode::ParallelR2),
        Mode::ParallelR3 => Some(SimMode::ParallelR3),
    };
    if let Some(mode) = sim_mode {
        let opts = SimOptions {
            within_round_seed: None,
            check: args.check.into(),
        };
        let sim = simulate(&inst, mode, opts)?;
        write_sim(&args.out, &inst, &sim)?;
        return Ok(format!(
            "all {} events avoided; {} variables fixed in {} rounds\n",
            inst.num_events(),
            inst.num_variables(),
            sim.log.rounds.len()
        ));
    }
    let config = FixConfig {
        check: args.check.into(),
        ..FixConfig::default()
    };
    let mut policy = OrderKind::from(args.order).policy(&inst, args.seed);
    let out = run_sequential_with(&inst, policy.as_mut(), config)?;
    out_dir(&args.out)?;
    write_file(&args.out.join("assignment.json"), &assignment_to_json(&inst, &out.assignment))?;
    write_file(&args.out.join("trace.jsonl"), &trace_to_jsonl(&inst, &out.trace))?;
    Ok(format!(
        "all {} events avoided; {} variables fixed\n",
        inst.num_events(),
        inst.num_variables()
    ))
}

fn cmd_verify(args: &VerifyArgs) -> Result<String, CliError> {
    let inst = format::load(&args.instance)?;
    let ev = |e: &usize| inst.event(*e).id.clone();
    if let Some(path) = &args.assignment {
        let assignment = parse_assignment(&inst, &read(path)?)
            .map_err(|e| CliError::new(EXIT_INPUT, "ParseError", e.to_string()))?;
        let occurring = verify_assignment(&inst, &assignment);
        if occurring.is_empty() {
            return Ok(format!("ok: none of the {} events occurs\n", inst.num_events()));
        }
        let names: Vec<String> = occurring.iter().map(ev).collect();
        return Err(CliError::new(EXIT_VERIFY, "EventsOccur", format!("events occur: {}", names.join(", ")))
            .with("events", json!(names)));
    }
    let path = args.trace.as_ref().expect("clap requires one input");
    let lines = parse_trace_jsonl(&read(path)?).map_err(|e| CliError::new(EXIT_INPUT, "ParseError", e.to_string()))?;
    let steps = resolve_trace(&inst, &lines).map_err(|e| CliError::new(EXIT_INPUT, "ParseError", e.to_string()))?;
    let report = replay_trace(&inst, &steps, ReplayOptions::default());
    if report.clean() {
        return Ok(format!(
            "ok: {} steps replayed, P* held after each, none of the {} events occurs\n",
            report.steps,
            inst.num_events()
        ));
    }
    let failed: Vec<Value> = report
        .failures
        .iter()
        .map(|f| json!({"step": f.step, "reason": f.reason}))
        .collect();
    let names: Vec<String> = report.occurring.iter().map(ev).collect();
    let mut msg = format!("{} failed step check(s)", failed.len());
    if !report.complete {
        msg.push_str("; trace leaves variables unfixed");
    }
    if !names.is_empty() {
        let _ = write!(msg, "; events occur: {}", names.join(", "));
    }
    Err(CliError::new(EXIT_VERIFY, "VerificationFailed", msg)
        .with("steps", json!(failed))
        .with("events", json!(names))
        .with("complete", json!(report.complete)))
}

fn cmd_gen(args: &GenArgs) -> Result<String, CliError> {
    let mut params = GenSpec::new(args.family.into(), args.seed);
    params.nodes = args.nodes.unwrap_or(params.nodes);
    params.degree = args.degree.unwrap_or(params.degree);
    params.domain = args.domain.unwrap_or(params.domain);
    params.colors = args.colors.unwrap_or(params.colors);
    params.coverage = args.coverage.unwrap_or(params.coverage);
    let inst = params.generate()?;
    format::save(&inst, &args.out)?;
    Ok(format!(
        "{}: {} variables, {} events, d = {}\n",
        params.family.name(),
        inst.num_variables(),
        inst.num_events(),
        inst.dependency_degree()
    ))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let inst = format::load(&args.instance)?;
    let opts = SimOptions {
        within_round_seed: args.permute_seed,
        check: args.check.into(),
    };
    let sim = simulate(&inst, args.mode, opts)?;
    write_sim(&args.out, &inst, &sim)?;
    Ok(format!(
        "{} rounds (palette {}, plus {} colouring rounds); all {} events avoided\n",
        sim.log.rounds.len(),
        sim.log.palette,
        sim.log.coloring_rounds,
        inst.num_events()
    ))
}

fn cmd_certify(args: &CertifyArgs) -> Result<String, CliError> {
    let mut out = String::new();
    let conv = convexity_certificate(args.grid as usize, args.tol);
    let spot = incurvedness_spotcheck(args.samples as usize, args.seed);
    match &conv {
        Ok(r) => {
            let _ = writeln!(
                out,
                "convexity: {} points, min f_aa {:.3e}, min det {:.3e}, max rel err {:.1e} / {:.1e}",
                r.points_checked, r.min_faa, r.min_det, r.max_rel_err_faa, r.max_rel_err_det
            );
        }
        Err(e) => {
            let _ = writeln!(out, "convexity: {e}");
        }
    }
    let _ = writeln!(
        out,
        "incurvedness: {} pairs, {} combinations, {} representable",
        spot.pairs,
        spot.combinations_checked,
        spot.violations.len()
    );
    if let Err(ReprError::CertificateFailure(points)) = conv {
        let pts: Vec<Value> = points
            .iter()
            .map(|p| json!({"a": p.a, "b": p.b, "reason": p.reason}))
            .collect();
        return Err(CliError::new(EXIT_VERIFY, "CertificateFailure", out).with("points", json!(pts)));
    }
    if !spot.violations.is_empty() {
        let pts: Vec<Value> = spot
            .violations
            .iter()
            .map(|(s, t, q)| json!({"s": s.to_string(), "s_prime": t.to_string(), "q": format_rational(q)}))
            .collect();
        return Err(CliError::new(EXIT_VERIFY, "IncurvednessViolation", out).with("points", json!(pts)));
    }
    Ok(out)
}

fn cmd_mesh(step: f64, path: &Path) -> Result<String, CliError> {
    let mesh = surface_mesh(step).map_err(|e| CliError::new(EXIT_INPUT, "InvalidStep", e.to_string()))?;
    let mut csv = String::from("a,b,f\n");
    for (a, b, f) in &mesh {
        let _ = writeln!(csv, "{a},{b},{f}");
    }
    write_file(path, &csv)?;
    Ok(format!("{} mesh points\n", mesh.len()))
}

/// Runs a parsed command; returns stdout text or an error.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Srep {
            command: SrepCommand::Mesh { step, out },
        } => cmd_mesh(*step, out),
    }
}

/// Log level from `LLL_LOG`: `quiet`, `info` or `debug`; warnings otherwise.
pub fn log_level(value: Option<&str>) -> LevelFilter {
    match value {
        Some("quiet") => LevelFilter::Off,
        Some("info") => LevelFilter::Info,
        Some("debug") => LevelFilter::Debug,
        _ => LevelFilter::Warn,
    }
}

/// Parses `args`, runs the command and prints its output; returns the exit
/// code.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", e.record);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("lllfix").chain(args.iter().copied()))
    }

    #[test]
    fn flags_parse() {
        let c = parse(&[
            "run", "--instance", "i.json", "--mode", "parallel-r3", "--order", "seeded-shuffle", "--seed", "7",
            "--check", "sampled", "-o", "out",
        ])
        .unwrap();
        let Command::Run(r) = c.command else { panic!("run") };
        assert_eq!(r.mode, Mode::ParallelR3);
        assert_eq!(r.order, Order::SeededShuffle);
        assert_eq!(r.seed, 7);
    }

    #[test]
    fn verify_needs_exactly_one_input() {
        assert!(parse(&["verify", "--instance", "i.json"]).is_err());
        assert!(parse(&["verify", "--instance", "i.json", "--assignment", "a", "--trace", "t"]).is_err());
        assert!(parse(&["verify", "--instance", "i.json", "--trace", "t"]).is_ok());
    }

    #[test]
    fn certify_rejects_zero_samples() {
        assert!(parse(&["certify", "--samples", "0"]).is_err());
        assert!(parse(&["certify", "--grid", "5"]).is_ok());
        assert!(parse(&["run", "--bogus"]).is_err());
    }

    #[test]
    fn log_levels() {
        assert_eq!(log_level(Some("quiet")), LevelFilter::Off);
        assert_eq!(log_level(Some("debug")), LevelFilter::Debug);
        assert_eq!(log_level(None), LevelFilter::Warn);
    }
}
