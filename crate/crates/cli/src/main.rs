//! `noesis`: run, replay, translate, verify and query belief-based programs.
//!
//! Exit codes: 0 success, 1 parse/validation/usage error, 2 failure (run
//! failed, check did not pass), 3 step limit reached.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use noesis::abstraction::{check_refinement, RefinementMapping, RefinementOptions};
use noesis::action::Bat;
use noesis::belief::BeliefState;
use noesis::engine::{EngineOptions, Failure, Machine, NatureOracle, StepOutcome};
use noesis::logic::{eval_epistemic, Env, Formula, Value};
use noesis::program::Program;
use noesis::rational::{format_ratio, parse_ratio, Rational};
use noesis::syntax::{
    emit_trace, load_bat, parse_formula, parse_mapping, parse_nature, parse_program, print_program, Diagnostics,
    TraceStyle,
};
use noesis::trace::{Status, Trace};
use noesis::verifier::{audit, explore, AuditChecks, ExploreOptions, DEFAULT_NODE_BUDGET};

const EXIT_ERROR: u8 = 1;
const EXIT_FAILURE: u8 = 2;
const EXIT_STEP_LIMIT: u8 = 3;

#[derive(Parser)]
#[command(name = "noesis", version, about = "Belief-based programs over noisy action theories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a program online against a seeded or scripted nature.
    Run(RunArgs),
    /// Execute against a nature script; succeeds iff the program completes
    /// and the script is fully consumed.
    Replay(ReplayArgs),
    /// Translate a high-level program through a refinement mapping.
    Translate(TranslateArgs),
    /// Exhaustively explore all of nature's choices up to a bound.
    Verify(VerifyArgs),
    /// Check belief consistency on every branch up to a bound.
    Audit(AuditArgs),
    /// Check that a mapping refines a high-level theory onto a low-level one.
    CheckRefinement(RefinementArgs),
    /// Run a script prefix, then evaluate a formula in the resulting belief.
    Query(QueryArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

impl From<Format> for TraceStyle {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => TraceStyle::Text,
            Format::Json => TraceStyle::Json,
        }
    }
}

#[derive(Args)]
struct EngineArgs {
    /// Maximum number of primitive actions.
    #[arg(long, default_value_t = noesis::engine::DEFAULT_MAX_STEPS)]
    max_steps: usize,
    /// Record the belief after every step.
    #[arg(long)]
    snapshots: bool,
    /// Also require the agent to know an action is possible.
    #[arg(long)]
    strict_poss: bool,
    /// Reject guards that are not explicitly epistemic.
    #[arg(long)]
    strict_guards: bool,
}

impl EngineArgs {
    fn options(&self) -> EngineOptions {
        EngineOptions {
            strict_poss: self.strict_poss,
            strict_guards: self.strict_guards,
            max_steps: self.max_steps,
            snapshots: self.snapshots,
        }
    }
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("oracle").required(true).args(["seed", "nature"]))]
struct RunArgs {
    #[arg(long)]
    bat: PathBuf,
    #[arg(long)]
    prog: PathBuf,
    /// Seed for nature's sampler.
    #[arg(long)]
    seed: Option<u64>,
    /// Nature script: outcome values in order.
    #[arg(long)]
    nature: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
    /// Write the trace here instead of standard output.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    bat: PathBuf,
    #[arg(long)]
    prog: PathBuf,
    #[arg(long)]
    nature: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct TranslateArgs {
    #[arg(long)]
    hl: PathBuf,
    /// Low-level theory the mapping refers to.
    #[arg(long)]
    ll: PathBuf,
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    prog: PathBuf,
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Share results between identical configurations (changes only the
    /// reported node count).
    #[arg(long)]
    memo: bool,
    /// Configurations to expand before giving up.
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    node_budget: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    bat: PathBuf,
    #[arg(long)]
    prog: PathBuf,
    #[arg(long)]
    max_actions: usize,
    /// Formula evaluated at every completed branch (repeatable).
    #[arg(long = "goal")]
    goals: Vec<String>,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    bat: PathBuf,
    #[arg(long)]
    prog: PathBuf,
    #[arg(long)]
    max_actions: usize,
    /// `N:FORMULA`: the condition must hold in the actual world whenever
    /// loop N (pre-order, from 0) is left. Replaces the checks derived from
    /// `not know(...)` loop guards.
    #[arg(long = "exit-check")]
    exit_checks: Vec<String>,
    /// Condition that must hold in the actual world at completion.
    #[arg(long)]
    completion: Option<String>,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct RefinementArgs {
    #[arg(long)]
    hl: PathBuf,
    #[arg(long)]
    ll: PathBuf,
    #[arg(long)]
    map: PathBuf,
    /// Low-level actions allowed per high-level action.
    #[arg(long)]
    depth: usize,
    /// Length of the high-level action sequences checked.
    #[arg(long)]
    hl_horizon: usize,
    #[arg(long, default_value = "1/100", value_parser = probability)]
    epsilon: Rational,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    bat: PathBuf,
    #[arg(long)]
    nature: PathBuf,
    #[arg(long)]
    prog: PathBuf,
    /// A belief formula (printed true/false) or an objective formula
    /// (its degree of belief is printed).
    #[arg(long)]
    formula: String,
    #[command(flatten)]
    engine: EngineArgs,
}

fn probability(s: &str) -> Result<Rational, String> {
    match parse_ratio(s) {
        Some(r) if r >= Rational::from_integer(0.into()) && r <= Rational::from_integer(1.into()) => Ok(r),
        _ => Err(format!("expected a probability p/q in [0, 1], got {s:?}")),
    }
}

/// Diagnostics were already printed.
#[derive(Debug)]
struct Reported;

impl fmt::Display for Reported {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("input rejected")
    }
}

impl std::error::Error for Reported {}

fn color() -> bool {
    std::env::var("NOESIS_COLOR").as_deref() == Ok("1")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn report<T>(result: Result<T, Diagnostics>, source: &str) -> Result<T> {
    result.map_err(|d| {
        eprint!("{}", d.render(source, color()));
        anyhow!(Reported)
    })
}

fn name(path: &Path) -> String {
    path.display().to_string()
}

fn bat(path: &Path) -> Result<Bat> {
    let text = read(path)?;
    let (bat, validation) = report(load_bat(&text, &name(path)), &text)?;
    for issue in &validation.issues {
        eprintln!("{}: warning: {}", name(path), issue.message);
    }
    Ok(bat)
}

fn program(path: &Path, bat: &Bat) -> Result<Program> {
    let text = read(path)?;
    report(parse_program(&text, bat, &name(path)), &text)
}

fn nature(path: &Path) -> Result<Vec<Value>> {
    let text = read(path)?;
    report(parse_nature(&text, &name(path)), &text)
}

fn mapping(path: &Path, hl: &Bat, ll: &Bat) -> Result<RefinementMapping> {
    let text = read(path)?;
    report(parse_mapping(&text, hl, ll, &name(path)), &text)
}

fn formula(text: &str, bat: &Bat) -> Result<Formula> {
    report(parse_formula(text, bat, "<formula>"), text)
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn status_code(status: &Status) -> u8 {
    match status {
        Status::Completed => 0,
        Status::Failed(_) => EXIT_FAILURE,
        Status::StepLimit => EXIT_STEP_LIMIT,
    }
}

fn report_status(trace: &Trace) {
    match &trace.status {
        Status::Completed => {}
        Status::Failed(reason) => eprintln!("run failed: {reason}"),
        Status::StepLimit => eprintln!("step limit reached"),
    }
    for w in &trace.warnings {
        eprintln!("warning: {w}");
    }
}

fn explore_options(max_actions: usize, search: &SearchArgs) -> ExploreOptions {
    ExploreOptions {
        max_actions,
        node_budget: search.node_budget,
        memo: search.memo,
        jobs: search.jobs.max(1),
        ..ExploreOptions::default()
    }
}

fn run(args: RunArgs) -> Result<u8> {
    let bat = bat(&args.bat)?;
    let program = program(&args.prog, &bat)?;
    let mut oracle = match (&args.seed, &args.nature) {
        (Some(seed), _) => NatureOracle::seeded(*seed),
        (None, Some(path)) => NatureOracle::scripted(nature(path)?),
        (None, None) => unreachable!("clap requires an oracle"),
    };
    let machine = Machine::new(&bat, args.engine.options());
    let (trace, _) = machine.run(&program, &mut oracle);
    emit(args.trace.as_deref(), &emit_trace(&trace, args.format.into()))?;
    report_status(&trace);
    Ok(status_code(&trace.status))
}

fn replay(args: ReplayArgs) -> Result<u8> {
    let bat = bat(&args.bat)?;
    let program = program(&args.prog, &bat)?;
    let script = nature(&args.nature)?;
    let trace = noesis::engine::replay(&bat, &program, script, args.engine.options());
    emit(args.trace.as_deref(), &emit_trace(&trace, args.format.into()))?;
    report_status(&trace);
    let code = status_code(&trace.status);
    Ok(if code == 0 && !trace.warnings.is_empty() { EXIT_FAILURE } else { code })
}

fn translate(args: TranslateArgs) -> Result<u8> {
    let hl = bat(&args.hl)?;
    let ll = bat(&args.ll)?;
    let m = mapping(&args.map, &hl, &ll)?;
    let p = program(&args.prog, &hl)?;
    let out = m.translate(&hl, &p)?;
    emit(args.output.as_deref(), print_program(&out).as_bytes())?;
    Ok(0)
}

fn verify(args: VerifyArgs) -> Result<u8> {
    let bat = bat(&args.bat)?;
    let program = program(&args.prog, &bat)?;
    let goals = args.goals.iter().map(|g| formula(g, &bat)).collect::<Result<Vec<_>>>()?;
    let stats = explore(&bat, &program, &goals, &explore_options(args.max_actions, &args.search))?;
    let text = match args.format {
        Format::Json => stats.to_json(),
        Format::Text => stats.to_string(),
    };
    emit(None, text.as_bytes())?;
    Ok(0)
}

fn audit_cmd(args: AuditArgs) -> Result<u8> {
    let bat = bat(&args.bat)?;
    let program = program(&args.prog, &bat)?;
    let mut checks = AuditChecks::derived(&program);
    if !args.exit_checks.is_empty() {
        checks.loop_exit.clear();
        for entry in &args.exit_checks {
            let (n, f) = entry
                .split_once(':')
                .ok_or_else(|| anyhow!("--exit-check expects N:FORMULA, got {entry:?}"))?;
            let n: usize = n.trim().parse().with_context(|| format!("bad loop number in {entry:?}"))?;
            checks.loop_exit.push((n, formula(f, &bat)?));
        }
    }
    if let Some(c) = &args.completion {
        checks.completion = Some(formula(c, &bat)?);
    }
    let r = audit(&bat, &program, &checks, &explore_options(args.max_actions, &args.search))?;
    let text = match args.format {
        Format::Json => r.to_json(),
        Format::Text => r.to_string(),
    };
    emit(None, text.as_bytes())?;
    Ok(if r.passed() { 0 } else { EXIT_FAILURE })
}

fn check_refinement_cmd(args: RefinementArgs) -> Result<u8> {
    let hl = bat(&args.hl)?;
    let ll = bat(&args.ll)?;
    let m = mapping(&args.map, &hl, &ll)?;
    let options = RefinementOptions {
        depth: args.depth,
        hl_horizon: args.hl_horizon,
        epsilon: args.epsilon,
        explore: ExploreOptions {
            memo: true,
            ..explore_options(args.depth, &args.search)
        },
    };
    let r = check_refinement(&hl, &ll, &m, &options)?;
    let text = match args.format {
        Format::Json => r.to_json(),
        Format::Text => r.to_string(),
    };
    emit(None, text.as_bytes())?;
    Ok(if r.passed() { 0 } else { EXIT_FAILURE })
}

fn query(args: QueryArgs) -> Result<u8> {
    let bat = bat(&args.bat)?;
    let program = program(&args.prog, &bat)?;
    let script = nature(&args.nature)?;
    let f = formula(&args.formula, &bat)?;
    if !(f.is_objective() || f.is_subjective()) {
        return Err(anyhow!("formula mixes objective conditions with belief operators"));
    }
    let machine = Machine::new(&bat, args.engine.options());
    let mut oracle = NatureOracle::scripted(script);
    let mut config = machine.initial(&program, &mut oracle).map_err(|e| anyhow!("{e}"))?;
    let belief: BeliefState = loop {
        match machine.step(config, &mut oracle) {
            StepOutcome::Advanced(next, _) => config = next,
            StepOutcome::Done(c) => break c.belief,
            StepOutcome::Failed(c, Failure::ScriptUnderrun(_)) => break c.belief,
            StepOutcome::Failed(_, f) => {
                eprintln!("run failed: {f}");
                return Ok(EXIT_FAILURE);
            }
            StepOutcome::StepLimit(_) => {
                eprintln!("step limit reached");
                return Ok(EXIT_STEP_LIMIT);
            }
        }
    };
    let mut env = Env::new();
    let answer = if f.is_objective() && f.mentions_fluents() {
        format_ratio(&belief.degree_of_belief(&f, &mut env)?)
    } else {
        eval_epistemic(&f, &belief, &mut env)?.to_string()
    };
    emit(None, format!("{answer}\n").as_bytes())?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Replay(a) => replay(a),
        Command::Translate(a) => translate(a),
        Command::Verify(a) => verify(a),
        Command::Audit(a) => audit_cmd(a),
        Command::CheckRefinement(a) => check_refinement_cmd(a),
        Command::Query(a) => query(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            if e.downcast_ref::<Reported>().is_none() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(EXIT_ERROR)
        }
    }
}
