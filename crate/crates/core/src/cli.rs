//! Command implementations behind the `softtime` binary.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::constraint::SoftConstraint;
use crate::engine::il::{explore_il, run_il};
use crate::engine::mp::{explore_mp, run_mp};
use crate::engine::{Exploration, Run, RunStatus, Scheduler, TickDecision};
use crate::lang::ast::{Dialect, Program};
use crate::lang::expand::expand_program;
use crate::lang::parser::parse_program;
use crate::lang::printer::pretty_program;
use crate::trace_doc::{
    decisions_of_document, document_of_run, render_timeline, SchedulerMeta, TraceDocument,
};
use crate::traces::check::{check_compositionality, check_correctness, check_t_prime, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_DIALECT: i32 = 2;
pub const EXIT_SUSPENDED: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_CHECK_FAILED: i32 = 5;
pub const EXIT_INCONCLUSIVE: i32 = 6;

#[derive(Parser)]
#[command(
    name = "softtime",
    version,
    about = "Run, explore and check timed soft concurrent constraint programs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a program under one scheduler and print its timeline or trace
    Run(RunArgs),
    /// Enumerate every schedule and print the terminal observables
    Explore(ExploreArgs),
    /// Check a bounded semantic property and report a verdict
    Check(CheckArgs),
    /// Print the program after idiom expansion
    Expand(ExpandArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Semantics {
    Mp,
    Il,
}

impl Semantics {
    fn dialect(self) -> Dialect {
        match self {
            Semantics::Mp => Dialect::Mp,
            Semantics::Il => Dialect::Il,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum RunFormat {
    Timeline,
    Json,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CheckFormat {
    Text,
    Json,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Property {
    Correctness,
    Compositionality,
    TPrimeEquivalence,
}

#[derive(Args)]
struct RunArgs {
    /// Program file
    file: PathBuf,
    /// Semantics to run under; defaults to the program's dialect
    #[arg(long, value_enum)]
    semantics: Option<Semantics>,
    /// Resolve choices with a seeded random scheduler
    #[arg(long, conflicts_with_all = ["priority", "replay"])]
    seed: Option<u64>,
    /// Resolve choices deterministically by source order (the default)
    #[arg(long, conflicts_with = "replay")]
    priority: bool,
    /// Replay the decision log of a previously emitted JSON trace
    #[arg(long, value_name = "TRACE_JSON")]
    replay: Option<PathBuf>,
    /// Step budget
    #[arg(long, default_value_t = 64)]
    max_steps: u32,
    #[arg(long, value_enum, default_value_t = RunFormat::Timeline)]
    format: RunFormat,
    /// Start from the combination of these constraints instead of the
    /// empty store (marks the run non-standard)
    #[arg(long, value_name = "CONSTRAINT", num_args = 1..)]
    initial_store: Vec<String>,
}

#[derive(Args)]
struct ExploreArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    semantics: Option<Semantics>,
    #[arg(long, default_value_t = 12)]
    max_steps: u32,
    #[arg(long, default_value_t = 50_000)]
    state_budget: usize,
}

#[derive(Args)]
struct CheckArgs {
    file: PathBuf,
    #[arg(long, value_enum)]
    property: Property,
    /// Sequence-length bound for the bounded semantics
    #[arg(long, default_value_t = 8)]
    maxlen: usize,
    /// Constraint names whose combinations the environment may add
    #[arg(long, value_name = "CONSTRAINT", num_args = 0..)]
    pool: Vec<String>,
    /// Step bound for the transition-system comparison
    #[arg(long, default_value_t = 12)]
    max_steps: u32,
    #[arg(long, default_value_t = 50_000)]
    state_budget: usize,
    #[arg(long, value_enum, default_value_t = CheckFormat::Text)]
    format: CheckFormat,
}

#[derive(Args)]
struct ExpandArgs {
    file: PathBuf,
}

pub fn run_cli() -> i32 {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run(args) => cmd_run(&args),
        Cmd::Explore(args) => cmd_explore(&args),
        Cmd::Check(args) => cmd_check(&args),
        Cmd::Expand(args) => cmd_expand(&args),
    }
}

fn load_program(file: &Path) -> Result<Program, i32> {
    let src = match fs::read_to_string(file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return Err(EXIT_PARSE);
        }
    };
    let parsed = match parse_program(&src) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("parse error: {e}");
            return Err(EXIT_PARSE);
        }
    };
    match expand_program(&parsed) {
        Ok(p) => Ok(p),
        Err(e) => {
            eprintln!("expansion error: {e}");
            Err(EXIT_PARSE)
        }
    }
}

fn resolve_semantics(program: &Program, requested: Option<Semantics>) -> Result<Dialect, i32> {
    match requested {
        None => Ok(program.dialect),
        Some(s) if s.dialect() == program.dialect => Ok(program.dialect),
        Some(s) => {
            eprintln!(
                "dialect mismatch: the program is {}, --semantics asked for {}",
                program.dialect,
                s.dialect()
            );
            Err(EXIT_DIALECT)
        }
    }
}

fn resolve_pool(program: &Program, names: &[String]) -> Result<Vec<SoftConstraint>, i32> {
    let mut out = Vec::new();
    for name in names {
        match program.constraint(name) {
            Some(decl) => out.push(decl.table.clone()),
            None => {
                eprintln!("error: unknown constraint `{name}`");
                return Err(EXIT_PARSE);
            }
        }
    }
    Ok(out)
}

fn initial_store(program: &Program, names: &[String]) -> Result<Option<SoftConstraint>, i32> {
    if names.is_empty() {
        return Ok(None);
    }
    let mut store = SoftConstraint::top(program.kind);
    for c in resolve_pool(program, names)? {
        store = store.combine(&c);
    }
    Ok(Some(store))
}

fn cmd_run(args: &RunArgs) -> i32 {
    let program = match load_program(&args.file) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let dialect = match resolve_semantics(&program, args.semantics) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let initial = match initial_store(&program, &args.initial_store) {
        Ok(i) => i,
        Err(code) => return code,
    };
    let standard = initial.is_none();
    let (scheduler, meta) = match &args.replay {
        Some(path) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return EXIT_PARSE;
                }
            };
            let doc: TraceDocument = match serde_json::from_str(&text) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!("error: invalid trace document: {e}");
                    return EXIT_PARSE;
                }
            };
            let meta = doc.scheduler.clone();
            (Scheduler::Replay(decisions_of_document(&doc)), meta)
        }
        None => match args.seed {
            Some(seed) => (
                Scheduler::Seeded(seed),
                SchedulerMeta {
                    kind: "seeded".to_string(),
                    seed: Some(seed),
                },
            ),
            None => (
                Scheduler::Priority,
                SchedulerMeta {
                    kind: "priority".to_string(),
                    seed: None,
                },
            ),
        },
    };
    let run: Result<Run, _> = match dialect {
        Dialect::Mp => run_mp(&program, scheduler, args.max_steps, initial),
        Dialect::Il => run_il(&program, scheduler, args.max_steps, false, initial),
    };
    let run = match run {
        Ok(r) => r,
        Err(e) => {
            eprintln!("replay error: {e}");
            return EXIT_PARSE;
        }
    };
    match args.format {
        RunFormat::Timeline => print!("{}", render_timeline(&program, &run, standard)),
        RunFormat::Json => {
            let source = args.file.display().to_string();
            let doc = document_of_run(&program, &source, meta, standard, &run);
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
    }
    match run.status {
        RunStatus::Success => EXIT_OK,
        RunStatus::Suspended => EXIT_SUSPENDED,
        RunStatus::BudgetExceeded => EXIT_BUDGET,
    }
}

fn witness_text(log: &[TickDecision]) -> String {
    log.iter()
        .map(|d| match d {
            TickDecision::Il(ix) => ix.to_string(),
            TickDecision::Mp(recs) if recs.is_empty() => ".".to_string(),
            TickDecision::Mp(recs) => recs
                .iter()
                .map(|r| format!("{}:{}", r.path, r.chosen))
                .collect::<Vec<_>>()
                .join("+"),
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn print_exploration(exp: &Exploration) {
    println!("states explored: {}", exp.states);
    for t in &exp.terminals {
        let status = match t.status {
            RunStatus::Success => "success",
            RunStatus::Suspended => "suspended",
            RunStatus::BudgetExceeded => "budget",
        };
        let resolve = |v: crate::constraint::VarId| exp.universe.var_name(v).to_string();
        let mut line = format!(
            "terminal {status} clock={} store={}",
            t.clock,
            crate::engine::canonical_store_string(&t.store, &exp.universe, &resolve)
        );
        if let Some(o) = &t.observable {
            line.push_str(&format!(
                " observable={}",
                crate::engine::canonical_store_string(o, &exp.universe, &resolve)
            ));
        }
        line.push_str(&format!(" witness=[{}]", witness_text(&t.witness)));
        println!("{line}");
    }
    let distinct: BTreeSet<String> = exp
        .terminals
        .iter()
        .filter(|t| t.status == RunStatus::Success)
        .map(|t| t.key.clone())
        .collect();
    println!("distinct success observables: {}", distinct.len());
    if exp.truncated {
        println!("warning: exploration incomplete (step or state budget hit)");
    }
}

fn cmd_explore(args: &ExploreArgs) -> i32 {
    let program = match load_program(&args.file) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let dialect = match resolve_semantics(&program, args.semantics) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let exp = match dialect {
        Dialect::Mp => explore_mp(&program, args.max_steps, args.state_budget),
        Dialect::Il => explore_il(&program, args.max_steps, args.state_budget, false),
    };
    print_exploration(&exp);
    EXIT_OK
}

fn cmd_check(args: &CheckArgs) -> i32 {
    let program = match load_program(&args.file) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let applicable = match args.property {
        Property::Correctness => true,
        Property::Compositionality => program.dialect == Dialect::Mp,
        Property::TPrimeEquivalence => program.dialect == Dialect::Il,
    };
    if !applicable {
        eprintln!(
            "dialect mismatch: that property is not defined for {} programs",
            program.dialect
        );
        return EXIT_DIALECT;
    }
    let pool = match resolve_pool(&program, &args.pool) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let (name, verdict) = match args.property {
        Property::Correctness => (
            "correctness",
            check_correctness(&program, &pool, args.maxlen, args.state_budget),
        ),
        Property::Compositionality => (
            "compositionality",
            check_compositionality(&program, &pool, args.maxlen),
        ),
        Property::TPrimeEquivalence => (
            "t-prime-equivalence",
            check_t_prime(&program, args.max_steps, args.state_budget),
        ),
    };
    match args.format {
        CheckFormat::Text => println!("{name}: {}", verdict.describe()),
        CheckFormat::Json => {
            let (kind, detail) = match &verdict {
                Verdict::Pass => ("pass", None),
                Verdict::Fail(d) => ("fail", Some(d.clone())),
                Verdict::Inconclusive(d) => ("inconclusive", Some(d.clone())),
            };
            let doc = serde_json::json!({
                "property": name,
                "verdict": kind,
                "detail": detail,
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
    }
    match verdict {
        Verdict::Pass => EXIT_OK,
        Verdict::Fail(_) => EXIT_CHECK_FAILED,
        Verdict::Inconclusive(_) => EXIT_INCONCLUSIVE,
    }
}

fn cmd_expand(args: &ExpandArgs) -> i32 {
    let program = match load_program(&args.file) {
        Ok(p) => p,
        Err(code) => return code,
    };
    print!("{}", pretty_program(&program));
    EXIT_OK
}
