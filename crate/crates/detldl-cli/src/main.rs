//! Command-line interface: check a run under a fixed strategy, search for a
//! witness, verify a recorded trace against the path semantics, print the
//! desugared core of a program, emit the bundled example programs, and run
//! small benchmarks.
//!
//! Exit status: 0 = accept / witness / in-language, 1 = reject / none /
//! not-in-language, 2 = error or exhausted budget.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use detldl::eval::{
    self, ChoiceStrategy, EvalConfig, NegationMode, Outcome,
};
use detldl::model::parse_structure_text;
use detldl::pathsem;
use detldl::search::{self, SearchLimits};
use detldl::stdlib::{self, Example, ExampleParams};
use detldl::syntax::{self, parse_program, print_term, BoundProgram};

#[derive(Parser)]
#[command(name = "detldl", version, about = "interpreter and witness search for a deterministic dynamic logic on finite traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct EvalOpts {
    /// Negation semantics: quantify over all resolutions, or only the
    /// strategy's own derivation.
    #[arg(long, value_parser = parse_negation, default_value = "exhaustive")]
    negation: NegationMode,
    /// Step budget; defaults to DETLDL_BUDGET or an instance-derived bound.
    #[arg(long)]
    budget: Option<u64>,
    /// Write the produced trace to this file.
    #[arg(long, value_name = "OUT")]
    trace: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a program on a structure under a fixed choice strategy.
    Check {
        program: PathBuf,
        structure: PathBuf,
        /// first | seeded:<u64> | scripted:<i,i,...> | oracle:<file>
        #[arg(long, default_value = "first")]
        strategy: String,
        #[command(flatten)]
        opts: EvalOpts,
    },
    /// Search for a witnessing choice function.
    Solve {
        program: PathBuf,
        structure: PathBuf,
        #[command(flatten)]
        opts: EvalOpts,
        /// Write the certificate (answers plus trace) to this file.
        #[arg(long, value_name = "OUT")]
        cert: Option<PathBuf>,
        /// Fan the first choice point out to this many workers.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Cap on explored assignments.
        #[arg(long, default_value_t = 1_000_000)]
        nodes: u64,
    },
    /// Check membership of a recorded trace segment in the language of the
    /// program's main term.
    VerifyTrace {
        program: PathBuf,
        trace: PathBuf,
        /// Start position (default 0).
        #[arg(long, default_value_t = 0)]
        from: usize,
        /// End position (default: last).
        #[arg(long)]
        to: Option<usize>,
        /// Verify this term instead of the program's main term.
        #[arg(long)]
        term: Option<String>,
    },
    /// Print the desugared core of the program's main term.
    Expand { program: PathBuf },
    /// List or emit the bundled example programs.
    Examples {
        #[command(subcommand)]
        what: ExamplesCmd,
    },
    /// Solve an example over a range of sizes and print a small table.
    Bench {
        name: String,
        /// Inclusive size range, e.g. 2..6.
        #[arg(long, default_value = "2..5")]
        sizes: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        budget: Option<u64>,
    },
}

#[derive(Subcommand)]
enum ExamplesCmd {
    /// Print example names and one-line descriptions.
    List,
    /// Write `NAME.dl` and a generated `NAME.st` into a directory.
    Emit {
        name: String,
        #[arg(long, default_value = ".")]
        dir: PathBuf,
        /// Primary size parameter (domain size, set size, node count).
        #[arg(long, default_value_t = 4)]
        size: usize,
        /// Secondary size parameter (second set size).
        #[arg(long, default_value_t = 4)]
        size2: usize,
        /// Cardinality parameter for size_k.
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_negation(s: &str) -> Result<NegationMode, String> {
    match s {
        "exhaustive" => Ok(NegationMode::Exhaustive),
        "relative" => Ok(NegationMode::HRelative),
        other => Err(format!("unknown negation mode `{other}` (use exhaustive or relative)")),
    }
}

fn parse_strategy(s: &str) -> Result<ChoiceStrategy, String> {
    if s == "first" {
        return Ok(ChoiceStrategy::First);
    }
    if let Some(rest) = s.strip_prefix("seeded:") {
        let seed = rest.parse().map_err(|_| format!("bad seed `{rest}`"))?;
        return Ok(ChoiceStrategy::Seeded(seed));
    }
    if let Some(rest) = s.strip_prefix("scripted:") {
        let indices = rest
            .split(',')
            .filter(|p| !p.is_empty())
            .map(|p| p.trim().parse().map_err(|_| format!("bad index `{p}`")))
            .collect::<Result<Vec<usize>, String>>()?;
        return Ok(ChoiceStrategy::Scripted(indices));
    }
    if let Some(path) = s.strip_prefix("oracle:") {
        let text =
            std::fs::read_to_string(path).map_err(|e| format!("cannot read `{path}`: {e}"))?;
        let answers = search::read_certificate_answers(&text).map_err(|e| e.to_string())?;
        return Ok(ChoiceStrategy::Oracle(answers));
    }
    Err(format!("unknown strategy `{s}`"))
}

fn env_budget() -> Option<u64> {
    std::env::var("DETLDL_BUDGET").ok().and_then(|v| v.parse().ok())
}

fn load(program: &Path, structure: &Path) -> Result<BoundProgram, String> {
    let ptext = read(program)?;
    let stext = read(structure)?;
    let p = parse_program(&ptext).map_err(|e| format!("{}: {e}", program.display()))?;
    let st =
        parse_structure_text(&stext).map_err(|e| format!("{}: {e}", structure.display()))?;
    let bound = syntax::bind(&p, &st).map_err(|e| e.to_string())?;
    for w in &bound.warnings {
        eprintln!("warning: {w}");
    }
    Ok(bound)
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read `{}`: {e}", path.display()))
}

fn write_file(path: &Path, content: &str) -> Result<(), String> {
    std::fs::write(path, content)
        .map_err(|e| format!("cannot write `{}`: {e}", path.display()))
}

fn config(opts: &EvalOpts) -> EvalConfig {
    EvalConfig {
        negation_mode: opts.negation,
        step_budget: opts.budget.or_else(env_budget),
        record_trace: true,
    }
}

fn report_outcome(out: &Outcome) {
    if out.accepted {
        println!("ACCEPT");
    } else {
        println!("REJECT");
        if let Some(reason) = &out.failure_reason {
            println!("reason: {reason}");
        }
    }
    println!("steps: {}", out.steps_used);
    if let Some(tr) = &out.trace {
        println!("trace-length: {}", tr.states.len());
    }
}

fn run() -> Result<ExitCode, String> {
    match Cli::parse().command {
        Command::Check { program, structure, strategy, opts } => {
            let bound = load(&program, &structure)?;
            let strategy = parse_strategy(&strategy)?;
            let cfg = config(&opts);
            let out = eval::evaluate(&bound.modules, &bound.core, &bound.initial, &strategy, &cfg)
                .map_err(|e| e.to_string())?;
            report_outcome(&out);
            if let (Some(path), Some(tr)) = (&opts.trace, &out.trace) {
                write_file(path, &eval::write_trace(tr))?;
                println!("trace-file: {}", path.display());
            }
            Ok(if out.accepted { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Solve { program, structure, opts, cert, parallel, nodes } => {
            let bound = load(&program, &structure)?;
            let cfg = config(&opts);
            let limits = SearchLimits { node_budget: nodes };
            let (found, stats) = search::find_witness_parallel(
                &bound.modules,
                &bound.core,
                &bound.initial,
                &cfg,
                limits,
                parallel.max(1),
            )
            .map_err(|e| e.to_string())?;
            match found {
                Some(certificate) => {
                    println!("WITNESS");
                    println!("nodes: {}", stats.nodes);
                    println!("trace-length: {}", certificate.trace.states.len());
                    println!("choices: {}", certificate.answers.len());
                    if let Some(path) = &cert {
                        write_file(path, &search::write_certificate(&certificate))?;
                        println!("certificate-file: {}", path.display());
                    }
                    if let Some(path) = &opts.trace {
                        write_file(path, &eval::write_trace(&certificate.trace))?;
                        println!("trace-file: {}", path.display());
                    }
                    Ok(ExitCode::SUCCESS)
                }
                None => {
                    println!("NONE");
                    println!("nodes: {}", stats.nodes);
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::VerifyTrace { program, trace, from, to, term } => {
            let ptext = read(&program)?;
            let p = parse_program(&ptext).map_err(|e| format!("{}: {e}", program.display()))?;
            let ttext = read(&trace)?;
            let (bound, tr) = eval::read_trace(&ttext, &p).map_err(|e| e.to_string())?;
            let subject = match term {
                None => bound.core.clone(),
                Some(src) => {
                    let raw =
                        syntax::parse_term(&src).map_err(|e| format!("--term: {e}"))?;
                    let resolved = syntax::resolve(&raw, &p).map_err(|e| e.to_string())?;
                    let actions: Vec<String> =
                        p.modules.iter().filter(|m| !m.is_prop).map(|m| m.name.clone()).collect();
                    syntax::push_converse(&syntax::desugar(&resolved, &actions))
                        .map_err(|e| e.to_string())?
                }
            };
            let j = to.unwrap_or_else(|| tr.states.len() - 1);
            let member = pathsem::path_in_language(&bound.modules, &tr, from, j, &subject)
                .map_err(|e| e.to_string())?;
            if member {
                println!("IN-LANGUAGE {from}..{j}");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("NOT-IN-LANGUAGE {from}..{j}");
                Ok(ExitCode::from(1))
            }
        }
        Command::Expand { program } => {
            let ptext = read(&program)?;
            let p = parse_program(&ptext).map_err(|e| format!("{}: {e}", program.display()))?;
            let core = p.core_main().map_err(|e| e.to_string())?;
            println!("{}", print_term(&core));
            Ok(ExitCode::SUCCESS)
        }
        Command::Examples { what } => match what {
            ExamplesCmd::List => {
                for ex in stdlib::ALL {
                    println!("{:<12} {}", ex.name(), ex.description());
                }
                Ok(ExitCode::SUCCESS)
            }
            ExamplesCmd::Emit { name, dir, size, size2, k, seed } => {
                let ex = Example::from_name(&name)
                    .ok_or_else(|| format!("unknown example `{name}`"))?;
                let params = ExampleParams { k };
                let program_text = stdlib::example_text(ex, &params);
                let kind = stdlib::default_kind(ex, size, size2);
                let st = stdlib::generate_structure(&kind, seed).map_err(|e| e.to_string())?;
                // Round-trip through binding so the emitted structure file
                // carries every register the program needs.
                let p = parse_program(&program_text).map_err(|e| e.to_string())?;
                let bound = syntax::bind(&p, &st).map_err(|e| e.to_string())?;
                std::fs::create_dir_all(&dir)
                    .map_err(|e| format!("cannot create `{}`: {e}", dir.display()))?;
                let dl = dir.join(format!("{name}.dl"));
                let stf = dir.join(format!("{name}.st"));
                write_file(&dl, &program_text)?;
                write_file(&stf, &detldl::model::serialize_structure(&bound.initial))?;
                println!("{}", dl.display());
                println!("{}", stf.display());
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Bench { name, sizes, seed, budget } => {
            let ex = Example::from_name(&name).ok_or_else(|| format!("unknown example `{name}`"))?;
            let (lo, hi) = sizes
                .split_once("..")
                .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
                .ok_or_else(|| format!("bad size range `{sizes}` (expected LO..HI)"))?;
            let params = ExampleParams::default();
            let program = stdlib::example_program(&name, &params).map_err(|e| e.to_string())?;
            let cfg = EvalConfig {
                negation_mode: NegationMode::Exhaustive,
                step_budget: budget.or_else(env_budget),
                record_trace: true,
            };
            println!("{:>5} {:>8} {:>12} {:>10} {:>10}", "size", "verdict", "trace-length", "nodes", "ms");
            for n in lo..=hi.max(lo) {
                let kind = stdlib::default_kind(ex, n, n);
                let st = stdlib::generate_structure(&kind, seed).map_err(|e| e.to_string())?;
                let bound = syntax::bind(&program, &st).map_err(|e| e.to_string())?;
                let started = std::time::Instant::now();
                let result = search::find_witness_with_stats(
                    &bound.modules,
                    &bound.core,
                    &bound.initial,
                    &cfg,
                    SearchLimits::default(),
                );
                let ms = started.elapsed().as_millis();
                match result {
                    Ok((Some(c), stats)) => println!(
                        "{:>5} {:>8} {:>12} {:>10} {:>10}",
                        n,
                        "witness",
                        c.trace.states.len(),
                        stats.nodes,
                        ms
                    ),
                    Ok((None, stats)) => println!(
                        "{:>5} {:>8} {:>12} {:>10} {:>10}",
                        n, "none", "-", stats.nodes, ms
                    ),
                    Err(e) => println!("{:>5} {:>8} {e}", n, "error"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
