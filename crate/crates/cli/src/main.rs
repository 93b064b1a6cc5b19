use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use convexsem::check::{self, Suite};
use convexsem::lexicon::World;
use convexsem::phrase::{evaluate_phrase, parse_point, EvalReport, PhraseError};
use convexsem::pregroup::{reduce, Grammar, PregroupError, PregroupType};
use convexsem::relsem::Relation;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Evaluate phrases as convex relations over conceptual spaces.
#[derive(Parser)]
#[command(name = "convexsem", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    All,
    Snakes,
    Spiders,
    Convexity,
    Golden,
}

#[derive(Subcommand)]
enum Cmd {
    /// Reduce a comma separated list of types, e.g. "n, n^r s n^l, n".
    Reduce {
        types: String,
        #[arg(long, default_value = "s")]
        target: String,
        /// Take the atomic types from this world instead of {n, s}.
        #[arg(long)]
        world: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Evaluate a phrase in a world.
    Eval {
        phrase: String,
        #[arg(long, default_value = "food")]
        world: String,
        /// Target type; by default `s`, then `n`.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Test whether a point lies in a word, property or phrase meaning.
    /// Factors of the point are separated by `|`.
    Member {
        #[arg(long, default_value = "food")]
        world: String,
        /// A property name, a word, a phrase, or an expression over `n`.
        #[arg(long)]
        relation: String,
        point: String,
    },
    /// Draw members of a phrase meaning that has a path factor.
    Sample {
        phrase: String,
        #[arg(long, default_value = "robot")]
        world: String,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Run the built-in law and golden-sentence checks.
    Check {
        #[arg(long, default_value = "food")]
        world: String,
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Print a world: a summary, or its canonical document.
    World {
        #[arg(default_value = "food")]
        world: String,
        #[arg(long)]
        document: bool,
    },
}

/// An exit status with its message: 1 for input errors, 2 when there is no
/// reduction or no member to work with.
struct Failure(u8, String);

impl From<PhraseError> for Failure {
    fn from(e: PhraseError) -> Self {
        let code = match e {
            PhraseError::NoReduction { .. } => 2,
            _ => 1,
        };
        Failure(code, e.to_string())
    }
}

impl From<PregroupError> for Failure {
    fn from(e: PregroupError) -> Self {
        let code = if matches!(e, PregroupError::NoReduction { .. }) { 2 } else { 1 };
        Failure(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// A built-in name, a file path, or a file found in one of the directories
/// listed in `CONVEXSEM_WORLD_PATH` (as `<name>` or `<name>.world`).
fn load_world(spec: &str) -> Result<World, Failure> {
    if let Some(text) = World::builtin_source(spec) {
        return World::load(text).map_err(|e| Failure(1, format!("world `{spec}`: {e}")));
    }
    let mut candidates = vec![PathBuf::from(spec)];
    if let Some(dirs) = std::env::var_os("CONVEXSEM_WORLD_PATH") {
        for d in std::env::split_paths(&dirs) {
            candidates.push(d.join(spec));
            candidates.push(d.join(format!("{spec}.world")));
        }
    }
    let path = candidates
        .iter()
        .find(|p| p.is_file())
        .ok_or_else(|| Failure(1, format!("no world named `{spec}` (built-ins: food, robot)")))?;
    read_world(path)
}

fn read_world(path: &Path) -> Result<World, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure(1, format!("{}: {e}", path.display())))?;
    World::load(&text).map_err(|e| Failure(1, format!("{}: {e}", path.display())))
}

fn run(cmd: Cmd) -> Result<u8, Failure> {
    match cmd {
        Cmd::Reduce { types, target, world, format } => {
            let grammar = match world {
                Some(w) => load_world(&w)?.grammar,
                None => Grammar::default(),
            };
            let seq = grammar.parse_sequence(&types)?;
            let target: PregroupType = grammar.parse_type(&target)?;
            let w = reduce(&seq, &target)?;
            match format {
                Format::Json => println!("{}", json(&w)),
                Format::Text => println!("{w}"),
            }
            Ok(0)
        }
        Cmd::Eval { phrase, world, target, format } => {
            let world = load_world(&world)?;
            let target = target.map(|t| world.grammar.parse_type(&t)).transpose()?;
            let ev = evaluate_phrase(&world, &phrase, target.as_ref())?;
            let report = EvalReport::new(&world, &ev)?;
            match format {
                Format::Json => println!("{}", json(&report)),
                Format::Text => print!("{}", report.to_text()),
            }
            Ok(0)
        }
        Cmd::Member { world, relation, point } => {
            let world = load_world(&world)?;
            let rel = named_relation(&world, &relation)?;
            let p = parse_point(&rel.domains(), &point)?;
            if rel.contains(&p).map_err(PhraseError::from)? {
                println!("yes");
                return Ok(0);
            }
            let live = rel.pruned().map_err(PhraseError::from)?;
            if live.cells().is_empty() {
                println!("no: the relation is empty");
            } else {
                println!("no");
                for (k, c) in live.cells().iter().enumerate() {
                    match c.violated_row(&p).map_err(PhraseError::from)? {
                        Some(row) => println!("  cell {k} violates {row}"),
                        None => println!("  cell {k} excludes the point"),
                    }
                }
            }
            Ok(0)
        }
        Cmd::Sample { phrase, world, n, seed, format } => {
            let world = load_world(&world)?;
            let rel = evaluate_phrase(&world, &phrase, None)?.relation.pruned().map_err(PhraseError::from)?;
            let domains = rel.domains();
            if !domains.iter().any(|d| d.is_path()) {
                return Err(Failure(1, format!("`{phrase}` has no path factor to sample")));
            }
            if rel.cells().is_empty() {
                return Err(Failure(2, format!("`{phrase}` has an empty meaning")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut points = Vec::with_capacity(n);
            for _ in 0..n {
                let p = rel
                    .sample(&mut rng)
                    .map_err(PhraseError::from)?
                    .ok_or_else(|| Failure(2, format!("`{phrase}` has an empty meaning")))?;
                points.push(p);
            }
            match format {
                Format::Json => println!("{}", json(&points)),
                Format::Text => {
                    for p in &points {
                        println!("{}", p.display(&domains));
                    }
                }
            }
            Ok(0)
        }
        Cmd::Check { world, suite, seed, format } => {
            let world = load_world(&world)?;
            let suite = match suite {
                SuiteArg::All => Suite::All,
                SuiteArg::Snakes => Suite::Snakes,
                SuiteArg::Spiders => Suite::Spiders,
                SuiteArg::Convexity => Suite::Convexity,
                SuiteArg::Golden => Suite::Golden,
            };
            let lines = check::run(&world, suite, seed)?;
            match format {
                Format::Json => println!("{}", json(&lines)),
                Format::Text => {
                    for l in &lines {
                        let mark = if l.passed { "pass" } else { "FAIL" };
                        println!("{mark}  {:<10} {:<40} {}", l.suite, l.name, l.detail);
                    }
                }
            }
            Ok(if lines.iter().all(|l| l.passed) { 0 } else { 1 })
        }
        Cmd::World { world, document } => {
            let world = load_world(&world)?;
            if document {
                print!("{}", world.serialize());
            } else {
                print!("{world}");
            }
            Ok(0)
        }
    }
}

/// A property, a single word, the meaning of a phrase, or failing those a
/// world expression over the noun space such as `banana & yellow`.
fn named_relation(world: &World, name: &str) -> Result<Relation, Failure> {
    if let Some(p) = world.property(name) {
        return Ok(p.clone());
    }
    if let Some(r) = world.lookup(name).and_then(|e| e.relation()) {
        return Ok(r.clone());
    }
    let phrase_err = match evaluate_phrase(world, name, None) {
        Ok(ev) => return Ok(ev.relation),
        Err(e) => Failure::from(e),
    };
    let n = world.grammar.parse_type("n")?;
    world.eval_expr(name, &n).map_err(|_| phrase_err)
}
