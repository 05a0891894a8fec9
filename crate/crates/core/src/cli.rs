//! Command-line front end. Reports go to `--out` or standard output,
//! diagnostics to standard error.
//!
//! Exit status: 0 pass, 1 findings or inadmissible, 2 usage or parse
//! error, 3 inconclusive.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value as Json;

use crate::admissibility::{check_admissibility, AdmOptions, UniverseSpec, DEFAULT_CAP};
use crate::corpus::{fixture, run_corpus};
use crate::exec::Mode;
use crate::explorer::elimination::deadline_elimination_check;
use crate::explorer::report::{step_json, trace_text, Verdict};
use crate::explorer::simulate::simulate;
use crate::explorer::{explore, Bounds, Options};
use crate::lang::{parse_model, Model};

pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "chronoverify", version, about = "Bounded verification of timed object invariants")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and sort-check a model.
    Check { model: PathBuf },
    /// Explore every interleaving up to the bounds; on a pass, also compare
    /// the runs with and without Deadlines.
    Explore { model: PathBuf },
    /// Check one type for admissibility on a small enumerated universe.
    Admissible(AdmissibleArgs),
    /// Follow one seeded random run.
    Simulate {
        model: PathBuf,
        #[arg(long, default_value_t = 200)]
        steps: usize,
    },
    /// Run every bundled fixture against its expected outcome.
    Corpus,
}

#[derive(Debug, Args)]
pub struct AdmissibleArgs {
    pub model: PathBuf,
    #[arg(long = "type")]
    pub type_name: String,
    /// Objects that vary (comma separated); the rest keep their initial state.
    #[arg(long)]
    pub objects: Option<String>,
    /// Value range of an integer field, e.g. `boiler.level=28..32,68..72`.
    #[arg(long = "range")]
    pub ranges: Vec<String>,
    /// Candidate owners of an object, e.g. `boiler=ctrl|driver`.
    #[arg(long = "owners")]
    pub owners: Vec<String>,
    /// Most transition pairs to enumerate.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u64,
    /// Enumerate every prestate, not only time-shift representatives.
    #[arg(long)]
    pub no_shift: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Structured,
}

#[derive(Debug, Args)]
pub struct RunFlags {
    #[arg(long, global = true, default_value_t = 4)]
    pub max_dt: i64,
    #[arg(long, global = true, default_value_t = 2_000_000)]
    pub max_configs: u64,
    #[arg(long, global = true, default_value_t = 100)]
    pub loop_bound: u64,
    #[arg(long, global = true, default_value_t = 8)]
    pub env_moves: u32,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    pub format: Format,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Run on one thread even when built with parallelism.
    #[arg(long, global = true)]
    pub sequential: bool,
}

impl RunFlags {
    fn mode(&self) -> Mode {
        if self.sequential {
            Mode::Sequential
        } else {
            Mode::Parallel
        }
    }

    fn options(&self) -> Options {
        Options {
            bounds: Bounds {
                max_dt: self.max_dt,
                env_moves: self.env_moves,
                max_configs: self.max_configs,
                loop_bound: self.loop_bound,
            },
            mode: self.mode(),
            record_entries: false,
        }
    }
}

struct Failure(i32, String);

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure(EXIT_USAGE, msg.into())
    }
}

/// Reads a model file. A missing path that names a bundled fixture
/// (`boiler_deadline.tvk`, `mutants/no_reset.tvk`, ...) loads the fixture.
fn load(path: &Path) -> Result<Model, Failure> {
    let shown = path.display();
    let src = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            let bundled = path.to_str().and_then(|p| fixture(p.trim_start_matches("fixtures/")));
            match bundled {
                Some(f) => f.source.to_string(),
                None => return Err(Failure::usage(format!("cannot read {shown}: {e}"))),
            }
        }
    };
    parse_model(&src).map_err(|d| {
        let lines: Vec<String> = d.0.iter().map(|x| format!("{shown}:{x}")).collect();
        Failure::usage(lines.join("\n"))
    })
}

fn emit(flags: &RunFlags, text: &str) -> Result<(), Failure> {
    match &flags.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Appends `key` to a structured report.
fn with_key(doc: &str, key: &str, value: Json) -> String {
    let mut v: Json = serde_json::from_str(doc).expect("reports are JSON");
    v.as_object_mut().expect("reports are objects").insert(key.to_string(), value);
    let mut out = serde_json::to_string_pretty(&v).expect("JSON serializes");
    out.push('\n');
    out
}

fn run_command(cli: &Cli) -> Result<i32, Failure> {
    let flags = &cli.run;
    let structured = flags.format == Format::Structured;
    match &cli.command {
        Command::Check { model } => {
            let m = load(model)?;
            let threads = m.programs.len();
            let text = if structured {
                let doc = serde_json::json!({
                    "schema": crate::explorer::report::SCHEMA,
                    "verdict": "pass",
                    "types": m.types.len(),
                    "objects": m.objects.len(),
                    "threads": threads,
                    "shift_invariant": m.dims.shift_invariant,
                });
                format!("{}\n", serde_json::to_string_pretty(&doc).expect("JSON serializes"))
            } else {
                format!(
                    "{}: ok ({} types, {} objects, {} threads)\n",
                    model.display(),
                    m.types.len(),
                    m.objects.len(),
                    threads
                )
            };
            emit(flags, &text)?;
            Ok(0)
        }
        Command::Explore { model } => {
            let m = load(model)?;
            let opts = flags.options();
            let x = explore(&m, &opts).map_err(|e| Failure::usage(e.to_string()))?;
            let mut code = x.report.verdict.exit_code();
            let elim = if x.report.verdict == Verdict::Pass && m.deadlines().next().is_some() {
                let r = deadline_elimination_check(&m, &opts).map_err(|e| Failure::usage(e.to_string()))?;
                if !r.equal() {
                    code = 1;
                }
                Some(r)
            } else {
                None
            };
            let text = if structured {
                let doc = x.report.to_structured(&m);
                match &elim {
                    Some(r) => with_key(
                        &doc,
                        "deadline_elimination",
                        serde_json::json!({
                            "equal": r.equal(),
                            "with_deadlines": r.with_deadlines,
                            "without_deadlines": r.without_deadlines,
                            "only_with": r.only_with,
                            "only_without": r.only_without,
                        }),
                    ),
                    None => doc,
                }
            } else {
                let mut t = x.report.to_human(&m);
                if let Some(r) = &elim {
                    t += &format!(
                        "deadline elimination: {} projected states with Deadlines, {} without, {}\n",
                        r.with_deadlines,
                        r.without_deadlines,
                        if r.equal() { "identical" } else { "DIFFERENT" }
                    );
                    for s in r.only_with.iter().take(5) {
                        t += &format!("  only with: {s}\n");
                    }
                    for s in r.only_without.iter().take(5) {
                        t += &format!("  only without: {s}\n");
                    }
                }
                t
            };
            emit(flags, &text)?;
            Ok(code)
        }
        Command::Admissible(a) => {
            let m = load(&a.model)?;
            let mut u = UniverseSpec::default();
            if let Some(o) = &a.objects {
                u.set_objects(o);
            }
            let bad = |e: crate::admissibility::AdmError| Failure::usage(format!("error[{}]: {e}", e.code()));
            for r in &a.ranges {
                u.add_range(r).map_err(bad)?;
            }
            for o in &a.owners {
                u.add_owners(o).map_err(bad)?;
            }
            let opts = AdmOptions {
                mode: flags.mode(),
                cap: a.cap,
                shift: !a.no_shift,
            };
            let v = check_admissibility(&m, &a.type_name, &u, &opts).map_err(bad)?;
            let text = if structured { v.to_structured(&m) } else { v.to_human(&m) };
            emit(flags, &text)?;
            Ok(v.result.exit_code())
        }
        Command::Simulate { model, steps } => {
            let m = load(model)?;
            let sim = simulate(&m, flags.seed, *steps, &flags.options()).map_err(|e| Failure::usage(e.to_string()))?;
            let text = if structured {
                let walk: Vec<_> = sim.trace.iter().map(|s| step_json(&m, s)).collect();
                let doc = sim.report.to_structured(&m);
                let doc = with_key(&doc, "seed", Json::from(flags.seed));
                with_key(&doc, "walk", serde_json::to_value(walk).expect("JSON serializes"))
            } else {
                format!(
                    "{}\nwalk with seed {} ({} transitions):\n{}",
                    sim.report.to_human(&m),
                    flags.seed,
                    sim.trace.len(),
                    trace_text(&m, &sim.trace, "  ")
                )
            };
            emit(flags, &text)?;
            Ok(sim.report.verdict.exit_code())
        }
        Command::Corpus => {
            let adm = AdmOptions {
                mode: flags.mode(),
                ..AdmOptions::default()
            };
            let lines = run_corpus(&flags.options(), &adm).map_err(|e| Failure::usage(e.to_string()))?;
            let all_ok = lines.iter().all(|l| l.ok);
            let text = if structured {
                let items: Vec<Json> = lines
                    .iter()
                    .map(|l| serde_json::json!({"name": l.name, "expected": l.expected, "got": l.got, "ok": l.ok}))
                    .collect();
                let doc = serde_json::json!({
                    "schema": crate::explorer::report::SCHEMA,
                    "verdict": if all_ok { "pass" } else { "fail" },
                    "corpus": items,
                });
                format!("{}\n", serde_json::to_string_pretty(&doc).expect("JSON serializes"))
            } else {
                lines
                    .iter()
                    .map(|l| {
                        let mark = if l.ok { "ok  " } else { "DRIFT" };
                        format!("{mark} {:<40} expected {:<26} got {}\n", l.name, l.expected, l.got)
                    })
                    .collect()
            };
            emit(flags, &text)?;
            Ok(if all_ok { 0 } else { 1 })
        }
    }
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_command(&cli) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            eprintln!("{msg}");
            code
        }
    }
}
