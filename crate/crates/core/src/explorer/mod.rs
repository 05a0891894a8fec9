//! Bounded exhaustive exploration of thread interleavings and environment
//! time advances.
//!
//! Configurations are explored breadth-first. Each layer's successors are
//! computed independently (in parallel when enabled) and merged in frontier
//! order, so the result does not depend on scheduling.

pub mod canon;
pub mod elimination;
pub mod report;
pub mod simulate;
pub mod trace;

use std::collections::HashSet;

use indexmap::IndexSet;

use crate::exec::{map_ordered, Mode};
use crate::kernel::judge::bad_object;
use crate::kernel::state::State;
use crate::kernel::value::ObjId;
use crate::lang::eval::EvalError;
use crate::lang::model::{InstrKind, Model};
use crate::program::{
    at_boundary, env_moves, frozen_deadline, frozen_finding, initial_config, is_terminal, leading_assumes_hold, point,
    static_warnings, thread_step, Config, Finding, FindingKind, Label, Outcome, Point, StepOpts, StepRec,
};
use canon::{canonicalize, shift};
use report::{FindingRecord, Report, Stats, Verdict};
use trace::{compress, TraceStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    /// Largest single time advance.
    pub max_dt: i64,
    /// Environment moves composed before one atomic block.
    pub env_moves: u32,
    pub max_configs: u64,
    pub loop_bound: u64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_dt: 4,
            env_moves: 8,
            max_configs: 2_000_000,
            loop_bound: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    pub bounds: Bounds,
    pub mode: Mode,
    /// Keep the configurations in which a thread enters an atomic block.
    pub record_entries: bool,
}

struct Node {
    parent: Option<usize>,
    /// Restores the absolute configuration from the canonical one.
    offset: i64,
    /// Transitions from the parent's absolute configuration.
    steps: Vec<TraceStep>,
}

pub struct Exploration {
    pub report: Report,
    /// Canonical configurations in discovery order.
    pub configs: IndexSet<Config>,
    /// Canonical configurations at atomic-block entry, if recorded.
    pub entries: IndexSet<Config>,
    nodes: Vec<Node>,
}

impl Exploration {
    /// Transitions from the initial configuration to configuration `idx`.
    pub fn trace_to(&self, idx: usize) -> Vec<TraceStep> {
        let mut chain = Vec::new();
        let mut at = Some(idx);
        while let Some(i) = at {
            chain.push(i);
            at = self.nodes[i].parent;
        }
        chain
            .iter()
            .rev()
            .flat_map(|&i| self.nodes[i].steps.iter().cloned())
            .collect()
    }

    /// Configuration `idx` with absolute times.
    pub fn absolute(&self, m: &Model, idx: usize) -> Config {
        shift(m, &self.configs[idx], self.nodes[idx].offset)
    }

    pub fn terminal_indices<'a>(&'a self, m: &'a Model) -> impl Iterator<Item = usize> + 'a {
        (0..self.configs.len()).filter(move |&i| is_terminal(m, &self.configs[i]))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExploreError {
    #[error("evaluation failed during exploration: {0}")]
    Eval(#[from] EvalError),
}

struct Succ {
    cfg: Config,
    steps: Vec<TraceStep>,
}

struct Found {
    finding: Finding,
    steps: Vec<TraceStep>,
}

#[derive(Default)]
struct Expansion {
    succs: Vec<Succ>,
    found: Vec<Found>,
    pruned: u64,
    env_moves: u64,
    entries: Vec<Config>,
}

fn env_step(delta: i64, post: State) -> StepRec {
    StepRec {
        actor: ObjId::ENV,
        label: Label::Env { delta },
        post,
    }
}

/// States reachable from `c.state` by up to `env_moves` time advances,
/// with the transitions leading to each. Advances after which thread
/// `ti`'s upcoming atomic block cannot start are cut there.
fn env_closure(
    m: &Model,
    c: &Config,
    ti: usize,
    opts: &Options,
    ex: &mut Expansion,
) -> Result<Vec<(State, Vec<StepRec>)>, EvalError> {
    let mut out = vec![(c.state.clone(), Vec::new())];
    let mut seen: HashSet<State> = HashSet::new();
    seen.insert(c.state.clone());
    let mut frontier = vec![0usize];
    for _ in 0..opts.bounds.env_moves {
        let mut next = Vec::new();
        for idx in frontier {
            let base = out[idx].0.clone();
            for (d, post) in env_moves(m, &base, opts.bounds.max_dt)? {
                ex.env_moves += 1;
                if !seen.insert(post.clone()) {
                    continue;
                }
                let mut steps = out[idx].1.clone();
                steps.push(env_step(d, post.clone()));
                if let Some(v) = bad_object(m, &post)? {
                    let culprit = v.describe(m);
                    ex.found.push(Found {
                        finding: Finding {
                            kind: FindingKind::InvariantViolation,
                            message: format!("invariant broken by the passage of time: {culprit}"),
                            culprit,
                        },
                        steps: compress(m, &c.state, &steps),
                    });
                    continue;
                }
                if !leading_assumes_hold(m, c, ti, &post)? {
                    ex.pruned += 1;
                    continue;
                }
                if let Some(d) = frozen_deadline(m, &post) {
                    ex.found.push(Found {
                        finding: frozen_finding(m, d, &post),
                        steps: compress(m, &c.state, &steps),
                    });
                    continue;
                }
                out.push((post, steps));
                next.push(out.len() - 1);
            }
        }
        frontier = next;
    }
    Ok(out)
}

fn expand(m: &Model, c: &Config, opts: &Options) -> Result<Expansion, EvalError> {
    let mut ex = Expansion::default();
    let step_opts = StepOpts {
        loop_bound: opts.bounds.loop_bound,
    };
    for (ti, p) in m.programs.iter().enumerate() {
        let at_atomic = match point(p, &c.threads[ti]) {
            Point::Done => continue,
            Point::Instr(pc) => matches!(p.instrs[pc].kind, InstrKind::Atomic(_)),
            Point::Exit => false,
        };
        let starts = if at_boundary(m, c, ti) {
            env_closure(m, c, ti, opts, &mut ex)?
        } else {
            vec![(c.state.clone(), Vec::new())]
        };
        for (s, mut steps) in starts {
            let cfg = Config {
                state: s,
                threads: c.threads.clone(),
            };
            let outcome = thread_step(m, &cfg, ti, step_opts)?;
            if opts.record_entries && at_atomic && outcome != Outcome::Pruned {
                ex.entries.push(cfg);
            }
            match outcome {
                Outcome::Next { cfg: next, steps: more } => {
                    steps.extend(more);
                    let trace = compress(m, &c.state, &steps);
                    match frozen_deadline(m, &next.state) {
                        Some(d) => ex.found.push(Found {
                            finding: frozen_finding(m, d, &next.state),
                            steps: trace,
                        }),
                        None => ex.succs.push(Succ { cfg: next, steps: trace }),
                    }
                }
                Outcome::Found { finding, steps: more } => {
                    steps.extend(more);
                    ex.found.push(Found {
                        finding,
                        steps: compress(m, &c.state, &steps),
                    });
                }
                Outcome::Pruned => ex.pruned += 1,
            }
        }
    }
    if ex.succs.is_empty() && ex.found.is_empty() && !is_terminal(m, c) {
        let pending: Vec<String> = m
            .programs
            .iter()
            .zip(&c.threads)
            .filter_map(|(p, t)| match point(p, t) {
                Point::Instr(pc) => Some(format!("{} line {}", p.name, p.instrs[pc].line)),
                _ => None,
            })
            .collect();
        let at = pending.join(", ");
        ex.found.push(Found {
            finding: Finding {
                kind: FindingKind::VacuousAssume,
                message: format!("every continuation is cut by an assumption ({at})"),
                culprit: at,
            },
            steps: Vec::new(),
        });
    }
    Ok(ex)
}

/// Explores all configurations reachable from the model's initial one.
pub fn explore(m: &Model, opts: &Options) -> Result<Exploration, ExploreError> {
    let init = initial_config(m);
    let mut configs: IndexSet<Config> = IndexSet::new();
    let mut entries: IndexSet<Config> = IndexSet::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut findings: Vec<FindingRecord> = Vec::new();
    let mut seen_findings: HashSet<(FindingKind, String)> = HashSet::new();
    let mut stats = Stats {
        max_t: m.now(&init.state),
        ..Stats::default()
    };
    let mut bound_hit = None;
    let warnings = static_warnings(m);

    let (canon, offset) = canonicalize(m, &init);
    configs.insert(canon);
    nodes.push(Node {
        parent: None,
        offset,
        steps: Vec::new(),
    });
    if let Some(v) = bad_object(m, &init.state)? {
        let culprit = v.describe(m);
        findings.push(FindingRecord {
            finding: Finding {
                kind: FindingKind::InvariantViolation,
                message: format!("initial state is not good: {culprit}"),
                culprit,
            },
            trace: Vec::new(),
        });
    } else if let Some(d) = frozen_deadline(m, &init.state) {
        findings.push(FindingRecord {
            finding: frozen_finding(m, d, &init.state),
            trace: Vec::new(),
        });
    }
    let mut frontier: Vec<usize> = if findings.is_empty() { vec![0] } else { Vec::new() };

    let mut exploration = Exploration {
        report: Report {
            verdict: Verdict::Pass,
            findings: Vec::new(),
            warnings: Vec::new(),
            stats,
            bound_hit: None,
        },
        configs,
        entries: IndexSet::new(),
        nodes,
    };

    'layers: while !frontier.is_empty() {
        let abs: Vec<Config> = frontier.iter().map(|&i| exploration.absolute(m, i)).collect();
        let expansions = map_ordered(opts.mode, &abs, |c| expand(m, c, opts));
        let mut next = Vec::new();
        for (k, ex) in expansions.into_iter().enumerate() {
            let ex = ex?;
            let node = frontier[k];
            stats.pruned += ex.pruned;
            stats.env_moves += ex.env_moves;
            for f in ex.found {
                let key = (f.finding.kind, f.finding.culprit.clone());
                if seen_findings.insert(key) {
                    let mut trace = exploration.trace_to(node);
                    trace.extend(f.steps);
                    findings.push(FindingRecord {
                        finding: f.finding,
                        trace,
                    });
                }
            }
            for e in ex.entries {
                entries.insert(canonicalize(m, &e).0);
            }
            for s in ex.succs {
                stats.max_t = stats.max_t.max(m.now(&s.cfg.state));
                let (canon, offset) = canonicalize(m, &s.cfg);
                let (idx, new) = exploration.configs.insert_full(canon);
                if !new {
                    continue;
                }
                exploration.nodes.push(Node {
                    parent: Some(node),
                    offset,
                    steps: s.steps,
                });
                next.push(idx);
                if exploration.configs.len() as u64 >= opts.bounds.max_configs {
                    bound_hit = Some(format!("max-configs {}", opts.bounds.max_configs));
                    break 'layers;
                }
            }
        }
        frontier = next;
    }

    stats.configs = exploration.configs.len() as u64;
    let verdict = if !findings.is_empty() {
        Verdict::Fail
    } else if bound_hit.is_some() {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    exploration.report = Report {
        verdict,
        findings,
        warnings,
        stats,
        bound_hit,
    };
    exploration.entries = entries;
    Ok(exploration)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_model;

    #[test]
    fn empty_program_passes_with_one_config() {
        let m = parse_model("").unwrap();
        let x = explore(&m, &Options::default()).unwrap();
        assert_eq!(x.report.verdict, Verdict::Pass);
        assert_eq!(x.configs.len(), 1);
    }

    #[test]
    fn unrefreshed_deadline_freezes_time() {
        let src = "object d : Deadline { owner = w; }\n\
                   thread w { deadline_new(d, 6); atomic { assume true; } deadline_destroy(d); }";
        let m = parse_model(src).unwrap();
        let x = explore(&m, &Options::default()).unwrap();
        assert_eq!(x.report.verdict, Verdict::Fail);
        let kinds: Vec<FindingKind> = x.report.findings.iter().map(|f| f.finding.kind).collect();
        assert!(kinds.contains(&FindingKind::TimeFrozen), "{kinds:?}");
        for f in &x.report.findings {
            trace::replay(&m, &m.initial_state(), &f.trace, f.may_end_illegal()).unwrap();
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let src = "object d : Deadline { owner = w; }\n\
                   thread w { deadline_new(d, 9); loop 3 invariant true { atomic { deadline_reset(d, 9); } } deadline_destroy(d); }";
        let m = parse_model(src).unwrap();
        let mut o = Options::default();
        let a = explore(&m, &o).unwrap();
        o.mode = Mode::Sequential;
        let b = explore(&m, &o).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.configs, b.configs);
    }
}
