//! Seeded random walks over the same successor relation the explorer uses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{FindingRecord, Report, Stats, Verdict};
use super::trace::TraceStep;
use super::{expand, ExploreError, Options};
use crate::kernel::judge::bad_object;
use crate::kernel::state::State;
use crate::lang::model::Model;
use crate::program::{initial_config, is_terminal, static_warnings, Finding, FindingKind};

#[derive(Debug, Clone)]
pub struct Simulation {
    pub initial: State,
    pub trace: Vec<TraceStep>,
    pub report: Report,
}

/// Walks at most `steps` transitions, choosing uniformly among the
/// enabled successors (including those that end in a finding). Stops at
/// termination, at a dead end, or at the first finding.
pub fn simulate(m: &Model, seed: u64, steps: usize, opts: &Options) -> Result<Simulation, ExploreError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = initial_config(m);
    let initial = c.state.clone();
    let mut trace: Vec<TraceStep> = Vec::new();
    let mut findings = Vec::new();
    let mut stats = Stats {
        max_t: m.now(&c.state),
        ..Stats::default()
    };
    if let Some(v) = bad_object(m, &c.state)? {
        let culprit = v.describe(m);
        findings.push(FindingRecord {
            finding: Finding {
                kind: FindingKind::InvariantViolation,
                message: format!("initial state is not good: {culprit}"),
                culprit,
            },
            trace: Vec::new(),
        });
    }
    while findings.is_empty() && trace.len() < steps && !is_terminal(m, &c) {
        let mut ex = expand(m, &c, opts)?;
        stats.configs += 1;
        stats.env_moves += ex.env_moves;
        stats.pruned += ex.pruned;
        let n = ex.succs.len() + ex.found.len();
        if n == 0 {
            break;
        }
        let pick = rng.gen_range(0..n);
        if pick < ex.succs.len() {
            let s = ex.succs.swap_remove(pick);
            trace.extend(s.steps);
            c = s.cfg;
            stats.max_t = stats.max_t.max(m.now(&c.state));
        } else {
            let f = ex.found.swap_remove(pick - ex.succs.len());
            trace.extend(f.steps);
            findings.push(FindingRecord {
                finding: f.finding,
                trace: trace.clone(),
            });
        }
    }
    if findings.is_empty() {
        trace.truncate(steps);
    }
    let verdict = if findings.is_empty() { Verdict::Pass } else { Verdict::Fail };
    Ok(Simulation {
        initial,
        trace,
        report: Report {
            verdict,
            findings,
            warnings: static_warnings(m),
            stats,
            bound_hit: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explorer::trace::replay;
    use crate::lang::parse_model;

    const SRC: &str = "object d : Deadline { owner = w; }\n\
        thread w { deadline_new(d, 9); loop 20 invariant true { atomic { deadline_reset(d, 9); } } deadline_destroy(d); }";

    #[test]
    fn same_seed_same_walk() {
        let m = parse_model(SRC).unwrap();
        let a = simulate(&m, 7, 40, &Options::default()).unwrap();
        let b = simulate(&m, 7, 40, &Options::default()).unwrap();
        assert_eq!(a.trace, b.trace);
        assert!(a.trace.len() <= 40);
        replay(&m, &a.initial, &a.trace, false).unwrap();
    }
}
