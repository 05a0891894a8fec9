//! Exploration reports, rendered as human text or as a JSON document
//! (schema `chronoverify-report/1`).

use serde::Serialize;

use super::trace::{Change, Field, TraceStep};
use crate::lang::model::Model;
use crate::program::{Finding, FindingKind, Label};

pub const SCHEMA: &str = "chronoverify-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FindingRecord {
    pub finding: Finding,
    /// Transitions from the initial state up to and including the
    /// offending one, if the finding is about a transition.
    pub trace: Vec<TraceStep>,
}

impl FindingRecord {
    /// Whether the final transition of the trace may be the offending,
    /// illegal one.
    pub fn may_end_illegal(&self) -> bool {
        matches!(
            self.finding.kind,
            FindingKind::IllegalTransition | FindingKind::DeadlineExpired | FindingKind::InvariantViolation
        ) && self.trace.last().is_some_and(|s| matches!(s.label, Label::Instr { .. }))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub configs: u64,
    pub env_moves: u64,
    pub pruned: u64,
    pub max_t: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub verdict: Verdict,
    pub findings: Vec<FindingRecord>,
    pub warnings: Vec<String>,
    pub stats: Stats,
    /// Why the verdict is inconclusive, if it is.
    pub bound_hit: Option<String>,
}

#[derive(Serialize)]
pub(crate) struct ChangeJson {
    pub object: String,
    pub field: String,
    pub from: String,
    pub to: String,
}

#[derive(Serialize)]
pub(crate) struct StepJson {
    actor: String,
    label: String,
    changes: Vec<ChangeJson>,
}

#[derive(Serialize)]
struct FindingJson<'a> {
    kind: FindingKind,
    culprit: &'a str,
    message: &'a str,
    trace: Vec<StepJson>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    schema: &'static str,
    verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<&'a str>,
    findings: Vec<FindingJson<'a>>,
    warnings: &'a [String],
    stats: Stats,
}

pub fn label_text(m: &Model, label: Label) -> String {
    match label {
        Label::Env { delta } => format!("environment: time advances by {delta}"),
        Label::Instr { thread, pc, part } => {
            let p = m.program_of(thread).expect("label names a thread with a program");
            let name = &p.name;
            match p.instrs.get(pc as usize) {
                Some(ins) if part == 0 => format!("{name} line {}: {}", ins.line, ins.text),
                Some(ins) => format!("{name} line {} (part {}): {}", ins.line, part + 1, ins.text),
                None => format!("{name}: exit"),
            }
        }
    }
}

pub(crate) fn change_json(m: &Model, c: &Change) -> ChangeJson {
    let (object, field) = match c.field {
        Field::Slot(i) => {
            let (o, f) = m.slot_owner(i);
            let fd = &m.type_decl(o).expect("slot belongs to a typed object").fields[f];
            (m.name_of(o).to_string(), fd.name.clone())
        }
        Field::Closed(o) => (m.name_of(o).to_string(), "closed".to_string()),
        Field::Owner(o) => (m.name_of(o).to_string(), "owner".to_string()),
    };
    ChangeJson {
        object,
        field,
        from: m.show(c.from),
        to: m.show(c.to),
    }
}

pub(crate) fn step_json(m: &Model, s: &TraceStep) -> StepJson {
    StepJson {
        actor: m.name_of(s.actor).to_string(),
        label: label_text(m, s.label),
        changes: s.changes.iter().map(|c| change_json(m, c)).collect(),
    }
}

impl Report {
    pub fn to_structured(&self, m: &Model) -> String {
        let doc = ReportJson {
            schema: SCHEMA,
            verdict: self.verdict,
            bound: self.bound_hit.as_deref(),
            findings: self
                .findings
                .iter()
                .map(|f| FindingJson {
                    kind: f.finding.kind,
                    culprit: &f.finding.culprit,
                    message: &f.finding.message,
                    trace: f.trace.iter().map(|s| step_json(m, s)).collect(),
                })
                .collect(),
            warnings: &self.warnings,
            stats: self.stats,
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn to_human(&self, m: &Model) -> String {
        let mut out = format!("verdict: {}\n", self.verdict.as_str());
        if let Some(b) = &self.bound_hit {
            out += &format!("bound reached: {b}\n");
        }
        let s = self.stats;
        out += &format!(
            "explored {} configurations, {} environment moves, {} branches pruned, max T {}\n",
            s.configs, s.env_moves, s.pruned, s.max_t
        );
        for w in &self.warnings {
            out += &format!("warning: {w}\n");
        }
        for (i, f) in self.findings.iter().enumerate() {
            out += &format!("\nfinding {}: {} at {}\n  {}\n", i + 1, f.finding.kind.as_str(), f.finding.culprit, f.finding.message);
            out += &format!("  trace ({} transitions):\n", f.trace.len());
            out += &trace_text(m, &f.trace, "    ");
        }
        out
    }
}

/// One line per step, followed by an indented line of field changes.
pub fn trace_text(m: &Model, trace: &[TraceStep], indent: &str) -> String {
    let mut out = String::new();
    for step in trace {
        let changes: Vec<String> = step
            .changes
            .iter()
            .map(|c| {
                let c = change_json(m, c);
                format!("{}.{}: {} -> {}", c.object, c.field, c.from, c.to)
            })
            .collect();
        out += &format!("{indent}[{}] {}\n", m.name_of(step.actor), label_text(m, step.label));
        if !changes.is_empty() {
            out += &format!("{indent}    {}\n", changes.join(", "));
        }
    }
    out
}
