//! Traces as sequences of field deltas, and their replay check.

use crate::kernel::judge::is_legal_transition;
use crate::kernel::state::{State, Transition};
use crate::kernel::value::{ObjId, Value};
use crate::lang::model::Model;
use crate::program::{Label, StepRec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Slot(usize),
    Closed(ObjId),
    Owner(ObjId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Change {
    pub field: Field,
    pub from: Value,
    pub to: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceStep {
    pub actor: ObjId,
    pub label: Label,
    pub changes: Vec<Change>,
}

pub fn diff(m: &Model, pre: &State, post: &State) -> Vec<Change> {
    let mut out = Vec::new();
    for i in 0..m.n_slots() {
        if pre.slot(i) != post.slot(i) {
            out.push(Change {
                field: Field::Slot(i),
                from: pre.slot(i),
                to: post.slot(i),
            });
        }
    }
    for o in m.object_ids() {
        if pre.is_closed(o) != post.is_closed(o) {
            out.push(Change {
                field: Field::Closed(o),
                from: Value::Bool(pre.is_closed(o)),
                to: Value::Bool(post.is_closed(o)),
            });
        }
        if pre.owner(o) != post.owner(o) {
            out.push(Change {
                field: Field::Owner(o),
                from: Value::Ref(pre.owner(o)),
                to: Value::Ref(post.owner(o)),
            });
        }
    }
    out
}

pub fn apply(s: &mut State, changes: &[Change]) {
    for c in changes {
        match c.field {
            Field::Slot(i) => s.set_slot(i, c.to),
            Field::Closed(o) => s.set_closed(o, c.to.as_bool()),
            Field::Owner(o) => s.set_owner(o, c.to.as_ref()),
        }
    }
}

/// Converts recorded steps from `pre` into deltas.
pub fn compress(m: &Model, pre: &State, steps: &[StepRec]) -> Vec<TraceStep> {
    let mut cur = pre;
    let mut out = Vec::with_capacity(steps.len());
    for s in steps {
        out.push(TraceStep {
            actor: s.actor,
            label: s.label,
            changes: diff(m, cur, &s.post),
        });
        cur = &s.post;
    }
    out
}

/// Replays a trace from `initial`, checking that every transition is
/// legal and that time never decreases. When `last_may_fail` is set the
/// final transition is allowed (and expected) to be illegal.
pub fn replay(m: &Model, initial: &State, trace: &[TraceStep], last_may_fail: bool) -> Result<State, String> {
    let mut s = initial.clone();
    for (i, step) in trace.iter().enumerate() {
        let mut post = s.clone();
        for c in &step.changes {
            let now = match c.field {
                Field::Slot(k) => s.slot(k),
                Field::Closed(o) => Value::Bool(s.is_closed(o)),
                Field::Owner(o) => Value::Ref(s.owner(o)),
            };
            if now != c.from {
                return Err(format!("step {i}: recorded prior value does not match the replayed state"));
            }
        }
        apply(&mut post, &step.changes);
        if m.now(&post) < m.now(&s) {
            return Err(format!("step {i}: time moves backwards"));
        }
        let legal = is_legal_transition(m, Transition::new(&s, &post, step.actor))
            .map_err(|e| format!("step {i}: {e}"))?
            .is_legal();
        let is_last = i + 1 == trace.len();
        if !legal && !(is_last && last_may_fail) {
            return Err(format!("step {i}: transition is not legal"));
        }
        s = post;
    }
    Ok(s)
}
